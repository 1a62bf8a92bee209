// Copyright 2026 The Crosstab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "crosstab/core/error.hpp"
#include "crosstab/nn/tensor.hpp"

namespace crosstab {

// Multi-positive InfoNCE over cosine similarity. `latents` stacks the views
// as (views * rows) x dim with row index view * rows + i. Each vector is an
// anchor whose positives are the other views of the same row and whose
// denominator runs over every other vector in the batch. Returns the mean
// over anchors and positives; writes d loss / d latents when `grad` is set.
template <typename T>
double contrastive_loss(const nn::Mat<T>& latents, std::size_t rows, std::size_t views,
                        double temperature, nn::Mat<T>* grad = nullptr) {
  if (rows < 2 || views < 2) throw Error("contrastive loss needs at least 2 rows and 2 views");
  if (!(temperature > 0.0)) throw ConfigError("temperature must be positive");
  const auto n = static_cast<nn::Index>(rows * views);
  if (latents.rows() != n) throw Error("latent count does not match rows x views");

  using MatX = nn::Mat<double>;
  const MatX v = latents.template cast<double>();
  Eigen::VectorXd norms = v.rowwise().norm();
  if (norms.minCoeff() <= 0.0) throw Error("cosine similarity undefined for a zero vector");
  const MatX u = norms.cwiseInverse().asDiagonal() * v;
  const MatX s = (u * u.transpose()) / temperature;

  MatX ds = MatX::Zero(n, n);
  const double positives = static_cast<double>(views - 1);
  double total = 0.0;
  for (nn::Index a = 0; a < n; ++a) {
    const auto row = static_cast<std::size_t>(a) % rows;
    double peak = -std::numeric_limits<double>::infinity();
    for (nn::Index b = 0; b < n; ++b) {
      if (b != a) peak = std::max(peak, s(a, b));
    }
    double z = 0.0;
    for (nn::Index b = 0; b < n; ++b) {
      if (b != a) z += std::exp(s(a, b) - peak);
    }
    const double log_z = peak + std::log(z);
    for (std::size_t k = 0; k < views; ++k) {
      const auto p = static_cast<nn::Index>(k * rows + row);
      if (p == a) continue;
      total += log_z - s(a, p);
      ds(a, p) -= 1.0 / positives;
    }
    for (nn::Index b = 0; b < n; ++b) {
      if (b != a) ds(a, b) += std::exp(s(a, b) - log_z);
    }
  }
  const double anchors = static_cast<double>(n);
  const double loss = total / (anchors * positives);
  if (grad) {
    ds /= anchors;
    const MatX du = ((ds + ds.transpose()) * u) / temperature;
    MatX dv(n, v.cols());
    for (nn::Index a = 0; a < n; ++a) {
      dv.row(a) = (du.row(a) - u.row(a) * u.row(a).dot(du.row(a))) / norms(a);
    }
    *grad = dv.template cast<T>();
  }
  return loss;
}

// Hinge on latent distances with a margin set by the gap in one numeric
// column: max(|vi - vj| - |vi - vk| + m, 0), m = (|xi - xk| - |xi - xj|) / range.
// Requires |xi - xk| >= |xi - xj|.
struct MagnitudeTriplet {
  double anchor, near, far;
};

inline double magnitude_margin(const MagnitudeTriplet& x, double range) {
  if (!(range > 0.0)) throw Error("magnitude margin needs a positive column range");
  const double gap_far = std::abs(x.anchor - x.far);
  const double gap_near = std::abs(x.anchor - x.near);
  if (gap_far < gap_near) throw Error("triplet out of order: far value is closer than near value");
  return (gap_far - gap_near) / range;
}

inline double magnitude_hinge(double dist_near, double dist_far, double margin) {
  return std::max(dist_near - dist_far + margin, 0.0);
}

template <typename T>
double magnitude_loss(const nn::RowVector<T>& vi, const nn::RowVector<T>& vj,
                      const nn::RowVector<T>& vk, const MagnitudeTriplet& x, double range) {
  const double dij = static_cast<double>((vi - vj).norm());
  const double dik = static_cast<double>((vi - vk).norm());
  return magnitude_hinge(dij, dik, magnitude_margin(x, range));
}

struct TripletIndex {
  std::size_t anchor, near, far;
  double margin;
};

// Mean hinge over triplets of rows of `latents`; accumulates into `grad`.
template <typename T>
double magnitude_loss_batch(const nn::Mat<T>& latents, const std::vector<TripletIndex>& triplets,
                            nn::Mat<T>* grad = nullptr) {
  if (triplets.empty()) return 0.0;
  const double scale = 1.0 / static_cast<double>(triplets.size());
  double total = 0.0;
  for (const auto& t : triplets) {
    const auto i = static_cast<nn::Index>(t.anchor);
    const auto j = static_cast<nn::Index>(t.near);
    const auto k = static_cast<nn::Index>(t.far);
    const nn::RowVector<T> dj = latents.row(i) - latents.row(j);
    const nn::RowVector<T> dk = latents.row(i) - latents.row(k);
    const double nj = static_cast<double>(dj.norm());
    const double nk = static_cast<double>(dk.norm());
    const double h = nj - nk + t.margin;
    if (h <= 0.0) continue;
    total += h;
    if (!grad) continue;
    if (nj > 0.0) {
      const nn::RowVector<T> g = dj * static_cast<T>(scale / nj);
      grad->row(i) += g;
      grad->row(j) -= g;
    }
    if (nk > 0.0) {
      const nn::RowVector<T> g = dk * static_cast<T>(scale / nk);
      grad->row(i) -= g;
      grad->row(k) += g;
    }
  }
  return total * scale;
}

}  // namespace crosstab
