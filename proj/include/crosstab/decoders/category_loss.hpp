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
#include <span>
#include <string>

#include "crosstab/core/error.hpp"
#include "crosstab/nn/tensor.hpp"

namespace crosstab {

enum class CategoryLossMode {
  literal,   // denominator over different-category samples only
  infonce,   // denominator over every other sample
};

inline std::string to_string(CategoryLossMode m) {
  return m == CategoryLossMode::literal ? "literal" : "infonce";
}

inline CategoryLossMode parse_category_loss_mode(const std::string& s) {
  if (s == "literal") return CategoryLossMode::literal;
  if (s == "infonce") return CategoryLossMode::infonce;
  throw ConfigError("unknown category loss mode '" + s + "' (expected literal or infonce)");
}

struct CategoryLossOptions {
  CategoryLossMode mode = CategoryLossMode::literal;
  double temperature = 1.0;
  double epsilon = 1e-8;
};

inline bool has_two_categories(std::span<const int> labels) {
  return std::adjacent_find(labels.begin(), labels.end(), std::not_equal_to<>()) != labels.end();
}

// Supervised contrastive loss over cell-space vectors grouped by category
// label. Every ordered pair (a, p) with equal labels and a != p is one term;
// the result is the mean over those terms.
template <typename T>
double category_loss(const nn::Mat<T>& z, std::span<const int> labels, const CategoryLossOptions& opt,
                     nn::Mat<T>* grad = nullptr) {
  const nn::Index n = z.rows();
  if (static_cast<std::size_t>(n) != labels.size()) throw Error("label count does not match vectors");
  if (!(opt.temperature > 0.0)) throw ConfigError("temperature must be positive");
  if (!has_two_categories(labels)) throw Error("category loss needs at least two categories in the batch");

  using MatX = nn::Mat<double>;
  const MatX v = z.template cast<double>();
  Eigen::VectorXd norms = v.rowwise().norm();
  if (norms.minCoeff() <= 0.0) throw Error("cosine similarity undefined for a zero vector");
  const MatX u = norms.cwiseInverse().asDiagonal() * v;
  const MatX s = (u * u.transpose()) / opt.temperature;
  const bool literal = opt.mode == CategoryLossMode::literal;
  const double eps = literal ? opt.epsilon : 0.0;

  MatX ds = MatX::Zero(n, n);
  double total = 0.0;
  std::size_t pairs = 0;
  for (nn::Index a = 0; a < n; ++a) {
    std::size_t positives = 0;
    for (nn::Index b = 0; b < n; ++b) positives += (b != a && labels[b] == labels[a]);
    if (positives == 0) continue;
    auto in_denominator = [&](nn::Index b) { return b != a && (!literal || labels[b] != labels[a]); };
    double peak = -std::numeric_limits<double>::infinity();
    for (nn::Index b = 0; b < n; ++b) {
      if (in_denominator(b)) peak = std::max(peak, s(a, b));
    }
    double sum = 0.0;
    for (nn::Index b = 0; b < n; ++b) {
      if (in_denominator(b)) sum += std::exp(s(a, b) - peak);
    }
    // log(sum exp + eps) evaluated stably
    const double scaled_eps = eps * std::exp(-peak);
    const double log_z = peak + std::log(sum + scaled_eps);
    const double count = static_cast<double>(positives);
    for (nn::Index b = 0; b < n; ++b) {
      if (b != a && labels[b] == labels[a]) {
        total += log_z - s(a, b);
        ds(a, b) -= 1.0;
      }
      if (in_denominator(b)) ds(a, b) += count * std::exp(s(a, b) - log_z);
    }
    pairs += positives;
  }
  if (pairs == 0) throw Error("category loss needs at least one same-category pair");
  const double denom = static_cast<double>(pairs);
  if (grad) {
    ds /= denom;
    const MatX du = ((ds + ds.transpose()) * u) / opt.temperature;
    MatX dv(n, v.cols());
    for (nn::Index a = 0; a < n; ++a) {
      dv.row(a) = (du.row(a) - u.row(a) * u.row(a).dot(du.row(a))) / norms(a);
    }
    *grad = dv.template cast<T>();
  }
  return total / denom;
}

}  // namespace crosstab
