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

#include <cmath>
#include <string>

#include "crosstab/nn/tensor.hpp"

namespace crosstab::nn {

template <typename T>
class LayerNorm {
 public:
  struct Cache {
    Mat<T> normalized;
    ColVector<T> inv_std;
  };

  LayerNorm() = default;
  explicit LayerNorm(Index dim, double eps = 1e-5) : gamma_(1, dim), beta_(1, dim), eps_(eps) {
    gamma_.value.setOnes();
  }

  Mat<T> forward(const Mat<T>& x, Cache* cache = nullptr) const {
    const Index n = x.cols();
    Mat<T> xhat(x.rows(), n);
    ColVector<T> inv_std(x.rows());
    for (Index r = 0; r < x.rows(); ++r) {
      const T mean = x.row(r).mean();
      const auto centered = x.row(r).array() - mean;
      const T var = centered.square().sum() / static_cast<T>(n);
      inv_std(r) = T(1) / std::sqrt(var + static_cast<T>(eps_));
      xhat.row(r) = centered * inv_std(r);
    }
    Mat<T> y = (xhat.array().rowwise() * gamma_.value.row(0).array()).matrix();
    y.rowwise() += beta_.value.row(0);
    if (cache) {
      cache->normalized = std::move(xhat);
      cache->inv_std = std::move(inv_std);
    }
    return y;
  }

  Mat<T> backward(const Cache& cache, const Mat<T>& dy) {
    const Mat<T>& xhat = cache.normalized;
    gamma_.grad.row(0) += (dy.array() * xhat.array()).matrix().colwise().sum();
    beta_.grad.row(0) += dy.colwise().sum();
    const T n = static_cast<T>(dy.cols());
    Mat<T> dxhat = (dy.array().rowwise() * gamma_.value.row(0).array()).matrix();
    Mat<T> dx(dy.rows(), dy.cols());
    for (Index r = 0; r < dy.rows(); ++r) {
      const T sum_d = dxhat.row(r).sum();
      const T sum_dx = dxhat.row(r).dot(xhat.row(r));
      dx.row(r) = (cache.inv_std(r) / n) *
                  (n * dxhat.row(r).array() - sum_d - xhat.row(r).array() * sum_dx);
    }
    return dx;
  }

  template <typename V>
  void visit(V&& v, const std::string& prefix) {
    v(join_name(prefix, "gamma"), gamma_);
    v(join_name(prefix, "beta"), beta_);
  }
  template <typename V>
  void visit(V&& v, const std::string& prefix) const {
    v(join_name(prefix, "gamma"), gamma_);
    v(join_name(prefix, "beta"), beta_);
  }

 private:
  Parameter<T> gamma_;
  Parameter<T> beta_;
  double eps_ = 1e-5;
};

}  // namespace crosstab::nn
