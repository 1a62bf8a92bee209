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

#include <string>

#include "crosstab/nn/tensor.hpp"

namespace crosstab::nn {

// y = x W + b, with W stored in_features x out_features.
template <typename T>
class Linear {
 public:
  struct Cache {
    Mat<T> input;
  };

  Linear() = default;
  Linear(Index in_features, Index out_features, Rng& rng, bool with_bias = true)
      : weight_(in_features, out_features), with_bias_(with_bias) {
    fan_in_uniform(weight_.value, in_features, rng);
    if (with_bias_) {
      bias_ = Parameter<T>(1, out_features);
      fan_in_uniform(bias_.value, in_features, rng);
    }
  }

  Index in_features() const { return weight_.value.rows(); }
  Index out_features() const { return weight_.value.cols(); }

  Mat<T> forward(const Mat<T>& x, Cache* cache = nullptr) const {
    if (cache) cache->input = x;
    Mat<T> y(x.rows(), out_features());
    y.noalias() = x * weight_.value;
    if (with_bias_) y.rowwise() += bias_.value.row(0);
    return y;
  }

  Mat<T> backward(const Cache& cache, const Mat<T>& dy, bool need_input_grad = true) {
    weight_.grad.noalias() += cache.input.transpose() * dy;
    if (with_bias_) bias_.grad.row(0) += dy.colwise().sum();
    if (!need_input_grad) return {};
    Mat<T> dx(dy.rows(), in_features());
    dx.noalias() = dy * weight_.value.transpose();
    return dx;
  }

  void zero_weights() {
    weight_.value.setZero();
    if (with_bias_) bias_.value.setZero();
  }

  template <typename V>
  void visit(V&& v, const std::string& prefix) {
    v(join_name(prefix, "weight"), weight_);
    if (with_bias_) v(join_name(prefix, "bias"), bias_);
  }
  template <typename V>
  void visit(V&& v, const std::string& prefix) const {
    v(join_name(prefix, "weight"), weight_);
    if (with_bias_) v(join_name(prefix, "bias"), bias_);
  }

 private:
  Parameter<T> weight_;
  Parameter<T> bias_;
  bool with_bias_ = true;
};

}  // namespace crosstab::nn
