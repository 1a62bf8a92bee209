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

#include "crosstab/nn/tensor.hpp"

namespace crosstab::nn {

template <typename T>
Mat<T> relu(const Mat<T>& x) {
  return x.cwiseMax(T(0));
}

template <typename T>
Mat<T> relu_backward(const Mat<T>& pre, const Mat<T>& dy) {
  return (pre.array() > T(0)).select(dy, T(0));
}

template <typename T>
Mat<T> sigmoid(const Mat<T>& x) {
  return (T(1) / (T(1) + (-x.array()).exp())).matrix();
}

template <typename T>
Mat<T> silu(const Mat<T>& x) {
  return (x.array() / (T(1) + (-x.array()).exp())).matrix();
}

template <typename T>
Mat<T> silu_backward(const Mat<T>& pre, const Mat<T>& dy) {
  const auto s = (T(1) / (T(1) + (-pre.array()).exp()));
  return (dy.array() * s * (T(1) + pre.array() * (T(1) - s))).matrix();
}

// scale * tanh(x); the number encoder uses scale 10.
template <typename T>
Mat<T> scaled_tanh(const Mat<T>& x, T scale) {
  return (x.array().tanh() * scale).matrix();
}

template <typename T>
Mat<T> scaled_tanh_backward(const Mat<T>& pre, const Mat<T>& dy, T scale) {
  const auto th = pre.array().tanh();
  return (dy.array() * scale * (T(1) - th * th)).matrix();
}

}  // namespace crosstab::nn
