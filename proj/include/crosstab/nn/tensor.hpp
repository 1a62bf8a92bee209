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
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "crosstab/core/random.hpp"

namespace crosstab::nn {

using Index = Eigen::Index;

// Row-major so that one row is one sample or one token.
template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using RowVector = Eigen::Matrix<T, 1, Eigen::Dynamic>;
template <typename T>
using ColVector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

using MatF = Mat<float>;
using MatD = Mat<double>;
using RowVectorF = RowVector<float>;

template <typename T>
struct Parameter {
  Mat<T> value;
  Mat<T> grad;

  Parameter() = default;
  Parameter(Index rows, Index cols)
      : value(Mat<T>::Zero(rows, cols)), grad(Mat<T>::Zero(rows, cols)) {}

  void zero_grad() { grad.setZero(); }
};

// PyTorch-style fan-in uniform initialisation. Draws in double so float and
// double instantiations built from the same seed start from the same point.
template <typename T>
void fan_in_uniform(Mat<T>& m, Index fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(dist(rng));
}

template <typename To, typename From>
Mat<To> cast(const Mat<From>& m) {
  return m.template cast<To>();
}

// Collects mutable parameter pointers from anything exposing visit().
template <typename T, typename Net>
std::vector<Parameter<T>*> parameters_of(Net& net) {
  std::vector<Parameter<T>*> out;
  net.visit([&](const std::string&, Parameter<T>& p) { out.push_back(&p); }, "");
  return out;
}

template <typename T, typename Net>
void zero_grad(Net& net) {
  net.visit([](const std::string&, Parameter<T>& p) { p.zero_grad(); }, "");
}

inline std::string join_name(const std::string& prefix, const std::string& name) {
  return prefix.empty() ? name : prefix + "." + name;
}

}  // namespace crosstab::nn
