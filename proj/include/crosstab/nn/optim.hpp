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
#include <numbers>
#include <vector>

#include "crosstab/nn/tensor.hpp"

namespace crosstab::nn {

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 0.0;  // global gradient-norm clip; 0 disables
};

template <typename T>
class Adam {
 public:
  Adam(std::vector<Parameter<T>*> params, AdamOptions options = {})
      : params_(std::move(params)), options_(options) {
    for (auto* p : params_) {
      m_.push_back(Mat<T>::Zero(p->value.rows(), p->value.cols()));
      v_.push_back(Mat<T>::Zero(p->value.rows(), p->value.cols()));
    }
  }

  void zero_grad() {
    for (auto* p : params_) p->zero_grad();
  }

  double grad_norm() const {
    double total = 0.0;
    for (const auto* p : params_) total += static_cast<double>(p->grad.squaredNorm());
    return std::sqrt(total);
  }

  void step(double lr) {
    ++steps_;
    double factor = 1.0;
    if (options_.clip_norm > 0.0) {
      const double norm = grad_norm();
      if (norm > options_.clip_norm) factor = options_.clip_norm / norm;
    }
    const double c1 = 1.0 - std::pow(options_.beta1, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(options_.beta2, static_cast<double>(steps_));
    const T b1 = static_cast<T>(options_.beta1);
    const T b2 = static_cast<T>(options_.beta2);
    const T step_size = static_cast<T>(lr / c1);
    const T inv_c2 = static_cast<T>(1.0 / c2);
    const T eps = static_cast<T>(options_.eps);
    const T f = static_cast<T>(factor);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto g = params_[i]->grad.array() * f;
      m_[i].array() = b1 * m_[i].array() + (T(1) - b1) * g;
      v_[i].array() = b2 * v_[i].array() + (T(1) - b2) * g * g;
      params_[i]->value.array() -=
          step_size * m_[i].array() / ((v_[i].array() * inv_c2).sqrt() + eps);
    }
  }

  std::size_t steps() const { return steps_; }

 private:
  std::vector<Parameter<T>*> params_;
  AdamOptions options_;
  std::vector<Mat<T>> m_, v_;
  std::size_t steps_ = 0;
};

// Cosine annealing from `base` at step 0 to `base * floor_fraction` at `total`.
inline double cosine_lr(double base, std::size_t step, std::size_t total,
                        double floor_fraction = 0.0) {
  if (total == 0) return base;
  const double progress = std::min(1.0, static_cast<double>(step) / static_cast<double>(total));
  const double cosine = 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
  return base * (floor_fraction + (1.0 - floor_fraction) * cosine);
}

}  // namespace crosstab::nn
