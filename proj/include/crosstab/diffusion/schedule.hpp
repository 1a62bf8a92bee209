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
#include <string>
#include <string_view>
#include <vector>

#include "crosstab/core/error.hpp"
#include "crosstab/nn/tensor.hpp"

namespace crosstab {

enum class ScheduleKind { linear, cosine };

inline std::string_view to_string(ScheduleKind k) { return k == ScheduleKind::linear ? "linear" : "cosine"; }

inline ScheduleKind parse_schedule_kind(std::string_view s) {
  if (s == "linear") return ScheduleKind::linear;
  if (s == "cosine") return ScheduleKind::cosine;
  throw ConfigError("unknown noise schedule '" + std::string(s) + "'");
}

// Per-step tables indexed by t = 1..T (stored at t - 1).
struct NoiseSchedule {
  ScheduleKind kind = ScheduleKind::linear;
  double beta_min = 1e-4;
  double beta_max = 0.02;
  std::vector<double> beta, alpha, alpha_bar, sigma;

  std::size_t steps() const { return beta.size(); }
  double beta_at(std::size_t t) const { return beta.at(t - 1); }
  double alpha_at(std::size_t t) const { return alpha.at(t - 1); }
  double alpha_bar_at(std::size_t t) const { return alpha_bar.at(t - 1); }
  double sigma_at(std::size_t t) const { return sigma.at(t - 1); }
};

inline NoiseSchedule schedule_from_betas(std::vector<double> betas) {
  if (betas.empty()) throw ConfigError("noise schedule needs at least one step");
  NoiseSchedule s;
  s.beta = std::move(betas);
  double running = 1.0;
  for (std::size_t i = 0; i < s.beta.size(); ++i) {
    const double b = s.beta[i];
    if (!(b >= 0.0 && b < 1.0)) throw ConfigError("beta values must lie in [0, 1)");
    if (i > 0 && b < s.beta[i - 1]) throw ConfigError("beta values must be nondecreasing");
    s.alpha.push_back(1.0 - b);
    running *= 1.0 - b;
    s.alpha_bar.push_back(running);
    s.sigma.push_back(std::sqrt(b));
  }
  return s;
}

// Linear: beta interpolates beta_min .. beta_max. Cosine: alpha_bar follows
// cos^2 of the normalised step with a small offset, betas capped at 0.999.
inline NoiseSchedule build_schedule(std::size_t steps, ScheduleKind kind = ScheduleKind::linear,
                                    double beta_min = 1e-4, double beta_max = 0.02) {
  if (steps < 1) throw ConfigError("noise schedule needs at least one step");
  std::vector<double> betas(steps);
  if (kind == ScheduleKind::linear) {
    if (beta_max < beta_min) throw ConfigError("beta_max must not be below beta_min");
    for (std::size_t i = 0; i < steps; ++i) {
      const double f = steps == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(steps - 1);
      betas[i] = beta_min + f * (beta_max - beta_min);
    }
  } else {
    constexpr double offset = 0.008;
    auto f = [&](double t) {
      const double c = std::cos((t / static_cast<double>(steps) + offset) / (1.0 + offset) *
                                std::numbers::pi / 2.0);
      return c * c;
    };
    for (std::size_t i = 0; i < steps; ++i) {
      betas[i] = std::min(1.0 - f(static_cast<double>(i + 1)) / f(static_cast<double>(i)), 0.999);
    }
  }
  NoiseSchedule s = schedule_from_betas(std::move(betas));
  s.kind = kind;
  s.beta_min = beta_min;
  s.beta_max = beta_max;
  return s;
}

// Closed-form marginal: sqrt(abar_t) v0 + sqrt(1 - abar_t) eps.
template <typename T>
nn::Mat<T> forward_sample(const nn::Mat<T>& v0, std::size_t t, const NoiseSchedule& s,
                          const nn::Mat<T>& noise) {
  const double ab = s.alpha_bar_at(t);
  return (v0 * static_cast<T>(std::sqrt(ab)) + noise * static_cast<T>(std::sqrt(1.0 - ab))).eval();
}

// Per-row timesteps.
template <typename T>
nn::Mat<T> forward_sample(const nn::Mat<T>& v0, const std::vector<std::size_t>& t,
                          const NoiseSchedule& s, const nn::Mat<T>& noise) {
  nn::Mat<T> out(v0.rows(), v0.cols());
  for (nn::Index i = 0; i < v0.rows(); ++i) {
    const double ab = s.alpha_bar_at(t[static_cast<std::size_t>(i)]);
    out.row(i) = v0.row(i) * static_cast<T>(std::sqrt(ab)) + noise.row(i) * static_cast<T>(std::sqrt(1.0 - ab));
  }
  return out;
}

// (v_t - beta_t / sqrt(1 - abar_t) eps_hat) / sqrt(alpha_t); a zero beta
// leaves v_t untouched.
template <typename T>
nn::Mat<T> posterior_mean(const nn::Mat<T>& vt, std::size_t t, const NoiseSchedule& s,
                          const nn::Mat<T>& eps_hat) {
  const double b = s.beta_at(t);
  if (b == 0.0) return vt;
  const double coef = b / std::sqrt(1.0 - s.alpha_bar_at(t));
  const double inv = 1.0 / std::sqrt(s.alpha_at(t));
  return ((vt - eps_hat * static_cast<T>(coef)) * static_cast<T>(inv)).eval();
}

}  // namespace crosstab
