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
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include <json.hpp>

#include "crosstab/core/error.hpp"
#include "crosstab/core/log.hpp"
#include "crosstab/core/random.hpp"
#include "crosstab/diffusion/eps_net.hpp"
#include "crosstab/diffusion/schedule.hpp"
#include "crosstab/nn/optim.hpp"

namespace crosstab {

using DiffusionNet = EpsNet<float>;

enum class ConditionMode { metadata, features };

inline std::string_view to_string(ConditionMode m) {
  return m == ConditionMode::metadata ? "metadata" : "features";
}

inline ConditionMode parse_condition_mode(std::string_view s) {
  if (s == "metadata") return ConditionMode::metadata;
  if (s == "features") return ConditionMode::features;
  throw ConfigError("unknown condition mode '" + std::string(s) + "'");
}

inline nn::Index condition_width(ConditionMode mode, nn::Index text_dim, nn::Index latent_dim) {
  return mode == ConditionMode::metadata ? text_dim : text_dim + 2 * latent_dim;
}

// metadata: y = e_m.  features: y = [e_m, v_plus, v_minus].
inline nn::RowVectorF build_condition(const nn::RowVectorF& metadata, ConditionMode mode,
                                      const nn::RowVectorF* v_plus = nullptr,
                                      const nn::RowVectorF* v_minus = nullptr) {
  if (mode == ConditionMode::metadata) return metadata;
  if (!v_plus || !v_minus) throw ConfigError("feature conditioning needs both masked-row latents");
  if (v_plus->size() != v_minus->size()) throw ConfigError("masked-row latents differ in width");
  nn::RowVectorF y(metadata.size() + 2 * v_plus->size());
  y << metadata, *v_plus, *v_minus;
  return y;
}

// Per-dimension affine map to zero mean and unit variance.
struct LatentStandardizer {
  nn::RowVectorF mean;
  nn::RowVectorF scale;

  static LatentStandardizer fit(const nn::MatF& latents) {
    if (latents.rows() < 2) throw DataError("standardizer needs at least 2 latent rows");
    const Eigen::MatrixXd x = latents.cast<double>();
    const Eigen::RowVectorXd mu = x.colwise().mean();
    const Eigen::RowVectorXd var = (x.rowwise() - mu).array().square().colwise().mean();
    LatentStandardizer s;
    s.mean = mu.cast<float>();
    s.scale = var.cwiseSqrt().cwiseMax(1e-6).cast<float>();
    return s;
  }

  nn::MatF apply(const nn::MatF& x) const {
    return ((x.rowwise() - mean).array().rowwise() / scale.array()).matrix();
  }
  nn::MatF invert(const nn::MatF& z) const {
    return ((z.array().rowwise() * scale.array()).rowwise() + mean.array()).matrix();
  }

  nlohmann::json to_json() const {
    return {{"mean", std::vector<float>(mean.data(), mean.data() + mean.size())},
            {"scale", std::vector<float>(scale.data(), scale.data() + scale.size())}};
  }
  static LatentStandardizer from_json(const nlohmann::json& j) {
    const auto m = j.at("mean").get<std::vector<float>>();
    const auto s = j.at("scale").get<std::vector<float>>();
    if (m.size() != s.size()) throw CheckpointError("standardizer width mismatch");
    LatentStandardizer out;
    out.mean = Eigen::Map<const nn::RowVectorF>(m.data(), static_cast<nn::Index>(m.size()));
    out.scale = Eigen::Map<const nn::RowVectorF>(s.data(), static_cast<nn::Index>(s.size()));
    return out;
  }
  bool operator==(const LatentStandardizer& o) const { return mean == o.mean && scale == o.scale; }
};

inline DiffusionNet make_diffusion_net(const EpsNetShape& shape, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "diffusion-init"));
  return DiffusionNet(shape, rng);
}

struct DiffusionTraining {
  std::size_t epochs = 3000;
  std::size_t batch_size = 512;
  double learning_rate = 5e-4;
  double final_lr_fraction = 0.1;
  double uncond_rate = 0.1;  // condition dropout
  double clip_norm = 1.0;
  std::uint64_t seed = 0;
};

// Mean over the batch of the per-sample squared error summed over latent
// dimensions. Trains `net` in place and returns the per-epoch mean loss.
inline std::vector<double> train_diffusion(DiffusionNet& net, const nn::MatF& latents,
                                           const nn::MatF& conditions, const NoiseSchedule& schedule,
                                           const DiffusionTraining& opt,
                                           const std::function<void(std::size_t, double)>& on_epoch = {}) {
  const nn::Index n = latents.rows();
  if (n == 0) throw DataError("diffusion training needs latent rows");
  if (conditions.rows() != n) throw DataError("one condition row per latent row is required");
  if (latents.cols() != net.shape().latent_dim || conditions.cols() != net.shape().condition_dim) {
    throw ConfigError("latent or condition width does not match the diffusion net");
  }
  if (opt.batch_size == 0 || opt.epochs == 0) throw ConfigError("diffusion training needs epochs and a batch");

  Rng rng(derive_seed(opt.seed, "diffusion-train"));
  std::normal_distribution<float> gauss(0.0f, 1.0f);
  std::uniform_int_distribution<std::size_t> step(1, schedule.steps());
  std::bernoulli_distribution drop(opt.uncond_rate);
  nn::AdamOptions adam_opt;
  adam_opt.clip_norm = opt.clip_norm;
  nn::Adam<float> adam(nn::parameters_of<float>(net), adam_opt);

  std::vector<nn::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), nn::Index{0});
  const std::size_t batches = (static_cast<std::size_t>(n) + opt.batch_size - 1) / opt.batch_size;
  const std::size_t total_steps = batches * opt.epochs;
  std::vector<double> losses;
  std::size_t global = 0;
  for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t b = 0; b < batches; ++b) {
      const std::size_t first = b * opt.batch_size;
      const auto rows = static_cast<nn::Index>(std::min(opt.batch_size, static_cast<std::size_t>(n) - first));
      nn::MatF v0(rows, latents.cols());
      nn::MatF y(rows, conditions.cols());
      nn::MatF eps(rows, latents.cols());
      std::vector<std::size_t> t(static_cast<std::size_t>(rows));
      for (nn::Index r = 0; r < rows; ++r) {
        const nn::Index src = order[first + static_cast<std::size_t>(r)];
        v0.row(r) = latents.row(src);
        if (drop(rng)) {
          y.row(r).setZero();
        } else {
          y.row(r) = conditions.row(src);
        }
        t[static_cast<std::size_t>(r)] = step(rng);
        for (nn::Index c = 0; c < eps.cols(); ++c) eps(r, c) = gauss(rng);
      }
      const nn::MatF vt = forward_sample(v0, t, schedule, eps);
      DiffusionNet::Cache cache;
      const nn::MatF pred = net.forward(vt, t, y, &cache);
      const nn::MatF diff = pred - eps;
      const double loss = static_cast<double>(diff.squaredNorm()) / static_cast<double>(rows);
      if (!std::isfinite(loss)) {
        throw TrainingError("diffusion", "loss is not finite at epoch " + std::to_string(epoch));
      }
      adam.zero_grad();
      net.backward(cache, diff * (2.0f / static_cast<float>(rows)));
      adam.step(nn::cosine_lr(opt.learning_rate, global++, total_steps, opt.final_lr_fraction));
      epoch_loss += loss * static_cast<double>(rows);
    }
    losses.push_back(epoch_loss / static_cast<double>(n));
    if (on_epoch) on_epoch(epoch, losses.back());
  }
  logger()->info("diffusion: {} epochs, loss {:.3f} -> {:.3f}", opt.epochs, losses.front(), losses.back());
  return losses;
}

struct SamplingOptions {
  std::uint64_t seed = 0;
  double guidance = 1.0;
  std::function<void(std::size_t)> on_step;
};

// Ancestral sampling from N(0, I) at t = T down to t = 1. `conditions` holds
// one row per sample or a single row shared by all samples.
inline nn::MatF sample(std::size_t n, const nn::MatF& conditions, const NoiseSchedule& schedule,
                       const DiffusionNet& net, const SamplingOptions& opt = {}) {
  const nn::Index d = net.shape().latent_dim;
  if (n == 0) return nn::MatF(0, d);
  if (conditions.cols() != net.shape().condition_dim) throw ConfigError("condition width does not match the diffusion net");
  if (conditions.rows() != 1 && conditions.rows() != static_cast<nn::Index>(n)) {
    throw ConfigError("need one condition row or one per sample");
  }
  Rng rng(derive_seed(opt.seed, "diffusion-sample"));
  std::normal_distribution<float> gauss(0.0f, 1.0f);
  auto noise = [&] {
    nn::MatF z(static_cast<nn::Index>(n), d);
    for (nn::Index i = 0; i < z.size(); ++i) z.data()[i] = gauss(rng);
    return z;
  };
  const auto cond = net.condition_terms(conditions);
  const bool guided = opt.guidance != 1.0;
  const auto uncond = guided ? net.condition_terms(nn::MatF::Zero(1, conditions.cols()))
                             : DiffusionNet::ConditionTerms{};
  const auto w = static_cast<float>(opt.guidance);

  nn::MatF v = noise();
  for (std::size_t t = schedule.steps(); t >= 1; --t) {
    if (opt.on_step) opt.on_step(t);
    nn::MatF eps = net.predict(v, t, cond);
    if (guided) {
      const nn::MatF eps_u = net.predict(v, t, uncond);
      eps = eps_u + w * (eps - eps_u);
    }
    v = posterior_mean(v, t, schedule, eps);
    if (t > 1) v += noise() * static_cast<float>(schedule.sigma_at(t));
  }
  return v;
}

}  // namespace crosstab
