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

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "crosstab/aggregator/aggregator.hpp"
#include "crosstab/core/error.hpp"
#include "crosstab/decoders/decoders.hpp"
#include "crosstab/decoders/plain.hpp"
#include "crosstab/diffusion/diffusion.hpp"
#include "crosstab/embedding/number_autoencoder.hpp"
#include "crosstab/tabular/split.hpp"

namespace crosstab {

enum class DecoderKind { type_specific, plain };

struct PipelineConfig {
  std::uint64_t seed = 0;
  std::string text_encoder = "hashed";  // or a path to precomputed vectors

  NumberAutoencoderTraining autoencoder;
  AggregatorTraining aggregator;
  DecoderKind decoder_kind = DecoderKind::type_specific;
  DecoderTraining decoders;
  PlainDecoderTraining plain_decoder;

  std::size_t diffusion_steps = 2500;
  ScheduleKind schedule = ScheduleKind::linear;
  double beta_min = 1e-4;
  double beta_max = 0.02;
  nn::Index diffusion_hidden = 512;
  nn::Index diffusion_depth = 4;
  nn::Index time_dim = 128;
  ConditionMode condition = ConditionMode::metadata;
  bool pretrain_diffusion = true;  // false: the fine-tune stage starts from a fresh net
  DiffusionTraining diffusion;
  DiffusionTraining finetune = [] {
    DiffusionTraining d;
    d.epochs = 10000;
    return d;
  }();
  double guidance = 1.0;

  SplitSpec split;

  void validate() const;
};

// Every tunable field, visited with (section, key, reference, help). Enum
// fields go through `choice` with their spelled-out values.
template <typename Visitor, typename Config>
void visit_config(Visitor&& v, Config& c) {
  v("", "seed", c.seed, "root seed; every stage seed is derived from it");
  v("", "text_encoder", c.text_encoder, "'hashed' or a JSON file of precomputed text vectors");

  v("autoencoder", "epochs", c.autoencoder.epochs, "number autoencoder epochs");
  v("autoencoder", "batch_size", c.autoencoder.batch_size, "uniform samples per epoch");
  v("autoencoder", "learning_rate", c.autoencoder.learning_rate, "initial learning rate");
  v("autoencoder", "hidden", c.autoencoder.shape.hidden, "hidden width");

  v("aggregator", "epochs", c.aggregator.epochs, "aggregator epochs");
  v("aggregator", "batch_size", c.aggregator.batch_size, "rows per batch");
  v("aggregator", "learning_rate", c.aggregator.learning_rate, "initial learning rate");
  v("aggregator", "temperature", c.aggregator.temperature, "contrastive temperature");
  v("aggregator", "magnitude_weight", c.aggregator.magnitude_weight, "weight of the magnitude loss");
  v("aggregator", "views", c.aggregator.views, "masked views per row");
  v("aggregator", "mask_fraction", c.aggregator.mask_fraction, "fraction of values masked per view");
  v("aggregator", "drop_rate", c.aggregator.drop_rate, "fraction of columns dropped per batch");

  v.choice("decoders", "kind", c.decoder_kind,
           std::vector<std::pair<std::string, DecoderKind>>{{"type_specific", DecoderKind::type_specific},
                                                            {"plain", DecoderKind::plain}},
           "type-specific decoders or one plain row decoder per table");
  v("decoders", "epochs", c.decoders.epochs, "decoder epochs");
  v("decoders", "batch_size", c.decoders.batch_size, "rows per batch");
  v("decoders", "learning_rate", c.decoders.learning_rate, "initial learning rate");
  v.choice("decoders", "loss", c.decoders.category_loss.mode,
           std::vector<std::pair<std::string, CategoryLossMode>>{{"literal", CategoryLossMode::literal},
                                                                 {"infonce", CategoryLossMode::infonce}},
           "categorical loss denominator");
  v("decoders", "temperature", c.decoders.category_loss.temperature, "categorical loss temperature");
  v("decoders", "align_anchors", c.decoders.align_anchors, "add category anchor sequences to the loss");
  v("decoders", "plain_epochs", c.plain_decoder.epochs, "plain decoder epochs");
  v("decoders", "plain_hidden", c.plain_decoder.hidden, "plain decoder hidden width");

  v("diffusion", "steps", c.diffusion_steps, "diffusion timesteps T");
  v.choice("diffusion", "schedule", c.schedule,
           std::vector<std::pair<std::string, ScheduleKind>>{{"linear", ScheduleKind::linear},
                                                             {"cosine", ScheduleKind::cosine}},
           "noise schedule");
  v("diffusion", "beta_min", c.beta_min, "first beta of the linear schedule");
  v("diffusion", "beta_max", c.beta_max, "last beta of the linear schedule");
  v("diffusion", "hidden", c.diffusion_hidden, "noise network width");
  v("diffusion", "depth", c.diffusion_depth, "noise network residual blocks");
  v("diffusion", "time_dim", c.time_dim, "timestep feature width");
  v.choice("diffusion", "condition", c.condition,
           std::vector<std::pair<std::string, ConditionMode>>{{"metadata", ConditionMode::metadata},
                                                              {"features", ConditionMode::features}},
           "condition on metadata only or on metadata and masked-row latents");
  v("diffusion", "pretrain", c.pretrain_diffusion, "train the diffusion net during pre-training");
  v("diffusion", "epochs", c.diffusion.epochs, "pre-training epochs");
  v("diffusion", "batch_size", c.diffusion.batch_size, "latents per batch");
  v("diffusion", "learning_rate", c.diffusion.learning_rate, "initial learning rate");
  v("diffusion", "uncond_rate", c.diffusion.uncond_rate, "condition dropout rate");

  v("finetune", "epochs", c.finetune.epochs, "fine-tuning epochs");
  v("finetune", "batch_size", c.finetune.batch_size, "latents per batch");
  v("finetune", "learning_rate", c.finetune.learning_rate, "initial learning rate");
  v("finetune", "uncond_rate", c.finetune.uncond_rate, "condition dropout rate");

  v("generation", "guidance", c.guidance, "classifier-free guidance scale; 1 disables guidance");

  v("split", "train", c.split.train_frac, "pre-training fraction");
  v("split", "finetune", c.split.finetune_frac, "fine-tuning fraction");
  v("split", "test", c.split.test_frac, "test fraction");
}

namespace detail {

inline nlohmann::json& config_slot(nlohmann::json& root, const std::string& section) {
  if (section.empty()) return root;
  return root[section];
}

struct ConfigWriter {
  nlohmann::json out = nlohmann::json::object();
  template <typename T>
  void operator()(const std::string& section, const std::string& key, const T& value, const char*) {
    config_slot(out, section)[key] = value;
  }
  template <typename E>
  void choice(const std::string& section, const std::string& key, const E& value,
              const std::vector<std::pair<std::string, E>>& names, const char*) {
    for (const auto& [name, e] : names) {
      if (e == value) config_slot(out, section)[key] = name;
    }
  }
};

struct ConfigReader {
  const nlohmann::json& in;
  std::size_t used = 0;

  const nlohmann::json* find(const std::string& section, const std::string& key) {
    const nlohmann::json* scope = &in;
    if (!section.empty()) {
      auto it = in.find(section);
      if (it == in.end()) return nullptr;
      scope = &*it;
    }
    auto it = scope->find(key);
    if (it == scope->end()) return nullptr;
    ++used;
    return &*it;
  }
  static std::string where(const std::string& section, const std::string& key) {
    return section.empty() ? key : section + "." + key;
  }
  template <typename T>
  void operator()(const std::string& section, const std::string& key, T& value, const char*) {
    if (const auto* j = find(section, key)) {
      try {
        value = j->template get<T>();
      } catch (const nlohmann::json::exception&) {
        throw ConfigError("config value " + where(section, key) + " has the wrong type");
      }
    }
  }
  template <typename E>
  void choice(const std::string& section, const std::string& key, E& value,
              const std::vector<std::pair<std::string, E>>& names, const char*) {
    const auto* j = find(section, key);
    if (!j) return;
    const std::string s = j->is_string() ? j->get<std::string>() : std::string();
    for (const auto& [name, e] : names) {
      if (name == s) {
        value = e;
        return;
      }
    }
    throw ConfigError("config value " + where(section, key) + " must be one of the listed choices");
  }
};

inline std::size_t count_leaves(const nlohmann::json& j) {
  std::size_t n = 0;
  for (const auto& [key, value] : j.items()) n += value.is_object() ? count_leaves(value) : 1;
  return n;
}

}  // namespace detail

inline nlohmann::json config_to_json(const PipelineConfig& c) {
  detail::ConfigWriter w;
  visit_config(w, c);
  return w.out;
}

// Starts from defaults; unknown keys are errors.
inline PipelineConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  PipelineConfig c;
  detail::ConfigReader r{j};
  visit_config(r, c);
  if (r.used != detail::count_leaves(j)) {
    const nlohmann::json known = config_to_json(c);
    for (const auto& [key, value] : j.items()) {
      if (!known.contains(key)) throw ConfigError("unknown config key '" + key + "'");
      if (value.is_object()) {
        for (const auto& [inner, unused] : value.items()) {
          if (!known[key].contains(inner)) throw ConfigError("unknown config key '" + key + "." + inner + "'");
        }
      }
    }
    throw ConfigError("config contains nested values where scalars are expected");
  }
  c.validate();
  return c;
}

inline void PipelineConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
  };
  require(!text_encoder.empty(), "text_encoder must name 'hashed' or a vectors file");
  require(autoencoder.epochs >= 10, "autoencoder.epochs must be at least 10");
  require(autoencoder.batch_size >= 1 && autoencoder.learning_rate > 0.0, "autoencoder batch and rate must be positive");
  require(autoencoder.shape.hidden >= 1, "autoencoder.hidden must be positive");
  require(aggregator.epochs >= 1 && aggregator.batch_size >= 3, "aggregator needs epochs >= 1 and batch_size >= 3");
  require(aggregator.learning_rate > 0.0 && aggregator.temperature > 0.0, "aggregator rate and temperature must be positive");
  require(aggregator.magnitude_weight >= 0.0, "aggregator.magnitude_weight must be nonnegative");
  require(aggregator.views >= 1, "aggregator.views must be at least 1");
  require(aggregator.mask_fraction > 0.0 && aggregator.mask_fraction <= 1.0, "aggregator.mask_fraction must lie in (0, 1]");
  require(aggregator.drop_rate >= 0.0 && aggregator.drop_rate < 1.0, "aggregator.drop_rate must lie in [0, 1)");
  require(decoders.epochs >= 1 && decoders.batch_size >= 2 && decoders.learning_rate > 0.0,
          "decoders need epochs >= 1, batch_size >= 2 and a positive rate");
  require(decoders.category_loss.temperature > 0.0, "decoders.temperature must be positive");
  require(plain_decoder.epochs >= 1 && plain_decoder.hidden >= 1, "plain decoder epochs and width must be positive");
  require(diffusion_steps >= 1, "diffusion.steps must be at least 1");
  require(beta_min >= 0.0 && beta_min <= beta_max && beta_max < 1.0, "need 0 <= beta_min <= beta_max < 1");
  require(diffusion_hidden >= 1 && diffusion_depth >= 1 && time_dim >= 2 && time_dim % 2 == 0,
          "diffusion widths must be positive and time_dim even");
  for (const auto* d : {&diffusion, &finetune}) {
    require(d->epochs >= 1 && d->batch_size >= 1 && d->learning_rate > 0.0, "diffusion epochs, batch and rate must be positive");
    require(d->uncond_rate >= 0.0 && d->uncond_rate < 1.0, "uncond_rate must lie in [0, 1)");
  }
  require(guidance >= 0.0, "generation.guidance must be nonnegative");
  split.validate();
}

// Settings sized for the two-table toy corpus on one CPU core.
inline PipelineConfig desk_scale_config() {
  PipelineConfig c;
  c.aggregator.epochs = 1200;
  c.decoders.epochs = 600;
  c.diffusion_steps = 1000;
  c.diffusion_hidden = 256;
  c.diffusion_depth = 3;
  for (auto* d : {&c.diffusion, &c.finetune}) {
    d->batch_size = 64;
    d->learning_rate = 1e-3;
  }
  c.diffusion.epochs = 2000;
  c.finetune.epochs = 1000;
  return c;
}

}  // namespace crosstab
