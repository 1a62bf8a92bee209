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

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <unistd.h>

#include <json.hpp>

#include "crosstab/core/error.hpp"
#include "crosstab/nn/serialize.hpp"
#include "crosstab/pipeline/config.hpp"
#include "crosstab/tabular/csv.hpp"

namespace crosstab {

enum class TableRole { pretrain, finetune };

inline std::string to_string(TableRole r) { return r == TableRole::pretrain ? "pretrain" : "finetune"; }

// A table the bundle can generate for: its schema (no rows), the quantile
// transformers fitted on its data, and its category anchors.
struct RegisteredTable {
  TableDataset schema;
  TableRole role = TableRole::pretrain;
  ColumnTransformers transformers;
  TableAnchors anchors;
};

inline TableDataset schema_from_json(const nlohmann::json& j) {
  try {
    const std::string target = j.value("target", std::string{});
    std::vector<ColumnSchema> columns;
    for (const auto& c : j.at("columns")) {
      ColumnSchema col;
      col.name = c.at("name").get<std::string>();
      col.kind = parse_column_kind(c.at("kind").get<std::string>());
      if (col.is_categorical()) col.categories = c.at("categories").get<std::vector<std::string>>();
      col.target = col.name == target;
      columns.push_back(std::move(col));
    }
    TableDataset t(j.at("metadata").get<std::string>(), std::move(columns));
    t.set_name(j.value("name", std::string{}));
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("malformed table schema: ") + e.what());
  }
}

std::shared_ptr<const TextEncoder> make_text_encoder(const std::string& spec);

struct CheckpointBundle {
  static constexpr int kFormatVersion = 1;

  PipelineConfig config;
  std::shared_ptr<const TextEncoder> text;
  std::shared_ptr<const NumberEncoder> number_encoder;
  AggregatorNet aggregator;
  Decoders decoders;
  std::map<std::string, PlainDecoder> plain_decoders;  // keyed by table key
  std::vector<RegisteredTable> tables;
  std::optional<DiffusionNet> diffusion_pretrained;
  LatentStandardizer standardizer_pretrained;
  std::optional<DiffusionNet> diffusion_finetuned;
  LatentStandardizer standardizer_finetuned;
  std::map<std::string, std::vector<double>> curves;

  NoiseSchedule schedule() const {
    return build_schedule(config.diffusion_steps, config.schedule, config.beta_min, config.beta_max);
  }

  EpsNetShape diffusion_shape() const {
    EpsNetShape s;
    s.latent_dim = aggregator.output_dim();
    s.condition_dim = condition_width(config.condition, text->dim(), aggregator.output_dim());
    s.hidden = config.diffusion_hidden;
    s.depth = config.diffusion_depth;
    s.time_dim = config.time_dim;
    return s;
  }

  // Finetune entries shadow pretraining entries of the same name.
  const RegisteredTable& table(const std::string& name) const {
    const RegisteredTable* found = nullptr;
    for (const auto& t : tables) {
      if (t.schema.name() != name) continue;
      if (!found || t.role == TableRole::finetune) found = &t;
    }
    if (!found) throw ConfigError("bundle has no table named '" + name + "'");
    return *found;
  }

  const RegisteredTable* finetune_table() const {
    for (const auto& t : tables) {
      if (t.role == TableRole::finetune) return &t;
    }
    return nullptr;
  }

  static std::string key(const RegisteredTable& t) { return to_string(t.role) + ":" + t.schema.name(); }

  // Digest of every text embedding the bundle depends on.
  std::string text_digest() const {
    std::uint64_t h = fnv1a64(text->identity());
    auto mix = [&](const std::string& s) {
      const nn::RowVectorF v = text->encode(s);
      h = fnv1a64(std::string_view(reinterpret_cast<const char*>(v.data()), sizeof(float) * v.size()), h);
    };
    for (const auto& t : tables) {
      mix(t.schema.metadata());
      for (const auto& c : t.schema.columns()) {
        mix(c.name);
        for (const auto& cat : c.categories) mix(cat);
      }
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
  }
};

inline std::shared_ptr<const TextEncoder> make_text_encoder(const std::string& spec) {
  if (spec == "hashed") return make_default_text_encoder();
  return std::make_shared<CachedTextEncoder>(
      std::make_shared<PrecomputedTextEncoder>(PrecomputedTextEncoder::load(spec)));
}

namespace detail {

inline std::string plain_file(std::size_t i) { return "plain_decoder_" + std::to_string(i) + ".bin"; }

}  // namespace detail

// Writes the bundle as a directory: manifest.json plus one binary weight
// file per network. The directory appears atomically under `dir`.
inline void save_bundle(const CheckpointBundle& b, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  const fs::path target = fs::absolute(dir);
  if (!target.parent_path().empty()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp-" + std::to_string(::getpid());
  fs::remove_all(tmp);
  fs::create_directories(tmp);
  try {
    nlohmann::json m;
    m["format"] = "crosstab-checkpoint";
    m["version"] = CheckpointBundle::kFormatVersion;
    m["config"] = config_to_json(b.config);
    m["text_encoder"] = {{"identity", b.text->identity()}, {"digest", b.text_digest()}};
    m["condition_mode"] = std::string(to_string(b.config.condition));
    m["decoder_input_order"] = {"metadata", "column_name", "latent"};
    m["schedule"] = {{"steps", b.config.diffusion_steps},
                     {"kind", std::string(to_string(b.config.schedule))},
                     {"beta_min", b.config.beta_min},
                     {"beta_max", b.config.beta_max}};
    nlohmann::json weights = nlohmann::json::object();
    nn::save_weights<float>(*b.number_encoder, (tmp / "number_autoencoder.bin").string());
    nn::save_weights<float>(b.aggregator, (tmp / "aggregator.bin").string());
    nn::save_weights<float>(b.decoders.categorical, (tmp / "decoder_categorical.bin").string());
    nn::save_weights<float>(b.decoders.numerical, (tmp / "decoder_numerical.bin").string());
    weights["number_autoencoder"] = "number_autoencoder.bin";
    weights["aggregator"] = "aggregator.bin";
    weights["decoder_categorical"] = "decoder_categorical.bin";
    weights["decoder_numerical"] = "decoder_numerical.bin";
    if (b.diffusion_pretrained) {
      nn::save_weights<float>(*b.diffusion_pretrained, (tmp / "diffusion_pretrained.bin").string());
      weights["diffusion_pretrained"] = "diffusion_pretrained.bin";
      m["standardizer_pretrained"] = b.standardizer_pretrained.to_json();
    }
    if (b.diffusion_finetuned) {
      nn::save_weights<float>(*b.diffusion_finetuned, (tmp / "diffusion_finetuned.bin").string());
      weights["diffusion_finetuned"] = "diffusion_finetuned.bin";
      m["standardizer_finetuned"] = b.standardizer_finetuned.to_json();
    }
    m["weights"] = weights;
    nlohmann::json tables = nlohmann::json::array();
    for (std::size_t i = 0; i < b.tables.size(); ++i) {
      const RegisteredTable& t = b.tables[i];
      nlohmann::json entry{{"role", to_string(t.role)},
                           {"schema", schema_to_json(t.schema)},
                           {"transformers", transformers_to_json(t.transformers)},
                           {"anchors", anchors_to_json(t.anchors)}};
      auto plain = b.plain_decoders.find(CheckpointBundle::key(t));
      if (plain != b.plain_decoders.end()) {
        nn::save_weights<float>(plain->second, (tmp / detail::plain_file(i)).string());
        entry["plain_decoder"] = {{"file", detail::plain_file(i)}, {"hidden", plain->second.hidden()}};
      }
      tables.push_back(std::move(entry));
    }
    m["tables"] = tables;
    {
      std::ofstream out(tmp / "manifest.json");
      out << m.dump(2) << '\n';
      if (!out) throw CheckpointError("cannot write manifest in " + tmp.string());
    }
    {
      std::ofstream out(tmp / "curves.json");
      out << nlohmann::json(b.curves).dump() << '\n';
    }
    const fs::path old = target.string() + ".old-" + std::to_string(::getpid());
    const bool replace = fs::exists(target);
    if (replace) fs::rename(target, old);
    fs::rename(tmp, target);
    if (replace) fs::remove_all(old);
  } catch (...) {
    std::error_code ec;
    fs::remove_all(tmp, ec);
    throw;
  }
}

inline CheckpointBundle load_bundle(const std::filesystem::path& dir,
                                    std::shared_ptr<const TextEncoder> text = nullptr) {
  namespace fs = std::filesystem;
  const fs::path manifest = dir / "manifest.json";
  if (!fs::exists(manifest)) throw CheckpointError("no checkpoint manifest in " + dir.string());
  nlohmann::json m;
  try {
    std::ifstream in(manifest);
    m = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("unreadable manifest " + manifest.string() + ": " + e.what());
  }
  if (m.value("format", std::string{}) != "crosstab-checkpoint") {
    throw CheckpointError(manifest.string() + " is not a checkpoint manifest");
  }
  if (m.value("version", 0) != CheckpointBundle::kFormatVersion) {
    throw CheckpointError("unsupported checkpoint version " + m.value("version", nlohmann::json()).dump());
  }
  const std::vector<std::string> order = m.at("decoder_input_order").get<std::vector<std::string>>();
  if (order != std::vector<std::string>{"metadata", "column_name", "latent"}) {
    throw CheckpointError("checkpoint decoders expect a different input order");
  }

  CheckpointBundle b;
  b.config = config_from_json(m.at("config"));
  b.text = text ? std::move(text) : make_text_encoder(b.config.text_encoder);
  if (b.text->identity() != m.at("text_encoder").at("identity").get<std::string>()) {
    throw CheckpointError("checkpoint was trained with text encoder '" +
                          m.at("text_encoder").at("identity").get<std::string>() + "', not '" +
                          b.text->identity() + "'");
  }
  auto path = [&](const std::string& file) { return (dir / file).string(); };

  Rng init(0);
  NumberAutoencoderShape ae_shape = b.config.autoencoder.shape;
  ae_shape.code = b.text->dim();
  auto ae = std::make_shared<NumberEncoder>(ae_shape, init);
  nn::load_weights<float>(*ae, path("number_autoencoder.bin"));
  b.number_encoder = ae;
  b.aggregator = make_aggregator(0, b.text->dim());
  nn::load_weights<float>(b.aggregator, path("aggregator.bin"));
  b.decoders = make_decoders(0, b.text->dim(), b.aggregator.output_dim());
  nn::load_weights<float>(b.decoders.categorical, path("decoder_categorical.bin"));
  nn::load_weights<float>(b.decoders.numerical, path("decoder_numerical.bin"));
  const auto& weights = m.at("weights");
  if (weights.contains("diffusion_pretrained")) {
    b.diffusion_pretrained = make_diffusion_net(b.diffusion_shape(), 0);
    nn::load_weights<float>(*b.diffusion_pretrained, path("diffusion_pretrained.bin"));
    b.standardizer_pretrained = LatentStandardizer::from_json(m.at("standardizer_pretrained"));
  }
  if (weights.contains("diffusion_finetuned")) {
    b.diffusion_finetuned = make_diffusion_net(b.diffusion_shape(), 0);
    nn::load_weights<float>(*b.diffusion_finetuned, path("diffusion_finetuned.bin"));
    b.standardizer_finetuned = LatentStandardizer::from_json(m.at("standardizer_finetuned"));
  }
  for (const auto& entry : m.at("tables")) {
    RegisteredTable t;
    t.schema = schema_from_json(entry.at("schema"));
    t.role = entry.at("role").get<std::string>() == "finetune" ? TableRole::finetune : TableRole::pretrain;
    t.transformers = transformers_from_json(entry.at("transformers"));
    t.anchors = anchors_from_json(entry.at("anchors"));
    if (entry.contains("plain_decoder")) {
      Rng rng(0);
      PlainDecoder plain(t.schema.columns(), b.aggregator.output_dim(),
                         entry.at("plain_decoder").at("hidden").get<nn::Index>(), rng);
      nn::load_weights<float>(plain, path(entry.at("plain_decoder").at("file").get<std::string>()));
      b.plain_decoders.emplace(CheckpointBundle::key(t), std::move(plain));
    }
    b.tables.push_back(std::move(t));
  }
  if (fs::exists(dir / "curves.json")) {
    std::ifstream in(dir / "curves.json");
    b.curves = nlohmann::json::parse(in).get<std::map<std::string, std::vector<double>>>();
  }
  const std::string digest = m.at("text_encoder").at("digest").get<std::string>();
  if (b.text_digest() != digest) {
    throw CheckpointError("text embeddings differ from those recorded in the checkpoint (digest " + digest + ")");
  }
  return b;
}

}  // namespace crosstab
