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
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "crosstab/core/log.hpp"
#include "crosstab/pipeline/bundle.hpp"

namespace crosstab {

enum class Scheme { finetuned, cond_gen, cond_aug };

inline std::string to_string(Scheme s) {
  switch (s) {
    case Scheme::finetuned: return "finetuned";
    case Scheme::cond_gen: return "cond_gen";
    case Scheme::cond_aug: return "cond_aug";
  }
  return "?";
}

inline Scheme parse_scheme(const std::string& s) {
  if (s == "finetuned") return Scheme::finetuned;
  if (s == "cond_gen") return Scheme::cond_gen;
  if (s == "cond_aug") return Scheme::cond_aug;
  throw ConfigError("unknown scheme '" + s + "' (expected finetuned, cond_gen or cond_aug)");
}

struct GenerationRequest {
  Scheme scheme = Scheme::finetuned;
  std::string table;                 // empty: the fine-tune table
  std::size_t rows = 0;
  std::vector<std::string> columns;  // empty: the target table's columns
  std::uint64_t seed = 0;
};

namespace detail {

inline void require_decrease(const std::vector<double>& curve, const std::string& stage) {
  if (curve.size() < 2) return;
  const std::size_t w = std::max<std::size_t>(1, std::min<std::size_t>(10, curve.size() / 2));
  const double head = std::accumulate(curve.begin(), curve.begin() + static_cast<std::ptrdiff_t>(w), 0.0);
  const double tail = std::accumulate(curve.end() - static_cast<std::ptrdiff_t>(w), curve.end(), 0.0);
  if (!(tail < head)) throw TrainingError(stage, "training loss did not decrease");
}

inline std::vector<double> epoch_means(const std::vector<double>& values, const std::vector<std::size_t>& epochs,
                                       std::size_t count) {
  std::vector<double> sum(count, 0.0), n(count, 0.0);
  for (std::size_t i = 0; i < values.size(); ++i) {
    sum[epochs[i]] += values[i];
    n[epochs[i]] += 1.0;
  }
  std::vector<double> out;
  for (std::size_t e = 0; e < count; ++e) {
    if (n[e] > 0.0) out.push_back(sum[e] / n[e]);
  }
  return out;
}

}  // namespace detail

inline EmbeddedTable embed_table(const CheckpointBundle& b, const TableDataset& table,
                                 const ColumnTransformers& transformers) {
  return EmbeddedTable(table, *b.text, b.number_encoder, transformers);
}

// Conditions for every row of `table`: the metadata embedding, or in feature
// mode [e_m, v_plus, v_minus] with v_plus the row with its target value
// masked and v_minus the row with every value masked.
inline nn::MatF table_conditions(const CheckpointBundle& b, const EmbeddedTable& table) {
  const auto n = static_cast<nn::Index>(table.row_count());
  if (b.config.condition == ConditionMode::metadata) {
    return table.metadata_embedding().replicate(n, 1);
  }
  const auto target = table.table().target_index();
  if (!target) throw ConfigError("feature conditioning needs a target column in table '" + table.table().name() + "'");
  std::vector<std::size_t> rows(table.row_count());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  const auto cols = table.all_columns();
  const std::size_t d = cols.size();
  MaskFlags plus(rows.size() * d, 0), minus(rows.size() * d, 1);
  for (std::size_t r = 0; r < rows.size(); ++r) plus[r * d + *target] = 1;
  const nn::MatF vp = aggregate_rows(b.aggregator, table, rows, cols, plus);
  const nn::MatF vm = aggregate_rows(b.aggregator, table, rows, cols, minus);
  nn::MatF y(n, condition_width(ConditionMode::features, table.width(), b.aggregator.output_dim()));
  y << table.metadata_embedding().replicate(n, 1), vp, vm;
  return y;
}

// Registers `table` under `role`: fits its transformers and builds anchors.
inline RegisteredTable& register_table(CheckpointBundle& b, const TableDataset& table, TableRole role) {
  if (table.name().empty()) throw DataError("tables need a name to be registered");
  for (const auto& t : b.tables) {
    if (t.role == role && t.schema.name() == table.name()) {
      throw DataError("table '" + table.name() + "' is already registered for " + to_string(role));
    }
  }
  RegisteredTable entry;
  entry.schema = table.empty_like();
  entry.role = role;
  entry.transformers = fit_transformers(table);
  entry.anchors = build_anchors(b.decoders, b.aggregator, embed_table(b, entry.schema, entry.transformers));
  b.tables.push_back(std::move(entry));
  return b.tables.back();
}

// Stage order: number autoencoder (unless supplied), aggregator, decoders
// with the aggregator frozen, anchors, then diffusion on full-row latents.
inline CheckpointBundle pretrain(std::span<const TableDataset> tables, const PipelineConfig& cfg,
                                 std::shared_ptr<const NumberEncoder> number_encoder = nullptr,
                                 std::shared_ptr<const TextEncoder> text = nullptr) {
  if (tables.empty()) throw ConfigError("pre-training needs at least one table");
  cfg.validate();
  CheckpointBundle b;
  b.config = cfg;
  b.text = text ? std::move(text) : make_text_encoder(cfg.text_encoder);

  if (number_encoder) {
    if (number_encoder->code_dim() != b.text->dim()) throw ConfigError("number encoder width differs from text width");
    b.number_encoder = std::move(number_encoder);
  } else {
    NumberAutoencoderTraining ae = cfg.autoencoder;
    ae.seed = derive_seed(cfg.seed, "stage-autoencoder");
    ae.shape.code = b.text->dim();
    auto trained = pretrain_number_autoencoder(ae);
    b.curves["autoencoder"] = trained.losses;
    b.number_encoder = std::make_shared<NumberEncoder>(std::move(trained.model));
  }

  std::vector<EmbeddedTable> embedded;
  std::vector<ColumnTransformers> fitted;
  for (const auto& t : tables) {
    if (t.name().empty()) throw DataError("pre-training tables need names");
    fitted.push_back(fit_transformers(t));
    embedded.push_back(embed_table(b, t, fitted.back()));
  }

  AggregatorTraining agg = cfg.aggregator;
  agg.seed = derive_seed(cfg.seed, "stage-aggregator");
  AggregatorResult aggregated = train_aggregator(embedded, agg);
  {
    std::vector<double> values;
    std::vector<std::size_t> epochs;
    for (const auto& s : aggregated.curve) {
      values.push_back(s.total);
      epochs.push_back(s.epoch);
    }
    b.curves["aggregator"] = detail::epoch_means(values, epochs, agg.epochs);
    detail::require_decrease(b.curves["aggregator"], "aggregator");
  }
  b.aggregator = std::move(aggregated.net);

  DecoderTraining dec = cfg.decoders;
  dec.seed = derive_seed(cfg.seed, "stage-decoders");
  if (cfg.decoder_kind == DecoderKind::type_specific) {
    DecoderResult decoded = train_decoders(embedded, b.aggregator, dec);
    std::vector<double> cat, num;
    std::vector<std::size_t> cat_epoch, num_epoch;
    for (const auto& s : decoded.curve) {
      if (!s.categorical_skipped) {
        cat.push_back(s.categorical);
        cat_epoch.push_back(s.epoch);
      }
      if (!s.numerical_skipped) {
        num.push_back(s.numerical);
        num_epoch.push_back(s.epoch);
      }
    }
    b.curves["decoder_categorical"] = detail::epoch_means(cat, cat_epoch, dec.epochs);
    b.curves["decoder_numerical"] = detail::epoch_means(num, num_epoch, dec.epochs);
    detail::require_decrease(b.curves["decoder_categorical"], "decoders");
    detail::require_decrease(b.curves["decoder_numerical"], "decoders");
    b.decoders = std::move(decoded.decoders);
  } else {
    b.decoders = make_decoders(dec.seed, b.text->dim(), b.aggregator.output_dim());
  }

  for (std::size_t i = 0; i < tables.size(); ++i) {
    RegisteredTable& entry = register_table(b, tables[i], TableRole::pretrain);
    if (cfg.decoder_kind == DecoderKind::plain) {
      PlainDecoderTraining plain = cfg.plain_decoder;
      plain.seed = derive_seed(cfg.seed, "stage-plain-decoder", i);
      std::vector<double> curve;
      b.plain_decoders.emplace(CheckpointBundle::key(entry),
                               train_plain_decoder(embedded[i], aggregate_table(b.aggregator, embedded[i]), plain, &curve));
      detail::require_decrease(curve, "plain decoder");
      b.curves["plain_decoder:" + tables[i].name()] = std::move(curve);
    }
  }

  if (cfg.pretrain_diffusion) {
    std::vector<nn::MatF> parts, conds;
    nn::Index rows = 0;
    for (const auto& et : embedded) {
      parts.push_back(aggregate_table(b.aggregator, et));
      conds.push_back(table_conditions(b, et));
      rows += parts.back().rows();
    }
    nn::MatF latents(rows, b.aggregator.output_dim());
    nn::MatF conditions(rows, conds.front().cols());
    nn::Index at = 0;
    for (std::size_t i = 0; i < parts.size(); ++i) {
      latents.middleRows(at, parts[i].rows()) = parts[i];
      conditions.middleRows(at, parts[i].rows()) = conds[i];
      at += parts[i].rows();
    }
    b.standardizer_pretrained = LatentStandardizer::fit(latents);
    DiffusionNet net = make_diffusion_net(b.diffusion_shape(), derive_seed(cfg.seed, "stage-diffusion"));
    DiffusionTraining diff = cfg.diffusion;
    diff.seed = derive_seed(cfg.seed, "stage-diffusion");
    b.curves["diffusion"] = train_diffusion(net, b.standardizer_pretrained.apply(latents), conditions, b.schedule(), diff);
    detail::require_decrease(b.curves["diffusion"], "diffusion");
    b.diffusion_pretrained = std::move(net);
  }
  return b;
}

// Trains only the diffusion net on the fine-tune table. The aggregator,
// decoders and number encoder are carried over untouched.
inline CheckpointBundle finetune(const CheckpointBundle& pretrained, const TableDataset& table) {
  CheckpointBundle b = pretrained;
  if (b.finetune_table()) throw ConfigError("bundle is already fine-tuned");
  if (table.row_count() < 2) throw DataError("fine-tuning needs at least 2 rows");
  RegisteredTable& entry = register_table(b, table, TableRole::finetune);
  const EmbeddedTable et = embed_table(b, table, entry.transformers);
  const nn::MatF latents = aggregate_table(b.aggregator, et);
  if (b.config.decoder_kind == DecoderKind::plain) {
    PlainDecoderTraining plain = b.config.plain_decoder;
    plain.seed = derive_seed(b.config.seed, "finetune-plain-decoder");
    b.plain_decoders.emplace(CheckpointBundle::key(entry), train_plain_decoder(et, latents, plain));
  }
  b.standardizer_finetuned = LatentStandardizer::fit(latents);
  DiffusionNet net = b.diffusion_pretrained
                         ? *b.diffusion_pretrained
                         : make_diffusion_net(b.diffusion_shape(), derive_seed(b.config.seed, "finetune-diffusion-init"));
  DiffusionTraining opt = b.config.finetune;
  opt.seed = derive_seed(b.config.seed, "stage-finetune");
  b.curves["finetune"] =
      train_diffusion(net, b.standardizer_finetuned.apply(latents), table_conditions(b, et), b.schedule(), opt);
  detail::require_decrease(b.curves["finetune"], "finetune");
  b.diffusion_finetuned = std::move(net);
  return b;
}

// Resolves requested column names against the target table first, then the
// other registered tables (fine-tune entries first).
struct ResolvedColumns {
  TableDataset schema;
  ColumnTransformers transformers;
  TableAnchors anchors;
  bool stored_anchors_only = true;
};

inline ResolvedColumns resolve_columns(const CheckpointBundle& b, const RegisteredTable& target,
                                       const std::vector<std::string>& names) {
  std::vector<ColumnSchema> columns;
  ResolvedColumns out;
  for (const auto& name : names) {
    if (std::count(names.begin(), names.end(), name) > 1) throw ConfigError("column '" + name + "' requested twice");
    const RegisteredTable* source = target.schema.find_column(name) ? &target : nullptr;
    for (const auto& t : b.tables) {
      if (!source && t.role == TableRole::finetune && t.schema.find_column(name)) source = &t;
    }
    for (const auto& t : b.tables) {
      if (!source && t.schema.find_column(name)) source = &t;
    }
    if (!source) throw ConfigError("column '" + name + "' is unknown to the bundle");
    ColumnSchema col = source->schema.column(*source->schema.find_column(name));
    if (source != &target) col.target = false;
    if (col.is_numerical()) out.transformers.emplace(name, source->transformers.at(name));
    if (col.is_categorical() && source == &target) out.anchors.emplace(name, target.anchors.at(name));
    if (col.is_categorical() && source != &target) out.stored_anchors_only = false;
    columns.push_back(std::move(col));
  }
  out.schema = TableDataset(target.schema.metadata(), std::move(columns));
  out.schema.set_name(target.schema.name());
  return out;
}

// Samples latents for `rows` rows of the target table with the scheme's net.
inline nn::MatF sample_latents(const CheckpointBundle& b, const RegisteredTable& target, Scheme scheme,
                               std::size_t rows, std::uint64_t seed) {
  if (b.config.condition != ConditionMode::metadata) {
    throw ConfigError("feature-conditioned bundles generate per row; use the conditional classification path");
  }
  const bool tuned = scheme == Scheme::finetuned;
  const auto& net = tuned ? b.diffusion_finetuned : b.diffusion_pretrained;
  if (!net) {
    throw ConfigError(tuned ? "the finetuned scheme needs a fine-tuned bundle"
                            : "conditional schemes need a pre-trained diffusion net");
  }
  const LatentStandardizer& standardizer = tuned ? b.standardizer_finetuned : b.standardizer_pretrained;
  const nn::MatF condition = b.text->encode(target.schema.metadata());
  SamplingOptions opt;
  opt.seed = seed;
  opt.guidance = b.config.guidance;
  return standardizer.invert(sample(rows, condition, b.schedule(), *net, opt));
}

inline TableDataset decode_latents(const CheckpointBundle& b, const RegisteredTable& target,
                                   const std::vector<std::string>& names, const nn::MatF& latents) {
  ResolvedColumns resolved = resolve_columns(b, target, names);
  if (b.config.decoder_kind == DecoderKind::plain) {
    if (!resolved.stored_anchors_only) throw ConfigError("plain decoders cannot decode columns of other tables");
    for (const auto& name : names) {
      if (!target.schema.find_column(name)) throw ConfigError("plain decoders cannot decode column '" + name + "'");
    }
    const PlainDecoder& plain = b.plain_decoders.at(CheckpointBundle::key(target));
    TableDataset full = plain.decode(latents, target.schema.metadata(), target.transformers);
    full.set_name(target.schema.name());
    return full.select_columns(names);
  }
  const EmbeddedTable context = embed_table(b, resolved.schema, resolved.transformers);
  TableAnchors anchors = build_anchors(b.decoders, b.aggregator, context);
  for (auto& [name, a] : resolved.anchors) anchors[name] = a;  // stored anchors win for the target's own columns
  std::vector<std::size_t> all(names.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  DecodedRows decoded = decode_rows(b.decoders, anchors, context, latents, all);
  if (decoded.ties) logger()->warn("decoding: {} categorical ties resolved to the first category", decoded.ties);
  return std::move(decoded.table);
}

inline TableDataset generate(const CheckpointBundle& b, const GenerationRequest& req) {
  const RegisteredTable* target = nullptr;
  if (req.table.empty()) {
    target = b.finetune_table();
    if (!target) throw ConfigError("no target table given and the bundle has no fine-tune table");
  } else {
    target = &b.table(req.table);
  }
  std::vector<std::string> names = req.columns;
  const std::vector<std::string> own = target->schema.column_names();
  if (names.empty()) names = own;
  if (req.scheme == Scheme::cond_aug) {
    for (const auto& c : own) {
      if (std::find(names.begin(), names.end(), c) == names.end()) {
        throw ConfigError("cond_aug must request every column of the target table; '" + c + "' is missing");
      }
    }
  } else {
    for (const auto& c : names) {
      if (!target->schema.find_column(c)) {
        throw ConfigError("column '" + c + "' is not in table '" + target->schema.name() + "'; use cond_aug");
      }
    }
  }
  const nn::MatF latents = sample_latents(b, *target, req.scheme, req.rows, req.seed);
  return decode_latents(b, *target, names, latents);
}

}  // namespace crosstab
