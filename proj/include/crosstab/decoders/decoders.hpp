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
#include <functional>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "crosstab/aggregator/aggregator.hpp"
#include "crosstab/core/log.hpp"
#include "crosstab/decoders/category_loss.hpp"
#include "crosstab/decoders/cell_decoder.hpp"
#include "crosstab/nn/optim.hpp"
#include "crosstab/tabular/batches.hpp"

namespace crosstab {

constexpr nn::Index kCellDim = 128;

struct Decoders {
  CellDecoder<float> categorical;
  CellDecoder<float> numerical;

  template <typename V>
  void visit(V&& v, const std::string& prefix) {
    categorical.visit(v, nn::join_name(prefix, "categorical"));
    numerical.visit(v, nn::join_name(prefix, "numerical"));
  }
  template <typename V>
  void visit(V&& v, const std::string& prefix) const {
    categorical.visit(v, nn::join_name(prefix, "categorical"));
    numerical.visit(v, nn::join_name(prefix, "numerical"));
  }
};

inline CellDecoderShape decoder_shape(bool scalar_head, nn::Index text_dim = kTextDim,
                                      nn::Index latent_dim = kLatentDim) {
  CellDecoderShape s;
  s.text_dim = text_dim;
  s.latent_dim = latent_dim;
  s.dim = kCellDim;
  s.scalar_head = scalar_head;
  return s;
}

inline Decoders make_decoders(std::uint64_t seed, nn::Index text_dim = kTextDim,
                              nn::Index latent_dim = kLatentDim) {
  Rng cat_rng(derive_seed(seed, "decoder-categorical"));
  Rng num_rng(derive_seed(seed, "decoder-numerical"));
  return {CellDecoder<float>(decoder_shape(false, text_dim, latent_dim), cat_rng),
          CellDecoder<float>(decoder_shape(true, text_dim, latent_dim), num_rng)};
}

// ---------------------------------------------------------------------------
// Anchors

struct ColumnAnchors {
  std::vector<std::string> categories;
  nn::MatF vectors;  // one row per category, in category order
};

using TableAnchors = std::map<std::string, ColumnAnchors>;
using AnchorSet = std::map<std::string, TableAnchors>;

// Aggregated 3-token sequences [e_m, e_c, e_p], one row per category of column c.
inline nn::MatF category_latents(const AggregatorNet& net, const EmbeddedTable& table, std::size_t c) {
  const nn::MatF& cats = table.category_embeddings(c);
  nn::MatF tokens(3 * cats.rows(), table.width());
  for (nn::Index p = 0; p < cats.rows(); ++p) {
    tokens.row(3 * p) = table.metadata_embedding();
    tokens.row(3 * p + 1) = table.name_embedding(c);
    tokens.row(3 * p + 2) = cats.row(p);
  }
  return net.forward(tokens, 3);
}

inline TableAnchors build_anchors(const Decoders& decoders, const AggregatorNet& net,
                                  const EmbeddedTable& table) {
  TableAnchors out;
  for (std::size_t c = 0; c < table.column_count(); ++c) {
    const ColumnSchema& col = table.table().column(c);
    if (!col.is_categorical()) continue;
    const nn::MatF v = category_latents(net, table, c);
    ColumnAnchors anchors;
    anchors.categories = col.categories;
    anchors.vectors = decoders.categorical.forward(table.metadata_embedding(), table.name_embedding(c), v);
    out.emplace(col.name, std::move(anchors));
  }
  return out;
}

inline nlohmann::json anchors_to_json(const TableAnchors& anchors) {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& [name, a] : anchors) {
    nlohmann::json rows = nlohmann::json::array();
    for (nn::Index r = 0; r < a.vectors.rows(); ++r) {
      rows.push_back(std::vector<float>(a.vectors.row(r).begin(), a.vectors.row(r).end()));
    }
    out[name] = {{"categories", a.categories}, {"vectors", rows}};
  }
  return out;
}

inline TableAnchors anchors_from_json(const nlohmann::json& j) {
  TableAnchors out;
  for (const auto& [name, entry] : j.items()) {
    ColumnAnchors a;
    a.categories = entry.at("categories").get<std::vector<std::string>>();
    const auto& rows = entry.at("vectors");
    if (rows.size() != a.categories.size()) {
      throw CheckpointError("anchor count does not match categories for column '" + name + "'");
    }
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto values = rows[r].get<std::vector<float>>();
      if (r == 0) a.vectors.resize(static_cast<nn::Index>(rows.size()), static_cast<nn::Index>(values.size()));
      if (static_cast<nn::Index>(values.size()) != a.vectors.cols()) {
        throw CheckpointError("ragged anchor vectors for column '" + name + "'");
      }
      a.vectors.row(static_cast<nn::Index>(r)) = Eigen::Map<const nn::RowVectorF>(values.data(), a.vectors.cols());
    }
    out.emplace(name, std::move(a));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Decoding

struct CategoryDecision {
  std::size_t index = 0;
  bool tie = false;
};

// Nearest anchor by cosine similarity; ties resolve to the earliest category.
inline CategoryDecision decode_categorical(std::span<const float> z, const ColumnAnchors& anchors) {
  if (anchors.vectors.rows() == 0) throw Error("cannot decode against an empty anchor set");
  if (static_cast<nn::Index>(z.size()) != anchors.vectors.cols()) {
    throw Error("cell vector width does not match anchors");
  }
  const Eigen::Map<const nn::RowVectorF> q(z.data(), static_cast<nn::Index>(z.size()));
  const double qn = q.norm();
  CategoryDecision best;
  double best_score = -std::numeric_limits<double>::infinity();
  for (nn::Index p = 0; p < anchors.vectors.rows(); ++p) {
    const double an = anchors.vectors.row(p).norm();
    const double score = (qn > 0.0 && an > 0.0) ? q.dot(anchors.vectors.row(p)) / (qn * an) : 0.0;
    if (score > best_score) {
      best_score = score;
      best.index = static_cast<std::size_t>(p);
      best.tie = false;
    } else if (score == best_score) {
      best.tie = true;
    }
  }
  return best;
}

inline double decode_numerical(double quantile, const QuantileTransformer& transformer) {
  return transformer.inverse(std::clamp(quantile, 0.0, 1.0));
}

struct DecodedRows {
  TableDataset table;
  std::size_t ties = 0;
};

// Decodes latent rows into the requested columns of `context`'s schema.
inline DecodedRows decode_rows(const Decoders& decoders, const TableAnchors& anchors,
                               const EmbeddedTable& context, const nn::MatF& latents,
                               std::span<const std::size_t> columns) {
  std::vector<ColumnSchema> schema;
  for (std::size_t c : columns) schema.push_back(context.table().column(c));
  DecodedRows out{TableDataset(context.table().metadata(), schema), 0};
  out.table.set_name(context.table().name());
  const auto n = static_cast<std::size_t>(latents.rows());
  std::vector<std::vector<double>> cells(columns.size(), std::vector<double>(n));
  for (std::size_t k = 0; k < columns.size(); ++k) {
    const std::size_t c = columns[k];
    const ColumnSchema& col = context.table().column(c);
    if (n == 0) continue;
    if (col.is_categorical()) {
      const auto found = anchors.find(col.name);
      if (found == anchors.end()) throw Error("no anchors for column '" + col.name + "'");
      const nn::MatF z = decoders.categorical.forward(context.metadata_embedding(), context.name_embedding(c), latents);
      for (std::size_t i = 0; i < n; ++i) {
        const nn::RowVectorF zi = z.row(static_cast<nn::Index>(i));
        const CategoryDecision d = decode_categorical(std::span<const float>(zi.data(), zi.size()), found->second);
        cells[k][i] = static_cast<double>(d.index);
        out.ties += d.tie ? 1 : 0;
      }
    } else {
      const nn::MatF u = decoders.numerical.forward(context.metadata_embedding(), context.name_embedding(c), latents);
      const QuantileTransformer& qt = context.transformers().at(col.name);
      for (std::size_t i = 0; i < n; ++i) cells[k][i] = decode_numerical(u(static_cast<nn::Index>(i), 0), qt);
    }
  }
  std::vector<double> row(columns.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < columns.size(); ++k) row[k] = cells[k][i];
    out.table.add_encoded_row(row);
  }
  return out;
}

inline std::vector<Value> decode_row(const Decoders& decoders, const TableAnchors& anchors,
                                     const EmbeddedTable& context, const nn::RowVectorF& latent,
                                     std::span<const std::size_t> columns) {
  const DecodedRows decoded = decode_rows(decoders, anchors, context, nn::MatF(latent), columns);
  std::vector<Value> out;
  for (std::size_t k = 0; k < columns.size(); ++k) out.push_back(decoded.table.value(0, k));
  return out;
}

// ---------------------------------------------------------------------------
// Training

// Frozen-aggregator latents of every row: the full row and, per column, the
// row with that cell masked.
struct DecoderLatents {
  nn::MatF full;
  std::vector<nn::MatF> masked;
  std::vector<nn::MatF> categories;  // per column; empty for numerical columns
};

inline DecoderLatents decoder_latents(const AggregatorNet& net, const EmbeddedTable& table) {
  DecoderLatents out;
  std::vector<std::size_t> rows(table.row_count());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  const auto columns = table.all_columns();
  const std::size_t d = columns.size();
  out.full = aggregate_rows(net, table, rows, columns);
  for (std::size_t c = 0; c < d; ++c) {
    MaskFlags mask(rows.size() * d, 0);
    for (std::size_t r = 0; r < rows.size(); ++r) mask[r * d + c] = 1;
    out.masked.push_back(aggregate_rows(net, table, rows, columns, mask));
    out.categories.push_back(table.table().column(c).is_categorical() ? category_latents(net, table, c)
                                                                      : nn::MatF());
  }
  return out;
}

struct DecoderTraining {
  std::size_t epochs = 1200;
  std::size_t batch_size = 128;
  double learning_rate = 5e-4;
  double final_lr_fraction = 0.0;
  CategoryLossOptions category_loss;
  bool align_anchors = false;  // include the 3-token category sequences in the categorical loss
  double clip_norm = 1.0;
  std::uint64_t seed = 0;
};

struct DecoderStep {
  std::size_t epoch = 0, step = 0, table = 0;
  std::string categorical_column, numerical_column;
  double categorical = 0.0, numerical = 0.0;
  bool categorical_skipped = true, numerical_skipped = true;
  double learning_rate = 0.0;
};

struct DecoderResult {
  Decoders decoders;
  std::vector<DecoderStep> curve;

  // Mean of `field` over the non-skipped steps of one epoch.
  double epoch_mean(std::size_t epoch, double DecoderStep::*field, bool DecoderStep::*skipped) const {
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& s : curve) {
      if (s.epoch == epoch && !(s.*skipped)) {
        sum += s.*field;
        ++count;
      }
    }
    return count ? sum / static_cast<double>(count) : std::numeric_limits<double>::quiet_NaN();
  }
};

inline void write_decoder_curve(std::ostream& out, const std::vector<DecoderStep>& curve) {
  out << "epoch,step,table,categorical_column,categorical,numerical_column,numerical\n";
  for (const auto& s : curve) {
    out << s.epoch << ',' << s.step << ',' << s.table << ',' << csv_escape(s.categorical_column) << ',';
    if (!s.categorical_skipped) out << format_number(s.categorical);
    out << ',' << csv_escape(s.numerical_column) << ',';
    if (!s.numerical_skipped) out << format_number(s.numerical);
    out << '\n';
  }
}

inline DecoderResult train_decoders(std::span<const EmbeddedTable> tables, const AggregatorNet& net,
                                    const DecoderTraining& opt,
                                    const std::function<void(const DecoderStep&)>& on_step = {}) {
  if (tables.empty()) throw ConfigError("decoder training needs at least one table");
  DecoderResult result{make_decoders(opt.seed, tables.front().width(), net.output_dim()), {}};
  std::vector<DecoderLatents> latents;
  std::vector<std::size_t> rows, cols;
  for (const auto& t : tables) {
    latents.push_back(decoder_latents(net, t));
    rows.push_back(t.row_count());
    cols.push_back(t.column_count());
  }
  PretrainBatchStream stream(rows, cols, opt.batch_size, 0.0, derive_seed(opt.seed, "decoder-batches"));
  Rng rng(derive_seed(opt.seed, "decoder-train"));

  nn::AdamOptions adam_opt;
  adam_opt.clip_norm = opt.clip_norm;
  nn::Adam<float> cat_adam(nn::parameters_of<float>(result.decoders.categorical), adam_opt);
  nn::Adam<float> num_adam(nn::parameters_of<float>(result.decoders.numerical), adam_opt);
  const std::size_t per_epoch = stream.batches_per_epoch();
  const std::size_t total_steps = per_epoch * opt.epochs;
  auto pick = [&rng](const std::vector<std::size_t>& v) {
    return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
  };

  for (std::size_t step = 0; step < total_steps; ++step) {
    const TrainingBatch batch = stream.next();
    const EmbeddedTable& et = tables[batch.table];
    const DecoderLatents& lat = latents[batch.table];
    const std::size_t b = batch.rows.size();
    DecoderStep record;
    record.epoch = step / per_epoch;
    record.step = step;
    record.table = batch.table;
    record.learning_rate = nn::cosine_lr(opt.learning_rate, step, total_steps, opt.final_lr_fraction);

    std::vector<std::size_t> categorical, numerical;
    for (std::size_t c = 0; c < et.column_count(); ++c) {
      const ColumnSchema& col = et.table().column(c);
      if (col.is_numerical()) {
        numerical.push_back(c);
      } else {
        const auto& codes = et.table().codes(c);
        std::vector<int> seen;
        for (std::size_t r : batch.rows) seen.push_back(static_cast<int>(codes[r]));
        if (has_two_categories(seen)) categorical.push_back(c);
      }
    }

    if (!categorical.empty()) {
      const std::size_t c = pick(categorical);
      const auto& codes = et.table().codes(c);
      const nn::MatF& anchors = lat.categories[c];
      const std::size_t extra = opt.align_anchors ? static_cast<std::size_t>(anchors.rows()) : 0;
      nn::MatF v(static_cast<nn::Index>(2 * b + extra), lat.full.cols());
      std::vector<int> labels(2 * b + extra);
      for (std::size_t i = 0; i < b; ++i) {
        const auto r = static_cast<nn::Index>(batch.rows[i]);
        v.row(static_cast<nn::Index>(i)) = lat.full.row(r);
        v.row(static_cast<nn::Index>(b + i)) = lat.masked[c].row(r);
        labels[i] = labels[b + i] = static_cast<int>(codes[batch.rows[i]]);
      }
      for (std::size_t p = 0; p < extra; ++p) {
        v.row(static_cast<nn::Index>(2 * b + p)) = anchors.row(static_cast<nn::Index>(p));
        labels[2 * b + p] = static_cast<int>(p);
      }
      CellDecoder<float>::Cache cache;
      const nn::MatF z = result.decoders.categorical.forward(et.metadata_embedding(), et.name_embedding(c), v, &cache);
      nn::MatF grad;
      record.categorical = category_loss(z, labels, opt.category_loss, &grad);
      record.categorical_skipped = false;
      record.categorical_column = et.table().column(c).name;
      cat_adam.zero_grad();
      result.decoders.categorical.backward(cache, grad);
      cat_adam.step(record.learning_rate);
    }

    if (!numerical.empty()) {
      const std::size_t c = pick(numerical);
      nn::MatF v(static_cast<nn::Index>(2 * b), lat.full.cols());
      nn::MatF target(static_cast<nn::Index>(2 * b), 1);
      for (std::size_t i = 0; i < b; ++i) {
        const auto r = static_cast<nn::Index>(batch.rows[i]);
        v.row(static_cast<nn::Index>(i)) = lat.full.row(r);
        v.row(static_cast<nn::Index>(b + i)) = lat.masked[c].row(r);
        target(static_cast<nn::Index>(i), 0) = target(static_cast<nn::Index>(b + i), 0) = et.unit(batch.rows[i], c);
      }
      CellDecoder<float>::Cache cache;
      const nn::MatF pred = result.decoders.numerical.forward(et.metadata_embedding(), et.name_embedding(c), v, &cache);
      const nn::MatF diff = pred - target;
      record.numerical = static_cast<double>(diff.squaredNorm()) / static_cast<double>(diff.rows());
      record.numerical_skipped = false;
      record.numerical_column = et.table().column(c).name;
      num_adam.zero_grad();
      result.decoders.numerical.backward(cache, diff * (2.0f / static_cast<float>(diff.rows())));
      num_adam.step(record.learning_rate);
    }
    if (!std::isfinite(record.categorical) || !std::isfinite(record.numerical)) {
      throw TrainingError("decoders", "non-finite loss at step " + std::to_string(step));
    }
    result.curve.push_back(record);
    if (on_step) on_step(record);
  }
  if (!result.curve.empty()) {
    logger()->info("decoders: {} steps, categorical {:.4f} -> {:.4f}, numerical {:.4f} -> {:.4f}", total_steps,
                   result.epoch_mean(0, &DecoderStep::categorical, &DecoderStep::categorical_skipped),
                   result.epoch_mean(opt.epochs - 1, &DecoderStep::categorical, &DecoderStep::categorical_skipped),
                   result.epoch_mean(0, &DecoderStep::numerical, &DecoderStep::numerical_skipped),
                   result.epoch_mean(opt.epochs - 1, &DecoderStep::numerical, &DecoderStep::numerical_skipped));
  }
  return result;
}

}  // namespace crosstab
