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
#include <functional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "crosstab/aggregator/losses.hpp"
#include "crosstab/core/log.hpp"
#include "crosstab/embedding/sequence.hpp"
#include "crosstab/nn/optim.hpp"
#include "crosstab/nn/resampler.hpp"
#include "crosstab/tabular/batches.hpp"
#include "crosstab/tabular/csv.hpp"

namespace crosstab {

inline constexpr nn::Index kLatentDim = 128;

using AggregatorNet = nn::PerceiverResampler<float>;

inline nn::ResamplerOptions aggregator_shape(nn::Index text_dim = kTextDim) {
  nn::ResamplerOptions opt;
  opt.input_dim = text_dim;
  opt.dim = kLatentDim;
  opt.depth = 4;
  opt.heads = 4;
  opt.ff_mult = 4;
  return opt;
}

inline AggregatorNet make_aggregator(std::uint64_t seed, nn::Index text_dim = kTextDim) {
  Rng rng(derive_seed(seed, "aggregator-init"));
  return AggregatorNet(aggregator_shape(text_dim), rng);
}

inline nn::RowVectorF aggregate(const AggregatorNet& net, const EmbeddingSequence& seq) {
  return net.forward(seq.tokens, seq.length()).row(0);
}

// Latent rows for `rows` of a table over `columns`, evaluated in chunks.
inline nn::MatF aggregate_rows(const AggregatorNet& net, const EmbeddedTable& table,
                               std::span<const std::size_t> rows,
                               std::span<const std::size_t> columns,
                               std::span<const std::uint8_t> masked = {}, std::size_t chunk = 256) {
  const auto seq = static_cast<nn::Index>(2 * columns.size() + 1);
  nn::MatF out(static_cast<nn::Index>(rows.size()), net.output_dim());
  for (std::size_t start = 0; start < rows.size(); start += chunk) {
    const std::size_t count = std::min(chunk, rows.size() - start);
    const auto part = rows.subspan(start, count);
    const auto mask = masked.empty() ? masked : masked.subspan(start * columns.size(), count * columns.size());
    out.middleRows(static_cast<nn::Index>(start), static_cast<nn::Index>(count)) =
        net.forward(table.tokens(part, columns, mask), seq);
  }
  return out;
}

inline nn::MatF aggregate_table(const AggregatorNet& net, const EmbeddedTable& table) {
  std::vector<std::size_t> rows(table.row_count());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return aggregate_rows(net, table, rows, table.all_columns());
}

struct AggregatorTraining {
  std::size_t epochs = 1200;
  std::size_t batch_size = 128;
  double learning_rate = 5e-4;
  double final_lr_fraction = 0.0;
  double temperature = 0.1;
  double magnitude_weight = 2.0;
  std::size_t views = 1;  // corrupted views per row, on top of the full row
  double mask_fraction = 0.5;
  double drop_rate = 0.15;
  double clip_norm = 1.0;
  std::uint64_t seed = 0;
};

struct AggregatorStep {
  std::size_t epoch = 0;
  std::size_t step = 0;
  std::size_t table = 0;
  double contrastive = 0.0;
  double magnitude = 0.0;
  double total = 0.0;
  double learning_rate = 0.0;
  bool magnitude_skipped = false;
};

struct AggregatorResult {
  AggregatorNet net;
  std::vector<AggregatorStep> curve;

  // Mean of one loss component over an epoch.
  double epoch_mean(std::size_t epoch, double AggregatorStep::*field) const {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& s : curve) {
      if (s.epoch == epoch) {
        sum += s.*field;
        ++n;
      }
    }
    return n ? sum / static_cast<double>(n) : 0.0;
  }
};

inline void write_loss_curve(std::ostream& out, const std::vector<AggregatorStep>& curve) {
  out << "epoch,step,table,contrastive,magnitude,total,learning_rate\n";
  for (const auto& s : curve) {
    out << s.epoch << ',' << s.step << ',' << s.table << ',' << format_number(s.contrastive) << ','
        << format_number(s.magnitude) << ',' << format_number(s.total) << ','
        << format_number(s.learning_rate) << '\n';
  }
}

namespace detail {

// One triplet per batch row on the chosen column, ordered so that the far
// row is at least as distant in value as the near row.
inline std::vector<TripletIndex> sample_triplets(const TableDataset& table,
                                                 std::span<const std::size_t> rows,
                                                 std::size_t column, double range, Rng& rng) {
  std::vector<TripletIndex> out;
  const std::size_t b = rows.size();
  if (b < 3) return out;
  std::uniform_int_distribution<std::size_t> pick(0, b - 2);
  std::uniform_int_distribution<std::size_t> pick2(0, b - 3);
  for (std::size_t i = 0; i < b; ++i) {
    std::size_t j = pick(rng);
    if (j >= i) ++j;
    std::size_t k = pick2(rng);
    for (std::size_t skip : {std::min(i, j), std::max(i, j)}) {
      if (k >= skip) ++k;
    }
    MagnitudeTriplet x{table.number(rows[i], column), table.number(rows[j], column),
                       table.number(rows[k], column)};
    if (std::abs(x.anchor - x.far) < std::abs(x.anchor - x.near)) {
      std::swap(j, k);
      std::swap(x.near, x.far);
    }
    out.push_back({i, j, k, magnitude_margin(x, range)});
  }
  return out;
}

}  // namespace detail

inline AggregatorResult train_aggregator(std::span<const EmbeddedTable> tables,
                                         const AggregatorTraining& opt,
                                         const std::function<void(const AggregatorStep&)>& on_step = {}) {
  if (tables.empty()) throw ConfigError("aggregator training needs at least one table");
  if (opt.views < 1) throw ConfigError("aggregator training needs at least one corrupted view");
  if (opt.magnitude_weight < 0.0) throw ConfigError("magnitude weight must be nonnegative");
  AggregatorResult result{make_aggregator(opt.seed, tables.front().width()), {}};
  std::vector<std::size_t> rows, cols;
  for (const auto& t : tables) {
    rows.push_back(t.row_count());
    cols.push_back(t.column_count());
  }
  PretrainBatchStream stream(rows, cols, opt.batch_size, opt.drop_rate, opt.seed);
  Rng rng(derive_seed(opt.seed, "aggregator-train"));

  std::vector<std::vector<double>> ranges;
  for (const auto& t : tables) {
    std::vector<double> r(t.column_count(), 0.0);
    for (std::size_t c = 0; c < t.column_count(); ++c) {
      if (!t.table().column(c).is_numerical()) continue;
      const auto& v = t.table().numbers(c);
      const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
      r[c] = *hi - *lo;
    }
    ranges.push_back(std::move(r));
  }

  nn::AdamOptions adam_opt;
  adam_opt.clip_norm = opt.clip_norm;
  nn::Adam<float> adam(nn::parameters_of<float>(result.net), adam_opt);
  const std::size_t per_epoch = stream.batches_per_epoch();
  const std::size_t total_steps = per_epoch * opt.epochs;
  const std::size_t views = opt.views + 1;
  std::size_t skipped = 0;

  for (std::size_t step = 0; step < total_steps; ++step) {
    const TrainingBatch batch = stream.next();
    const EmbeddedTable& et = tables[batch.table];
    const std::size_t b = batch.rows.size();
    const std::size_t d = batch.columns.size();

    std::vector<std::size_t> stacked_rows;
    MaskFlags mask(views * b * d, 0);
    for (std::size_t k = 0; k < views; ++k) {
      for (std::size_t i = 0; i < b; ++i) {
        stacked_rows.push_back(batch.rows[i]);
        if (k == 0) continue;
        const std::size_t base = (k * b + i) * d;
        for (std::size_t p : sample_positions(d, masked_count(d, opt.mask_fraction), rng)) mask[base + p] = 1;
      }
    }
    const nn::MatF tokens = et.tokens(stacked_rows, batch.columns, mask);
    AggregatorNet::Cache cache;
    const nn::MatF latents = result.net.forward(tokens, static_cast<nn::Index>(2 * d + 1), &cache);

    nn::MatF grad;
    AggregatorStep record;
    record.epoch = step / per_epoch;
    record.step = step;
    record.table = batch.table;
    record.contrastive = contrastive_loss(latents, b, views, opt.temperature, &grad);

    std::vector<std::size_t> numeric;
    for (std::size_t c : batch.columns) {
      if (et.table().column(c).is_numerical() && ranges[batch.table][c] > 0.0) numeric.push_back(c);
    }
    if (numeric.empty() || opt.magnitude_weight == 0.0 || b < 3) {
      record.magnitude_skipped = true;
      if (numeric.empty() && skipped++ == 0) {
        logger()->debug("aggregator: batch without numerical columns, magnitude term skipped");
      }
    } else {
      const std::size_t column = numeric[std::uniform_int_distribution<std::size_t>(0, numeric.size() - 1)(rng)];
      const auto triplets =
          detail::sample_triplets(et.table(), batch.rows, column, ranges[batch.table][column], rng);
      nn::MatF mag_grad = nn::MatF::Zero(latents.rows(), latents.cols());
      record.magnitude = magnitude_loss_batch(latents, triplets, &mag_grad);
      grad += mag_grad * static_cast<float>(opt.magnitude_weight);
    }
    record.total = record.contrastive + opt.magnitude_weight * record.magnitude;
    record.learning_rate = nn::cosine_lr(opt.learning_rate, step, total_steps, opt.final_lr_fraction);

    adam.zero_grad();
    result.net.backward(cache, grad, false);
    adam.step(record.learning_rate);
    result.curve.push_back(record);
    if (on_step) on_step(record);
  }
  if (!result.curve.empty()) {
    logger()->info("aggregator: {} steps, contrastive {:.4f} -> {:.4f}", total_steps,
                   result.epoch_mean(0, &AggregatorStep::contrastive),
                   result.epoch_mean(opt.epochs - 1, &AggregatorStep::contrastive));
  }
  return result;
}

}  // namespace crosstab
