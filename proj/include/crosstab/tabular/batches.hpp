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
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "crosstab/core/error.hpp"
#include "crosstab/core/random.hpp"
#include "crosstab/tabular/dataset.hpp"

namespace crosstab {

struct TrainingBatch {
  std::size_t table = 0;
  std::vector<std::size_t> rows;
  // Retained columns in presentation order.
  std::vector<std::size_t> columns;
  std::vector<bool> dropped;
  bool with_replacement = false;
};

inline std::size_t dropped_column_count(std::size_t columns, double drop_rate) {
  if (columns == 0) return 0;
  const auto n = static_cast<std::size_t>(std::floor(drop_rate * static_cast<double>(columns)));
  return std::min(n, columns - 1);
}

// Endless stream of single-table batches. Each epoch shuffles every table's
// rows, cuts them into full batches, and interleaves the batches of all
// tables in random order. A table smaller than the batch contributes one
// batch drawn with replacement.
class PretrainBatchStream {
 public:
  PretrainBatchStream(std::vector<std::size_t> table_rows, std::vector<std::size_t> table_columns,
                      std::size_t batch_size, double drop_rate, std::uint64_t seed)
      : rows_(std::move(table_rows)),
        columns_(std::move(table_columns)),
        batch_size_(batch_size),
        drop_rate_(drop_rate),
        rng_(derive_seed(seed, "pretrain-batches")) {
    if (batch_size_ < 2) throw ConfigError("batch size must be at least 2");
    if (drop_rate_ < 0.0 || drop_rate_ >= 1.0) throw ConfigError("drop rate must lie in [0, 1)");
    if (rows_.empty() || rows_.size() != columns_.size()) {
      throw ConfigError("batch stream needs a row and column count per table");
    }
    for (std::size_t t = 0; t < rows_.size(); ++t) {
      if (rows_[t] == 0 || columns_[t] == 0) throw DataError("cannot batch an empty table");
    }
  }

  PretrainBatchStream(std::span<const TableDataset> tables, std::size_t batch_size,
                      double drop_rate, std::uint64_t seed)
      : PretrainBatchStream(row_counts(tables), column_counts(tables), batch_size, drop_rate,
                            seed) {}

  TrainingBatch next() {
    if (cursor_ == pending_.size()) refill();
    return std::move(pending_[cursor_++]);
  }

  std::size_t batches_per_epoch() const {
    std::size_t n = 0;
    for (std::size_t r : rows_) n += std::max<std::size_t>(1, r / batch_size_);
    return n;
  }

 private:
  static std::vector<std::size_t> row_counts(std::span<const TableDataset> tables) {
    std::vector<std::size_t> out;
    for (const auto& t : tables) out.push_back(t.row_count());
    return out;
  }
  static std::vector<std::size_t> column_counts(std::span<const TableDataset> tables) {
    std::vector<std::size_t> out;
    for (const auto& t : tables) out.push_back(t.column_count());
    return out;
  }

  void arrange_columns(TrainingBatch& b) {
    const std::size_t d = columns_[b.table];
    std::vector<std::size_t> order(d);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng_);
    const std::size_t drop = dropped_column_count(d, drop_rate_);
    b.dropped.assign(d, false);
    for (std::size_t k = 0; k < drop; ++k) b.dropped[order[k]] = true;
    b.columns.assign(order.begin() + static_cast<std::ptrdiff_t>(drop), order.end());
  }

  void refill() {
    pending_.clear();
    cursor_ = 0;
    for (std::size_t t = 0; t < rows_.size(); ++t) {
      const std::size_t n = rows_[t];
      if (n < batch_size_) {
        TrainingBatch b;
        b.table = t;
        b.with_replacement = true;
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        for (std::size_t i = 0; i < batch_size_; ++i) b.rows.push_back(pick(rng_));
        pending_.push_back(std::move(b));
        continue;
      }
      std::vector<std::size_t> order(n);
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::shuffle(order.begin(), order.end(), rng_);
      for (std::size_t start = 0; start + batch_size_ <= n; start += batch_size_) {
        TrainingBatch b;
        b.table = t;
        b.rows.assign(order.begin() + static_cast<std::ptrdiff_t>(start),
                      order.begin() + static_cast<std::ptrdiff_t>(start + batch_size_));
        pending_.push_back(std::move(b));
      }
    }
    std::shuffle(pending_.begin(), pending_.end(), rng_);
    for (auto& b : pending_) arrange_columns(b);
  }

  std::vector<std::size_t> rows_;
  std::vector<std::size_t> columns_;
  std::size_t batch_size_;
  double drop_rate_;
  Rng rng_;
  std::vector<TrainingBatch> pending_;
  std::size_t cursor_ = 0;
};

}  // namespace crosstab
