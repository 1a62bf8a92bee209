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
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "crosstab/core/error.hpp"
#include "crosstab/core/random.hpp"
#include "crosstab/embedding/number_autoencoder.hpp"
#include "crosstab/embedding/quantile.hpp"
#include "crosstab/embedding/text_encoder.hpp"
#include "crosstab/tabular/dataset.hpp"

namespace crosstab {

inline constexpr float kMaskValue = -1.0f;

// Row-major rows x columns flags; nonzero marks a masked value slot.
using MaskFlags = std::vector<std::uint8_t>;

// Interleaved row embedding: metadata, then (name, value) per column.
struct EmbeddingSequence {
  nn::MatF tokens;           // (2D + 1) x width
  std::vector<bool> masked;  // one flag per value slot

  std::size_t column_count() const { return masked.size(); }
  nn::Index length() const { return tokens.rows(); }
  auto metadata() const { return tokens.row(0); }
  auto name(std::size_t i) const { return tokens.row(static_cast<nn::Index>(1 + 2 * i)); }
  auto value(std::size_t i) const { return tokens.row(static_cast<nn::Index>(2 + 2 * i)); }

  void mask(std::size_t i) {
    tokens.row(static_cast<nn::Index>(2 + 2 * i)).setConstant(kMaskValue);
    masked.at(i) = true;
  }
};

inline float number_to_unit(const ColumnTransformers& transformers, const std::string& column,
                            double x) {
  auto it = transformers.find(column);
  if (it == transformers.end()) throw DataError("no fitted transformer for column '" + column + "'");
  return static_cast<float>(it->second.transform(x));
}

inline EmbeddingSequence embed_row(std::span<const Value> row, std::span<const ColumnSchema> schema,
                                   const std::string& metadata, const TextEncoder& text,
                                   const NumberEncoder& numbers,
                                   const ColumnTransformers& transformers) {
  if (row.size() != schema.size()) throw DataError("row width does not match schema");
  const std::size_t d = schema.size();
  EmbeddingSequence seq{nn::MatF(static_cast<nn::Index>(2 * d + 1), text.dim()),
                        std::vector<bool>(d, false)};
  seq.tokens.row(0) = text.encode(metadata);
  for (std::size_t i = 0; i < d; ++i) {
    const ColumnSchema& col = schema[i];
    const auto slot = static_cast<nn::Index>(2 + 2 * i);
    seq.tokens.row(slot - 1) = text.encode(col.name);
    if (col.is_numerical()) {
      const double* x = std::get_if<double>(&row[i]);
      if (!x) throw DataError("column '" + col.name + "' expects a number");
      nn::MatF u(1, 1);
      u(0, 0) = number_to_unit(transformers, col.name, *x);
      seq.tokens.row(slot) = numbers.encode(u);
    } else {
      const std::string* s = std::get_if<std::string>(&row[i]);
      if (!s) throw DataError("column '" + col.name + "' expects a category");
      if (!col.category_index(*s)) {
        throw DataError("'" + *s + "' is not a category of column '" + col.name + "'");
      }
      seq.tokens.row(slot) = text.encode(*s);
    }
  }
  return seq;
}

inline std::size_t masked_count(std::size_t columns, double mask_frac) {
  const auto n = static_cast<std::size_t>(std::floor(mask_frac * static_cast<double>(columns)));
  return std::clamp<std::size_t>(n, 1, columns);
}

// Picks `count` distinct positions out of `columns`.
inline std::vector<std::size_t> sample_positions(std::size_t columns, std::size_t count, Rng& rng) {
  std::vector<std::size_t> order(columns);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, columns - 1);
    std::swap(order[i], order[pick(rng)]);
  }
  order.resize(count);
  return order;
}

// View 0 is the input; each further view masks an independent random subset.
inline std::vector<EmbeddingSequence> make_masked_views(const EmbeddingSequence& seq,
                                                        std::size_t views, double mask_frac,
                                                        std::uint64_t seed) {
  const std::size_t d = seq.column_count();
  if (d == 0) throw DataError("masked views need at least one column");
  Rng rng(derive_seed(seed, "masked-views"));
  std::vector<EmbeddingSequence> out{seq};
  const std::size_t count = masked_count(d, mask_frac);
  for (std::size_t k = 0; k < views; ++k) {
    EmbeddingSequence view = seq;
    for (std::size_t i : sample_positions(d, count, rng)) view.mask(i);
    out.push_back(std::move(view));
  }
  return out;
}

// A table with its text embeddings and quantile-space numbers precomputed,
// able to assemble token stacks for any rows, column order and mask.
class EmbeddedTable {
 public:
  EmbeddedTable(TableDataset table, const TextEncoder& text,
                std::shared_ptr<const NumberEncoder> numbers, ColumnTransformers transformers)
      : table_(std::move(table)),
        numbers_(std::move(numbers)),
        transformers_(std::move(transformers)),
        width_(text.dim()) {
    if (!numbers_) throw ConfigError("embedded table needs a number encoder");
    if (numbers_->code_dim() != width_) {
      throw ConfigError("number code width differs from text embedding width");
    }
    const std::size_t d = table_.column_count();
    metadata_ = text.encode(table_.metadata());
    names_.resize(static_cast<nn::Index>(d), width_);
    categories_.resize(d);
    units_.resize(d);
    for (std::size_t c = 0; c < d; ++c) {
      const ColumnSchema& col = table_.column(c);
      names_.row(static_cast<nn::Index>(c)) = text.encode(col.name);
      if (col.is_categorical()) {
        categories_[c].resize(static_cast<nn::Index>(col.categories.size()), width_);
        for (std::size_t k = 0; k < col.categories.size(); ++k) {
          categories_[c].row(static_cast<nn::Index>(k)) = text.encode(col.categories[k]);
        }
      } else {
        auto it = transformers_.find(col.name);
        if (it == transformers_.end()) {
          throw DataError("no fitted transformer for column '" + col.name + "'");
        }
        for (double x : table_.numbers(c)) units_[c].push_back(static_cast<float>(it->second.transform(x)));
      }
    }
    std::size_t numeric_cells = 0;
    for (const auto& u : units_) numeric_cells += u.size();
    if (numeric_cells * static_cast<std::size_t>(width_) <= kCodeCacheFloats) {
      codes_.resize(d);
      for (std::size_t c = 0; c < d; ++c) {
        if (units_[c].empty()) continue;
        codes_[c] = numbers_->encode(Eigen::Map<const nn::MatF>(
            units_[c].data(), static_cast<nn::Index>(units_[c].size()), 1));
      }
    }
  }

  // Numeric codes are kept in memory below this many floats, otherwise
  // recomputed per batch.
  static constexpr std::size_t kCodeCacheFloats = std::size_t{1} << 25;

  const TableDataset& table() const { return table_; }
  const ColumnTransformers& transformers() const { return transformers_; }
  const NumberEncoder& number_encoder() const { return *numbers_; }
  nn::Index width() const { return width_; }
  std::size_t row_count() const { return table_.row_count(); }
  std::size_t column_count() const { return table_.column_count(); }

  const nn::RowVectorF& metadata_embedding() const { return metadata_; }
  auto name_embedding(std::size_t c) const { return names_.row(static_cast<nn::Index>(c)); }
  const nn::MatF& category_embeddings(std::size_t c) const { return categories_.at(c); }
  // Quantile-space value of a numerical cell.
  float unit(std::size_t row, std::size_t col) const { return units_.at(col).at(row); }

  // Token stack for rows x columns, (rows * (2 * columns + 1)) x width. A row's
  // value slot is masked when masked[r * columns.size() + k] is nonzero.
  nn::MatF tokens(std::span<const std::size_t> rows, std::span<const std::size_t> columns,
                  std::span<const std::uint8_t> masked = {}) const {
    const std::size_t d = columns.size();
    const auto seq = static_cast<nn::Index>(2 * d + 1);
    if (!masked.empty() && masked.size() != rows.size() * d) {
      throw DataError("mask size does not match rows x columns");
    }
    nn::MatF out(static_cast<nn::Index>(rows.size()) * seq, width_);

    std::vector<nn::Index> numeric_slots;
    std::vector<float> numeric_units;
    for (std::size_t b = 0; b < rows.size(); ++b) {
      const nn::Index base = static_cast<nn::Index>(b) * seq;
      out.row(base) = metadata_;
      for (std::size_t k = 0; k < d; ++k) {
        const std::size_t c = columns[k];
        const nn::Index slot = base + static_cast<nn::Index>(2 + 2 * k);
        out.row(slot - 1) = names_.row(static_cast<nn::Index>(c));
        if (!masked.empty() && masked[b * d + k]) {
          out.row(slot).setConstant(kMaskValue);
        } else if (table_.column(c).is_categorical()) {
          out.row(slot) = categories_[c].row(table_.code(rows[b], c));
        } else if (!codes_.empty()) {
          out.row(slot) = codes_[c].row(static_cast<nn::Index>(rows[b]));
        } else {
          numeric_slots.push_back(slot);
          numeric_units.push_back(units_[c][rows[b]]);
        }
      }
    }
    if (!numeric_slots.empty()) {
      const nn::MatF codes = numbers_->encode(
          Eigen::Map<const nn::MatF>(numeric_units.data(), static_cast<nn::Index>(numeric_units.size()), 1));
      for (std::size_t i = 0; i < numeric_slots.size(); ++i) {
        out.row(numeric_slots[i]) = codes.row(static_cast<nn::Index>(i));
      }
    }
    return out;
  }

  std::vector<std::size_t> all_columns() const {
    std::vector<std::size_t> c(column_count());
    std::iota(c.begin(), c.end(), std::size_t{0});
    return c;
  }

  EmbeddingSequence sequence(std::size_t row) const {
    const std::vector<std::size_t> rows{row};
    const auto cols = all_columns();
    return {tokens(rows, cols), std::vector<bool>(cols.size(), false)};
  }

 private:
  TableDataset table_;
  std::shared_ptr<const NumberEncoder> numbers_;
  ColumnTransformers transformers_;
  nn::Index width_;
  nn::RowVectorF metadata_;
  nn::MatF names_;
  std::vector<nn::MatF> categories_;
  std::vector<std::vector<float>> units_;
  std::vector<nn::MatF> codes_;
};

}  // namespace crosstab
