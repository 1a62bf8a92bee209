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
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "crosstab/core/error.hpp"

namespace crosstab {

enum class ColumnKind { numerical, categorical };

inline std::string_view to_string(ColumnKind kind) {
  return kind == ColumnKind::numerical ? "numerical" : "categorical";
}

inline ColumnKind parse_column_kind(std::string_view text) {
  if (text == "numerical" || text == "numeric") return ColumnKind::numerical;
  if (text == "categorical") return ColumnKind::categorical;
  throw DataError("unknown column kind '" + std::string(text) + "'");
}

struct ColumnSchema {
  std::string name;
  ColumnKind kind = ColumnKind::numerical;
  std::vector<std::string> categories;  // categorical only, in schema order
  bool target = false;

  bool is_numerical() const { return kind == ColumnKind::numerical; }
  bool is_categorical() const { return kind == ColumnKind::categorical; }

  std::optional<std::uint32_t> category_index(std::string_view label) const {
    auto it = std::find(categories.begin(), categories.end(), label);
    if (it == categories.end()) return std::nullopt;
    return static_cast<std::uint32_t>(it - categories.begin());
  }

  void validate() const {
    if (name.empty()) throw DataError("column name must be nonempty");
    if (is_categorical() && categories.empty()) {
      throw DataError("categorical column '" + name + "' has no categories");
    }
    if (is_numerical() && !categories.empty()) {
      throw DataError("numerical column '" + name + "' must not list categories");
    }
  }

  bool operator==(const ColumnSchema&) const = default;
};

// A cell is either a number or the full category text.
using Value = std::variant<double, std::string>;

// Column-major mixed-type table with its describing metadata text.
// Immutable once built apart from add_row during construction.
class TableDataset {
 public:
  TableDataset() = default;
  TableDataset(std::string metadata, std::vector<ColumnSchema> columns)
      : metadata_(std::move(metadata)), schema_(std::move(columns)), data_(schema_.size()) {
    if (metadata_.empty()) throw DataError("table metadata text must be nonempty");
    std::size_t targets = 0;
    for (std::size_t i = 0; i < schema_.size(); ++i) {
      schema_[i].validate();
      targets += schema_[i].target ? 1 : 0;
      for (std::size_t j = 0; j < i; ++j) {
        if (schema_[j].name == schema_[i].name) {
          throw DataError("duplicate column name '" + schema_[i].name + "'");
        }
      }
    }
    if (targets > 1) throw DataError("at most one column may be the target");
  }

  const std::string& metadata() const { return metadata_; }
  const std::string& name() const { return name_; }
  void set_name(std::string name) { name_ = std::move(name); }

  std::size_t row_count() const { return rows_; }
  std::size_t column_count() const { return schema_.size(); }
  const std::vector<ColumnSchema>& columns() const { return schema_; }
  const ColumnSchema& column(std::size_t c) const { return schema_.at(c); }

  std::optional<std::size_t> find_column(std::string_view name) const {
    for (std::size_t c = 0; c < schema_.size(); ++c) {
      if (schema_[c].name == name) return c;
    }
    return std::nullopt;
  }
  std::size_t column_index(std::string_view name) const {
    auto c = find_column(name);
    if (!c) throw DataError("no column named '" + std::string(name) + "'");
    return *c;
  }
  std::optional<std::size_t> target_index() const {
    for (std::size_t c = 0; c < schema_.size(); ++c) {
      if (schema_[c].target) return c;
    }
    return std::nullopt;
  }

  double number(std::size_t row, std::size_t col) const { return data_[col].numbers.at(row); }
  std::uint32_t code(std::size_t row, std::size_t col) const { return data_[col].codes.at(row); }
  const std::string& label(std::size_t row, std::size_t col) const {
    return schema_[col].categories[code(row, col)];
  }
  Value value(std::size_t row, std::size_t col) const {
    if (schema_[col].is_numerical()) return number(row, col);
    return label(row, col);
  }
  const std::vector<double>& numbers(std::size_t col) const { return data_[col].numbers; }
  const std::vector<std::uint32_t>& codes(std::size_t col) const { return data_[col].codes; }

  void add_row(std::span<const Value> values) {
    if (values.size() != schema_.size()) {
      throw DataError("row has " + std::to_string(values.size()) + " values, expected " +
                      std::to_string(schema_.size()));
    }
    for (std::size_t c = 0; c < schema_.size(); ++c) {
      const ColumnSchema& col = schema_[c];
      if (col.is_numerical()) {
        const double* x = std::get_if<double>(&values[c]);
        if (!x) throw DataError("column '" + col.name + "' expects a number");
        data_[c].numbers.push_back(*x);
      } else {
        const std::string* s = std::get_if<std::string>(&values[c]);
        if (!s) throw DataError("column '" + col.name + "' expects a category");
        auto idx = col.category_index(*s);
        if (!idx) throw DataError("'" + *s + "' is not a category of column '" + col.name + "'");
        data_[c].codes.push_back(*idx);
      }
    }
    ++rows_;
  }

  // Typed fast path used by generators: numbers for numerical columns,
  // category codes (as double) for categorical ones.
  void add_encoded_row(std::span<const double> encoded) {
    if (encoded.size() != schema_.size()) throw DataError("encoded row width mismatch");
    for (std::size_t c = 0; c < schema_.size(); ++c) {
      if (schema_[c].is_numerical()) {
        data_[c].numbers.push_back(encoded[c]);
      } else {
        const auto code = static_cast<std::uint32_t>(encoded[c]);
        if (code >= schema_[c].categories.size()) throw DataError("category code out of range");
        data_[c].codes.push_back(code);
      }
    }
    ++rows_;
  }

  TableDataset select_rows(std::span<const std::size_t> rows) const {
    TableDataset out = empty_like();
    for (std::size_t c = 0; c < schema_.size(); ++c) {
      for (std::size_t r : rows) {
        if (schema_[c].is_numerical()) {
          out.data_[c].numbers.push_back(data_[c].numbers.at(r));
        } else {
          out.data_[c].codes.push_back(data_[c].codes.at(r));
        }
      }
    }
    out.rows_ = rows.size();
    return out;
  }

  TableDataset select_columns(std::span<const std::string> names) const {
    std::vector<ColumnSchema> cols;
    std::vector<std::size_t> idx;
    for (const auto& n : names) {
      idx.push_back(column_index(n));
      cols.push_back(schema_[idx.back()]);
    }
    TableDataset out(metadata_, std::move(cols));
    out.name_ = name_;
    for (std::size_t k = 0; k < idx.size(); ++k) out.data_[k] = data_[idx[k]];
    out.rows_ = rows_;
    return out;
  }

  TableDataset empty_like() const {
    TableDataset out(metadata_, schema_);
    out.name_ = name_;
    return out;
  }

  std::vector<std::string> column_names() const {
    std::vector<std::string> names;
    for (const auto& c : schema_) names.push_back(c.name);
    return names;
  }

  bool operator==(const TableDataset& other) const {
    return metadata_ == other.metadata_ && schema_ == other.schema_ && rows_ == other.rows_ &&
           data_ == other.data_;
  }

 private:
  struct ColumnData {
    std::vector<double> numbers;
    std::vector<std::uint32_t> codes;
    bool operator==(const ColumnData&) const = default;
  };

  std::string metadata_;
  std::string name_;
  std::vector<ColumnSchema> schema_;
  std::vector<ColumnData> data_;
  std::size_t rows_ = 0;
};

}  // namespace crosstab
