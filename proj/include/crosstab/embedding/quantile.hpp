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
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "crosstab/core/error.hpp"
#include "crosstab/tabular/dataset.hpp"

namespace crosstab {

// Piecewise-linear empirical CDF. Knot k sits at level k / (n - 1) and holds
// the matching sample quantile, so the fitted minimum maps to 0 and the
// maximum to 1. Values equal to a run of tied knots map to the middle of the
// run; values outside the fitted range are clamped.
class QuantileTransformer {
 public:
  static constexpr std::size_t kMaxReferences = 1000;

  QuantileTransformer() = default;

  static QuantileTransformer fit(std::span<const double> values,
                                 std::size_t max_references = kMaxReferences) {
    if (values.size() < 2) throw DataError("quantile fit needs at least 2 values");
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    if (!std::isfinite(sorted.front()) || !std::isfinite(sorted.back())) {
      throw DataError("quantile fit needs finite values");
    }
    if (sorted.front() == sorted.back()) throw DataError("cannot fit a quantile map to a constant column");
    const std::size_t n = std::min(std::max<std::size_t>(max_references, 2), sorted.size());
    QuantileTransformer q;
    q.knots_.resize(n);
    const double last = static_cast<double>(sorted.size() - 1);
    for (std::size_t k = 0; k < n; ++k) {
      const double pos = last * static_cast<double>(k) / static_cast<double>(n - 1);
      const auto lo = static_cast<std::size_t>(std::floor(pos));
      const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
      const double frac = pos - static_cast<double>(lo);
      q.knots_[k] = frac == 0.0 ? sorted[lo] : sorted[lo] + frac * (sorted[hi] - sorted[lo]);
    }
    q.knots_.front() = sorted.front();
    q.knots_.back() = sorted.back();
    return q;
  }

  bool fitted() const { return knots_.size() >= 2; }
  std::size_t n_reference() const { return knots_.size(); }
  const std::vector<double>& knots() const { return knots_; }
  double min() const { return knots_.front(); }
  double max() const { return knots_.back(); }

  double transform(double x) const {
    require_fitted();
    if (x <= knots_.front()) return 0.0;
    if (x >= knots_.back()) return 1.0;
    const auto first = std::lower_bound(knots_.begin(), knots_.end(), x);
    const auto past = std::upper_bound(first, knots_.end(), x);
    const auto a = static_cast<std::size_t>(first - knots_.begin());
    const auto b = static_cast<std::size_t>(past - knots_.begin());
    if (a != b) return 0.5 * (level(a) + level(b - 1));
    const double lo = knots_[b - 1];
    const double hi = knots_[b];
    return level(b - 1) + (x - lo) / (hi - lo) * (level(b) - level(b - 1));
  }

  double inverse(double u) const {
    require_fitted();
    if (!(u > 0.0)) return knots_.front();
    if (u >= 1.0) return knots_.back();
    const double pos = u * static_cast<double>(knots_.size() - 1);
    const auto k = std::min(static_cast<std::size_t>(pos), knots_.size() - 2);
    const double frac = pos - static_cast<double>(k);
    return knots_[k] + frac * (knots_[k + 1] - knots_[k]);
  }

  nlohmann::json to_json() const { return {{"knots", knots_}}; }

  static QuantileTransformer from_json(const nlohmann::json& j) {
    QuantileTransformer q;
    q.knots_ = j.at("knots").get<std::vector<double>>();
    if (q.knots_.size() < 2 || !std::is_sorted(q.knots_.begin(), q.knots_.end()) ||
        q.knots_.front() == q.knots_.back()) {
      throw DataError("invalid quantile knots");
    }
    return q;
  }

  bool operator==(const QuantileTransformer&) const = default;

 private:
  double level(std::size_t k) const {
    return static_cast<double>(k) / static_cast<double>(knots_.size() - 1);
  }
  void require_fitted() const {
    if (!fitted()) throw DataError("quantile transformer used before fitting");
  }

  std::vector<double> knots_;
};

// One fitted map per numerical column, keyed by column name.
using ColumnTransformers = std::map<std::string, QuantileTransformer>;

inline ColumnTransformers fit_transformers(const TableDataset& table) {
  ColumnTransformers out;
  for (std::size_t c = 0; c < table.column_count(); ++c) {
    const auto& col = table.column(c);
    if (!col.is_numerical()) continue;
    try {
      out.emplace(col.name, QuantileTransformer::fit(table.numbers(c)));
    } catch (const DataError& e) {
      throw DataError("column '" + col.name + "': " + e.what());
    }
  }
  return out;
}

inline nlohmann::json transformers_to_json(const ColumnTransformers& t) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [name, q] : t) j[name] = q.to_json();
  return j;
}

inline ColumnTransformers transformers_from_json(const nlohmann::json& j) {
  ColumnTransformers out;
  for (const auto& [name, q] : j.items()) out.emplace(name, QuantileTransformer::from_json(q));
  return out;
}

}  // namespace crosstab
