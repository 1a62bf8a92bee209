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
#include <limits>
#include <vector>

#include "crosstab/evaluation/fidelity.hpp"
#include "crosstab/nn/tensor.hpp"

namespace crosstab {

// Mixed-type rows as points: numerical columns scaled by the reference
// table's range, categorical columns one-hot scaled by 1/sqrt(2) so a category
// flip moves a row by exactly 1. Distances are evaluated column by column as
// sum((a - b) / span)^2 plus one per differing category, which equals the L2
// distance of the encoded points without the rounding of the one-hot scale.
class MixedDistanceEncoding {
 public:
  struct Rows {
    nn::MatD numbers;  // raw values of the numerical columns
    Eigen::Matrix<std::uint32_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> codes;
    nn::Index size() const { return numbers.rows(); }
  };

  static MixedDistanceEncoding fit(const TableDataset& reference) {
    if (reference.row_count() == 0) throw DataError("distance encoding needs reference rows");
    MixedDistanceEncoding e;
    e.schema_ = reference.empty_like();
    for (std::size_t c = 0; c < reference.column_count(); ++c) {
      const ColumnSchema& col = reference.column(c);
      if (col.is_categorical()) {
        e.width_ += static_cast<nn::Index>(col.categories.size());
        continue;
      }
      const auto& v = reference.numbers(c);
      const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
      e.lo_.push_back(*lo);
      e.span_.push_back(*hi - *lo);
      e.width_ += 1;
    }
    return e;
  }

  nn::Index width() const { return width_; }

  Rows rows(const TableDataset& t) const {
    const auto match = match_columns(schema_, t);
    Rows out;
    const auto n = static_cast<nn::Index>(t.row_count());
    out.numbers.resize(n, static_cast<nn::Index>(span_.size()));
    out.codes.resize(n, static_cast<nn::Index>(schema_.column_count() - span_.size()));
    nn::Index num = 0, cat = 0;
    for (std::size_t c = 0; c < schema_.column_count(); ++c) {
      const bool categorical = schema_.column(c).is_categorical();
      for (std::size_t r = 0; r < t.row_count(); ++r) {
        const auto row = static_cast<nn::Index>(r);
        if (categorical) {
          out.codes(row, cat) = t.code(r, match[c]);
        } else {
          out.numbers(row, num) = t.number(r, match[c]);
        }
      }
      ++(categorical ? cat : num);
    }
    return out;
  }

  double squared_distance(const Rows& a, nn::Index i, const Rows& b, nn::Index j) const {
    double s = 0.0;
    for (nn::Index c = 0; c < a.numbers.cols(); ++c) {
      const double span = span_[static_cast<std::size_t>(c)];
      if (span > 0.0) {
        const double d = (a.numbers(i, c) - b.numbers(j, c)) / span;
        s += d * d;
      }
    }
    for (nn::Index c = 0; c < a.codes.cols(); ++c) s += a.codes(i, c) != b.codes(j, c) ? 1.0 : 0.0;
    return s;
  }

  // Explicit points, for inspection.
  nn::MatD encode(const TableDataset& t) const {
    const auto match = match_columns(schema_, t);
    nn::MatD out = nn::MatD::Zero(static_cast<nn::Index>(t.row_count()), width_);
    const double unit = 1.0 / std::sqrt(2.0);
    nn::Index offset = 0;
    std::size_t num = 0;
    for (std::size_t c = 0; c < schema_.column_count(); ++c) {
      const ColumnSchema& col = schema_.column(c);
      for (std::size_t r = 0; r < t.row_count(); ++r) {
        const auto row = static_cast<nn::Index>(r);
        if (col.is_categorical()) {
          out(row, offset + static_cast<nn::Index>(t.code(r, match[c]))) = unit;
        } else {
          out(row, offset) = span_[num] > 0.0 ? (t.number(r, match[c]) - lo_[num]) / span_[num] : 0.0;
        }
      }
      if (col.is_categorical()) {
        offset += static_cast<nn::Index>(col.categories.size());
      } else {
        ++offset;
        ++num;
      }
    }
    return out;
  }

 private:
  TableDataset schema_;
  std::vector<double> lo_, span_;
  nn::Index width_ = 0;
};

// Squared distance from each query row to its nearest pool row, and the index
// of the first pool row attaining it.
struct Nearest {
  std::vector<double> squared;
  std::vector<nn::Index> index;
};

inline Nearest nearest_rows(const MixedDistanceEncoding& enc, const MixedDistanceEncoding::Rows& queries,
                            const MixedDistanceEncoding::Rows& pool) {
  if (pool.size() == 0) throw DataError("nearest-neighbour pool is empty");
  Nearest out;
  for (nn::Index i = 0; i < queries.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    nn::Index arg = 0;
    for (nn::Index j = 0; j < pool.size(); ++j) {
      const double d = enc.squared_distance(queries, i, pool, j);
      if (d < best) {
        best = d;
        arg = j;
      }
    }
    out.squared.push_back(best);
    out.index.push_back(arg);
  }
  return out;
}

inline double median(std::vector<double> v) {
  if (v.empty()) throw DataError("median of an empty sample");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct DcrResult {
  std::vector<double> distances;
  double median = 0.0;
};

inline DcrResult dcr(const TableDataset& synth, const TableDataset& real_train, const MixedDistanceEncoding& enc) {
  DcrResult out;
  for (double d : nearest_rows(enc, enc.rows(synth), enc.rows(real_train)).squared) out.distances.push_back(std::sqrt(d));
  if (!out.distances.empty()) out.median = median(out.distances);
  return out;
}

enum class PctRule { nearest_member, pairwise };

// Share of synthetic rows closer to the test set. nearest_member asks whether
// the nearest row of train and test together is a test row; pairwise compares
// the nearest test distance with the nearest train distance. Ties count as
// train under both rules.
inline double pct(const TableDataset& synth, const TableDataset& real_train, const TableDataset& real_test,
                  const MixedDistanceEncoding& enc, PctRule rule = PctRule::nearest_member) {
  if (real_test.row_count() == 0) throw DataError("PCT needs test rows");
  if (synth.row_count() == 0) return 0.0;
  const auto s = enc.rows(synth);
  const auto train = enc.rows(real_train);
  const auto test = enc.rows(real_test);
  std::size_t closer = 0;
  if (rule == PctRule::pairwise) {
    const auto to_train = nearest_rows(enc, s, train);
    const auto to_test = nearest_rows(enc, s, test);
    for (std::size_t i = 0; i < to_train.squared.size(); ++i) closer += to_test.squared[i] < to_train.squared[i];
  } else {
    // Train rows come first in the pool, so a tie resolves to train.
    MixedDistanceEncoding::Rows pool;
    pool.numbers.resize(train.size() + test.size(), train.numbers.cols());
    pool.numbers.topRows(train.size()) = train.numbers;
    pool.numbers.bottomRows(test.size()) = test.numbers;
    pool.codes.resize(train.size() + test.size(), train.codes.cols());
    pool.codes.topRows(train.size()) = train.codes;
    pool.codes.bottomRows(test.size()) = test.codes;
    for (nn::Index j : nearest_rows(enc, s, pool).index) closer += j >= train.size();
  }
  return static_cast<double>(closer) / static_cast<double>(s.size());
}

}  // namespace crosstab
