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
#include <string>
#include <vector>

#include "crosstab/core/error.hpp"
#include "crosstab/core/log.hpp"
#include "crosstab/tabular/dataset.hpp"

namespace crosstab {

// Columns of `synth` matched to `real` by name, with equal kinds and, for
// categorical columns, equal category lists.
inline std::vector<std::size_t> match_columns(const TableDataset& real, const TableDataset& synth) {
  if (real.column_count() != synth.column_count()) throw DataError("real and synthetic schemas differ in width");
  std::vector<std::size_t> out;
  for (const auto& col : real.columns()) {
    const auto idx = synth.find_column(col.name);
    if (!idx) throw DataError("synthetic table lacks column '" + col.name + "'");
    const ColumnSchema& other = synth.column(*idx);
    if (other.kind != col.kind || other.categories != col.categories) {
      throw DataError("column '" + col.name + "' differs between real and synthetic schemas");
    }
    out.push_back(*idx);
  }
  return out;
}

// Two-sample Kolmogorov-Smirnov statistic.
inline double ks_statistic(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw DataError("KS statistic needs nonempty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double best = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == x) ++i;
    while (j < b.size() && b[j] == x) ++j;
    best = std::max(best, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return best;
}

inline std::vector<double> category_frequencies(const TableDataset& t, std::size_t c) {
  std::vector<double> p(t.column(c).categories.size(), 0.0);
  for (auto code : t.codes(c)) p[code] += 1.0;
  for (auto& x : p) x /= static_cast<double>(t.row_count());
  return p;
}

inline double total_variation(const std::vector<double>& p, const std::vector<double>& q) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return 0.5 * s;
}

struct ColumnFidelity {
  double score = 0.0;
  std::map<std::string, double> columns;
};

// Mean over columns of 1 - KS (numerical, raw values) or 1 - TVD (categorical).
inline ColumnFidelity column_fidelity(const TableDataset& real, const TableDataset& synth) {
  const auto match = match_columns(real, synth);
  if (real.row_count() == 0 || synth.row_count() == 0) throw DataError("column fidelity needs rows on both sides");
  ColumnFidelity out;
  double sum = 0.0;
  for (std::size_t c = 0; c < real.column_count(); ++c) {
    const double s = real.column(c).is_numerical()
                         ? 1.0 - ks_statistic(real.numbers(c), synth.numbers(match[c]))
                         : 1.0 - total_variation(category_frequencies(real, c), category_frequencies(synth, match[c]));
    out.columns[real.column(c).name] = s;
    sum += s;
  }
  out.score = real.column_count() ? sum / static_cast<double>(real.column_count()) : 1.0;
  return out;
}

inline std::optional<double> pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

// Percentile bins for a numerical column: edges at the deciles of `reference`.
inline std::vector<double> decile_edges(std::vector<double> reference) {
  std::sort(reference.begin(), reference.end());
  std::vector<double> edges;
  for (int k = 1; k < 10; ++k) {
    const double pos = k / 10.0 * static_cast<double>(reference.size() - 1);
    const auto lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, reference.size() - 1);
    edges.push_back(reference[lo] + (pos - static_cast<double>(lo)) * (reference[hi] - reference[lo]));
  }
  return edges;
}

inline std::vector<std::size_t> bin_values(const std::vector<double>& x, const std::vector<double>& edges) {
  std::vector<std::size_t> out;
  for (double v : x) out.push_back(static_cast<std::size_t>(std::upper_bound(edges.begin(), edges.end(), v) - edges.begin()));
  return out;
}

inline std::vector<std::size_t> category_codes(const TableDataset& t, std::size_t c) {
  return {t.codes(c).begin(), t.codes(c).end()};
}

// Sum over joint cells of |p_real(a, b) - p_synth(a, b)|, in [0, 2].
inline double joint_difference(const std::vector<std::size_t>& ra, const std::vector<std::size_t>& rb,
                               const std::vector<std::size_t>& sa, const std::vector<std::size_t>& sb) {
  std::map<std::pair<std::size_t, std::size_t>, double> diff;
  for (std::size_t i = 0; i < ra.size(); ++i) diff[{ra[i], rb[i]}] += 1.0 / static_cast<double>(ra.size());
  for (std::size_t i = 0; i < sa.size(); ++i) diff[{sa[i], sb[i]}] -= 1.0 / static_cast<double>(sa.size());
  double s = 0.0;
  for (const auto& [cell, d] : diff) s += std::abs(d);
  return s;
}

struct CorrelationFidelity {
  double score = 1.0;
  std::map<std::string, double> pairs;  // "a|b" -> difference term in [0, 2]
  std::size_t skipped = 0;
};

// 1 - mean(term) / 2 over column pairs. Numerical pairs use |r_real - r_synth|;
// pairs with a categorical side use the joint-table difference, binning the
// numerical side at the real column's deciles.
inline CorrelationFidelity correlation_fidelity(const TableDataset& real, const TableDataset& synth) {
  const auto match = match_columns(real, synth);
  if (real.column_count() < 2) throw DataError("correlation fidelity needs at least 2 columns");
  CorrelationFidelity out;
  auto discrete = [&](const TableDataset& t, std::size_t c, std::size_t real_c) {
    if (t.column(c).is_categorical()) return category_codes(t, c);
    return bin_values(t.numbers(c), decile_edges(real.numbers(real_c)));
  };
  double sum = 0.0;
  std::size_t used = 0;
  for (std::size_t a = 0; a < real.column_count(); ++a) {
    for (std::size_t b = a + 1; b < real.column_count(); ++b) {
      const std::string key = real.column(a).name + "|" + real.column(b).name;
      double term = 0.0;
      if (real.column(a).is_numerical() && real.column(b).is_numerical()) {
        const auto rr = pearson(real.numbers(a), real.numbers(b));
        const auto rs = pearson(synth.numbers(match[a]), synth.numbers(match[b]));
        if (!rr || !rs) {
          logger()->info("correlation fidelity: pair {} skipped, a column is constant", key);
          ++out.skipped;
          continue;
        }
        term = std::abs(*rr - *rs);
      } else {
        term = joint_difference(discrete(real, a, a), discrete(real, b, b), discrete(synth, match[a], a),
                                discrete(synth, match[b], b));
      }
      out.pairs[key] = term;
      sum += term;
      ++used;
    }
  }
  out.score = used ? 1.0 - 0.5 * sum / static_cast<double>(used) : 1.0;
  return out;
}

// Empirical Wasserstein-1 distance: integral of |F_a - F_b|.
inline double wasserstein1(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw DataError("Wasserstein distance needs nonempty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::vector<double> all = a;
  all.insert(all.end(), b.begin(), b.end());
  std::sort(all.begin(), all.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  double total = 0.0;
  std::size_t i = 0, j = 0;
  for (std::size_t k = 0; k + 1 < all.size(); ++k) {
    while (i < a.size() && a[i] <= all[k]) ++i;
    while (j < b.size() && b[j] <= all[k]) ++j;
    total += std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb) * (all[k + 1] - all[k]);
  }
  return total;
}

// Jensen-Shannon divergence in bits.
inline double jensen_shannon(const std::vector<double>& p, const std::vector<double>& q) {
  auto kl = [](const std::vector<double>& x, const std::vector<double>& m) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x[i] > 0.0) s += x[i] * std::log2(x[i] / m[i]);
    }
    return s;
  };
  std::vector<double> m(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) m[i] = 0.5 * (p[i] + q[i]);
  return 0.5 * kl(p, m) + 0.5 * kl(q, m);
}

struct DistributionDistances {
  double wasserstein = 0.0;  // mean over numerical columns
  double jensen_shannon = 0.0;  // mean over categorical columns
  std::map<std::string, double> columns;
};

inline DistributionDistances ws_js(const TableDataset& real, const TableDataset& synth) {
  const auto match = match_columns(real, synth);
  DistributionDistances out;
  std::size_t nw = 0, nj = 0;
  for (std::size_t c = 0; c < real.column_count(); ++c) {
    double d = 0.0;
    if (real.column(c).is_numerical()) {
      d = wasserstein1(real.numbers(c), synth.numbers(match[c]));
      out.wasserstein += d;
      ++nw;
    } else {
      d = jensen_shannon(category_frequencies(real, c), category_frequencies(synth, match[c]));
      out.jensen_shannon += d;
      ++nj;
    }
    out.columns[real.column(c).name] = d;
  }
  if (nw) out.wasserstein /= static_cast<double>(nw);
  if (nj) out.jensen_shannon /= static_cast<double>(nj);
  return out;
}

}  // namespace crosstab
