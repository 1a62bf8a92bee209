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
#include <string>
#include <vector>

#include <json.hpp>

#include "crosstab/core/error.hpp"
#include "crosstab/core/random.hpp"
#include "crosstab/tabular/dataset.hpp"

namespace crosstab {

struct SplitSpec {
  double train_frac = 0.70;
  double finetune_frac = 0.05;
  double test_frac = 0.25;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(train_frac > 0.0 && finetune_frac > 0.0 && test_frac > 0.0)) {
      throw ConfigError("split fractions must be positive");
    }
    if (std::abs(train_frac + finetune_frac + test_frac - 1.0) > 1e-9) {
      throw ConfigError("split fractions must sum to 1");
    }
  }
};

struct RowSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> finetune;
  std::vector<std::size_t> test;
};

struct DatasetSplit {
  TableDataset train;
  TableDataset finetune;
  TableDataset test;
  RowSplit rows;
};

// Finetune and test sizes are rounded; train takes whatever remains.
inline RowSplit split_rows(std::size_t n, const SplitSpec& spec) {
  spec.validate();
  if (n < 3) throw DataError("need at least 3 rows to split, got " + std::to_string(n));
  const auto finetune = static_cast<std::size_t>(std::llround(spec.finetune_frac * n));
  const auto test = static_cast<std::size_t>(std::llround(spec.test_frac * n));
  if (finetune == 0 || test == 0 || finetune + test >= n) {
    throw DataError("split of " + std::to_string(n) + " rows leaves an empty partition");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(spec.seed, "split-rows"));
  std::shuffle(order.begin(), order.end(), rng);

  RowSplit out;
  const std::size_t train = n - finetune - test;
  out.train.assign(order.begin(), order.begin() + train);
  out.finetune.assign(order.begin() + train, order.begin() + train + finetune);
  out.test.assign(order.begin() + train + finetune, order.end());
  for (auto* part : {&out.train, &out.finetune, &out.test}) std::sort(part->begin(), part->end());
  return out;
}

inline DatasetSplit split_dataset(const TableDataset& ds, const SplitSpec& spec) {
  RowSplit rows = split_rows(ds.row_count(), spec);
  DatasetSplit out{ds.select_rows(rows.train), ds.select_rows(rows.finetune),
                   ds.select_rows(rows.test), {}};
  out.rows = std::move(rows);
  return out;
}

inline nlohmann::json split_manifest(const RowSplit& rows, const SplitSpec& spec) {
  return {{"seed", spec.seed},
          {"fractions", {spec.train_frac, spec.finetune_frac, spec.test_frac}},
          {"train", rows.train},
          {"finetune", rows.finetune},
          {"test", rows.test}};
}

struct FeatureSplit {
  TableDataset set_a;
  TableDataset set_b;
};

// Predictors are shuffled and cut into halves of sizes ceil and floor of
// half the predictor count; the target joins both halves.
inline FeatureSplit split_features(const TableDataset& ds, std::uint64_t seed) {
  const auto target = ds.target_index();
  if (!target) throw DataError("feature split needs a target column");
  std::vector<std::string> predictors;
  for (std::size_t c = 0; c < ds.column_count(); ++c) {
    if (c != *target) predictors.push_back(ds.column(c).name);
  }
  if (predictors.size() < 2) throw DataError("feature split needs at least 2 predictors");
  Rng rng(derive_seed(seed, "split-features"));
  std::shuffle(predictors.begin(), predictors.end(), rng);
  const std::size_t half = (predictors.size() + 1) / 2;

  auto build = [&](std::size_t first, std::size_t last) {
    std::vector<std::string> keep(predictors.begin() + first, predictors.begin() + last);
    // Keep the original column order inside each subset.
    std::sort(keep.begin(), keep.end(), [&](const std::string& a, const std::string& b) {
      return ds.column_index(a) < ds.column_index(b);
    });
    keep.push_back(ds.column(*target).name);
    return ds.select_columns(keep);
  };
  return {build(0, half), build(half, predictors.size())};
}

}  // namespace crosstab
