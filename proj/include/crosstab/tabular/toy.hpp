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

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "crosstab/core/random.hpp"
#include "crosstab/tabular/dataset.hpp"

namespace crosstab {

struct BlobTableSpec {
  std::string metadata;
  std::string name;
  double center = 0.0;
  double spread = 1.0;
  double correlation = 0.6;
  std::size_t rows = 200;
};

// Two correlated Gaussian numerical columns around `center` and a binary
// label that is present exactly when the first column exceeds the center.
inline TableDataset make_blob_table(const BlobTableSpec& spec, std::uint64_t seed) {
  TableDataset t(spec.metadata, {{"biomarker level", ColumnKind::numerical, {}, false},
                                 {"inflammation score", ColumnKind::numerical, {}, false},
                                 {"diagnosis", ColumnKind::categorical, {"absent", "present"}, true}});
  t.set_name(spec.name);
  Rng rng(derive_seed(seed, "blob-table"));
  std::normal_distribution<double> n(0.0, 1.0);
  const double rho = spec.correlation;
  const double rest = std::sqrt(1.0 - rho * rho);
  for (std::size_t r = 0; r < spec.rows; ++r) {
    const double z1 = n(rng);
    const double z2 = rho * z1 + rest * n(rng);
    const double row[] = {spec.center + spec.spread * z1, spec.center + spec.spread * z2,
                          z1 > 0.0 ? 1.0 : 0.0};
    t.add_encoded_row(row);
  }
  return t;
}

inline std::vector<BlobTableSpec> toy_corpus_specs() {
  return {{"Outpatient cohort from the northern clinic screened for chronic inflammation",
           "north", 3.0, 1.0, 0.6, 200},
          {"Emergency admissions at the southern hospital with acute infection workup",
           "south", -3.0, 1.0, 0.6, 200}};
}

inline std::vector<TableDataset> make_toy_corpus(std::uint64_t seed) {
  std::vector<TableDataset> out;
  const auto specs = toy_corpus_specs();
  for (std::size_t i = 0; i < specs.size(); ++i) {
    out.push_back(make_blob_table(specs[i], derive_seed(seed, "toy-corpus", i)));
  }
  return out;
}

}  // namespace crosstab
