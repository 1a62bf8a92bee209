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

#include "crosstab/evaluation/tstr.hpp"
#include "crosstab/pipeline/pipeline.hpp"

namespace crosstab {

struct ConditionalClassification {
  ClassificationScores scores;
  std::size_t rows = 0;
};

// Treats feature-conditioned generation as a classifier: each test row's
// condition is built from its masked sequences, one latent is sampled per
// row, and the decoded target is compared with the truth.
inline ConditionalClassification cond_gen_classification(const CheckpointBundle& b, const TableDataset& test,
                                                         std::uint64_t seed, Scheme scheme = Scheme::cond_gen) {
  if (b.config.condition != ConditionMode::features) {
    throw ConfigError("conditional classification needs a feature-conditioned bundle");
  }
  const auto target = test.target_index();
  if (!target || !test.column(*target).is_categorical()) throw DataError("test table needs a categorical target");
  const RegisteredTable& entry = b.table(test.name());
  const EmbeddedTable et = embed_table(b, test, entry.transformers);
  const bool tuned = scheme == Scheme::finetuned;
  const auto& net = tuned ? b.diffusion_finetuned : b.diffusion_pretrained;
  if (!net) throw ConfigError("bundle lacks the diffusion net for scheme " + to_string(scheme));
  const LatentStandardizer& standardizer = tuned ? b.standardizer_finetuned : b.standardizer_pretrained;
  SamplingOptions opt;
  opt.seed = seed;
  opt.guidance = b.config.guidance;
  const nn::MatF latents =
      standardizer.invert(sample(test.row_count(), table_conditions(b, et), b.schedule(), *net, opt));
  const std::string name = test.column(*target).name;
  const TableDataset decoded = decode_latents(b, entry, {name}, latents);
  Labels truth, predicted;
  for (std::size_t r = 0; r < test.row_count(); ++r) {
    truth.push_back(static_cast<int>(test.code(r, *target)));
    predicted.push_back(static_cast<int>(decoded.code(r, 0)));
  }
  ConditionalClassification out;
  out.rows = test.row_count();
  if (out.rows) {
    out.scores = classification_scores(truth, predicted, static_cast<int>(test.column(*target).categories.size()));
  }
  return out;
}

}  // namespace crosstab
