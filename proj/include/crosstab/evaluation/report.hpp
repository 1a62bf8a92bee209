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

#include <iomanip>
#include <optional>
#include <sstream>
#include <string>

#include <json.hpp>

#include "crosstab/evaluation/fidelity.hpp"
#include "crosstab/evaluation/privacy.hpp"
#include "crosstab/evaluation/tstr.hpp"

namespace crosstab {

struct EvaluationOptions {
  std::uint64_t seed = 0;
  std::vector<std::string> classifiers = classifier_names();
  bool tstr = true;
  PctRule pct_rule = PctRule::nearest_member;
};

struct MetricReport {
  std::string dataset;
  std::uint64_t seed = 0;
  ColumnFidelity column;
  CorrelationFidelity correlation;
  std::optional<TstrResult> tstr;
  std::optional<DcrResult> dcr;
  std::optional<double> pct;
  DistributionDistances distances;

  nlohmann::json to_json() const {
    auto scores = [](const ClassificationScores& s) {
      return nlohmann::json{{"accuracy", s.accuracy}, {"macro_f1", s.macro_f1}, {"micro_f1", s.micro_f1}};
    };
    nlohmann::json j{{"dataset", dataset},
                     {"seed", seed},
                     {"column_fidelity", {{"score", column.score}, {"columns", column.columns}}},
                     {"correlation_fidelity",
                      {{"score", correlation.score}, {"pairs", correlation.pairs}, {"skipped", correlation.skipped}}},
                     {"wasserstein", {{"mean", distances.wasserstein}}},
                     {"jensen_shannon", {{"mean", distances.jensen_shannon}}},
                     {"distribution_columns", distances.columns}};
    if (tstr) {
      nlohmann::json models = nlohmann::json::array();
      for (const auto& c : tstr->classifiers) {
        nlohmann::json m = scores(c.scores);
        m["name"] = c.name;
        models.push_back(std::move(m));
      }
      j["tstr"] = {{"classifiers", models}, {"mean", scores(tstr->mean)}};
    }
    if (dcr) j["dcr"] = {{"median", dcr->median}, {"distances", dcr->distances}};
    if (pct) j["pct"] = *pct;
    return j;
  }

  std::string to_text() const {
    std::ostringstream out;
    out << std::fixed << std::setprecision(4);
    out << "dataset              " << dataset << "\n";
    out << "column fidelity      " << column.score << "\n";
    for (const auto& [name, s] : column.columns) out << "  " << std::left << std::setw(19) << name << s << "\n";
    out << "correlation fidelity " << correlation.score << "\n";
    out << "wasserstein (mean)   " << distances.wasserstein << "\n";
    out << "jensen-shannon (mean)" << ' ' << distances.jensen_shannon << "\n";
    if (tstr) {
      out << "TSTR                  accuracy  macro_f1  micro_f1\n";
      for (const auto& c : tstr->classifiers) {
        out << "  " << std::left << std::setw(20) << c.name << c.scores.accuracy << "    " << c.scores.macro_f1
            << "    " << c.scores.micro_f1 << "\n";
      }
      out << "  " << std::left << std::setw(20) << "mean" << tstr->mean.accuracy << "    " << tstr->mean.macro_f1
          << "    " << tstr->mean.micro_f1 << "\n";
    }
    if (dcr) out << "DCR median           " << dcr->median << "\n";
    if (pct) out << "PCT                  " << *pct << "\n";
    return out.str();
  }
};

// Full battery. `real_test` may be empty, which skips TSTR and PCT.
inline MetricReport evaluate(const TableDataset& real_train, const TableDataset& real_test, const TableDataset& synth,
                             const EvaluationOptions& opt = {}) {
  MetricReport r;
  r.dataset = real_train.name();
  r.seed = opt.seed;
  r.column = column_fidelity(real_train, synth);
  if (real_train.column_count() >= 2) r.correlation = correlation_fidelity(real_train, synth);
  r.distances = ws_js(real_train, synth);
  const auto enc = MixedDistanceEncoding::fit(real_train);
  r.dcr = dcr(synth, real_train, enc);
  if (real_test.row_count() > 0) {
    r.pct = pct(synth, real_train, real_test, enc, opt.pct_rule);
    if (opt.tstr && real_test.target_index()) r.tstr = tstr_utility(synth, real_test, opt.classifiers, opt.seed);
  }
  return r;
}

}  // namespace crosstab
