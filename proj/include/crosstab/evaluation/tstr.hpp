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

#include <string>
#include <vector>

#include "crosstab/evaluation/classifiers.hpp"
#include "crosstab/evaluation/fidelity.hpp"

namespace crosstab {

// Predictor matrix for classifiers: numerical columns as raw values,
// categorical columns one-hot. The target column is excluded.
inline nn::MatD predictor_matrix(const TableDataset& t, const TableDataset& schema) {
  const auto match = match_columns(schema, t);
  const auto target = schema.target_index();
  nn::Index width = 0;
  for (std::size_t c = 0; c < schema.column_count(); ++c) {
    if (target && c == *target) continue;
    width += schema.column(c).is_categorical() ? static_cast<nn::Index>(schema.column(c).categories.size()) : 1;
  }
  nn::MatD x = nn::MatD::Zero(static_cast<nn::Index>(t.row_count()), width);
  nn::Index off = 0;
  for (std::size_t c = 0; c < schema.column_count(); ++c) {
    if (target && c == *target) continue;
    for (std::size_t r = 0; r < t.row_count(); ++r) {
      const auto row = static_cast<nn::Index>(r);
      if (schema.column(c).is_categorical()) {
        x(row, off + static_cast<nn::Index>(t.code(r, match[c]))) = 1.0;
      } else {
        x(row, off) = t.number(r, match[c]);
      }
    }
    off += schema.column(c).is_categorical() ? static_cast<nn::Index>(schema.column(c).categories.size()) : 1;
  }
  return x;
}

inline Labels target_labels(const TableDataset& t) {
  const auto target = t.target_index();
  if (!target) throw DataError("table '" + t.name() + "' has no target column");
  if (!t.column(*target).is_categorical()) throw DataError("TSTR needs a categorical target");
  Labels y;
  for (auto code : t.codes(*target)) y.push_back(static_cast<int>(code));
  return y;
}

struct ClassificationScores {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  double micro_f1 = 0.0;
};

// Macro F1 averages over classes present in the truth or the predictions.
inline ClassificationScores classification_scores(const Labels& truth, const Labels& predicted, int classes) {
  if (truth.size() != predicted.size() || truth.empty()) throw DataError("score needs matching nonempty labels");
  std::vector<double> tp(static_cast<std::size_t>(classes)), fp(tp), fn(tp);
  double correct = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto t = static_cast<std::size_t>(truth[i]), p = static_cast<std::size_t>(predicted[i]);
    if (t == p) {
      tp[t] += 1;
      correct += 1;
    } else {
      fp[p] += 1;
      fn[t] += 1;
    }
  }
  ClassificationScores s;
  s.accuracy = correct / static_cast<double>(truth.size());
  double f1 = 0.0, present = 0.0, tps = 0.0, fps = 0.0, fns = 0.0;
  for (std::size_t k = 0; k < tp.size(); ++k) {
    tps += tp[k];
    fps += fp[k];
    fns += fn[k];
    if (tp[k] + fp[k] + fn[k] == 0) continue;
    present += 1;
    f1 += 2 * tp[k] / (2 * tp[k] + fp[k] + fn[k]);
  }
  s.macro_f1 = present > 0 ? f1 / present : 0.0;
  s.micro_f1 = 2 * tps / (2 * tps + fps + fns);
  return s;
}

struct ClassifierResult {
  std::string name;
  ClassificationScores scores;
};

struct TstrResult {
  std::vector<ClassifierResult> classifiers;
  ClassificationScores mean;
};

// Train on `synth_train`, test on `real_test`.
inline TstrResult tstr_utility(const TableDataset& synth_train, const TableDataset& real_test,
                               const std::vector<std::string>& names = classifier_names(), std::uint64_t seed = 0) {
  match_columns(real_test, synth_train);
  if (synth_train.row_count() == 0) throw DataError("TSTR needs synthetic rows");
  const auto target = real_test.target_index();
  if (!target) throw DataError("TSTR needs a target column");
  const int classes = static_cast<int>(real_test.column(*target).categories.size());
  const nn::MatD x_train = predictor_matrix(synth_train, real_test);
  const nn::MatD x_test = predictor_matrix(real_test, real_test);
  const Labels y_train = target_labels(synth_train);
  const Labels y_test = target_labels(real_test);
  TstrResult out;
  for (const auto& name : names) {
    auto model = make_classifier(name, seed);
    if (x_train.cols() == 0) throw DataError("TSTR needs at least one predictor column");
    model->fit(x_train, y_train, classes);
    out.classifiers.push_back({name, classification_scores(y_test, model->predict(x_test), classes)});
    out.mean.accuracy += out.classifiers.back().scores.accuracy;
    out.mean.macro_f1 += out.classifiers.back().scores.macro_f1;
    out.mean.micro_f1 += out.classifiers.back().scores.micro_f1;
  }
  if (!names.empty()) {
    const double n = static_cast<double>(names.size());
    out.mean.accuracy /= n;
    out.mean.macro_f1 /= n;
    out.mean.micro_f1 /= n;
  }
  return out;
}

}  // namespace crosstab
