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

#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "crosstab/tabular/batches.hpp"
#include "crosstab/tabular/csv.hpp"
#include "crosstab/tabular/split.hpp"

namespace crosstab {
namespace {

SchemaDescriptor three_column_descriptor() {
  return SchemaDescriptor::from_json(nlohmann::json::parse(R"({
    "metadata": "Pima diabetes screening records",
    "target": "outcome",
    "columns": [
      {"name": "glucose", "kind": "numerical"},
      {"name": "age", "kind": "numerical"},
      {"name": "outcome", "kind": "categorical",
       "label_map": {"1": "tested positive", "0": "tested negative"}}
    ]})"));
}

TableDataset parse(const std::string& text, const SchemaDescriptor& desc) {
  std::istringstream in(text);
  return table_from_csv(read_csv(in), desc);
}

TableDataset numbered_table(std::size_t rows, std::size_t predictors) {
  std::vector<ColumnSchema> cols;
  for (std::size_t c = 0; c < predictors; ++c) {
    cols.push_back({"f" + std::to_string(c), ColumnKind::numerical, {}, false});
  }
  cols.push_back({"label", ColumnKind::categorical, {"no", "yes"}, true});
  TableDataset t("synthetic table", cols);
  std::vector<double> row(predictors + 1);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < predictors; ++c) row[c] = static_cast<double>(r * 100 + c);
    row[predictors] = static_cast<double>(r % 2);
    t.add_encoded_row(row);
  }
  return t;
}

TEST(Csv, ParsesDeclaredKinds) {
  const auto t = parse("glucose,age,outcome\n148,50,1\n85,31,0\n183.5,32,1\n",
                       three_column_descriptor());
  EXPECT_EQ(t.column_count(), 3u);
  EXPECT_EQ(t.row_count(), 3u);
  EXPECT_DOUBLE_EQ(t.number(2, 0), 183.5);
  EXPECT_EQ(t.target_index(), 2u);
  EXPECT_EQ(t.metadata(), "Pima diabetes screening records");
}

TEST(Csv, LabelMapStoresCompleteText) {
  const auto t = parse("glucose,age,outcome\n148,50,1\n85,31,0\n", three_column_descriptor());
  EXPECT_EQ(t.label(0, 2), "tested positive");
  EXPECT_EQ(t.label(1, 2), "tested negative");
  const auto& cats = t.column(2).categories;
  EXPECT_EQ(std::count(cats.begin(), cats.end(), "1"), 0);
}

TEST(Csv, NonNumericValueNamesRowAndColumn) {
  try {
    parse("glucose,age,outcome\n148,50,1\n85,abc,0\n", three_column_descriptor());
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("row 2"), std::string::npos) << msg;
    EXPECT_NE(msg.find("'age'"), std::string::npos) << msg;
    EXPECT_NE(msg.find("abc"), std::string::npos) << msg;
  }
}

TEST(Csv, RejectsMissingDescriptorColumnAndEmptyInput) {
  EXPECT_THROW(parse("glucose,age,outcome,bmi\n1,2,1,3\n", three_column_descriptor()),
               DataError);
  EXPECT_THROW(parse("", three_column_descriptor()), DataError);
  EXPECT_THROW(parse("glucose,age,outcome\n", three_column_descriptor()), DataError);
  EXPECT_THROW(parse("glucose,age,outcome\n1,,1\n", three_column_descriptor()), DataError);
}

TEST(Csv, QuotedFieldsAndRoundTrip) {
  auto desc = SchemaDescriptor::from_json(nlohmann::json::parse(R"({
    "metadata": "notes", "columns": [
      {"name": "x", "kind": "numerical"},
      {"name": "note, free text", "kind": "categorical"}]})"));
  const auto t = parse("x,\"note, free text\"\r\n0.1,\"said \"\"hi\"\"\"\r\n-2e-3,plain\r\n", desc);
  EXPECT_EQ(t.label(0, 1), "said \"hi\"");
  std::ostringstream out;
  write_csv(out, t);
  auto desc2 = SchemaDescriptor::from_json(schema_to_json(t));
  EXPECT_EQ(parse(out.str(), desc2), t);
}

TEST(Csv, DeclaredCategoryOrderIsKept) {
  auto desc = SchemaDescriptor::from_json(nlohmann::json::parse(R"({
    "metadata": "m", "columns": [
      {"name": "grade", "kind": "categorical", "categories": ["low", "mid", "high"]}]})"));
  const auto t = parse("grade\nhigh\nlow\n", desc);
  EXPECT_EQ(t.column(0).categories, (std::vector<std::string>{"low", "mid", "high"}));
  EXPECT_EQ(t.code(0, 0), 2u);
  EXPECT_THROW(parse("grade\nextreme\n", desc), DataError);
}

TEST(Split, DefaultRatioOnHundredRows) {
  const auto t = numbered_table(100, 3);
  const auto s = split_dataset(t, SplitSpec{0.70, 0.05, 0.25, 0});
  EXPECT_EQ(s.train.row_count(), 70u);
  EXPECT_EQ(s.finetune.row_count(), 5u);
  EXPECT_EQ(s.test.row_count(), 25u);
}

TEST(Split, DisjointExhaustiveDeterministic) {
  for (std::size_t n : {3u, 20u, 57u, 100u, 1001u}) {
    SplitSpec spec{0.70, 0.05, 0.25, 7};
    if (n == 3) spec = SplitSpec{0.34, 0.33, 0.33, 7};
    const auto a = split_rows(n, spec);
    const auto b = split_rows(n, spec);
    EXPECT_EQ(a.train, b.train);
    EXPECT_EQ(a.finetune, b.finetune);
    EXPECT_EQ(a.test, b.test);
    std::set<std::size_t> all;
    for (const auto* part : {&a.train, &a.finetune, &a.test}) all.insert(part->begin(), part->end());
    EXPECT_EQ(all.size(), n);
    EXPECT_EQ(a.train.size() + a.finetune.size() + a.test.size(), n);
  }
  EXPECT_NE(split_rows(100, {0.7, 0.05, 0.25, 0}).test, split_rows(100, {0.7, 0.05, 0.25, 1}).test);
}

TEST(Split, TwentyRowsRemainderGoesToTrain) {
  // round(0.05 * 20) = 1, round(0.25 * 20) = 5, train = 20 - 1 - 5.
  const auto s = split_rows(20, {0.70, 0.05, 0.25, 0});
  EXPECT_EQ(s.finetune.size(), 1u);
  EXPECT_EQ(s.test.size(), 5u);
  EXPECT_EQ(s.train.size(), 14u);
  // round(0.3 * 11) = 3, round(0.3 * 11) = 3, train = 5 rather than round(0.4 * 11) = 4.
  const auto t = split_rows(11, {0.4, 0.3, 0.3, 0});
  EXPECT_EQ(t.train.size(), 5u);
}

TEST(Split, EmptyPartitionIsAnError) {
  EXPECT_THROW(split_rows(5, {0.70, 0.05, 0.25, 0}), DataError);
  EXPECT_THROW(split_rows(2, {0.4, 0.3, 0.3, 0}), DataError);
  EXPECT_THROW(split_rows(100, {0.7, 0.2, 0.2, 0}), ConfigError);
}

TEST(Split, ManifestListsRows) {
  SplitSpec spec{0.70, 0.05, 0.25, 3};
  const auto rows = split_rows(40, spec);
  const auto j = split_manifest(rows, spec);
  EXPECT_EQ(j.at("test").get<std::vector<std::size_t>>(), rows.test);
  EXPECT_EQ(j.at("seed").get<std::uint64_t>(), 3u);
}

TEST(FeatureSplit, NinePredictorsGiveFiveAndFour) {
  const auto t = numbered_table(10, 9);
  const auto s = split_features(t, 0);
  EXPECT_EQ(s.set_a.column_count(), 6u);
  EXPECT_EQ(s.set_b.column_count(), 5u);
  EXPECT_TRUE(s.set_a.target_index().has_value());
  EXPECT_TRUE(s.set_b.target_index().has_value());
  EXPECT_EQ(s.set_a.metadata(), t.metadata());
  std::set<std::string> a, b;
  for (const auto& c : s.set_a.columns()) if (!c.target) a.insert(c.name);
  for (const auto& c : s.set_b.columns()) if (!c.target) b.insert(c.name);
  std::set<std::string> all = a;
  all.insert(b.begin(), b.end());
  EXPECT_EQ(all.size(), 9u);
  for (const auto& n : a) EXPECT_EQ(b.count(n), 0u);
  // Cell values travel with their column.
  const std::size_t c = s.set_b.column_index(s.set_b.column(0).name);
  const std::size_t orig = t.column_index(s.set_b.column(c).name);
  for (std::size_t r = 0; r < t.row_count(); ++r) EXPECT_EQ(s.set_b.number(r, c), t.number(r, orig));
}

TEST(FeatureSplit, SmallestCaseAndDeterminism) {
  const auto s = split_features(numbered_table(4, 2), 5);
  EXPECT_EQ(s.set_a.column_count(), 2u);
  EXPECT_EQ(s.set_b.column_count(), 2u);
  const auto t = numbered_table(4, 7);
  EXPECT_EQ(split_features(t, 11).set_a.column_names(), split_features(t, 11).set_a.column_names());
}

TEST(FeatureSplit, RequiresTarget) {
  TableDataset t("m", {{"a", ColumnKind::numerical, {}, false},
                       {"b", ColumnKind::numerical, {}, false}});
  EXPECT_THROW(split_features(t, 0), DataError);
}

TEST(Batches, DropCountUsesFloor) {
  EXPECT_EQ(dropped_column_count(6, 0.15), 0u);
  EXPECT_EQ(dropped_column_count(20, 0.15), 3u);
  EXPECT_EQ(dropped_column_count(2, 0.9), 1u);
  EXPECT_EQ(dropped_column_count(1, 0.5), 0u);
}

TEST(Batches, NeverMixTablesAndPermuteRetainedColumns) {
  PretrainBatchStream stream({40, 13}, {20, 6}, 4, 0.15, 9);
  std::set<std::size_t> seen_tables;
  for (int i = 0; i < 200; ++i) {
    const auto b = stream.next();
    seen_tables.insert(b.table);
    ASSERT_EQ(b.rows.size(), 4u);
    const std::size_t d = b.table == 0 ? 20 : 6;
    const std::size_t n = b.table == 0 ? 40 : 13;
    for (std::size_t r : b.rows) EXPECT_LT(r, n);
    EXPECT_EQ(b.dropped.size(), d);
    const auto drops = static_cast<std::size_t>(std::count(b.dropped.begin(), b.dropped.end(), true));
    EXPECT_EQ(drops, b.table == 0 ? 3u : 0u);
    std::set<std::size_t> cols(b.columns.begin(), b.columns.end());
    EXPECT_EQ(cols.size(), d - drops);
    for (std::size_t c : cols) EXPECT_FALSE(b.dropped[c]);
    EXPECT_FALSE(b.with_replacement);
  }
  EXPECT_EQ(seen_tables.size(), 2u);
}

TEST(Batches, SmallTableSampledWithReplacement) {
  PretrainBatchStream stream({3, 50}, {4, 4}, 8, 0.0, 1);
  bool flagged = false;
  for (int i = 0; i < 30; ++i) {
    const auto b = stream.next();
    if (b.table == 0) {
      flagged = true;
      EXPECT_TRUE(b.with_replacement);
      EXPECT_EQ(b.rows.size(), 8u);
    }
  }
  EXPECT_TRUE(flagged);
  EXPECT_THROW(PretrainBatchStream({10}, {3}, 1, 0.1, 0), ConfigError);
}

TEST(Batches, EpochCoversEveryRowOnce) {
  PretrainBatchStream stream({12, 8}, {3, 3}, 4, 0.0, 2);
  std::vector<std::multiset<std::size_t>> rows(2);
  for (std::size_t i = 0; i < stream.batches_per_epoch(); ++i) {
    const auto b = stream.next();
    rows[b.table].insert(b.rows.begin(), b.rows.end());
  }
  EXPECT_EQ(rows[0].size(), 12u);
  EXPECT_EQ(std::set<std::size_t>(rows[0].begin(), rows[0].end()).size(), 12u);
  EXPECT_EQ(rows[1].size(), 8u);
}

}  // namespace
}  // namespace crosstab
