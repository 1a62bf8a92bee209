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

#include <chrono>

#include <gtest/gtest.h>

#include "crosstab/aggregator/aggregator.hpp"
#include "crosstab/tabular/split.hpp"
#include "crosstab/tabular/toy.hpp"
#include "gradcheck.hpp"

namespace crosstab {
namespace {

using nn::MatD;
using nn::MatF;

std::shared_ptr<const NumberEncoder> test_number_encoder() {
  Rng rng(17);
  return std::make_shared<NumberEncoder>(NumberAutoencoderShape{64, kTextDim}, rng);
}

EmbeddedTable embed(const TableDataset& t, const TextEncoder& text,
                    const std::shared_ptr<const NumberEncoder>& ae) {
  return EmbeddedTable(t, text, ae, fit_transformers(t));
}

TableDataset wide_table(std::size_t d, std::size_t rows, std::uint64_t seed) {
  std::vector<ColumnSchema> cols;
  for (std::size_t c = 0; c < d; ++c) {
    cols.push_back({"measurement " + std::to_string(c), ColumnKind::numerical, {}, false});
  }
  TableDataset t("wide numeric table", cols);
  Rng rng(seed);
  std::normal_distribution<double> n;
  std::vector<double> row(d);
  for (std::size_t r = 0; r < rows; ++r) {
    for (auto& x : row) x = n(rng);
    t.add_encoded_row(row);
  }
  return t;
}

TEST(Aggregator, OutputWidthIndependentOfColumnCount) {
  HashedTextEncoder text;
  const auto ae = test_number_encoder();
  const AggregatorNet net = make_aggregator(1);
  for (std::size_t d : {1u, 5u, 40u}) {
    const auto et = embed(wide_table(d, 4, d), text, ae);
    const auto seq = et.sequence(0);
    EXPECT_EQ(seq.length(), static_cast<nn::Index>(2 * d + 1));
    const auto v = aggregate(net, seq);
    EXPECT_EQ(v.size(), 128);
    EXPECT_EQ(v, aggregate(net, seq));
    EXPECT_GT((v - aggregate(net, et.sequence(1))).norm(), 1e-4f);
    const auto masked = make_masked_views(seq, 1, 0.5, 3);
    EXPECT_TRUE(aggregate(net, masked[1]).allFinite());
  }
}

TEST(ContrastiveLoss, TwoOrthogonalRowsHandValue) {
  // Row 0 views along e0, row 1 views along e1. For each anchor the positive
  // has similarity 1 and the two negatives 0: loss = log(1 + 2 exp(-1/tau)).
  MatD v = MatD::Zero(4, 3);
  v(0, 0) = 1;  // view 0, row 0
  v(1, 1) = 1;  // view 0, row 1
  v(2, 0) = 2;  // view 1, row 0
  v(3, 1) = 5;  // view 1, row 1
  for (double tau : {0.1, 0.5, 1.0}) {
    EXPECT_NEAR(contrastive_loss(v, 2, 2, tau), std::log(1.0 + 2.0 * std::exp(-1.0 / tau)), 1e-9);
  }
  EXPECT_NEAR(contrastive_loss(v, 2, 2, 1e7), std::log(3.0), 1e-6);
}

TEST(ContrastiveLoss, ScaleInvariantAndDecreasingInSeparation) {
  const MatD v = testing::random_matrix(12, 5, 3);
  EXPECT_NEAR(contrastive_loss(v, 4, 3, 0.1), contrastive_loss(MatD(v * 7.5), 4, 3, 0.1), 1e-9);
  double prev = std::numeric_limits<double>::infinity();
  for (double angle : {0.2, 0.6, 1.0, 1.4, 1.5707963267948966}) {
    MatD w(4, 2);
    w << 1, 0, std::cos(angle), std::sin(angle), 1, 0, std::cos(angle), std::sin(angle);
    const double loss = contrastive_loss(w, 2, 2, 0.1);
    EXPECT_LT(loss, prev);
    prev = loss;
  }
  MatD z = v;
  z.row(3).setZero();
  EXPECT_THROW(contrastive_loss(z, 4, 3, 0.1), Error);
  EXPECT_THROW(contrastive_loss(v, 12, 1, 0.1), Error);
}

TEST(ContrastiveLoss, GradientMatchesFiniteDifferences) {
  MatD v = testing::random_matrix(9, 4, 5);
  MatD grad;
  contrastive_loss(v, 3, 3, 0.3, &grad);
  auto loss = [&] { return contrastive_loss(v, 3, 3, 0.3); };
  EXPECT_LT(testing::max_gradient_error(v, grad, loss, 36), 1e-6);
}

TEST(MagnitudeLoss, HandComputedFixtures) {
  using RowD = nn::RowVector<double>;
  const RowD vi = RowD::Zero(2);
  RowD vj(2), vk(2);
  vj << 0.2, 0.0;
  vk << 0.0, 0.5;
  const MagnitudeTriplet x{0.0, 0.1, 0.9};
  EXPECT_NEAR(magnitude_margin(x, 1.0), 0.8, 1e-12);
  EXPECT_NEAR(magnitude_loss(vi, vj, vk, x, 1.0), 0.5, 1e-12);
  EXPECT_NEAR(magnitude_loss(vi, vj, vk, x, 2.0), 0.1, 1e-12);
  // Margin already satisfied.
  RowD far(2);
  far << 0.0, 0.8;
  EXPECT_EQ(magnitude_loss(vi, vi, far, x, 1.0), 0.0);
  // Equal gaps collapse the margin to a plain hinge.
  EXPECT_EQ(magnitude_margin({0.0, 0.4, -0.4}, 1.0), 0.0);
  EXPECT_NEAR(magnitude_loss(vi, vk, vj, {0.0, 0.4, -0.4}, 1.0), 0.3, 1e-12);
  EXPECT_THROW(magnitude_margin({0.0, 0.9, 0.1}, 1.0), Error);
  EXPECT_THROW(magnitude_margin(x, 0.0), Error);
}

TEST(MagnitudeLoss, PositiveExactlyWhenMarginUnmet) {
  Rng rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const double dij = u(rng), dik = u(rng), m = u(rng);
    const double l = magnitude_hinge(dij, dik, m);
    if (dik - dij >= m) {
      EXPECT_EQ(l, 0.0);
    } else {
      EXPECT_GT(l, 0.0);
    }
  }
}

TEST(MagnitudeLoss, BatchGradientMatchesFiniteDifferences) {
  MatD v = testing::random_matrix(5, 3, 9);
  const std::vector<TripletIndex> triplets{{0, 1, 2, 0.9}, {3, 4, 0, 1.5}, {2, 0, 4, 2.0}};
  MatD grad = MatD::Zero(5, 3);
  const double l = magnitude_loss_batch(v, triplets, &grad);
  EXPECT_GT(l, 0.0);
  auto loss = [&] { return magnitude_loss_batch(v, triplets); };
  EXPECT_LT(testing::max_gradient_error(v, grad, loss), 1e-6);
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  auto ranks = [](const std::vector<double>& x) {
    std::vector<std::size_t> idx(x.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](auto i, auto j) { return x[i] < x[j]; });
    std::vector<double> r(x.size());
    for (std::size_t k = 0; k < idx.size(); ++k) r[idx[k]] = static_cast<double>(k);
    return r;
  };
  const auto ra = ranks(a), rb = ranks(b);
  const double n = static_cast<double>(a.size());
  const double mean = (n - 1) / 2;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (ra[i] - mean) * (rb[i] - mean);
    saa += (ra[i] - mean) * (ra[i] - mean);
    sbb += (rb[i] - mean) * (rb[i] - mean);
  }
  return sab / std::sqrt(saa * sbb);
}

TEST(TrainAggregator, ContrastiveLossFallsOnToyTable) {
  auto text = make_default_text_encoder();
  const auto ae = test_number_encoder();
  std::vector<EmbeddedTable> tables{embed(make_toy_corpus(0)[0], *text, ae)};
  AggregatorTraining opt;
  opt.epochs = 200;
  opt.batch_size = 32;
  opt.seed = 4;
  const auto result = train_aggregator(tables, opt);
  const double first = result.epoch_mean(0, &AggregatorStep::contrastive);
  const double last = result.epoch_mean(opt.epochs - 1, &AggregatorStep::contrastive);
  EXPECT_LT(last, 0.7 * first) << first << " -> " << last;
  std::ostringstream csv;
  write_loss_curve(csv, result.curve);
  const std::string text_csv = csv.str();
  EXPECT_EQ(std::count(text_csv.begin(), text_csv.end(), '\n'),
            static_cast<long>(result.curve.size() + 1));
}

TEST(TrainAggregator, ZeroMagnitudeWeightIsPureContrastive) {
  HashedTextEncoder text;
  const auto ae = test_number_encoder();
  std::vector<EmbeddedTable> tables{embed(wide_table(3, 16, 2), text, ae)};
  AggregatorTraining opt;
  opt.epochs = 3;
  opt.batch_size = 8;
  opt.magnitude_weight = 0.0;
  const auto result = train_aggregator(tables, opt);
  for (const auto& s : result.curve) {
    EXPECT_TRUE(s.magnitude_skipped);
    EXPECT_EQ(s.total, s.contrastive);
  }
}

TEST(TrainAggregator, LatentDistanceTracksValueGap) {
  HashedTextEncoder text;
  const auto ae = test_number_encoder();
  const TableDataset t = wide_table(2, 160, 21);
  std::vector<EmbeddedTable> tables{embed(t, text, ae)};
  AggregatorTraining opt;
  opt.epochs = 60;
  opt.batch_size = 32;
  opt.drop_rate = 0.0;
  opt.seed = 5;
  const auto result = train_aggregator(tables, opt);
  const MatF v = aggregate_table(result.net, tables[0]);
  Rng rng(6);
  std::uniform_int_distribution<std::size_t> pick(0, t.row_count() - 1);
  std::vector<double> gaps, dists;
  for (int s = 0; s < 2000; ++s) {
    const std::size_t i = pick(rng), j = pick(rng);
    if (i == j) continue;
    gaps.push_back(std::abs(t.number(i, 0) - t.number(j, 0)));
    dists.push_back((v.row(i) - v.row(j)).norm());
  }
  EXPECT_GT(spearman(gaps, dists), 0.0);
}

}  // namespace
}  // namespace crosstab
