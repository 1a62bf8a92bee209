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

#include <gtest/gtest.h>

#include "crosstab/diffusion/diffusion.hpp"
#include "crosstab/embedding/text_encoder.hpp"
#include "gradcheck.hpp"

namespace crosstab {
namespace {

using nn::MatD;
using nn::MatF;

MatF gaussian(nn::Index rows, nn::Index cols, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<float> n;
  MatF m(rows, cols);
  for (nn::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

TEST(Schedule, DefaultLengthAndMonotone) {
  const auto s = build_schedule(2500);
  EXPECT_EQ(s.steps(), 2500u);
  EXPECT_DOUBLE_EQ(s.beta_at(1), 1e-4);
  EXPECT_DOUBLE_EQ(s.beta_at(2500), 0.02);
  for (std::size_t t = 2; t <= s.steps(); ++t) {
    EXPECT_GE(s.beta_at(t), s.beta_at(t - 1));
    EXPECT_LT(s.alpha_bar_at(t), s.alpha_bar_at(t - 1));
  }
  EXPECT_LT(s.alpha_bar_at(2500), 1e-3);
  EXPECT_DOUBLE_EQ(s.sigma_at(7), std::sqrt(s.beta_at(7)));
  const auto c = build_schedule(1000, ScheduleKind::cosine);
  for (std::size_t t = 2; t <= c.steps(); ++t) EXPECT_LT(c.alpha_bar_at(t), c.alpha_bar_at(t - 1));
  EXPECT_LT(c.alpha_bar_at(1000), 1e-3);
}

TEST(Schedule, HandProduct) {
  const auto s = build_schedule(4, ScheduleKind::linear, 0.1, 0.1);
  const double expected[] = {0.9, 0.81, 0.729, 0.6561};
  for (std::size_t t = 1; t <= 4; ++t) EXPECT_NEAR(s.alpha_bar_at(t), expected[t - 1], 1e-15);
  EXPECT_THROW(build_schedule(0), ConfigError);
  EXPECT_THROW(schedule_from_betas({0.2, 0.1}), ConfigError);
  EXPECT_THROW(schedule_from_betas({1.0}), ConfigError);
}

TEST(ForwardSample, EndpointsAndVariance) {
  const MatF v0 = gaussian(3, 5, 1);
  const MatF eps = gaussian(3, 5, 2);
  const auto zero = schedule_from_betas(std::vector<double>(10, 0.0));
  EXPECT_EQ(forward_sample(v0, 10, zero, eps), v0);
  auto full = schedule_from_betas({0.3});
  full.alpha_bar[0] = 0.0;
  EXPECT_EQ(forward_sample(v0, 1, full, eps), eps);

  const auto s = build_schedule(1000);
  const MatF origin = MatF::Zero(20000, 8);
  const MatF noise = gaussian(20000, 8, 3);
  for (std::size_t t : {10u, 300u, 900u}) {
    const MatF vt = forward_sample(origin, t, s, noise);
    const double var = static_cast<double>(vt.squaredNorm()) / static_cast<double>(vt.size());
    EXPECT_NEAR(var / (1.0 - s.alpha_bar_at(t)), 1.0, 0.05) << t;
  }
  // Energy: E|v_t|^2 = abar |v0|^2 + (1 - abar) d.
  const MatF start = MatF::Constant(20000, 8, 2.0f);
  const MatF vt = forward_sample(start, 300, s, noise);
  const double energy = static_cast<double>(vt.squaredNorm()) / 20000.0;
  const double ab = s.alpha_bar_at(300);
  EXPECT_NEAR(energy / (ab * 32.0 + (1.0 - ab) * 8.0), 1.0, 0.05);
}

TEST(PosteriorMean, FormulaCollapses) {
  const auto s = build_schedule(100);
  const MatF vt = gaussian(4, 6, 5);
  const MatF zero = MatF::Zero(4, 6);
  const MatF mu = posterior_mean(vt, 40, s, zero);
  EXPECT_LT((mu - vt / static_cast<float>(std::sqrt(s.alpha_at(40)))).cwiseAbs().maxCoeff(), 1e-6f);

  const MatF v0 = gaussian(50, 128, 6);
  const MatF eps = gaussian(50, 128, 7);
  const MatF v1 = forward_sample(v0, 1, s, eps);
  const MatF rec = posterior_mean(v1, 1, s, eps);
  EXPECT_LT((rec - v0).norm() / v0.norm(), 1e-3f);

  const auto tiny = build_schedule(3, ScheduleKind::linear, 1e-12, 1e-12);
  EXPECT_LT((posterior_mean(vt, 2, tiny, gaussian(4, 6, 8)) - vt).cwiseAbs().maxCoeff(), 1e-5f);
}

TEST(EpsNet, GradientsMatchFiniteDifferences) {
  Rng rng(9);
  EpsNetShape shape{3, 4, 6, 2, 8};
  EpsNet<double> net(shape, rng);
  // Give the zero-initialised output layer weights so every path carries gradient.
  net.visit(
      [&](const std::string& name, nn::Parameter<double>& p) {
        if (name.rfind("output", 0) == 0) p.value = testing::random_matrix(p.value.rows(), p.value.cols(), 10, 0.5);
      },
      "");
  const MatD x = testing::random_matrix(5, 3, 11);
  const MatD y = testing::random_matrix(5, 4, 12);
  const std::vector<std::size_t> t{1, 7, 30, 2, 99};
  const MatD probe = testing::random_matrix(5, 3, 13);
  auto loss = [&] { return (net.forward(x, t, y).array() * probe.array()).sum(); };
  EpsNet<double>::Cache cache;
  net.forward(x, t, y, &cache);
  nn::zero_grad<double>(net);
  net.backward(cache, probe);
  net.visit(
      [&](const std::string& name, nn::Parameter<double>& p) {
        EXPECT_LT(testing::max_gradient_error(p.value, p.grad, loss), 1e-5) << name;
      },
      "");
}

TEST(EpsNet, ShapeAndInferencePathAgree) {
  Rng rng(14);
  EpsNetShape shape{16, 12, 32, 4, 16};
  DiffusionNet net(shape, rng);
  const MatF x = gaussian(7, 16, 15);
  const MatF y = gaussian(7, 12, 16);
  const MatF zero_out = net.forward(x, std::vector<std::size_t>(7, 5), y);
  EXPECT_EQ(zero_out.rows(), 7);
  EXPECT_EQ(zero_out.cols(), 16);
  EXPECT_EQ(zero_out.cwiseAbs().maxCoeff(), 0.0f);
  net.visit([&](const std::string& name, nn::Parameter<float>& p) {
    if (name.rfind("output", 0) == 0) p.value = gaussian(p.value.rows(), p.value.cols(), 17);
  }, "");
  const MatF full = net.forward(x, std::vector<std::size_t>(7, 5), y);
  const MatF fast = net.predict(x, 5, net.condition_terms(y));
  EXPECT_LT((full - fast).cwiseAbs().maxCoeff(), 1e-4f);
  const MatF shared = net.predict(x, 5, net.condition_terms(y.topRows(1)));
  const MatF expanded = net.forward(x, std::vector<std::size_t>(7, 5), y.topRows(1).replicate(7, 1));
  EXPECT_LT((shared - expanded).cwiseAbs().maxCoeff(), 1e-4f);
}

struct BlobData {
  MatF latents;
  MatF conditions;
  nn::RowVectorF mean_a, mean_b;
};

BlobData two_blobs(nn::Index per_blob) {
  BlobData d{MatF(2 * per_blob, 2), MatF(2 * per_blob, 2), nn::RowVectorF(2), nn::RowVectorF(2)};
  d.mean_a << 1.0f, 1.0f;
  d.mean_b << -1.0f, -1.0f;
  const MatF noise = gaussian(2 * per_blob, 2, 21) * 0.3f;
  for (nn::Index i = 0; i < 2 * per_blob; ++i) {
    const bool a = i < per_blob;
    d.latents.row(i) = (a ? d.mean_a : d.mean_b) + noise.row(i);
    d.conditions.row(i) << (a ? 1.0f : 0.0f), (a ? 0.0f : 1.0f);
  }
  return d;
}

TEST(TrainDiffusion, InitialLossMatchesDimension) {
  const BlobData d = two_blobs(100);
  DiffusionNet net = make_diffusion_net({2, 2, 32, 4, 16}, 1);
  DiffusionTraining opt;
  opt.epochs = 1;
  const auto s = build_schedule(100);
  const MatF wide = gaussian(2000, 64, 22);
  DiffusionNet wide_net = make_diffusion_net({64, 2, 32, 4, 16}, 2);
  const auto losses = train_diffusion(wide_net, wide, MatF::Ones(2000, 2), s, opt);
  EXPECT_NEAR(losses.front() / 64.0, 1.0, 0.2);
}

TEST(TrainDiffusion, TwoBlobsSeparateByCondition) {
  const BlobData d = two_blobs(200);
  DiffusionNet net = make_diffusion_net({2, 2, 64, 4, 32}, 3);
  const auto s = build_schedule(200, ScheduleKind::linear, 1e-4, 0.1);
  DiffusionTraining opt;
  opt.epochs = 1500;
  opt.batch_size = 128;
  opt.learning_rate = 2e-3;
  const auto losses = train_diffusion(net, d.latents, d.conditions, s, opt);
  double head = 0, tail = 0;
  for (int i = 0; i < 20; ++i) {
    head += losses[i];
    tail += losses[losses.size() - 1 - i];
  }
  EXPECT_LT(tail, head);

  for (int which = 0; which < 2; ++which) {
    MatF cond(1, 2);
    cond << (which == 0 ? 1.0f : 0.0f), (which == 0 ? 0.0f : 1.0f);
    const MatF out = sample(500, cond, s, net, {static_cast<std::uint64_t>(40 + which)});
    const nn::RowVectorF target = which == 0 ? d.mean_a : d.mean_b;
    const nn::RowVectorF other = which == 0 ? d.mean_b : d.mean_a;
    const nn::RowVectorF mean = out.colwise().mean();
    EXPECT_LT((mean - target).cwiseAbs().maxCoeff(), 0.15f) << mean;
    int correct = 0;
    for (nn::Index i = 0; i < out.rows(); ++i) {
      correct += (out.row(i) - target).norm() < (out.row(i) - other).norm();
    }
    EXPECT_GT(correct, 450);
  }
}

TEST(Sample, DeterministicEmptyAndDescending) {
  DiffusionNet net = make_diffusion_net({4, 3, 16, 2, 8}, 4);
  net.visit([&](const std::string& name, nn::Parameter<float>& p) {
    if (name.rfind("output", 0) == 0) p.value = gaussian(p.value.rows(), p.value.cols(), 23) * 0.1f;
  }, "");
  const auto s = build_schedule(30);
  const MatF cond = gaussian(1, 3, 24);
  EXPECT_EQ(sample(0, cond, s, net).rows(), 0);
  EXPECT_EQ(sample(6, cond, s, net, {7}), sample(6, cond, s, net, {7}));
  EXPECT_NE(sample(6, cond, s, net, {7}), sample(6, cond, s, net, {8}));
  std::vector<std::size_t> seen;
  SamplingOptions opt;
  opt.on_step = [&](std::size_t t) { seen.push_back(t); };
  const MatF out = sample(3, cond, s, net, opt);
  EXPECT_EQ(out.cols(), 4);
  ASSERT_EQ(seen.size(), 30u);
  for (std::size_t i = 0; i < seen.size(); ++i) EXPECT_EQ(seen[i], 30 - i);
  SamplingOptions guided;
  guided.guidance = 2.0;
  EXPECT_TRUE(sample(3, cond, s, net, guided).allFinite());
  EXPECT_THROW(sample(3, gaussian(2, 3, 1), s, net), ConfigError);
}

TEST(Sample, ZeroNoiseScheduleIsIdentityTransport) {
  DiffusionNet net = make_diffusion_net({4, 3, 16, 2, 8}, 5);
  net.visit([&](const std::string& name, nn::Parameter<float>& p) {
    if (name.rfind("output", 0) == 0) p.value = gaussian(p.value.rows(), p.value.cols(), 25);
  }, "");
  const auto s = schedule_from_betas(std::vector<double>(50, 0.0));
  const MatF cond = gaussian(1, 3, 26);
  // With zero betas the chain never moves, so the result is the initial draw.
  const auto one_step = schedule_from_betas({0.0});
  EXPECT_EQ(sample(5, cond, s, net, {9}), sample(5, cond, one_step, net, {9}));
}

TEST(Condition, WidthsAndDistinctMetadata) {
  HashedTextEncoder text;
  const nn::RowVectorF a = text.encode("Outpatient cohort from the northern clinic");
  const nn::RowVectorF b = text.encode("Emergency admissions at the southern hospital");
  EXPECT_EQ(build_condition(a, ConditionMode::metadata).size(), 768);
  const nn::RowVectorF vp = nn::RowVectorF::Ones(128), vm = nn::RowVectorF::Zero(128);
  const auto y = build_condition(a, ConditionMode::features, &vp, &vm);
  EXPECT_EQ(y.size(), 768 + 2 * 128);
  EXPECT_EQ(y.size(), condition_width(ConditionMode::features, 768, 128));
  EXPECT_NE(build_condition(a, ConditionMode::metadata), build_condition(b, ConditionMode::metadata));
  EXPECT_THROW(build_condition(a, ConditionMode::features), ConfigError);
}

TEST(Standardizer, RoundTripAndMoments) {
  MatF x = gaussian(500, 5, 27) * 3.0f;
  x.col(2).array() += 10.0f;
  const auto s = LatentStandardizer::fit(x);
  const MatF z = s.apply(x);
  EXPECT_LT(z.colwise().mean().cwiseAbs().maxCoeff(), 1e-4f);
  EXPECT_LT((s.invert(z) - x).cwiseAbs().maxCoeff(), 1e-4f);
  EXPECT_EQ(LatentStandardizer::from_json(nlohmann::json::parse(s.to_json().dump())), s);
}

}  // namespace
}  // namespace crosstab
