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

#include "crosstab/nn/activation.hpp"
#include "crosstab/nn/attention.hpp"
#include "crosstab/nn/layer_norm.hpp"
#include "crosstab/nn/linear.hpp"
#include "crosstab/nn/optim.hpp"
#include "crosstab/nn/resampler.hpp"
#include "crosstab/nn/serialize.hpp"
#include "gradcheck.hpp"

namespace crosstab::nn {
namespace {

using testing::max_gradient_error;
using testing::random_matrix;

constexpr double kGradTol = 1e-5;

// Checks every parameter of `net` plus the input gradient for a loss of the
// form sum(out .* probe).
template <typename Net, typename Forward, typename Backward>
void check_gradients(Net& net, MatD& input, Forward forward, Backward backward) {
  const MatD probe_shape = forward(input);
  const MatD probe = random_matrix(probe_shape.rows(), probe_shape.cols(), 99);
  auto loss = [&] { return (forward(input).array() * probe.array()).sum(); };

  zero_grad<double>(net);
  const MatD dinput = backward(input, probe);
  EXPECT_LT(max_gradient_error(input, dinput, loss), kGradTol) << "input gradient";

  net.visit(
      [&](const std::string& name, Parameter<double>& p) {
        EXPECT_LT(max_gradient_error(p.value, p.grad, loss), kGradTol) << name;
      },
      "");
}

TEST(Linear, GradientsMatchFiniteDifferences) {
  Rng rng(1);
  Linear<double> layer(5, 3, rng);
  MatD x = random_matrix(4, 5, 2);
  check_gradients(
      layer, x, [&](const MatD& in) { return layer.forward(in); },
      [&](const MatD& in, const MatD& dy) {
        Linear<double>::Cache c;
        layer.forward(in, &c);
        return layer.backward(c, dy);
      });
}

TEST(LayerNorm, GradientsMatchFiniteDifferences) {
  LayerNorm<double> norm(6);
  Rng rng(3);
  norm.visit([&](const std::string&, Parameter<double>& p) { fan_in_uniform(p.value, 2, rng); },
             "");
  MatD x = random_matrix(3, 6, 4);
  check_gradients(
      norm, x, [&](const MatD& in) { return norm.forward(in); },
      [&](const MatD& in, const MatD& dy) {
        LayerNorm<double>::Cache c;
        norm.forward(in, &c);
        return norm.backward(c, dy);
      });
}

TEST(LayerNorm, RowsHaveZeroMeanUnitVariance) {
  LayerNorm<double> norm(8);
  const MatD y = norm.forward(random_matrix(5, 8, 7, 3.0));
  for (Index r = 0; r < y.rows(); ++r) {
    EXPECT_NEAR(y.row(r).mean(), 0.0, 1e-12);
    EXPECT_NEAR(y.row(r).squaredNorm() / 8.0, 1.0, 1e-4);
  }
}

TEST(Activations, DerivativesMatchFiniteDifferences) {
  MatD x = random_matrix(3, 4, 11);
  const MatD probe = random_matrix(3, 4, 12);
  auto check = [&](auto f, auto fb) {
    auto loss = [&] { return (f(x).array() * probe.array()).sum(); };
    EXPECT_LT(max_gradient_error(x, fb(x, probe), loss), kGradTol);
  };
  check([](const MatD& a) { return silu(a); },
        [](const MatD& a, const MatD& d) { return silu_backward(a, d); });
  check([](const MatD& a) { return scaled_tanh(a, 10.0); },
        [](const MatD& a, const MatD& d) { return scaled_tanh_backward(a, d, 10.0); });
}

TEST(LatentAttention, GradientsMatchFiniteDifferences) {
  Rng rng(5);
  LatentAttention<double> attn(8, 2, rng);
  MatD query = random_matrix(3, 8, 6);
  MatD kv = random_matrix(3 * 4, 8, 7);
  const MatD probe = random_matrix(3, 8, 8);
  auto loss = [&] { return (attn.forward(query, kv, 4).array() * probe.array()).sum(); };

  zero_grad<double>(attn);
  LatentAttention<double>::Cache cache;
  attn.forward(query, kv, 4, &cache);
  auto [dq, dkv] = attn.backward(cache, probe);
  EXPECT_LT(max_gradient_error(query, dq, loss), kGradTol);
  EXPECT_LT(max_gradient_error(kv, dkv, loss), kGradTol);
  attn.visit(
      [&](const std::string& name, Parameter<double>& p) {
        EXPECT_LT(max_gradient_error(p.value, p.grad, loss), kGradTol) << name;
      },
      "");
}

TEST(LatentAttention, WeightsFormDistributions) {
  Rng rng(9);
  LatentAttention<double> attn(8, 4, rng);
  LatentAttention<double>::Cache cache;
  attn.forward(random_matrix(2, 8, 1), random_matrix(10, 8, 2), 5, &cache);
  for (Index b = 0; b < 2; ++b) {
    for (Index h = 0; h < 4; ++h) {
      EXPECT_NEAR(cache.weights.block(b, h * 5, 1, 5).sum(), 1.0, 1e-12);
    }
  }
}

TEST(PerceiverResampler, GradientsMatchFiniteDifferences) {
  Rng rng(21);
  ResamplerOptions opt{.input_dim = 6, .dim = 8, .depth = 2, .heads = 2, .ff_mult = 2};
  PerceiverResampler<double> net(opt, rng);
  MatD tokens = random_matrix(3 * 5, 6, 22);
  check_gradients(
      net, tokens, [&](const MatD& in) { return net.forward(in, 5); },
      [&](const MatD& in, const MatD& dy) {
        PerceiverResampler<double>::Cache c;
        net.forward(in, 5, &c);
        return net.backward(c, dy);
      });
}

TEST(PerceiverResampler, OutputWidthIndependentOfSequenceLength) {
  Rng rng(3);
  PerceiverResampler<float> net({.input_dim = 12, .dim = 16, .depth = 2, .heads = 4}, rng);
  for (Index len : {1, 3, 11, 81}) {
    const MatF out = net.forward(MatF::Random(2 * len, 12), len);
    EXPECT_EQ(out.rows(), 2);
    EXPECT_EQ(out.cols(), 16);
  }
}

TEST(PerceiverResampler, BatchRowsAreIndependent) {
  Rng rng(4);
  PerceiverResampler<double> net({.input_dim = 4, .dim = 8, .depth = 2, .heads = 2}, rng);
  const MatD a = random_matrix(3, 4, 1);
  const MatD b = random_matrix(3, 4, 2);
  MatD both(6, 4);
  both << a, b;
  const MatD joint = net.forward(both, 3);
  EXPECT_LT((joint.row(0) - net.forward(a, 3)).norm(), 1e-12);
  EXPECT_LT((joint.row(1) - net.forward(b, 3)).norm(), 1e-12);
}

TEST(Adam, MinimisesQuadratic) {
  Parameter<double> p(1, 3);
  p.value << 3.0, -2.0, 1.0;
  Adam<double> opt({&p});
  for (int i = 0; i < 2000; ++i) {
    opt.zero_grad();
    p.grad = 2.0 * p.value;
    opt.step(0.05);
  }
  EXPECT_LT(p.value.norm(), 1e-3);
}

TEST(Adam, CosineScheduleEndpoints) {
  EXPECT_DOUBLE_EQ(cosine_lr(5e-4, 0, 100), 5e-4);
  EXPECT_NEAR(cosine_lr(5e-4, 50, 100), 2.5e-4, 1e-15);
  EXPECT_NEAR(cosine_lr(5e-4, 100, 100), 0.0, 1e-18);
}

TEST(Serialize, RoundTripPreservesFloatWeights) {
  Rng rng(8);
  PerceiverResampler<float> a({.input_dim = 5, .dim = 8, .depth = 1, .heads = 2}, rng);
  PerceiverResampler<float> b({.input_dim = 5, .dim = 8, .depth = 1, .heads = 2}, rng);
  deserialize_weights<float>(b, serialize_weights<float>(a));
  EXPECT_EQ(serialize_weights<float>(a), serialize_weights<float>(b));
  const MatF x = MatF::Random(4, 5);
  EXPECT_EQ(a.forward(x, 2), b.forward(x, 2));
}

TEST(Serialize, ShapeMismatchIsRejected) {
  Rng rng(8);
  Linear<float> a(3, 4, rng), b(4, 4, rng);
  EXPECT_THROW(deserialize_weights<float>(b, serialize_weights<float>(a)), CheckpointError);
  EXPECT_THROW(deserialize_weights<float>(b, std::string("junk")), CheckpointError);
}

}  // namespace
}  // namespace crosstab::nn
