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

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "crosstab/core/error.hpp"
#include "crosstab/core/log.hpp"
#include "crosstab/core/random.hpp"
#include "crosstab/nn/activation.hpp"
#include "crosstab/nn/linear.hpp"
#include "crosstab/nn/optim.hpp"

namespace crosstab {

struct NumberAutoencoderShape {
  nn::Index hidden = 1024;
  nn::Index code = 768;
};

// Scalar autoencoder in quantile space. Encoder 1 -> hidden (ReLU) -> code
// (10 tanh); decoder code -> hidden (ReLU) -> 1.
template <typename T>
class NumberAutoencoder {
 public:
  static constexpr T kCodeScale = T(10);

  struct Cache {
    typename nn::Linear<T>::Cache enc1, enc2, dec1, dec2;
    nn::Mat<T> enc1_pre, enc2_pre, dec1_pre;
  };

  NumberAutoencoder() = default;
  NumberAutoencoder(const NumberAutoencoderShape& shape, Rng& rng)
      : enc1_(1, shape.hidden, rng),
        enc2_(shape.hidden, shape.code, rng),
        dec1_(shape.code, shape.hidden, rng),
        dec2_(shape.hidden, 1, rng) {}

  nn::Index code_dim() const { return enc2_.out_features(); }

  // x: batch x 1 -> batch x code
  nn::Mat<T> encode(const nn::Mat<T>& x, Cache* cache = nullptr) const {
    nn::Mat<T> h = enc1_.forward(x, cache ? &cache->enc1 : nullptr);
    nn::Mat<T> a = nn::relu(h);
    nn::Mat<T> z = enc2_.forward(a, cache ? &cache->enc2 : nullptr);
    nn::Mat<T> out = nn::scaled_tanh(z, kCodeScale);
    if (cache) {
      cache->enc1_pre = std::move(h);
      cache->enc2_pre = std::move(z);
    }
    return out;
  }

  // code: batch x code -> batch x 1
  nn::Mat<T> decode(const nn::Mat<T>& code, Cache* cache = nullptr) const {
    nn::Mat<T> h = dec1_.forward(code, cache ? &cache->dec1 : nullptr);
    nn::Mat<T> out = dec2_.forward(nn::relu(h), cache ? &cache->dec2 : nullptr);
    if (cache) cache->dec1_pre = std::move(h);
    return out;
  }

  nn::Mat<T> round_trip(const nn::Mat<T>& x, Cache* cache = nullptr) const {
    return decode(encode(x, cache), cache);
  }

  // Gradient of a loss w.r.t. the round-trip output, back through both halves.
  void backward(const Cache& cache, const nn::Mat<T>& dout) {
    nn::Mat<T> dh = dec2_.backward(cache.dec2, dout);
    nn::Mat<T> dcode = dec1_.backward(cache.dec1, nn::relu_backward(cache.dec1_pre, dh));
    nn::Mat<T> dz = nn::scaled_tanh_backward(cache.enc2_pre, dcode, kCodeScale);
    nn::Mat<T> da = enc2_.backward(cache.enc2, dz);
    enc1_.backward(cache.enc1, nn::relu_backward(cache.enc1_pre, da), false);
  }

  template <typename V>
  void visit(V&& v, const std::string& prefix) {
    visit_members(*this, v, prefix);
  }
  template <typename V>
  void visit(V&& v, const std::string& prefix) const {
    visit_members(*this, v, prefix);
  }

 private:
  template <typename Self, typename V>
  static void visit_members(Self& self, V& v, const std::string& prefix) {
    self.enc1_.visit(v, nn::join_name(prefix, "encoder.fc1"));
    self.enc2_.visit(v, nn::join_name(prefix, "encoder.fc2"));
    self.dec1_.visit(v, nn::join_name(prefix, "decoder.fc1"));
    self.dec2_.visit(v, nn::join_name(prefix, "decoder.fc2"));
  }

  nn::Linear<T> enc1_, enc2_, dec1_, dec2_;
};

using NumberEncoder = NumberAutoencoder<float>;

struct NumberAutoencoderTraining {
  std::size_t epochs = 300;
  std::size_t batch_size = 1024;
  double learning_rate = 1e-3;
  double final_lr_fraction = 0.05;
  std::uint64_t seed = 0;
  NumberAutoencoderShape shape{};
  std::function<void(std::size_t epoch, double loss)> on_epoch;
};

struct NumberAutoencoderResult {
  NumberEncoder model;
  std::vector<double> losses;
};

// Each epoch draws a fresh batch from Uniform(0, 1) and takes one Adam step
// on the reconstruction MSE.
inline NumberAutoencoderResult pretrain_number_autoencoder(const NumberAutoencoderTraining& opt) {
  if (opt.epochs == 0 || opt.batch_size == 0) throw ConfigError("autoencoder needs epochs and a batch");
  Rng init(derive_seed(opt.seed, "number-ae-init"));
  Rng data(derive_seed(opt.seed, "number-ae-data"));
  NumberAutoencoderResult result{NumberEncoder(opt.shape, init), {}};
  nn::Adam<float> adam(nn::parameters_of<float>(result.model));
  std::uniform_real_distribution<float> uniform(0.0f, 1.0f);
  nn::MatF x(static_cast<nn::Index>(opt.batch_size), 1);
  const float scale = 2.0f / static_cast<float>(opt.batch_size);
  for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
    for (nn::Index i = 0; i < x.rows(); ++i) x(i, 0) = uniform(data);
    NumberEncoder::Cache cache;
    const nn::MatF y = result.model.round_trip(x, &cache);
    const nn::MatF diff = y - x;
    const double loss = static_cast<double>(diff.squaredNorm()) / static_cast<double>(opt.batch_size);
    adam.zero_grad();
    result.model.backward(cache, diff * scale);
    adam.step(nn::cosine_lr(opt.learning_rate, epoch, opt.epochs, opt.final_lr_fraction));
    result.losses.push_back(loss);
    if (opt.on_epoch) opt.on_epoch(epoch, loss);
  }
  const std::size_t w = std::min<std::size_t>(10, result.losses.size());
  double head = 0.0, tail = 0.0;
  for (std::size_t i = 0; i < w; ++i) {
    head += result.losses[i];
    tail += result.losses[result.losses.size() - 1 - i];
  }
  if (!(tail < head)) {
    throw TrainingError("number-autoencoder", "reconstruction loss did not decrease");
  }
  logger()->info("number autoencoder: {} epochs, final mse {:.3g}", opt.epochs, result.losses.back());
  return result;
}

}  // namespace crosstab
