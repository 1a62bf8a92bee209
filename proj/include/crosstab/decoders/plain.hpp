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
#include <numeric>
#include <string>
#include <vector>

#include "crosstab/core/log.hpp"
#include "crosstab/decoders/decoders.hpp"
#include "crosstab/nn/activation.hpp"

namespace crosstab {

// Whole-row reconstruction from a latent with one MLP per table schema: a
// quantile slot per numerical column and a logit block per categorical one.
// Used as the non type-specific baseline.
class PlainDecoder {
 public:
  struct Cache {
    nn::Linear<float>::Cache in, mid, out;
    nn::MatF pre1, pre2;
  };

  PlainDecoder() = default;
  PlainDecoder(std::vector<ColumnSchema> columns, nn::Index latent_dim, nn::Index hidden, Rng& rng)
      : columns_(std::move(columns)) {
    nn::Index width = 0;
    for (const auto& c : columns_) {
      offsets_.push_back(width);
      width += c.is_categorical() ? static_cast<nn::Index>(c.categories.size()) : 1;
    }
    in_ = nn::Linear<float>(latent_dim, hidden, rng);
    mid_ = nn::Linear<float>(hidden, hidden, rng);
    out_ = nn::Linear<float>(hidden, width, rng);
  }

  const std::vector<ColumnSchema>& columns() const { return columns_; }
  nn::Index output_dim() const { return out_.out_features(); }
  nn::Index hidden() const { return in_.out_features(); }

  nn::MatF forward(const nn::MatF& latents, Cache* cache = nullptr) const {
    nn::MatF pre1 = in_.forward(latents, cache ? &cache->in : nullptr);
    nn::MatF pre2 = mid_.forward(nn::silu(pre1), cache ? &cache->mid : nullptr);
    nn::MatF out = out_.forward(nn::silu(pre2), cache ? &cache->out : nullptr);
    if (cache) {
      cache->pre1 = std::move(pre1);
      cache->pre2 = std::move(pre2);
    }
    return out;
  }

  void backward(const Cache& cache, const nn::MatF& dout) {
    const nn::MatF d2 = out_.backward(cache.out, dout);
    const nn::MatF d1 = mid_.backward(cache.mid, nn::silu_backward(cache.pre2, d2));
    in_.backward(cache.in, nn::silu_backward(cache.pre1, d1), false);
  }

  // Sum over columns of quantile MSE and categorical cross-entropy, averaged
  // over rows. `targets` holds quantiles for numerical and codes for
  // categorical columns, one row per latent.
  double loss(const nn::MatF& out, const nn::MatF& targets, nn::MatF* grad) const {
    const nn::Index n = out.rows();
    double total = 0.0;
    if (grad) grad->setZero(out.rows(), out.cols());
    for (std::size_t k = 0; k < columns_.size(); ++k) {
      const nn::Index off = offsets_[k];
      const auto kk = static_cast<nn::Index>(k);
      if (!columns_[k].is_categorical()) {
        for (nn::Index i = 0; i < n; ++i) {
          const double d = out(i, off) - targets(i, kk);
          total += d * d;
          if (grad) (*grad)(i, off) = static_cast<float>(2.0 * d / static_cast<double>(n));
        }
        continue;
      }
      const auto width = static_cast<nn::Index>(columns_[k].categories.size());
      for (nn::Index i = 0; i < n; ++i) {
        const auto logits = out.row(i).segment(off, width).cast<double>();
        const double peak = logits.maxCoeff();
        const Eigen::RowVectorXd e = (logits.array() - peak).exp();
        const double z = e.sum();
        const auto label = static_cast<nn::Index>(targets(i, kk));
        total += peak + std::log(z) - logits(label);
        if (grad) {
          Eigen::RowVectorXd g = e / z;
          g(label) -= 1.0;
          grad->row(i).segment(off, width) = (g / static_cast<double>(n)).cast<float>();
        }
      }
    }
    return total / static_cast<double>(n);
  }

  // Decodes every schema column; categorical by argmax, numerical through the
  // clamped inverse quantile.
  TableDataset decode(const nn::MatF& latents, const std::string& metadata,
                      const ColumnTransformers& transformers) const {
    TableDataset out(metadata, columns_);
    const nn::MatF raw = forward(latents);
    std::vector<double> row(columns_.size());
    for (nn::Index i = 0; i < raw.rows(); ++i) {
      for (std::size_t k = 0; k < columns_.size(); ++k) {
        const nn::Index off = offsets_[k];
        if (columns_[k].is_categorical()) {
          nn::Index best = 0;
          raw.row(i).segment(off, static_cast<nn::Index>(columns_[k].categories.size())).maxCoeff(&best);
          row[k] = static_cast<double>(best);
        } else {
          row[k] = decode_numerical(raw(i, off), transformers.at(columns_[k].name));
        }
      }
      out.add_encoded_row(row);
    }
    return out;
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
    self.in_.visit(v, nn::join_name(prefix, "fc1"));
    self.mid_.visit(v, nn::join_name(prefix, "fc2"));
    self.out_.visit(v, nn::join_name(prefix, "output"));
  }

  std::vector<ColumnSchema> columns_;
  std::vector<nn::Index> offsets_;
  nn::Linear<float> in_, mid_, out_;
};

struct PlainDecoderTraining {
  std::size_t epochs = 300;
  std::size_t batch_size = 128;
  double learning_rate = 1e-3;
  nn::Index hidden = 256;
  std::uint64_t seed = 0;
};

// Fits a plain decoder to the full-row latents of one table.
inline PlainDecoder train_plain_decoder(const EmbeddedTable& table, const nn::MatF& latents,
                                        const PlainDecoderTraining& opt, std::vector<double>* curve = nullptr) {
  const std::size_t n = table.row_count();
  if (n == 0) throw DataError("plain decoder needs rows");
  Rng rng(derive_seed(opt.seed, "plain-decoder"));
  PlainDecoder dec(table.table().columns(), latents.cols(), opt.hidden, rng);
  nn::MatF targets(static_cast<nn::Index>(n), static_cast<nn::Index>(table.column_count()));
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < table.column_count(); ++c) {
      targets(static_cast<nn::Index>(r), static_cast<nn::Index>(c)) =
          table.table().column(c).is_categorical() ? static_cast<float>(table.table().code(r, c)) : table.unit(r, c);
    }
  }
  nn::Adam<float> adam(nn::parameters_of<float>(dec), nn::AdamOptions{});
  std::vector<nn::Index> order(n);
  std::iota(order.begin(), order.end(), nn::Index{0});
  const std::size_t batches = (n + opt.batch_size - 1) / opt.batch_size;
  const std::size_t total = batches * opt.epochs;
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double sum = 0.0;
    for (std::size_t b = 0; b < batches; ++b) {
      const std::size_t first = b * opt.batch_size;
      const std::size_t count = std::min(opt.batch_size, n - first);
      nn::MatF x(static_cast<nn::Index>(count), latents.cols());
      nn::MatF y(static_cast<nn::Index>(count), targets.cols());
      for (std::size_t i = 0; i < count; ++i) {
        x.row(static_cast<nn::Index>(i)) = latents.row(order[first + i]);
        y.row(static_cast<nn::Index>(i)) = targets.row(order[first + i]);
      }
      PlainDecoder::Cache cache;
      const nn::MatF out = dec.forward(x, &cache);
      nn::MatF grad;
      const double loss = dec.loss(out, y, &grad);
      if (!std::isfinite(loss)) throw TrainingError("plain decoder", "loss is not finite");
      adam.zero_grad();
      dec.backward(cache, grad);
      adam.step(nn::cosine_lr(opt.learning_rate, step++, total, 0.0));
      sum += loss * static_cast<double>(count);
    }
    if (curve) curve->push_back(sum / static_cast<double>(n));
  }
  return dec;
}

}  // namespace crosstab
