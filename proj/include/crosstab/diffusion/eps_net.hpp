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

#include <cmath>
#include <string>
#include <vector>

#include "crosstab/nn/activation.hpp"
#include "crosstab/nn/linear.hpp"

namespace crosstab {

struct EpsNetShape {
  nn::Index latent_dim = 128;
  nn::Index condition_dim = 768;
  nn::Index hidden = 512;
  nn::Index depth = 4;
  nn::Index time_dim = 128;
};

// Sinusoidal timestep features: [sin(t f_0), ..., cos(t f_0), ...] with
// geometrically spaced frequencies.
template <typename T>
nn::Mat<T> timestep_features(const std::vector<std::size_t>& t, nn::Index dim) {
  const nn::Index half = dim / 2;
  nn::Mat<T> out = nn::Mat<T>::Zero(static_cast<nn::Index>(t.size()), dim);
  for (std::size_t r = 0; r < t.size(); ++r) {
    for (nn::Index i = 0; i < half; ++i) {
      const double freq = std::exp(-std::log(10000.0) * static_cast<double>(i) / static_cast<double>(half));
      const double a = static_cast<double>(t[r]) * freq;
      out(static_cast<nn::Index>(r), i) = static_cast<T>(std::sin(a));
      out(static_cast<nn::Index>(r), half + i) = static_cast<T>(std::cos(a));
    }
  }
  return out;
}

// Residual MLP noise predictor:
//   h = SiLU(In x),  te = T2 SiLU(T1 sin(t)),  ye = SiLU(Y y)
//   h <- SiLU(h + B2 SiLU(B1 h) + Tl te + Yl ye)   per block
//   eps = Out h   (Out starts at zero)
template <typename T>
class EpsNet {
 public:
  struct BlockCache {
    typename nn::Linear<T>::Cache b1, b2, tl, yl;
    nn::Mat<T> b1_pre, sum;
  };
  struct Cache {
    typename nn::Linear<T>::Cache in, t1, t2, y, out;
    nn::Mat<T> in_pre, t1_pre, y_pre;
    std::vector<BlockCache> blocks;
  };
  // Condition-dependent terms, reusable across sampling steps.
  struct ConditionTerms {
    std::vector<nn::Mat<T>> per_block;
  };

  EpsNet() = default;
  EpsNet(const EpsNetShape& shape, Rng& rng)
      : shape_(shape),
        in_(shape.latent_dim, shape.hidden, rng),
        t1_(shape.time_dim, shape.hidden, rng),
        t2_(shape.hidden, shape.hidden, rng),
        y_(shape.condition_dim, shape.hidden, rng),
        out_(shape.hidden, shape.latent_dim, rng) {
    for (nn::Index l = 0; l < shape.depth; ++l) {
      blocks_.push_back({nn::Linear<T>(shape.hidden, shape.hidden, rng),
                         nn::Linear<T>(shape.hidden, shape.hidden, rng),
                         nn::Linear<T>(shape.hidden, shape.hidden, rng),
                         nn::Linear<T>(shape.hidden, shape.hidden, rng)});
    }
    out_.zero_weights();
  }

  const EpsNetShape& shape() const { return shape_; }

  nn::Mat<T> forward(const nn::Mat<T>& x, const std::vector<std::size_t>& t, const nn::Mat<T>& y,
                     Cache* cache = nullptr) const {
    if (cache) cache->blocks.assign(blocks_.size(), BlockCache{});
    nn::Mat<T> in_pre = in_.forward(x, cache ? &cache->in : nullptr);
    nn::Mat<T> h = nn::silu(in_pre);
    nn::Mat<T> t1_pre = t1_.forward(timestep_features<T>(t, shape_.time_dim), cache ? &cache->t1 : nullptr);
    const nn::Mat<T> te = t2_.forward(nn::silu(t1_pre), cache ? &cache->t2 : nullptr);
    nn::Mat<T> y_pre = y_.forward(y, cache ? &cache->y : nullptr);
    const nn::Mat<T> ye = nn::silu(y_pre);
    for (std::size_t l = 0; l < blocks_.size(); ++l) {
      const Block& b = blocks_[l];
      BlockCache* bc = cache ? &cache->blocks[l] : nullptr;
      nn::Mat<T> b1_pre = b.b1.forward(h, bc ? &bc->b1 : nullptr);
      nn::Mat<T> sum = h + b.b2.forward(nn::silu(b1_pre), bc ? &bc->b2 : nullptr) +
                       b.tl.forward(te, bc ? &bc->tl : nullptr) + b.yl.forward(ye, bc ? &bc->yl : nullptr);
      h = nn::silu(sum);
      if (bc) {
        bc->b1_pre = std::move(b1_pre);
        bc->sum = std::move(sum);
      }
    }
    nn::Mat<T> out = out_.forward(h, cache ? &cache->out : nullptr);
    if (cache) {
      cache->in_pre = std::move(in_pre);
      cache->t1_pre = std::move(t1_pre);
      cache->y_pre = std::move(y_pre);
    }
    return out;
  }

  // Parameter gradients only; the inputs are data.
  void backward(const Cache& cache, const nn::Mat<T>& dout) {
    nn::Mat<T> dh = out_.backward(cache.out, dout);
    nn::Mat<T> dte = nn::Mat<T>::Zero(dh.rows(), shape_.hidden);
    nn::Mat<T> dye = nn::Mat<T>::Zero(dh.rows(), shape_.hidden);
    for (std::size_t l = blocks_.size(); l-- > 0;) {
      Block& b = blocks_[l];
      const BlockCache& bc = cache.blocks[l];
      const nn::Mat<T> dsum = nn::silu_backward(bc.sum, dh);
      dte += b.tl.backward(bc.tl, dsum);
      dye += b.yl.backward(bc.yl, dsum);
      const nn::Mat<T> dact = b.b2.backward(bc.b2, dsum);
      dh = dsum + b.b1.backward(bc.b1, nn::silu_backward(bc.b1_pre, dact));
    }
    in_.backward(cache.in, nn::silu_backward(cache.in_pre, dh), false);
    const nn::Mat<T> dt1 = t2_.backward(cache.t2, dte);
    t1_.backward(cache.t1, nn::silu_backward(cache.t1_pre, dt1), false);
    y_.backward(cache.y, nn::silu_backward(cache.y_pre, dye), false);
  }

  ConditionTerms condition_terms(const nn::Mat<T>& y) const {
    const nn::Mat<T> ye = nn::silu(y_.forward(y));
    ConditionTerms terms;
    for (const auto& b : blocks_) terms.per_block.push_back(b.yl.forward(ye));
    return terms;
  }

  // Inference with one shared timestep and precomputed condition terms
  // (one row per sample, or a single row broadcast to all samples).
  nn::Mat<T> predict(const nn::Mat<T>& x, std::size_t t, const ConditionTerms& cond) const {
    const std::vector<std::size_t> ts{t};
    const nn::Mat<T> te = t2_.forward(nn::silu(t1_.forward(timestep_features<T>(ts, shape_.time_dim))));
    nn::Mat<T> h = nn::silu(in_.forward(x));
    for (std::size_t l = 0; l < blocks_.size(); ++l) {
      const Block& b = blocks_[l];
      nn::Mat<T> sum = h + b.b2.forward(nn::silu(b.b1.forward(h)));
      sum.rowwise() += b.tl.forward(te).row(0);
      const nn::Mat<T>& yc = cond.per_block[l];
      if (yc.rows() == 1) {
        sum.rowwise() += yc.row(0);
      } else {
        sum += yc;
      }
      h = nn::silu(sum);
    }
    return out_.forward(h);
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
  struct Block {
    nn::Linear<T> b1, b2, tl, yl;
  };

  template <typename Self, typename V>
  static void visit_members(Self& self, V& v, const std::string& prefix) {
    self.in_.visit(v, nn::join_name(prefix, "input"));
    self.t1_.visit(v, nn::join_name(prefix, "time.fc1"));
    self.t2_.visit(v, nn::join_name(prefix, "time.fc2"));
    self.y_.visit(v, nn::join_name(prefix, "condition"));
    for (std::size_t l = 0; l < self.blocks_.size(); ++l) {
      const std::string p = nn::join_name(prefix, "block" + std::to_string(l));
      self.blocks_[l].b1.visit(v, nn::join_name(p, "fc1"));
      self.blocks_[l].b2.visit(v, nn::join_name(p, "fc2"));
      self.blocks_[l].tl.visit(v, nn::join_name(p, "time"));
      self.blocks_[l].yl.visit(v, nn::join_name(p, "condition"));
    }
    self.out_.visit(v, nn::join_name(prefix, "output"));
  }

  EpsNetShape shape_;
  nn::Linear<T> in_, t1_, t2_, y_, out_;
  std::vector<Block> blocks_;
};

}  // namespace crosstab
