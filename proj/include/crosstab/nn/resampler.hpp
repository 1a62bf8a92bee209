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

#include "crosstab/nn/activation.hpp"
#include "crosstab/nn/attention.hpp"
#include "crosstab/nn/layer_norm.hpp"
#include "crosstab/nn/linear.hpp"

namespace crosstab::nn {

struct ResamplerOptions {
  Index input_dim = 768;
  Index dim = 128;
  Index depth = 4;
  Index heads = 4;
  Index ff_mult = 4;
};

// Perceiver-resampler with one learnable latent. Every layer lets the latent
// attend to the concatenation of itself and the projected input tokens,
//   v <- v + MHA(q = v, kv = [v; X]),   v <- v + FF(v),
// with pre-norm on the latent. Input is a stack of equal-length sequences.
template <typename T>
class PerceiverResampler {
 public:
  struct BlockCache {
    typename LayerNorm<T>::Cache attn_norm;
    typename LatentAttention<T>::Cache attn;
    typename LayerNorm<T>::Cache ff_norm;
    typename Linear<T>::Cache ff_in;
    Mat<T> ff_pre;
    typename Linear<T>::Cache ff_out;
  };
  struct Cache {
    typename Linear<T>::Cache in_proj;
    typename LayerNorm<T>::Cache in_norm;
    std::vector<BlockCache> blocks;
    typename LayerNorm<T>::Cache out_norm;
    Index batch = 0;
    Index seq_len = 0;
  };

  PerceiverResampler() = default;
  PerceiverResampler(const ResamplerOptions& opt, Rng& rng)
      : options_(opt),
        in_proj_(opt.input_dim, opt.dim, rng),
        in_norm_(opt.dim),
        latent_(1, opt.dim),
        out_norm_(opt.dim) {
    std::normal_distribution<double> init(0.0, 0.02);
    for (Index i = 0; i < latent_.value.size(); ++i) {
      latent_.value.data()[i] = static_cast<T>(init(rng));
    }
    for (Index l = 0; l < opt.depth; ++l) {
      Block block;
      block.attn_norm = LayerNorm<T>(opt.dim);
      block.attn = LatentAttention<T>(opt.dim, opt.heads, rng);
      block.ff_norm = LayerNorm<T>(opt.dim);
      block.ff_in = Linear<T>(opt.dim, opt.dim * opt.ff_mult, rng);
      block.ff_out = Linear<T>(opt.dim * opt.ff_mult, opt.dim, rng);
      blocks_.push_back(std::move(block));
    }
  }

  const ResamplerOptions& options() const { return options_; }
  Index output_dim() const { return options_.dim; }

  // tokens: (batch * seq_len) x input_dim  ->  batch x dim
  Mat<T> forward(const Mat<T>& tokens, Index seq_len, Cache* cache = nullptr) const {
    if (seq_len <= 0 || tokens.rows() % seq_len != 0) {
      throw std::invalid_argument("token rows must be a multiple of the sequence length");
    }
    const Index batch = tokens.rows() / seq_len;
    const Index d = options_.dim;
    if (cache) {
      cache->batch = batch;
      cache->seq_len = seq_len;
      cache->blocks.assign(blocks_.size(), BlockCache{});
    }
    const Mat<T> projected = in_proj_.forward(tokens, cache ? &cache->in_proj : nullptr);
    const Mat<T> x = in_norm_.forward(projected, cache ? &cache->in_norm : nullptr);

    Mat<T> v = latent_.value.replicate(batch, 1);
    Mat<T> kv(batch * (seq_len + 1), d);
    for (std::size_t l = 0; l < blocks_.size(); ++l) {
      const Block& block = blocks_[l];
      BlockCache* bc = cache ? &cache->blocks[l] : nullptr;
      const Mat<T> vn = block.attn_norm.forward(v, bc ? &bc->attn_norm : nullptr);
      for (Index b = 0; b < batch; ++b) {
        kv.row(b * (seq_len + 1)) = vn.row(b);
        kv.block(b * (seq_len + 1) + 1, 0, seq_len, d) = x.block(b * seq_len, 0, seq_len, d);
      }
      v += block.attn.forward(vn, kv, seq_len + 1, bc ? &bc->attn : nullptr);
      const Mat<T> h = block.ff_norm.forward(v, bc ? &bc->ff_norm : nullptr);
      Mat<T> pre = block.ff_in.forward(h, bc ? &bc->ff_in : nullptr);
      v += block.ff_out.forward(silu(pre), bc ? &bc->ff_out : nullptr);
      if (bc) bc->ff_pre = std::move(pre);
    }
    return out_norm_.forward(v, cache ? &cache->out_norm : nullptr);
  }

  // Accumulates parameter gradients; returns d tokens when requested.
  Mat<T> backward(const Cache& cache, const Mat<T>& dout, bool need_input_grad = true) {
    const Index batch = cache.batch;
    const Index s = cache.seq_len;
    const Index d = options_.dim;
    Mat<T> dv = out_norm_.backward(cache.out_norm, dout);
    Mat<T> dx = Mat<T>::Zero(batch * s, d);
    for (std::size_t li = blocks_.size(); li-- > 0;) {
      Block& block = blocks_[li];
      const BlockCache& bc = cache.blocks[li];
      Mat<T> dact = block.ff_out.backward(bc.ff_out, dv);
      Mat<T> dh = block.ff_in.backward(bc.ff_in, silu_backward(bc.ff_pre, dact));
      dv += block.ff_norm.backward(bc.ff_norm, dh);

      auto [dvn, dkv] = block.attn.backward(bc.attn, dv);
      for (Index b = 0; b < batch; ++b) {
        dvn.row(b) += dkv.row(b * (s + 1));
        dx.block(b * s, 0, s, d) += dkv.block(b * (s + 1) + 1, 0, s, d);
      }
      dv += block.attn_norm.backward(bc.attn_norm, dvn);
    }
    latent_.grad.row(0) += dv.colwise().sum();
    const Mat<T> dprojected = in_norm_.backward(cache.in_norm, dx);
    return in_proj_.backward(cache.in_proj, dprojected, need_input_grad);
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
    LayerNorm<T> attn_norm;
    LatentAttention<T> attn;
    LayerNorm<T> ff_norm;
    Linear<T> ff_in;
    Linear<T> ff_out;
  };

  template <typename Self, typename V>
  static void visit_members(Self& self, V& v, const std::string& prefix) {
    self.in_proj_.visit(v, join_name(prefix, "in_proj"));
    self.in_norm_.visit(v, join_name(prefix, "in_norm"));
    v(join_name(prefix, "latent"), self.latent_);
    for (std::size_t l = 0; l < self.blocks_.size(); ++l) {
      const std::string p = join_name(prefix, "block" + std::to_string(l));
      auto& block = self.blocks_[l];
      block.attn_norm.visit(v, join_name(p, "attn_norm"));
      block.attn.visit(v, join_name(p, "attn"));
      block.ff_norm.visit(v, join_name(p, "ff_norm"));
      block.ff_in.visit(v, join_name(p, "ff_in"));
      block.ff_out.visit(v, join_name(p, "ff_out"));
    }
    self.out_norm_.visit(v, join_name(prefix, "out_norm"));
  }

  ResamplerOptions options_;
  Linear<T> in_proj_;
  LayerNorm<T> in_norm_;
  Parameter<T> latent_;
  std::vector<Block> blocks_;
  LayerNorm<T> out_norm_;
};

}  // namespace crosstab::nn
