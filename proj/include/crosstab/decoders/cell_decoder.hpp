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

#include "crosstab/core/random.hpp"
#include "crosstab/nn/linear.hpp"
#include "crosstab/nn/resampler.hpp"

namespace crosstab {

struct CellDecoderShape {
  nn::Index text_dim = 768;
  nn::Index latent_dim = 128;
  nn::Index dim = 128;  // cell-space width
  nn::Index depth = 4;
  nn::Index heads = 4;
  bool scalar_head = false;
};

// Reads the 3-token sequence [P_m e_m, P_c e_c, v] with a resampler and
// returns either the cell-space vector or, with a scalar head, one number.
template <typename T>
class CellDecoder {
 public:
  struct Cache {
    typename nn::Linear<T>::Cache meta, name;
    typename nn::PerceiverResampler<T>::Cache body;
    typename nn::Linear<T>::Cache head;
    nn::Index batch = 0;
  };

  CellDecoder() = default;
  CellDecoder(const CellDecoderShape& shape, Rng& rng)
      : shape_(shape),
        meta_(shape.text_dim, shape.latent_dim, rng),
        name_(shape.text_dim, shape.latent_dim, rng),
        body_(body_options(shape), rng) {
    if (shape.scalar_head) head_ = nn::Linear<T>(shape.dim, 1, rng);
  }

  const CellDecoderShape& shape() const { return shape_; }
  nn::Index output_dim() const { return shape_.scalar_head ? 1 : shape_.dim; }

  // metadata, names: batch x text_dim (or 1 row broadcast); latents: batch x latent_dim.
  nn::Mat<T> forward(const nn::Mat<T>& metadata, const nn::Mat<T>& names, const nn::Mat<T>& latents,
                     Cache* cache = nullptr) const {
    const nn::Index b = latents.rows();
    const nn::Mat<T> pm = meta_.forward(metadata, cache ? &cache->meta : nullptr);
    const nn::Mat<T> pc = name_.forward(names, cache ? &cache->name : nullptr);
    nn::Mat<T> tokens(3 * b, shape_.latent_dim);
    for (nn::Index i = 0; i < b; ++i) {
      tokens.row(3 * i) = pm.row(pm.rows() == 1 ? 0 : i);
      tokens.row(3 * i + 1) = pc.row(pc.rows() == 1 ? 0 : i);
      tokens.row(3 * i + 2) = latents.row(i);
    }
    if (cache) cache->batch = b;
    nn::Mat<T> z = body_.forward(tokens, 3, cache ? &cache->body : nullptr);
    if (!shape_.scalar_head) return z;
    return head_.forward(z, cache ? &cache->head : nullptr);
  }

  void backward(const Cache& cache, const nn::Mat<T>& dout) {
    const nn::Mat<T> dz = shape_.scalar_head ? head_.backward(cache.head, dout) : dout;
    const nn::Mat<T> dtokens = body_.backward(cache.body, dz, true);
    const nn::Index b = cache.batch;
    const bool shared_meta = cache.meta.input.rows() == 1;
    const bool shared_name = cache.name.input.rows() == 1;
    nn::Mat<T> dm = nn::Mat<T>::Zero(shared_meta ? 1 : b, shape_.latent_dim);
    nn::Mat<T> dc = nn::Mat<T>::Zero(shared_name ? 1 : b, shape_.latent_dim);
    for (nn::Index i = 0; i < b; ++i) {
      dm.row(shared_meta ? 0 : i) += dtokens.row(3 * i);
      dc.row(shared_name ? 0 : i) += dtokens.row(3 * i + 1);
    }
    meta_.backward(cache.meta, dm, false);
    name_.backward(cache.name, dc, false);
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
  static nn::ResamplerOptions body_options(const CellDecoderShape& s) {
    nn::ResamplerOptions o;
    o.input_dim = s.latent_dim;
    o.dim = s.dim;
    o.depth = s.depth;
    o.heads = s.heads;
    o.ff_mult = 4;
    return o;
  }

  template <typename Self, typename V>
  static void visit_members(Self& self, V& v, const std::string& prefix) {
    self.meta_.visit(v, nn::join_name(prefix, "metadata_proj"));
    self.name_.visit(v, nn::join_name(prefix, "name_proj"));
    self.body_.visit(v, nn::join_name(prefix, "body"));
    if (self.shape_.scalar_head) self.head_.visit(v, nn::join_name(prefix, "head"));
  }

  CellDecoderShape shape_;
  nn::Linear<T> meta_, name_;
  nn::PerceiverResampler<T> body_;
  nn::Linear<T> head_;
};

}  // namespace crosstab
