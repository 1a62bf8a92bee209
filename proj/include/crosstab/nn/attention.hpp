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
#include <stdexcept>
#include <string>
#include <utility>

#include "crosstab/nn/linear.hpp"

namespace crosstab::nn {

// Multi-head attention where each group of `group_size` key/value rows is
// attended by exactly one query row. Query row b reads kv rows
// [b * group_size, (b + 1) * group_size).
template <typename T>
class LatentAttention {
 public:
  struct Cache {
    typename Linear<T>::Cache q_in, k_in, v_in, out_in;
    Mat<T> q, k, v;
    Mat<T> weights;  // batch x (heads * group_size)
    Index group_size = 0;
  };

  LatentAttention() = default;
  LatentAttention(Index dim, Index heads, Rng& rng)
      : q_proj_(dim, dim, rng), k_proj_(dim, dim, rng), v_proj_(dim, dim, rng),
        out_proj_(dim, dim, rng), heads_(heads) {
    if (heads <= 0 || dim % heads != 0) {
      throw std::invalid_argument("attention width must be divisible by head count");
    }
  }

  Index dim() const { return q_proj_.in_features(); }
  Index heads() const { return heads_; }

  Mat<T> forward(const Mat<T>& query_input, const Mat<T>& kv_input, Index group_size,
                 Cache* cache = nullptr) const {
    const Index batch = query_input.rows();
    if (kv_input.rows() != batch * group_size) {
      throw std::invalid_argument("kv rows must equal batch * group_size");
    }
    const Index d = dim();
    const Index dh = d / heads_;
    const T scale = T(1) / std::sqrt(static_cast<T>(dh));

    Mat<T> q = q_proj_.forward(query_input, cache ? &cache->q_in : nullptr);
    Mat<T> k = k_proj_.forward(kv_input, cache ? &cache->k_in : nullptr);
    Mat<T> v = v_proj_.forward(kv_input, cache ? &cache->v_in : nullptr);

    Mat<T> mixed = Mat<T>::Zero(batch, d);
    Mat<T> weights(batch, heads_ * group_size);
    ColVector<T> scores(group_size);
    for (Index b = 0; b < batch; ++b) {
      for (Index h = 0; h < heads_; ++h) {
        const auto kb = k.block(b * group_size, h * dh, group_size, dh);
        const auto vb = v.block(b * group_size, h * dh, group_size, dh);
        const auto qb = q.block(b, h * dh, 1, dh);
        scores.noalias() = kb * qb.transpose();
        scores *= scale;
        const T peak = scores.maxCoeff();
        scores = (scores.array() - peak).exp();
        scores /= scores.sum();
        weights.block(b, h * group_size, 1, group_size) = scores.transpose();
        mixed.block(b, h * dh, 1, dh).noalias() = scores.transpose() * vb;
      }
    }
    Mat<T> out = out_proj_.forward(mixed, cache ? &cache->out_in : nullptr);
    if (cache) {
      cache->q = std::move(q);
      cache->k = std::move(k);
      cache->v = std::move(v);
      cache->weights = std::move(weights);
      cache->group_size = group_size;
    }
    return out;
  }

  // Returns (d query_input, d kv_input).
  std::pair<Mat<T>, Mat<T>> backward(const Cache& cache, const Mat<T>& dout) {
    const Index batch = cache.q.rows();
    const Index s = cache.group_size;
    const Index d = dim();
    const Index dh = d / heads_;
    const T scale = T(1) / std::sqrt(static_cast<T>(dh));

    Mat<T> dmixed = out_proj_.backward(cache.out_in, dout);
    Mat<T> dq = Mat<T>::Zero(batch, d);
    Mat<T> dk = Mat<T>::Zero(batch * s, d);
    Mat<T> dv = Mat<T>::Zero(batch * s, d);
    ColVector<T> dw(s), ds(s);
    for (Index b = 0; b < batch; ++b) {
      for (Index h = 0; h < heads_; ++h) {
        const auto w = cache.weights.block(b, h * s, 1, s);
        const auto kb = cache.k.block(b * s, h * dh, s, dh);
        const auto vb = cache.v.block(b * s, h * dh, s, dh);
        const auto qb = cache.q.block(b, h * dh, 1, dh);
        const auto dob = dmixed.block(b, h * dh, 1, dh);
        dv.block(b * s, h * dh, s, dh).noalias() += w.transpose() * dob;
        dw.noalias() = vb * dob.transpose();
        const T centre = (w * dw).value();
        ds = w.transpose().array() * (dw.array() - centre);
        ds *= scale;
        dq.block(b, h * dh, 1, dh).noalias() += ds.transpose() * kb;
        dk.block(b * s, h * dh, s, dh).noalias() += ds * qb;
      }
    }
    Mat<T> dquery = q_proj_.backward(cache.q_in, dq);
    Mat<T> dkv = k_proj_.backward(cache.k_in, dk);
    dkv += v_proj_.backward(cache.v_in, dv);
    return {std::move(dquery), std::move(dkv)};
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
    self.q_proj_.visit(v, join_name(prefix, "q"));
    self.k_proj_.visit(v, join_name(prefix, "k"));
    self.v_proj_.visit(v, join_name(prefix, "v"));
    self.out_proj_.visit(v, join_name(prefix, "out"));
  }

  Linear<T> q_proj_, k_proj_, v_proj_, out_proj_;
  Index heads_ = 1;
};

}  // namespace crosstab::nn
