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

#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "crosstab/core/error.hpp"
#include "crosstab/core/random.hpp"
#include "crosstab/nn/tensor.hpp"

namespace crosstab {

inline constexpr nn::Index kTextDim = 768;

class TextEncoder {
 public:
  virtual ~TextEncoder() = default;
  virtual nn::Index dim() const = 0;
  virtual nn::RowVectorF encode(std::string_view text) const = 0;
  // Stable description stored with checkpoints to detect encoder mismatch.
  virtual std::string identity() const = 0;
};

// Offline encoder: sum of pseudo-random sign vectors, one per word and per
// character trigram of each word, L2-normalised. Texts sharing words or
// sub-words land close together; unrelated texts are nearly orthogonal.
class HashedTextEncoder final : public TextEncoder {
 public:
  explicit HashedTextEncoder(nn::Index dim = kTextDim, std::uint64_t seed = 0x5eed)
      : dim_(dim), seed_(seed) {
    if (dim_ <= 0) throw ConfigError("text embedding width must be positive");
  }

  nn::Index dim() const override { return dim_; }

  std::string identity() const override {
    return "hashed-ngram:dim=" + std::to_string(dim_) + ":seed=" + std::to_string(seed_);
  }

  nn::RowVectorF encode(std::string_view text) const override {
    if (text.empty()) throw DataError("cannot encode empty text");
    std::vector<double> acc(static_cast<std::size_t>(dim_), 0.0);
    std::size_t features = 0;
    std::string word;
    auto flush_word = [&] {
      if (word.empty()) return;
      add_feature("w:" + word, 1.0, acc);
      const std::string padded = "<" + word + ">";
      for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
        add_feature("g:" + padded.substr(i, 3), 0.5, acc);
      }
      ++features;
      word.clear();
    };
    for (unsigned char c : text) {
      if (std::isalnum(c)) {
        word.push_back(static_cast<char>(std::tolower(c)));
      } else {
        flush_word();
      }
    }
    flush_word();
    if (features == 0) add_feature("raw:" + std::string(text), 1.0, acc);

    double norm = 0.0;
    for (double a : acc) norm += a * a;
    norm = std::sqrt(norm);
    nn::RowVectorF out(dim_);
    for (nn::Index i = 0; i < dim_; ++i) out[i] = static_cast<float>(acc[i] / norm);
    return out;
  }

 private:
  void add_feature(const std::string& feature, double weight, std::vector<double>& acc) const {
    std::uint64_t state = fnv1a64(feature) ^ seed_;
    std::uint64_t bits = 0;
    for (std::size_t i = 0; i < acc.size(); ++i) {
      if (i % 64 == 0) bits = splitmix64(state);
      acc[i] += (bits >> (i % 64)) & 1U ? weight : -weight;
    }
  }

  nn::Index dim_;
  std::uint64_t seed_;
};

// Adapter for vectors produced offline by an external sentence encoder,
// stored as {"identity": ..., "dim": n, "vectors": {text: [...]}}.
class PrecomputedTextEncoder final : public TextEncoder {
 public:
  explicit PrecomputedTextEncoder(const nlohmann::json& j) {
    try {
      dim_ = j.at("dim").get<nn::Index>();
      identity_ = "precomputed:" + j.value("identity", std::string("unnamed"));
      for (const auto& [text, values] : j.at("vectors").items()) {
        auto v = values.get<std::vector<float>>();
        if (static_cast<nn::Index>(v.size()) != dim_) {
          throw DataError("vector for '" + text + "' has width " + std::to_string(v.size()));
        }
        vectors_.emplace(text, Eigen::Map<const nn::RowVectorF>(v.data(), dim_));
      }
    } catch (const nlohmann::json::exception& e) {
      throw DataError(std::string("malformed precomputed embeddings: ") + e.what());
    }
  }

  static PrecomputedTextEncoder load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    return PrecomputedTextEncoder(nlohmann::json::parse(in));
  }

  nn::Index dim() const override { return dim_; }
  std::string identity() const override { return identity_; }

  nn::RowVectorF encode(std::string_view text) const override {
    auto it = vectors_.find(std::string(text));
    if (it == vectors_.end()) throw DataError("no precomputed embedding for '" + std::string(text) + "'");
    return it->second;
  }

 private:
  nn::Index dim_ = 0;
  std::string identity_;
  std::unordered_map<std::string, nn::RowVectorF> vectors_;
};

// Memoising wrapper: the wrapped encoder runs once per distinct string.
// Safe for concurrent use.
class CachedTextEncoder final : public TextEncoder {
 public:
  explicit CachedTextEncoder(std::shared_ptr<const TextEncoder> inner) : inner_(std::move(inner)) {
    if (!inner_) throw ConfigError("cached encoder needs an inner encoder");
  }

  nn::Index dim() const override { return inner_->dim(); }
  std::string identity() const override { return inner_->identity(); }

  nn::RowVectorF encode(std::string_view text) const override {
    std::lock_guard lock(mutex_);
    auto it = cache_.find(std::string(text));
    if (it != cache_.end()) return it->second;
    ++invocations_;
    return cache_.emplace(std::string(text), inner_->encode(text)).first->second;
  }

  std::size_t invocations() const { return invocations_.load(); }

 private:
  std::shared_ptr<const TextEncoder> inner_;
  mutable std::mutex mutex_;
  mutable std::unordered_map<std::string, nn::RowVectorF> cache_;
  mutable std::atomic<std::size_t> invocations_{0};
};

inline std::shared_ptr<CachedTextEncoder> make_default_text_encoder() {
  return std::make_shared<CachedTextEncoder>(std::make_shared<HashedTextEncoder>());
}

}  // namespace crosstab
