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

#include <cstdint>
#include <random>
#include <string_view>

namespace crosstab {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t fnv1a64(std::string_view text,
                             std::uint64_t hash = 0xcbf29ce484222325ULL) {
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

// Expands one root seed into independent per-stage seeds.
inline std::uint64_t derive_seed(std::uint64_t root, std::string_view stage) {
  std::uint64_t state = root ^ fnv1a64(stage);
  return splitmix64(state);
}

inline std::uint64_t derive_seed(std::uint64_t root, std::string_view stage,
                                 std::uint64_t index) {
  std::uint64_t state = derive_seed(root, stage) + index * 0x632be59bd9b4e019ULL;
  return splitmix64(state);
}

}  // namespace crosstab
