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
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "crosstab/core/error.hpp"
#include "crosstab/nn/tensor.hpp"

namespace crosstab::nn {

// Binary weight file: magic, tensor count, then per tensor
// (name length, name, rows, cols, float32 little-endian data).
inline constexpr char kWeightsMagic[4] = {'X', 'T', 'W', '1'};

namespace detail {
template <typename I>
void put(std::ostream& os, I value) {
  os.write(reinterpret_cast<const char*>(&value), sizeof(I));
}
template <typename I>
I get(std::istream& is) {
  I value{};
  is.read(reinterpret_cast<char*>(&value), sizeof(I));
  if (!is) throw CheckpointError("truncated weight stream");
  return value;
}
}  // namespace detail

template <typename T, typename Net>
std::string serialize_weights(const Net& net) {
  std::ostringstream os(std::ios::binary);
  std::uint32_t count = 0;
  net.visit([&](const std::string&, const Parameter<T>&) { ++count; }, "");
  os.write(kWeightsMagic, 4);
  detail::put<std::uint32_t>(os, count);
  net.visit(
      [&](const std::string& name, const Parameter<T>& p) {
        detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        detail::put<std::uint64_t>(os, static_cast<std::uint64_t>(p.value.rows()));
        detail::put<std::uint64_t>(os, static_cast<std::uint64_t>(p.value.cols()));
        for (Index i = 0; i < p.value.size(); ++i) {
          detail::put<float>(os, static_cast<float>(p.value.data()[i]));
        }
      },
      "");
  return os.str();
}

template <typename T, typename Net>
void deserialize_weights(Net& net, const std::string& bytes) {
  std::istringstream is(bytes, std::ios::binary);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kWeightsMagic, 4) != 0) {
    throw CheckpointError("not a weight stream (bad magic)");
  }
  const auto count = detail::get<std::uint32_t>(is);
  std::map<std::string, Mat<T>> tensors;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = detail::get<std::uint32_t>(is);
    std::string name(len, '\0');
    is.read(name.data(), len);
    const auto rows = detail::get<std::uint64_t>(is);
    const auto cols = detail::get<std::uint64_t>(is);
    Mat<T> m(static_cast<Index>(rows), static_cast<Index>(cols));
    for (Index k = 0; k < m.size(); ++k) m.data()[k] = static_cast<T>(detail::get<float>(is));
    tensors.emplace(std::move(name), std::move(m));
  }
  std::size_t matched = 0;
  net.visit(
      [&](const std::string& name, Parameter<T>& p) {
        auto it = tensors.find(name);
        if (it == tensors.end()) throw CheckpointError("weight stream lacks tensor " + name);
        if (it->second.rows() != p.value.rows() || it->second.cols() != p.value.cols()) {
          throw CheckpointError("shape mismatch for tensor " + name);
        }
        p.value = it->second;
        p.grad.setZero(p.value.rows(), p.value.cols());
        ++matched;
      },
      "");
  if (matched != tensors.size()) throw CheckpointError("weight stream has unexpected tensors");
}

template <typename T, typename Net>
void save_weights(const Net& net, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw CheckpointError("cannot write " + path);
  const std::string bytes = serialize_weights<T>(net);
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw CheckpointError("short write to " + path);
}

template <typename T, typename Net>
void load_weights(Net& net, const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot read " + path);
  std::ostringstream buffer;
  buffer << is.rdbuf();
  deserialize_weights<T>(net, buffer.str());
}

}  // namespace crosstab::nn
