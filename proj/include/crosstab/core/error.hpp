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

#include <stdexcept>
#include <string>

namespace crosstab {

// Base of everything the library throws on bad input or failed training.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed CSV, schema descriptor, or a value that does not fit its column.
class DataError : public Error {
 public:
  using Error::Error;
};

// Hyperparameter or request outside its documented bounds.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A training stage failed its loss sanity check or diverged.
class TrainingError : public Error {
 public:
  TrainingError(std::string stage, const std::string& what)
      : Error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

// Checkpoint bundle missing, corrupt, or written by an incompatible version.
class CheckpointError : public Error {
 public:
  using Error::Error;
};

}  // namespace crosstab
