// Copyright 2026 the mfec authors
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

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mfec {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument with the wrong dimension, a non-finite value, or out of range.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

class PreconditionViolation : public Error {
 public:
  using Error::Error;
};

/// Query against an action buffer holding no entries.
class EmptyBuffer : public Error {
 public:
  using Error::Error;
};

/// A ratio whose denominator is zero (match rate before any query,
/// distortion over coincident points).
class UndefinedStatistic : public Error {
 public:
  using Error::Error;
};

class NumericalFailure : public Error {
 public:
  NumericalFailure(std::string block, const std::string& what)
      : Error(what + " [" + block + "]"), block_(std::move(block)) {}
  const std::string& block() const noexcept { return block_; }

 private:
  std::string block_;
};

class EpisodeFinished : public Error {
 public:
  using Error::Error;
};

class SpecValidationError : public Error {
 public:
  explicit SpecValidationError(std::vector<std::string> violations)
      : Error(join(violations)), violations_(std::move(violations)) {}
  const std::vector<std::string>& violations() const noexcept { return violations_; }

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string out = "invalid grid world spec:";
    for (const auto& s : v) out += " " + s + ";";
    return out;
  }
  std::vector<std::string> violations_;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, std::string key, const std::string& what)
      : Error("line " + std::to_string(line) + " (" + key + "): " + what), line_(line), key_(std::move(key)) {}
  std::size_t line() const noexcept { return line_; }
  const std::string& key() const noexcept { return key_; }

 private:
  std::size_t line_;
  std::string key_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace mfec
