// Copyright 2026 The concern-miner Authors.
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

// Shared vocabulary: error types, class labels, a portable seeded RNG,
// UTF-8 helpers and content digests.

#ifndef CMINE_COMMON_H_
#define CMINE_COMMON_H_

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cmine {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad input data: malformed files, inconsistent artifacts, violated
// preconditions on data. The CLI maps these to exit code 2.
class DataError : public Error {
 public:
  using Error::Error;
};

// Invalid arguments or configuration supplied by the caller.
class UsageError : public Error {
 public:
  using Error::Error;
};

enum class Label { kNonFairness = 0, kFairness = 1 };

std::string_view LabelName(Label label);
// Accepts "fairness" / "non_fairness". Throws DataError otherwise.
Label ParseLabel(std::string_view name);

// Seeded generator whose output stream is identical on every platform.
// std::uniform_int_distribution and friends are implementation-defined, so
// all sampling in the project goes through this class.
class Rng {
 public:
  explicit Rng(uint64_t seed);

  uint64_t NextU64();
  // Uniform in [0, bound). bound must be > 0.
  uint64_t UniformIndex(uint64_t bound);
  // Uniform in [0, 1).
  double UniformDouble();
  double Normal();

  template <typename T>
  void Shuffle(std::vector<T>& items) {
    for (size_t i = items.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(UniformIndex(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  // k distinct indices from [0, n), in draw order.
  std::vector<size_t> SampleIndices(size_t n, size_t k);

 private:
  uint64_t state_[4];
  std::optional<double> spare_normal_;
};

// Derives an independent stream seed from a base seed and a stream id.
uint64_t DeriveSeed(uint64_t seed, uint64_t stream);

namespace utf8 {

// Decodes UTF-8 to code points. Invalid sequences are dropped.
std::vector<char32_t> Decode(std::string_view text);
std::string Encode(std::span<const char32_t> code_points);
void Append(std::string& out, char32_t code_point);
size_t Length(std::string_view text);
// Simple per-code-point lowercase mapping.
std::string ToLower(std::string_view text);

}  // namespace utf8

// Splits on ASCII/Unicode whitespace runs; no empty tokens.
std::vector<std::string> SplitWhitespace(std::string_view text);
std::string Join(std::span<const std::string> parts, std::string_view sep);

// Hex SHA-256 of a byte string.
std::string Sha256Hex(std::string_view data);

// Half-up rounding of numerator/denominator scaled by 10^decimals, as an
// exact integer (e.g. 1.755% -> 176 hundredths). denominator must be > 0.
int64_t RoundHalfUpRatio(int64_t numerator, int64_t denominator,
                         int64_t scale);

}  // namespace cmine

#endif  // CMINE_COMMON_H_
