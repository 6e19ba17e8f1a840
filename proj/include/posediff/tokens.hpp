// Copyright 2026 The posediff Authors. All Rights Reserved.
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
#include <span>
#include <string>
#include <vector>

#include "posediff/error.hpp"

namespace posediff {

/// Token values use 1-based indexing: 1..V are codebook codes, V+1 is
/// MASK and V+2 is PAD.
using Token = std::int32_t;

/// Distribution over the V+2 token states; entry k is the mass on token k+1.
using Categorical = std::vector<double>;

/// Columns of a token grid: one code per skeleton patch per frame.
inline constexpr int kPatches = 3;

struct Alphabet {
  int vocab = 0;

  Token mask() const { return vocab + 1; }
  Token pad() const { return vocab + 2; }
  int states() const { return vocab + 2; }
  bool is_code(Token x) const { return x >= 1 && x <= vocab; }
  bool is_valid(Token x) const { return x >= 1 && x <= vocab + 2; }
};

/// N x 3 grid of tokens, frame-major.
class TokenGrid {
 public:
  TokenGrid() = default;
  TokenGrid(int frames, Token fill) : frames_(frames), values_(frames * kPatches, fill) {}
  TokenGrid(int frames, std::vector<Token> values)
      : frames_(frames), values_(std::move(values)) {
    require(static_cast<int>(values_.size()) == frames_ * kPatches, "shape",
            "token grid needs frames*3 values");
  }

  int frames() const { return frames_; }
  int positions() const { return static_cast<int>(values_.size()); }

  Token& at(int frame, int patch) { return values_[frame * kPatches + patch]; }
  Token at(int frame, int patch) const { return values_[frame * kPatches + patch]; }
  Token& operator[](int pos) { return values_[pos]; }
  Token operator[](int pos) const { return values_[pos]; }

  std::span<const Token> values() const { return values_; }
  std::vector<Token>& mutable_values() { return values_; }

  int count(Token x) const {
    int n = 0;
    for (Token v : values_) n += (v == x);
    return n;
  }

  bool operator==(const TokenGrid&) const = default;

 private:
  int frames_ = 0;
  std::vector<Token> values_;
};

inline void check_grid(const TokenGrid& g, const Alphabet& a) {
  for (int i = 0; i < g.positions(); ++i) {
    if (!a.is_valid(g[i])) {
      throw Error("token", "token " + std::to_string(g[i]) + " at position " +
                               std::to_string(i) + " outside [1, V+2]");
    }
  }
}

}  // namespace posediff
