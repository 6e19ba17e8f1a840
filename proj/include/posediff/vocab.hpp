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

#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "posediff/error.hpp"

namespace posediff {

/// Gloss string <-> dense id.
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> words) {
    for (auto& w : words) add(w);
  }

  int add(const std::string& word) {
    auto [it, inserted] = ids_.emplace(word, static_cast<int>(words_.size()));
    if (inserted) words_.push_back(word);
    return it->second;
  }

  int id(const std::string& word) const {
    auto it = ids_.find(word);
    if (it == ids_.end()) throw Error("vocabulary", "unknown gloss '" + word + "'");
    return it->second;
  }

  bool contains(const std::string& word) const { return ids_.count(word) > 0; }
  const std::string& word(int id) const { return words_.at(id); }
  int size() const { return static_cast<int>(words_.size()); }
  const std::vector<std::string>& words() const { return words_; }

  std::vector<int> encode(const std::vector<std::string>& glosses) const {
    std::vector<int> out;
    out.reserve(glosses.size());
    for (const auto& g : glosses) out.push_back(id(g));
    return out;
  }

 private:
  std::vector<std::string> words_;
  std::map<std::string, int> ids_;
};

/// Whitespace-separated gloss string -> tokens.
inline std::vector<std::string> split_glosses(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

inline std::string join_glosses(const std::vector<std::string>& glosses) {
  std::string out;
  for (const auto& g : glosses) {
    if (!out.empty()) out += ' ';
    out += g;
  }
  return out;
}

}  // namespace posediff
