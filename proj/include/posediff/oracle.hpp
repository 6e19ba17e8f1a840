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

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "posediff/diffusion.hpp"

namespace posediff {

/// Exact Bayes-optimal denoiser for an enumerable dataset:
/// p(x0 = s | x_t) is proportional to p_emp(s) * prod_i q(x_t^i | s^i),
/// marginalized per position.
///
/// Candidates are dataset sequences with the condition's key (all of them
/// in unconditional mode) and exactly the requested length. When the key
/// has no sequence of that length, each of its sequences is time-resampled
/// to the length (frame n takes source frame floor(n * len / N)).
class OracleDenoiser {
 public:
  struct Entry {
    TokenGrid tokens;
    std::string key;
    double weight = 1.0;
  };

  OracleDenoiser(const NoiseSchedule& schedule, std::vector<Entry> data,
                 bool conditional = true)
      : schedule_(&schedule), data_(std::move(data)), conditional_(conditional) {}

  DenoiserOutput operator()(const TokenGrid& x_t, int t, const Condition& c) const {
    const int V = schedule_->vocab_size();
    const Alphabet a{V};
    std::vector<Entry> resampled;
    const auto candidates = candidates_for(c.key, x_t.frames(), resampled);
    if (candidates.empty()) {
      throw Error("oracle", "no dataset sequence for condition '" + c.key + "'");
    }
    std::vector<double> logw(candidates.size());
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < candidates.size(); ++s) {
      double lw = std::log(candidates[s]->weight);
      for (int i = 0; i < x_t.positions() && std::isfinite(lw); ++i) {
        if (x_t[i] == a.pad()) continue;
        const double m = marginal_mass(x_t[i], candidates[s]->tokens[i], t, *schedule_);
        lw += m > 0.0 ? std::log(m) : -std::numeric_limits<double>::infinity();
      }
      logw[s] = lw;
      best = std::max(best, lw);
    }
    if (!std::isfinite(best)) {
      throw Error("oracle", "x_t is unreachable from every candidate sequence");
    }
    double z = 0.0;
    for (double& lw : logw) {
      lw = std::exp(lw - best);
      z += lw;
    }
    DenoiserOutput out(x_t.positions(), V);
    for (std::size_t s = 0; s < candidates.size(); ++s) {
      const double p = logw[s] / z;
      if (p == 0.0) continue;
      for (int i = 0; i < x_t.positions(); ++i) {
        const Token v = candidates[s]->tokens[i];
        if (a.is_code(v)) out.row(i)[v - 1] += p;
      }
    }
    for (int i = 0; i < x_t.positions(); ++i) {
      auto row = out.row(i);
      double sum = 0.0;
      for (double v : row) sum += v;
      if (sum <= 0.0) {
        for (double& v : row) v = 1.0 / V;
      }
    }
    return out;
  }

  /// Candidate sequences for a key and length. Resampled copies, when
  /// needed, are stored in \p storage.
  std::vector<const Entry*> candidates_for(const std::string& key, int frames,
                                           std::vector<Entry>& storage) const {
    std::vector<const Entry*> exact;
    storage.clear();
    for (const auto& e : data_) {
      if (conditional_ && e.key != key) continue;
      if (e.tokens.frames() == frames) exact.push_back(&e);
    }
    if (!exact.empty()) return exact;
    for (const auto& e : data_) {
      if (conditional_ && e.key != key) continue;
      storage.push_back({resample_frames(e.tokens, frames), e.key, e.weight});
    }
    std::vector<const Entry*> out;
    for (const auto& e : storage) out.push_back(&e);
    return out;
  }

  static TokenGrid resample_frames(const TokenGrid& g, int frames) {
    TokenGrid out(frames, 0);
    for (int n = 0; n < frames; ++n) {
      const int src = static_cast<int>(static_cast<long long>(n) * g.frames() / frames);
      for (int c = 0; c < kPatches; ++c) out.at(n, c) = g.at(src, c);
    }
    return out;
  }

 private:
  const NoiseSchedule* schedule_;
  std::vector<Entry> data_;
  bool conditional_;
};

}  // namespace posediff
