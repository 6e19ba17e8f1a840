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

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <vector>

#include "posediff/error.hpp"
#include "posediff/skeleton.hpp"

namespace posediff {

/// Levenshtein distance with unit costs.
template <class T>
int edit_distance(const std::vector<T>& hyp, const std::vector<T>& ref) {
  std::vector<int> prev(ref.size() + 1), cur(ref.size() + 1);
  for (std::size_t j = 0; j <= ref.size(); ++j) prev[j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= hyp.size(); ++i) {
    cur[0] = static_cast<int>(i);
    for (std::size_t j = 1; j <= ref.size(); ++j) {
      const int sub = prev[j - 1] + (hyp[i - 1] == ref[j - 1] ? 0 : 1);
      cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return prev[ref.size()];
}

template <class T>
double wer(const std::vector<T>& hyp, const std::vector<T>& ref) {
  require(!ref.empty(), "metric", "WER needs a nonempty reference");
  return static_cast<double>(edit_distance(hyp, ref)) / static_cast<double>(ref.size());
}

/// Corpus-level WER: total edits over total reference length.
template <class T>
double corpus_wer(const std::vector<std::vector<T>>& hyps, const std::vector<std::vector<T>>& refs) {
  require(hyps.size() == refs.size(), "metric", "hypothesis/reference counts differ");
  long edits = 0, words = 0;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    edits += edit_distance(hyps[i], refs[i]);
    words += static_cast<long>(refs[i].size());
  }
  require(words > 0, "metric", "WER needs a nonempty reference");
  return static_cast<double>(edits) / static_cast<double>(words);
}

/// Corpus BLEU with uniform weights up to max_n and the brevity penalty.
/// Unsmoothed: any n-gram order with zero matches gives 0.
template <class T>
double corpus_bleu(const std::vector<std::vector<T>>& hyps, const std::vector<std::vector<T>>& refs,
                   int max_n = 4) {
  require(max_n >= 1, "metric", "BLEU needs max_n >= 1");
  require(hyps.size() == refs.size(), "metric", "hypothesis/reference counts differ");
  std::vector<long> match(max_n, 0), total(max_n, 0);
  long hyp_len = 0, ref_len = 0;
  for (std::size_t s = 0; s < hyps.size(); ++s) {
    const auto& h = hyps[s];
    const auto& r = refs[s];
    hyp_len += static_cast<long>(h.size());
    ref_len += static_cast<long>(r.size());
    for (int n = 1; n <= max_n; ++n) {
      std::map<std::vector<T>, long> ref_counts;
      for (std::size_t i = 0; i + n <= r.size(); ++i)
        ++ref_counts[std::vector<T>(r.begin() + i, r.begin() + i + n)];
      std::map<std::vector<T>, long> hyp_counts;
      for (std::size_t i = 0; i + n <= h.size(); ++i)
        ++hyp_counts[std::vector<T>(h.begin() + i, h.begin() + i + n)];
      for (const auto& [gram, c] : hyp_counts) {
        const auto it = ref_counts.find(gram);
        if (it != ref_counts.end()) match[n - 1] += std::min(c, it->second);
        total[n - 1] += c;
      }
    }
  }
  double log_sum = 0.0;
  for (int n = 0; n < max_n; ++n) {
    if (match[n] == 0 || total[n] == 0) return 0.0;
    log_sum += std::log(static_cast<double>(match[n]) / static_cast<double>(total[n]));
  }
  if (hyp_len == 0) return 0.0;
  const double bp =
      hyp_len >= ref_len ? 1.0 : std::exp(1.0 - static_cast<double>(ref_len) / hyp_len);
  return bp * std::exp(log_sum / max_n);
}

template <class T>
double bleu_n(const std::vector<T>& hyp, const std::vector<T>& ref, int max_n = 4) {
  return corpus_bleu(std::vector<std::vector<T>>{hyp}, std::vector<std::vector<T>>{ref}, max_n);
}

/// Mean over joints of the Euclidean distance between frame a of \p x and
/// frame b of \p y.
inline double frame_joint_error(const PoseSequence& x, int a, const PoseSequence& y, int b) {
  double s = 0.0;
  for (int j = 0; j < x.joints; ++j) {
    double d2 = 0.0;
    for (int k = 0; k < kCoords; ++k) {
      const double d = static_cast<double>(x.at(a, j, k)) - y.at(b, j, k);
      d2 += d * d;
    }
    s += std::sqrt(d2);
  }
  return x.joints > 0 ? s / x.joints : 0.0;
}

/// DTW over frames with steps (1,0), (0,1), (1,1); among minimum-cost paths
/// the shortest wins. Returns cost / path length.
inline double dtw_mje(const PoseSequence& a, const PoseSequence& b) {
  require(a.frames > 0 && b.frames > 0, "metric", "DTW needs nonempty sequences");
  require(a.joints == b.joints, "shape",
          "joint count mismatch (" + std::to_string(a.joints) + " vs " + std::to_string(b.joints) +
              ")");
  const int n = a.frames, m = b.frames;
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> cost(static_cast<std::size_t>(n) * m, inf);
  std::vector<int> len(cost.size(), 0);
  auto at = [m](int i, int j) { return static_cast<std::size_t>(i) * m + j; };
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) {
      const double c = frame_joint_error(a, i, b, j);
      if (i == 0 && j == 0) {
        cost[at(0, 0)] = c;
        len[at(0, 0)] = 1;
        continue;
      }
      double best = inf;
      int best_len = 0;
      auto consider = [&](int pi, int pj) {
        if (pi < 0 || pj < 0) return;
        const double v = cost[at(pi, pj)];
        const int l = len[at(pi, pj)];
        if (v < best || (v == best && l < best_len)) {
          best = v;
          best_len = l;
        }
      };
      consider(i - 1, j - 1);
      consider(i - 1, j);
      consider(i, j - 1);
      cost[at(i, j)] = best + c;
      len[at(i, j)] = best_len + 1;
    }
  }
  return cost[at(n - 1, m - 1)] / len[at(n - 1, m - 1)];
}

}  // namespace posediff
