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
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "posediff/error.hpp"

namespace posediff {

/// Sequential-KNN parameters: k neighbours drawn from the window |i-j| <= l.
struct SegmentationConfig {
  int k = 16;
  int l = 16;

  void validate() const {
    require(k >= 1 && l >= 1, "config", "segmentation k and l must be positive");
    require(k <= 2 * l, "config", "segmentation needs k <= 2l");
  }
  int suppression_radius() const { return (l + 1) / 2; }
};

struct LengthTable {
  std::vector<int> lengths;

  int glosses() const { return static_cast<int>(lengths.size()); }
  int total() const { return std::accumulate(lengths.begin(), lengths.end(), 0); }
  bool operator==(const LengthTable&) const = default;
};

/// rho_i = exp(-(1/k) sum of squared distances to the k nearest frames in
/// the window, self excluded). With fewer than k candidates the mean runs
/// over the available ones; no candidates gives rho = 1.
/// \p z holds one frame per row.
inline std::vector<double> local_density(const Eigen::MatrixXd& z,
                                         const SegmentationConfig& cfg) {
  cfg.validate();
  const int n = static_cast<int>(z.rows());
  std::vector<double> rho(n, 1.0);
  std::vector<double> d2;
  for (int i = 0; i < n; ++i) {
    d2.clear();
    const int lo = std::max(0, i - cfg.l), hi = std::min(n - 1, i + cfg.l);
    for (int j = lo; j <= hi; ++j) {
      if (j != i) d2.push_back((z.row(i) - z.row(j)).squaredNorm());
    }
    if (d2.empty()) continue;
    const std::size_t take = std::min<std::size_t>(cfg.k, d2.size());
    std::partial_sort(d2.begin(), d2.begin() + static_cast<long>(take), d2.end());
    double sum = 0.0;
    for (std::size_t j = 0; j < take; ++j) sum += d2[j];
    rho[i] = std::exp(-sum / static_cast<double>(take));
  }
  return rho;
}

struct PeakSelection {
  std::vector<int> peaks;  // ascending
  int radius_used = 0;
  bool radius_reduced = false;
};

/// Greedy descending-density peak picking with non-max suppression: a
/// candidate closer than the radius to a chosen peak is skipped. Ties go to
/// the earlier index. The radius shrinks until M peaks fit.
inline PeakSelection select_peaks(const std::vector<double>& rho, int m,
                                  const SegmentationConfig& cfg) {
  const int n = static_cast<int>(rho.size());
  require(m >= 1 && m <= n, "segment", "need 1 <= M <= N to place peaks");
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return rho[a] > rho[b]; });

  PeakSelection sel;
  for (int radius = std::max(1, cfg.suppression_radius()); radius >= 1; --radius) {
    std::vector<int> chosen;
    for (int i : order) {
      const bool clear = std::all_of(chosen.begin(), chosen.end(),
                                     [&](int p) { return std::abs(i - p) >= radius; });
      if (clear) chosen.push_back(i);
      if (static_cast<int>(chosen.size()) == m) break;
    }
    if (static_cast<int>(chosen.size()) == m) {
      std::sort(chosen.begin(), chosen.end());
      sel.peaks = std::move(chosen);
      sel.radius_used = radius;
      sel.radius_reduced = radius != std::max(1, cfg.suppression_radius());
      return sel;
    }
  }
  throw Error("segment", "could not place peaks");  // unreachable for m <= n
}

/// Between adjacent peaks a < b the next segment starts at the first frame
/// strictly closer to z_b than to z_a; if none, at b itself.
inline LengthTable find_boundaries(const Eigen::MatrixXd& z, const std::vector<int>& peaks) {
  const int n = static_cast<int>(z.rows());
  require(!peaks.empty(), "segment", "need at least one peak");
  require(std::is_sorted(peaks.begin(), peaks.end()), "segment", "peaks must be sorted");
  std::vector<int> starts{0};
  for (std::size_t p = 0; p + 1 < peaks.size(); ++p) {
    const int a = peaks[p], b = peaks[p + 1];
    int boundary = b;
    for (int i = a + 1; i <= b; ++i) {
      if ((z.row(i) - z.row(a)).norm() > (z.row(i) - z.row(b)).norm()) {
        boundary = i;
        break;
      }
    }
    starts.push_back(boundary);
  }
  LengthTable table;
  for (std::size_t s = 0; s < starts.size(); ++s) {
    const int end = s + 1 < starts.size() ? starts[s + 1] : n;
    table.lengths.push_back(end - starts[s]);
  }
  return table;
}

struct Segmentation {
  std::vector<double> density;
  PeakSelection peaks;
  LengthTable lengths;
};

/// Full sequential-KNN pass for an M-gloss sequence.
inline Segmentation segment_sequence(const Eigen::MatrixXd& z, int glosses,
                                     const SegmentationConfig& cfg) {
  Segmentation s;
  s.density = local_density(z, cfg);
  s.peaks = select_peaks(s.density, glosses, cfg);
  s.lengths = find_boundaries(z, s.peaks.peaks);
  return s;
}

// ---------------------------------------------------------------------------
// Length classification

/// (delta/M) * sum_i CE(softmax(logits_i), L_i). Row i of \p logits scores
/// lengths 1..P. Writes dLoss/dlogits into \p grad when non-null.
inline double length_loss(const Eigen::MatrixXd& logits, const LengthTable& gold,
                          double delta, Eigen::MatrixXd* grad = nullptr) {
  const int m = static_cast<int>(logits.rows());
  const int p = static_cast<int>(logits.cols());
  require(m == gold.glosses() && m >= 1, "shape", "length logits need one row per gloss");
  if (grad) *grad = Eigen::MatrixXd::Zero(m, p);
  double loss = 0.0;
  for (int i = 0; i < m; ++i) {
    const int len = gold.lengths[i];
    if (len < 1 || len > p) {
      throw Error("length", "gold length " + std::to_string(len) + " outside [1, " +
                                std::to_string(p) + "]");
    }
    const double mx = logits.row(i).maxCoeff();
    const Eigen::RowVectorXd e = (logits.row(i).array() - mx).exp();
    const double z = e.sum();
    loss += -(logits(i, len - 1) - mx - std::log(z));
    if (grad) {
      grad->row(i) = e / z * (delta / m);
      (*grad)(i, len - 1) -= delta / m;
    }
  }
  return delta * loss / m;
}

struct LengthCandidate {
  LengthTable table;
  double log_prob = 0.0;
};

/// The n most probable length tables under independent per-gloss
/// categoricals (beam search; exact for the top n).
inline std::vector<LengthCandidate> predict_lengths(const Eigen::MatrixXd& logits,
                                                    int n_candidates) {
  require(n_candidates >= 1, "config", "need at least one length candidate");
  const int m = static_cast<int>(logits.rows());
  const int p = static_cast<int>(logits.cols());
  std::vector<LengthCandidate> beam{LengthCandidate{}};
  for (int i = 0; i < m; ++i) {
    const double mx = logits.row(i).maxCoeff();
    const double lse = mx + std::log((logits.row(i).array() - mx).exp().sum());
    std::vector<LengthCandidate> next;
    for (const auto& c : beam) {
      for (int j = 0; j < p; ++j) {
        LengthCandidate e = c;
        e.table.lengths.push_back(j + 1);
        e.log_prob += logits(i, j) - lse;
        next.push_back(std::move(e));
      }
    }
    std::stable_sort(next.begin(), next.end(), [](const auto& a, const auto& b) {
      if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
      return a.table.lengths < b.table.lengths;
    });
    if (static_cast<int>(next.size()) > n_candidates) next.resize(n_candidates);
    beam = std::move(next);
  }
  return beam;
}

}  // namespace posediff
