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
#include <filesystem>
#include <functional>
#include <string>

#include <Eigen/Dense>

#include "posediff/posediff.hpp"

namespace posediff::testing {

/// |a - b| / max(|a|, |b|, floor).
inline double rel_error(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Central difference of f with respect to x[i], step h.
inline double central_difference(const std::function<double()>& f, double& x, double h = 1e-5) {
  const double keep = x;
  x = keep + h;
  const double up = f();
  x = keep - h;
  const double down = f();
  x = keep;
  return (up - down) / (2.0 * h);
}

/// Explicit product Q_t ... Q_1 of the step matrices, (V+2) x (V+2).
inline Eigen::MatrixXd cumulative_product(const NoiseSchedule& s, int t) {
  const int n = s.vocab_size() + 2;
  Eigen::MatrixXd q = Eigen::MatrixXd::Identity(n, n);
  for (int i = 1; i <= t; ++i) q = step_matrix(s, i).entries * q;
  return q;
}

/// A valid schedule with randomly drawn per-step masses.
inline NoiseSchedule random_schedule(int vocab, int steps, Rng& rng) {
  std::vector<double> alpha, gamma;
  for (int t = 0; t < steps; ++t) {
    alpha.push_back(rng.uniform(0.6, 0.98));
    gamma.push_back(rng.uniform(0.0, 1.0 - alpha.back()) * 0.9);
  }
  auto [abar, gbar] = cumulative_from_per_step(alpha, gamma);
  return NoiseSchedule::from_cumulative(vocab, abar, gbar);
}

inline Skeleton default_skeleton() {
  return load_skeleton(std::string(POSEDIFF_DATA_DIR) + "/skeleton_chains.json");
}

/// Fresh scratch directory under the system temp dir.
inline std::string scratch_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("posediff_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p.string();
}

inline Matrix pose_features(const PoseSequence& s) {
  Matrix z(s.frames, static_cast<Eigen::Index>(s.joints) * kCoords);
  for (int n = 0; n < s.frames; ++n)
    for (int i = 0; i < s.joints * kCoords; ++i)
      z(n, i) = s.coords[static_cast<std::size_t>(n) * s.joints * kCoords + i];
  return z;
}

}  // namespace posediff::testing
