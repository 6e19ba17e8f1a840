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
#include <vector>

#include <Eigen/Dense>

#include "posediff/error.hpp"
#include "posediff/tokens.hpp"

namespace posediff {

using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;

inline constexpr double kVarianceFloor = 1e-5;

/// Layer normalization with the variance floored at kVarianceFloor.
/// Returns the normalized row and the inverse standard deviation used.
inline RowVector layer_norm(const RowVector& h, double* inv_std = nullptr) {
  const double mean = h.mean();
  const RowVector centered = h.array() - mean;
  const double var = centered.squaredNorm() / static_cast<double>(h.size());
  const double is = 1.0 / std::sqrt(std::max(var, kVarianceFloor));
  if (inv_std) *inv_std = is;
  return centered * is;
}

/// Backward of layer_norm given the normalized output and inv_std.
inline RowVector layer_norm_backward(const RowVector& normalized, double inv_std,
                                     const RowVector& grad_out) {
  const double n = static_cast<double>(normalized.size());
  const double var = 1.0 / (inv_std * inv_std);
  const double mean_g = grad_out.mean();
  if (var <= kVarianceFloor) {
    // Floored: the scale is constant, only the centering remains.
    return (grad_out.array() - mean_g) * inv_std;
  }
  const double mean_gx = grad_out.dot(normalized) / n;
  return (grad_out.array() - mean_g - normalized.array() * mean_gx) * inv_std;
}

/// AdaLN(h, t) = scale_t * LayerNorm(h) + shift_t.
inline RowVector adaln(const RowVector& h, const RowVector& scale, const RowVector& shift) {
  require(scale.size() == h.size() && shift.size() == h.size(), "shape",
          "adaln parameters do not match the feature width");
  return scale.cwiseProduct(layer_norm(h)) + shift;
}

enum class Resample { kDown, kUp };

/// Output frame -> input frame map. Down keeps even frames (ceil(N/2)
/// outputs); up repeats each frame twice, output n reads input n // 2,
/// truncated to `target` frames (default 2N).
inline std::vector<int> resample_sources(int frames, Resample dir, int target = -1) {
  require(frames >= 1, "shape", "resample needs at least one frame");
  std::vector<int> src;
  if (dir == Resample::kDown) {
    for (int n = 0; n < frames; n += 2) src.push_back(n);
  } else {
    const int out = target < 0 ? 2 * frames : target;
    require(out >= 1 && out <= 2 * frames, "shape",
            "upsample target must lie in [1, 2N]");
    for (int n = 0; n < out; ++n) src.push_back(n / 2);
  }
  return src;
}

/// Temporal resampling of an (N*3) x d feature grid. The patch axis is
/// untouched.
inline Matrix temporal_resample(const Matrix& h, Resample dir, int target = -1) {
  require(h.rows() % kPatches == 0, "shape", "feature grid rows must be frames*3");
  const int frames = static_cast<int>(h.rows()) / kPatches;
  const auto src = resample_sources(frames, dir, target);
  Matrix out(static_cast<Eigen::Index>(src.size()) * kPatches, h.cols());
  for (std::size_t n = 0; n < src.size(); ++n) {
    out.middleRows(static_cast<Eigen::Index>(n) * kPatches, kPatches) =
        h.middleRows(static_cast<Eigen::Index>(src[n]) * kPatches, kPatches);
  }
  return out;
}

/// Adjoint of temporal_resample: scatters output gradients to inputs.
inline Matrix temporal_resample_backward(const Matrix& grad_out, int in_frames,
                                         Resample dir, int target = -1) {
  const auto src = resample_sources(in_frames, dir, target);
  Matrix g = Matrix::Zero(static_cast<Eigen::Index>(in_frames) * kPatches, grad_out.cols());
  for (std::size_t n = 0; n < src.size(); ++n) {
    g.middleRows(static_cast<Eigen::Index>(src[n]) * kPatches, kPatches) +=
        grad_out.middleRows(static_cast<Eigen::Index>(n) * kPatches, kPatches);
  }
  return g;
}

}  // namespace posediff
