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
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "posediff/error.hpp"

namespace posediff {

enum class ScheduleKind {
  kMaskAndReplace,  // keep / uniform-resample / mask
  kMaskOnly,        // keep / mask, no uniform replacement
  kUniform,         // keep / uniform-resample, no mask
};

inline std::string_view to_string(ScheduleKind k) {
  switch (k) {
    case ScheduleKind::kMaskAndReplace: return "mask_and_replace";
    case ScheduleKind::kMaskOnly: return "mask_only";
    case ScheduleKind::kUniform: return "uniform";
  }
  return "?";
}

inline ScheduleKind schedule_kind_from_string(std::string_view s) {
  if (s == "mask_and_replace") return ScheduleKind::kMaskAndReplace;
  if (s == "mask_only") return ScheduleKind::kMaskOnly;
  if (s == "uniform") return ScheduleKind::kUniform;
  throw Error("config", "unknown schedule kind '" + std::string(s) + "'");
}

/// Endpoints of the linear cumulative schedules. Both cumulatives are
/// linear in t with the t=0 values fixed at alpha_bar=1, gamma_bar=0.
struct ScheduleSpec {
  ScheduleKind kind = ScheduleKind::kMaskAndReplace;
  double alpha_bar_end = 0.01;
  double gamma_bar_end = 0.9;

  static ScheduleSpec mask_and_replace(double alpha_end = 0.01,
                                       double gamma_end = 0.9) {
    return {ScheduleKind::kMaskAndReplace, alpha_end, gamma_end};
  }
  static ScheduleSpec mask_only(double gamma_end = 1.0) {
    return {ScheduleKind::kMaskOnly, 1.0 - gamma_end, gamma_end};
  }
  static ScheduleSpec uniform(double alpha_end = 0.01) {
    return {ScheduleKind::kUniform, alpha_end, 0.0};
  }
};

struct PerStepCoefficients {
  std::vector<double> alpha;  // index t-1 holds step t
  std::vector<double> gamma;
  std::vector<double> beta;
};

namespace detail {
constexpr double kScheduleTol = 1e-12;

inline double clamp_tiny_negative(double x) {
  return (x < 0.0 && x > -kScheduleTol) ? 0.0 : x;
}
}  // namespace detail

/// Corruption coefficients for timesteps 0..T. Index 0 is the identity
/// step (alpha_bar=1, gamma_bar=0), so posteriors at t=1 see Q_bar_0 = I.
/// Immutable once built.
class NoiseSchedule {
 public:
  /// Builds from cumulative arrays of length T (entries for t=1..T).
  static NoiseSchedule from_cumulative(int vocab_size,
                                       std::vector<double> alpha_bar,
                                       std::vector<double> gamma_bar);

  int steps() const { return static_cast<int>(alpha_bar_.size()) - 1; }
  int vocab_size() const { return vocab_; }

  double alpha_bar(int t) const { return alpha_bar_.at(t); }
  double gamma_bar(int t) const { return gamma_bar_.at(t); }
  double beta_bar(int t) const { return beta_bar_.at(t); }

  double alpha(int t) const { return alpha_.at(t); }
  double gamma(int t) const { return gamma_.at(t); }
  double beta(int t) const { return beta_.at(t); }

  /// Cumulatives for t=1..T (the constructor inputs).
  std::vector<double> alpha_bar_series() const {
    return {alpha_bar_.begin() + 1, alpha_bar_.end()};
  }
  std::vector<double> gamma_bar_series() const {
    return {gamma_bar_.begin() + 1, gamma_bar_.end()};
  }

 private:
  NoiseSchedule() = default;

  int vocab_ = 0;
  std::vector<double> alpha_bar_, gamma_bar_, beta_bar_;
  std::vector<double> alpha_, gamma_, beta_;

  friend PerStepCoefficients per_step_from_cumulative(const NoiseSchedule&);
};

/// Inverts the cumulative products: alpha_t = abar_t/abar_{t-1},
/// gamma_t = 1 - (1-gbar_t)/(1-gbar_{t-1}), beta_t = (1-alpha_t-gamma_t)/V.
inline PerStepCoefficients per_step_from_cumulative(
    int vocab_size, const std::vector<double>& alpha_bar,
    const std::vector<double>& gamma_bar) {
  require(alpha_bar.size() == gamma_bar.size(), "schedule",
          "cumulative arrays differ in length");
  PerStepCoefficients out;
  double prev_a = 1.0, prev_g = 0.0;
  for (std::size_t i = 0; i < alpha_bar.size(); ++i) {
    const int t = static_cast<int>(i) + 1;
    if (prev_a <= 0.0) {
      throw Error("schedule", "alpha_bar reaches 0 at t=" + std::to_string(t - 1) +
                                  " before the last step; cannot invert step " +
                                  std::to_string(t));
    }
    if (prev_g >= 1.0) {
      throw Error("schedule", "gamma_bar reaches 1 at t=" + std::to_string(t - 1) +
                                  " before the last step; cannot invert step " +
                                  std::to_string(t));
    }
    const double a = alpha_bar[i] / prev_a;
    const double g = 1.0 - (1.0 - gamma_bar[i]) / (1.0 - prev_g);
    const double b = detail::clamp_tiny_negative((1.0 - a - g) / vocab_size);
    out.alpha.push_back(a);
    out.gamma.push_back(detail::clamp_tiny_negative(g));
    out.beta.push_back(b);
    prev_a = alpha_bar[i];
    prev_g = gamma_bar[i];
  }
  return out;
}

inline PerStepCoefficients per_step_from_cumulative(const NoiseSchedule& s) {
  PerStepCoefficients out;
  out.alpha.assign(s.alpha_.begin() + 1, s.alpha_.end());
  out.gamma.assign(s.gamma_.begin() + 1, s.gamma_.end());
  out.beta.assign(s.beta_.begin() + 1, s.beta_.end());
  return out;
}

/// Running products of per-step coefficients back into cumulatives.
inline std::pair<std::vector<double>, std::vector<double>> cumulative_from_per_step(
    const std::vector<double>& alpha, const std::vector<double>& gamma) {
  std::vector<double> abar, gbar;
  double a = 1.0, keep = 1.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    a *= alpha[i];
    keep *= 1.0 - gamma[i];
    abar.push_back(a);
    gbar.push_back(1.0 - keep);
  }
  return {abar, gbar};
}

inline NoiseSchedule NoiseSchedule::from_cumulative(int vocab_size,
                                                    std::vector<double> alpha_bar,
                                                    std::vector<double> gamma_bar) {
  require(vocab_size >= 1, "schedule", "vocab_size must be >= 1");
  require(!alpha_bar.empty(), "schedule", "schedule needs T >= 1");
  require(alpha_bar.size() == gamma_bar.size(), "schedule",
          "cumulative arrays differ in length");
  using detail::kScheduleTol;

  NoiseSchedule s;
  s.vocab_ = vocab_size;
  s.alpha_bar_.push_back(1.0);
  s.gamma_bar_.push_back(0.0);
  s.beta_bar_.push_back(0.0);
  for (std::size_t i = 0; i < alpha_bar.size(); ++i) {
    const int t = static_cast<int>(i) + 1;
    const double a = alpha_bar[i], g = gamma_bar[i];
    if (!(a >= 0.0 && a <= 1.0) || !(g >= 0.0 && g <= 1.0)) {
      throw Error("schedule", "cumulative coefficients out of [0,1] at t=" +
                                  std::to_string(t));
    }
    const double b = (1.0 - a - g) / vocab_size;
    if (b < -kScheduleTol) {
      throw Error("schedule", "beta_bar < 0 at t=" + std::to_string(t) +
                                  " (alpha_bar + gamma_bar > 1)");
    }
    s.alpha_bar_.push_back(a);
    s.gamma_bar_.push_back(g);
    s.beta_bar_.push_back(std::abs(b) <= kScheduleTol ? 0.0 : b);
  }

  const PerStepCoefficients ps =
      per_step_from_cumulative(vocab_size, alpha_bar, gamma_bar);
  s.alpha_ = {1.0};
  s.gamma_ = {0.0};
  s.beta_ = {0.0};
  for (std::size_t i = 0; i < ps.alpha.size(); ++i) {
    const int t = static_cast<int>(i) + 1;
    double a = ps.alpha[i], g = ps.gamma[i], b = ps.beta[i];
    // No replacement mass up to t forces a replacement-free step.
    if (s.beta_bar_[static_cast<std::size_t>(t)] == 0.0) b = 0.0, g = 1.0 - a;
    if (a < 0.0 || a > 1.0 + kScheduleTol || g < 0.0 || g > 1.0 + kScheduleTol ||
        b < 0.0) {
      throw Error("schedule", "per-step masses invalid at t=" + std::to_string(t) +
                                  " (alpha=" + std::to_string(a) +
                                  ", gamma=" + std::to_string(g) +
                                  ", beta=" + std::to_string(b) + ")");
    }
    s.alpha_.push_back(a);
    s.gamma_.push_back(g);
    s.beta_.push_back(b);
  }
  return s;
}

/// Linear cumulative schedule over T steps for a V-code alphabet.
inline NoiseSchedule build_schedule(int steps, const ScheduleSpec& spec, int vocab_size) {
  require(steps >= 1, "schedule", "T must be >= 1");
  double a_end = spec.alpha_bar_end, g_end = spec.gamma_bar_end;
  switch (spec.kind) {
    case ScheduleKind::kMaskOnly: a_end = 1.0 - g_end; break;
    case ScheduleKind::kUniform: g_end = 0.0; break;
    case ScheduleKind::kMaskAndReplace: break;
  }
  require(a_end >= 0.0 && a_end <= 1.0 && g_end >= 0.0 && g_end <= 1.0, "schedule",
          "schedule endpoints must be probabilities");
  require(a_end + g_end <= 1.0 + detail::kScheduleTol, "schedule",
          "alpha_bar_end + gamma_bar_end > 1 makes beta_bar negative");

  std::vector<double> abar(steps), gbar(steps);
  for (int t = 1; t <= steps; ++t) {
    const double frac = static_cast<double>(t) / steps;
    abar[t - 1] = 1.0 + (a_end - 1.0) * frac;
    gbar[t - 1] = g_end * frac;
    if (spec.kind == ScheduleKind::kMaskOnly) abar[t - 1] = 1.0 - gbar[t - 1];
  }
  abar.back() = a_end;
  gbar.back() = g_end;
  return NoiseSchedule::from_cumulative(vocab_size, std::move(abar), std::move(gbar));
}

}  // namespace posediff
