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
#include <string>

#include <Eigen/Dense>

#include "posediff/error.hpp"
#include "posediff/rng.hpp"
#include "posediff/schedule.hpp"
#include "posediff/tokens.hpp"

namespace posediff {

/// Column-stochastic transition matrix, [Q]_{mn} = q(x_t = m | x_{t-1} = n).
/// Row/column i corresponds to token i+1.
struct TransitionMatrix {
  enum class Variant { kUniform, kMaskAndReplace };

  Eigen::MatrixXd entries;
  Variant variant = Variant::kMaskAndReplace;
};

/// V x V kernel: keep with alpha, resample uniformly over V codes otherwise.
inline TransitionMatrix uniform_matrix(double alpha, int vocab) {
  require(alpha >= 0.0 && alpha <= 1.0, "kernel", "alpha_t must lie in [0,1]");
  require(vocab >= 1, "kernel", "V must be >= 1");
  const double beta = (1.0 - alpha) / vocab;
  TransitionMatrix q;
  q.variant = TransitionMatrix::Variant::kUniform;
  q.entries = Eigen::MatrixXd::Constant(vocab, vocab, beta);
  q.entries.diagonal().array() += alpha;
  return q;
}

/// (V+2) x (V+2) mask-and-replace kernel. MASK and PAD columns are
/// absorbing point masses.
inline TransitionMatrix mask_replace_matrix(double alpha, double beta, double gamma,
                                            int vocab) {
  require(vocab >= 1, "kernel", "V must be >= 1");
  require(alpha >= 0.0 && beta >= 0.0 && gamma >= 0.0, "kernel",
          "transition masses must be nonnegative");
  require(std::abs(alpha + vocab * beta + gamma - 1.0) <= 1e-9, "kernel",
          "alpha + V*beta + gamma must equal 1");
  const int n = vocab + 2;
  TransitionMatrix q;
  q.variant = TransitionMatrix::Variant::kMaskAndReplace;
  q.entries = Eigen::MatrixXd::Zero(n, n);
  q.entries.topLeftCorner(vocab, vocab).setConstant(beta);
  q.entries.topLeftCorner(vocab, vocab).diagonal().array() += alpha;
  q.entries.block(vocab, 0, 1, vocab).setConstant(gamma);
  q.entries(vocab, vocab) = 1.0;
  q.entries(vocab + 1, vocab + 1) = 1.0;
  return q;
}

/// Kernel of step t taken from a schedule.
inline TransitionMatrix step_matrix(const NoiseSchedule& s, int t) {
  return mask_replace_matrix(s.alpha(t), s.beta(t), s.gamma(t), s.vocab_size());
}

/// Single entry [Q_t]_{x_t, x_prev} in O(1).
inline double step_mass(Token x_t, Token x_prev, int t, const NoiseSchedule& s) {
  const Alphabet a{s.vocab_size()};
  if (x_prev == a.pad()) return x_t == a.pad() ? 1.0 : 0.0;
  if (x_prev == a.mask()) return x_t == a.mask() ? 1.0 : 0.0;
  if (x_t == a.pad()) return 0.0;
  if (x_t == a.mask()) return s.gamma(t);
  return s.beta(t) + (x_t == x_prev ? s.alpha(t) : 0.0);
}

/// Single entry of the cumulative kernel, q(x_t | x_0), in O(1).
inline double marginal_mass(Token x_t, Token x0, int t, const NoiseSchedule& s) {
  const Alphabet a{s.vocab_size()};
  if (x0 == a.pad()) return x_t == a.pad() ? 1.0 : 0.0;
  if (x0 == a.mask()) return x_t == a.mask() ? 1.0 : 0.0;
  if (x_t == a.pad()) return 0.0;
  if (x_t == a.mask()) return s.gamma_bar(t);
  return s.beta_bar(t) + (x_t == x0 ? s.alpha_bar(t) : 0.0);
}

/// q(x_t | x_0) over all V+2 states.
inline Categorical forward_marginal(Token x0, int t, const NoiseSchedule& s) {
  const Alphabet a{s.vocab_size()};
  require(a.is_valid(x0), "token", "x0 outside [1, V+2]");
  require(x0 != a.mask(), "token", "clean tokens cannot be MASK");
  require(t >= 0 && t <= s.steps(), "timestep", "t outside [0, T]");
  Categorical out(a.states(), 0.0);
  if (x0 == a.pad()) {
    out[a.pad() - 1] = 1.0;
    return out;
  }
  for (int k = 0; k < a.vocab; ++k) out[k] = s.beta_bar(t);
  out[x0 - 1] += s.alpha_bar(t);
  out[a.mask() - 1] = s.gamma_bar(t);
  return out;
}

/// Draws x_t ~ q(x_t | x_0) independently per position.
inline TokenGrid sample_corrupted(const TokenGrid& x0, int t, const NoiseSchedule& s,
                                  Rng& rng) {
  const Alphabet a{s.vocab_size()};
  require(t >= 0 && t <= s.steps(), "timestep", "t outside [0, T]");
  TokenGrid out = x0;
  const double keep = s.alpha_bar(t);
  const double masked = s.gamma_bar(t);
  for (int i = 0; i < x0.positions(); ++i) {
    const Token v = x0[i];
    require(a.is_valid(v), "token", "x0 outside [1, V+2]");
    require(v != a.mask(), "token", "clean tokens cannot be MASK");
    if (v == a.pad()) continue;
    const double u = rng.uniform();
    if (u < keep) {
      out[i] = v;
    } else if (u < keep + masked) {
      out[i] = a.mask();
    } else {
      out[i] = static_cast<Token>(rng.below(a.vocab)) + 1;
    }
  }
  return out;
}

/// Exact posterior q(x_{t-1} | x_t, x_0) in O(V) from the closed-form
/// marginals. Throws when x_t is unreachable from x_0.
inline Categorical posterior(Token x_t, Token x0, int t, const NoiseSchedule& s) {
  const Alphabet a{s.vocab_size()};
  require(t >= 1 && t <= s.steps(), "timestep", "posterior needs t in [1, T]");
  require(a.is_valid(x_t) && a.is_valid(x0), "token", "token outside [1, V+2]");
  require(x0 != a.mask(), "token", "clean tokens cannot be MASK");

  const double denom = marginal_mass(x_t, x0, t, s);
  if (!(denom > 0.0)) {
    throw Error("unreachable", "x_t=" + std::to_string(x_t) +
                                   " is unreachable from x0=" + std::to_string(x0) +
                                   " at t=" + std::to_string(t));
  }
  Categorical out(a.states(), 0.0);
  if (x0 == a.pad()) {
    out[a.pad() - 1] = 1.0;
    return out;
  }
  double total = 0.0;
  for (Token k = 1; k <= a.mask(); ++k) {
    const double v = step_mass(x_t, k, t, s) * marginal_mass(k, x0, t - 1, s);
    out[k - 1] = v;
    total += v;
  }
  for (double& v : out) v /= total;
  return out;
}

}  // namespace posediff
