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
#include <concepts>
#include <span>
#include <string>
#include <vector>

#include "posediff/error.hpp"
#include "posediff/rng.hpp"
#include "posediff/schedule.hpp"
#include "posediff/tokens.hpp"
#include "posediff/transition.hpp"

namespace posediff {

/// Conditioning signal for one sequence: gloss ids plus an optional
/// frame-to-gloss alignment (set when a length table is known).
struct Condition {
  std::vector<int> gloss_ids;
  std::string key;  // canonical gloss string; used by the oracle
  std::vector<int> frame_gloss;   // per frame, index into gloss_ids
  std::vector<int> frame_offset;  // per frame, offset inside its gloss span

  bool aligned() const { return !frame_gloss.empty(); }
};

/// Fills the frame alignment of `c` from per-gloss span lengths.
inline void align_condition(Condition& c, std::span<const int> lengths) {
  c.frame_gloss.clear();
  c.frame_offset.clear();
  for (std::size_t g = 0; g < lengths.size(); ++g) {
    for (int k = 0; k < lengths[g]; ++k) {
      c.frame_gloss.push_back(static_cast<int>(g));
      c.frame_offset.push_back(k);
    }
  }
}

/// Per-position prediction p(x0 | x_t, c) over the V codes.
struct DenoiserOutput {
  int vocab = 0;
  int positions = 0;
  std::vector<double> probs;  // positions x vocab, row-major

  DenoiserOutput() = default;
  DenoiserOutput(int positions_, int vocab_)
      : vocab(vocab_), positions(positions_),
        probs(static_cast<std::size_t>(positions_) * vocab_, 0.0) {}

  std::span<double> row(int i) {
    return {probs.data() + static_cast<std::size_t>(i) * vocab,
            static_cast<std::size_t>(vocab)};
  }
  std::span<const double> row(int i) const {
    return {probs.data() + static_cast<std::size_t>(i) * vocab,
            static_cast<std::size_t>(vocab)};
  }

  static DenoiserOutput uniform(int positions, int vocab) {
    DenoiserOutput out(positions, vocab);
    std::fill(out.probs.begin(), out.probs.end(), 1.0 / vocab);
    return out;
  }
};

template <class D>
concept Denoiser = requires(const D& d, const TokenGrid& x, int t, const Condition& c) {
  { d(x, t, c) } -> std::convertible_to<DenoiserOutput>;
};

namespace detail {

/// Shared pieces of the x0-parameterized reverse distribution at one
/// position. Predictions on x0 values that cannot produce x_t are dropped
/// and the remaining mass renormalized.
struct ReverseTerms {
  std::vector<double> reach;   // q(x_t | x0 = j) for each code j
  std::vector<double> w_norm;  // renormalized prediction on reachable j
  double reach_mass = 0.0;     // sum of the raw prediction over reachable j
  double s = 0.0;              // sum_j w_norm_j / reach_j
};

inline ReverseTerms reverse_terms(Token x_t, int t, std::span<const double> w,
                                  const NoiseSchedule& sch) {
  const int V = sch.vocab_size();
  ReverseTerms r;
  r.reach.resize(V);
  r.w_norm.assign(V, 0.0);
  for (int j = 0; j < V; ++j) {
    r.reach[j] = marginal_mass(x_t, j + 1, t, sch);
    if (r.reach[j] > 0.0) r.reach_mass += w[j];
  }
  if (!(r.reach_mass > 0.0)) {
    throw Error("unreachable", "denoiser puts no mass on any x0 that reaches x_t=" +
                                   std::to_string(x_t) + " at t=" + std::to_string(t));
  }
  for (int j = 0; j < V; ++j) {
    if (r.reach[j] > 0.0) {
      r.w_norm[j] = w[j] / r.reach_mass;
      r.s += r.w_norm[j] / r.reach[j];
    }
  }
  return r;
}

}  // namespace detail

/// p(x_{t-1} | x_t) = sum_j q(x_{t-1} | x_t, x0=j) p(x0=j | x_t) at a single
/// position, in O(V).
inline Categorical reverse_step_position(Token x_t, int t, std::span<const double> w,
                                         const NoiseSchedule& sch) {
  const Alphabet a{sch.vocab_size()};
  require(t >= 1 && t <= sch.steps(), "timestep", "reverse step needs t in [1, T]");
  Categorical out(a.states(), 0.0);
  if (x_t == a.pad()) {
    out[a.pad() - 1] = 1.0;
    return out;
  }
  const auto r = detail::reverse_terms(x_t, t, w, sch);
  const double bb = sch.beta_bar(t - 1), ab = sch.alpha_bar(t - 1);
  for (int k = 0; k < a.vocab; ++k) {
    const double c = step_mass(x_t, k + 1, t, sch);
    const double own = r.reach[k] > 0.0 ? r.w_norm[k] / r.reach[k] : 0.0;
    out[k] = c * (bb * r.s + ab * own);
  }
  out[a.mask() - 1] = step_mass(x_t, a.mask(), t, sch) * sch.gamma_bar(t - 1) * r.s;
  return out;
}

inline std::vector<Categorical> reverse_step_distribution(const TokenGrid& x_t, int t,
                                                          const DenoiserOutput& out,
                                                          const NoiseSchedule& sch) {
  require(out.positions == x_t.positions() && out.vocab == sch.vocab_size(), "shape",
          "denoiser output does not match the token grid");
  std::vector<Categorical> dists;
  dists.reserve(x_t.positions());
  for (int i = 0; i < x_t.positions(); ++i) {
    dists.push_back(reverse_step_position(x_t[i], t, out.row(i), sch));
  }
  return dists;
}

/// Distribution of x_T without reference to x0: gamma_bar_T on MASK and
/// the rest spread uniformly over the codes.
inline Categorical stationary_distribution(const NoiseSchedule& sch) {
  const Alphabet a{sch.vocab_size()};
  const int T = sch.steps();
  Categorical out(a.states(), 0.0);
  for (int k = 0; k < a.vocab; ++k) out[k] = (1.0 - sch.gamma_bar(T)) / a.vocab;
  out[a.mask() - 1] = sch.gamma_bar(T);
  return out;
}

/// Per-run diagnostics of reverse sampling.
struct SampleTrace {
  std::vector<int> mask_counts;  // index t: MASK tokens in x_t, t = T..0
  double final_log_prob = 0.0;   // mean log p(x0 = emitted | x_1, c)
};

/// Reverse sampling from x_T down to x_0. PAD positions in `pad_mask` (if
/// given) stay PAD throughout.
template <Denoiser D>
TokenGrid sample_sequence(const Condition& cond, int frames, const D& denoiser,
                          const NoiseSchedule& sch, Rng& rng, SampleTrace* trace = nullptr,
                          const std::vector<bool>* pad_mask = nullptr) {
  require(frames >= 1, "shape", "sequence length must be >= 1");
  const Alphabet a{sch.vocab_size()};
  const int T = sch.steps();
  TokenGrid x(frames, a.mask());
  const Categorical init = stationary_distribution(sch);
  for (int i = 0; i < x.positions(); ++i) {
    if (pad_mask && (*pad_mask)[i]) {
      x[i] = a.pad();
      continue;
    }
    x[i] = static_cast<Token>(rng.categorical(init)) + 1;
  }
  if (trace) {
    trace->mask_counts.assign(T + 1, 0);
    trace->mask_counts[T] = x.count(a.mask());
  }
  for (int t = T; t >= 1; --t) {
    const DenoiserOutput pred = denoiser(x, t, cond);
    require(pred.positions == x.positions() && pred.vocab == a.vocab, "shape",
            "denoiser output does not match the token grid");
    TokenGrid next = x;
    double log_prob = 0.0;
    int counted = 0;
    for (int i = 0; i < x.positions(); ++i) {
      if (x[i] == a.pad()) continue;
      const Categorical p = reverse_step_position(x[i], t, pred.row(i), sch);
      next[i] = static_cast<Token>(rng.categorical(p)) + 1;
      if (t == 1 && a.is_code(next[i])) {
        log_prob += std::log(std::max(pred.row(i)[next[i] - 1], 1e-300));
        ++counted;
      }
    }
    x = std::move(next);
    if (trace) {
      trace->mask_counts[t - 1] = x.count(a.mask());
      if (t == 1) trace->final_log_prob = counted ? log_prob / counted : 0.0;
    }
  }
  if (x.count(a.mask()) > 0) {
    throw Error("schedule", "MASK tokens survived to t=0; schedule is misconfigured");
  }
  return x;
}

// ---------------------------------------------------------------------------
// Losses

inline constexpr double kProbFloor = 1e-30;

/// Diffusion loss terms; l_len is filled in by the caller.
struct LossBreakdown {
  double l_vb = 0.0;     // sum of KL terms (or -log p(x0|x1) at t=1)
  double l_aux = 0.0;    // mean of -log p(x0 | x_t, c)
  double l_len = 0.0;    // length loss, already scaled by delta
  double l_prior = 0.0;  // L_T, constant w.r.t. parameters, not in total
  double lambda = 1.0;
  double delta = 0.0;
  double total = 0.0;
  int clamp_warnings = 0;

  void finalize() { total = l_vb + lambda * l_aux + l_len; }
};

inline double kl_divergence(std::span<const double> q, std::span<const double> p,
                            int* clamp_warnings = nullptr) {
  double kl = 0.0;
  for (std::size_t k = 0; k < q.size(); ++k) {
    if (q[k] <= 0.0) continue;
    double pk = p[k];
    if (pk < kProbFloor) {
      pk = kProbFloor;
      if (clamp_warnings) ++*clamp_warnings;
    }
    kl += q[k] * (std::log(q[k]) - std::log(pk));
  }
  return kl;
}

/// KL(q(x_{t-1}|x_t,x0) || p(x_{t-1}|x_t)) at one position and its gradient
/// with respect to the raw prediction w. At t=1 this is -log p(x0 | x_1).
inline double position_vlb(Token x_t, Token x0, int t, std::span<const double> w,
                           const NoiseSchedule& sch, std::span<double> grad_w,
                           int* clamp_warnings = nullptr) {
  const Alphabet a{sch.vocab_size()};
  const int V = a.vocab;
  const Categorical q = posterior(x_t, x0, t, sch);
  const auto r = detail::reverse_terms(x_t, t, w, sch);
  const double bb = sch.beta_bar(t - 1), ab = sch.alpha_bar(t - 1),
               gb = sch.gamma_bar(t - 1);

  double kl = 0.0, r_codes = 0.0, r_mask = 0.0;
  std::vector<double> rk(V, 0.0);
  for (int k = 0; k <= V; ++k) {
    const Token tok = k + 1;
    const double c = step_mass(x_t, tok, t, sch);
    double p;
    if (k < V) {
      const double own = r.reach[k] > 0.0 ? r.w_norm[k] / r.reach[k] : 0.0;
      p = c * (bb * r.s + ab * own);
    } else {
      p = c * gb * r.s;
    }
    if (q[k] <= 0.0) continue;
    if (p < kProbFloor) {
      p = kProbFloor;
      if (clamp_warnings) ++*clamp_warnings;
    }
    kl += q[k] * (std::log(q[k]) - std::log(p));
    const double ratio = q[k] * c / p;
    if (k < V) {
      rk[k] = ratio;
      r_codes += ratio;
    } else {
      r_mask = ratio;
    }
  }
  if (!grad_w.empty()) {
    std::vector<double> g(V, 0.0);
    double mean_g = 0.0;
    for (int j = 0; j < V; ++j) {
      if (r.reach[j] <= 0.0) continue;
      g[j] = -(bb * r_codes + ab * rk[j] + gb * r_mask) / r.reach[j];
      mean_g += g[j] * r.w_norm[j];
    }
    for (int j = 0; j < V; ++j) {
      grad_w[j] = r.reach[j] > 0.0 ? (g[j] - mean_g) / r.reach_mass : 0.0;
    }
  }
  return kl;
}

/// L_T summed over non-PAD positions: KL(q(x_T | x0) || stationary).
inline double prior_loss(const TokenGrid& x0, const NoiseSchedule& sch) {
  const Alphabet a{sch.vocab_size()};
  const Categorical prior = stationary_distribution(sch);
  double total = 0.0;
  for (int i = 0; i < x0.positions(); ++i) {
    if (x0[i] == a.pad()) continue;
    const Categorical q = forward_marginal(x0[i], sch.steps(), sch);
    total += kl_divergence(q, prior);
  }
  return total;
}

struct VlbTerms {
  double l_prior = 0.0;
  double l_step = 0.0;  // L_{t-1} for t >= 2, L_0 for t = 1
  int clamp_warnings = 0;
};

inline VlbTerms vlb_loss(const TokenGrid& x0, const TokenGrid& x_t, int t,
                         const DenoiserOutput& out, const NoiseSchedule& sch) {
  require(x0.positions() == x_t.positions() && out.positions == x0.positions(), "shape",
          "vlb_loss inputs disagree in shape");
  const Alphabet a{sch.vocab_size()};
  VlbTerms terms;
  terms.l_prior = prior_loss(x0, sch);
  for (int i = 0; i < x0.positions(); ++i) {
    if (x0[i] == a.pad()) continue;
    terms.l_step +=
        position_vlb(x_t[i], x0[i], t, out.row(i), sch, {}, &terms.clamp_warnings);
  }
  return terms;
}

/// Combined diffusion loss and, when `grad` is non-null, dL/dw for every
/// position (zero rows at PAD).
inline LossBreakdown combined_loss(const TokenGrid& x0, const TokenGrid& x_t, int t,
                                   const DenoiserOutput& out, const NoiseSchedule& sch,
                                   double lambda, std::vector<double>* grad = nullptr) {
  require(lambda >= 0.0, "config", "lambda must be >= 0");
  require(x0.positions() == x_t.positions() && out.positions == x0.positions(), "shape",
          "combined_loss inputs disagree in shape");
  const Alphabet a{sch.vocab_size()};
  const int V = a.vocab;
  LossBreakdown lb;
  lb.lambda = lambda;
  lb.l_prior = prior_loss(x0, sch);
  if (grad) grad->assign(out.probs.size(), 0.0);

  int active = 0;
  for (int i = 0; i < x0.positions(); ++i) active += (x0[i] != a.pad());
  std::vector<double> gw(V);
  for (int i = 0; i < x0.positions(); ++i) {
    if (x0[i] == a.pad()) continue;
    const auto w = out.row(i);
    lb.l_vb += position_vlb(x_t[i], x0[i], t, w, sch,
                            grad ? std::span<double>(gw) : std::span<double>(),
                            &lb.clamp_warnings);
    double p0 = w[x0[i] - 1];
    if (p0 < kProbFloor) {
      p0 = kProbFloor;
      ++lb.clamp_warnings;
    }
    lb.l_aux += -std::log(p0) / active;
    if (grad) {
      double* g = grad->data() + static_cast<std::size_t>(i) * V;
      for (int j = 0; j < V; ++j) g[j] = gw[j];
      g[x0[i] - 1] += -lambda / (active * p0);
    }
  }
  lb.finalize();
  return lb;
}

}  // namespace posediff
