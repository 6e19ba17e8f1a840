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
#include <functional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "posediff/diffusion.hpp"
#include "posediff/layers.hpp"
#include "posediff/rng.hpp"
#include "posediff/segment.hpp"

namespace posediff {

struct ModelConfig {
  int vocab = 0;           // V codebook codes
  int d_model = 512;
  int steps = 100;         // T
  int max_frames = 256;    // position table size
  int max_length = 64;     // P, largest length class
  int gloss_vocab = 0;
};

/// Trainable per-position denoiser and length head.
///
/// Forward for position (n, c) of x_t:
///   h = tok[x] + col[c] + pos[n] + pooled(gloss) [+ gloss[g(n)] + rel[off(n)]]
///   u = h + up(down(h))[n, c] * mix
///   a = ada_scale[t] * LayerNorm(u) + ada_shift[t]
///   p(x0 | x_t, c) = softmax(a * out_w + out_b)
/// The bracketed terms apply when the condition carries a frame alignment.
/// Length head, gloss i: logits = (gloss[y_i] + pooled) * len_w + len_b.
struct DenoiserParams {
  ModelConfig cfg;
  Matrix tok, col, pos, gloss, rel, mix, ada_scale, ada_shift, out_w, out_b, len_w, len_b;

  static DenoiserParams zeros(const ModelConfig& cfg) {
    require(cfg.vocab >= 1 && cfg.d_model >= 1 && cfg.steps >= 1 && cfg.max_frames >= 1 &&
                cfg.max_length >= 1 && cfg.gloss_vocab >= 1,
            "config", "model dimensions must be positive");
    DenoiserParams p;
    p.cfg = cfg;
    const int d = cfg.d_model;
    p.tok = Matrix::Zero(cfg.vocab + 2, d);
    p.col = Matrix::Zero(kPatches, d);
    p.pos = Matrix::Zero(cfg.max_frames, d);
    p.gloss = Matrix::Zero(cfg.gloss_vocab, d);
    p.rel = Matrix::Zero(cfg.max_length, d);
    p.mix = Matrix::Zero(d, d);
    p.ada_scale = Matrix::Zero(cfg.steps, d);
    p.ada_shift = Matrix::Zero(cfg.steps, d);
    p.out_w = Matrix::Zero(d, cfg.vocab);
    p.out_b = Matrix::Zero(1, cfg.vocab);
    p.len_w = Matrix::Zero(d, cfg.max_length);
    p.len_b = Matrix::Zero(1, cfg.max_length);
    return p;
  }

  /// Embeddings ~ N(0, init_std^2), AdaLN scale 1, everything else 0, so
  /// the initial prediction is uniform.
  static DenoiserParams init(const ModelConfig& cfg, Rng& rng, double init_std = 0.02) {
    DenoiserParams p = zeros(cfg);
    for (Matrix* m : {&p.tok, &p.col, &p.pos, &p.gloss, &p.rel}) {
      for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = rng.normal(0.0, init_std);
    }
    p.ada_scale.setOnes();
    return p;
  }

  template <class F>
  void for_each(F&& f) {
    f("tok", tok); f("col", col); f("pos", pos); f("gloss", gloss); f("rel", rel);
    f("mix", mix); f("ada_scale", ada_scale); f("ada_shift", ada_shift);
    f("out_w", out_w); f("out_b", out_b); f("len_w", len_w); f("len_b", len_b);
  }
  template <class F>
  void for_each(F&& f) const {
    const_cast<DenoiserParams*>(this)->for_each(
        [&](std::string_view name, Matrix& m) { f(name, static_cast<const Matrix&>(m)); });
  }

  /// Applies f(name, mine, other) over matching tensors.
  template <class F>
  void zip(DenoiserParams& other, F&& f) {
    std::vector<Matrix*> theirs;
    other.for_each([&](std::string_view, Matrix& m) { theirs.push_back(&m); });
    std::size_t i = 0;
    for_each([&](std::string_view name, Matrix& m) { f(name, m, *theirs[i++]); });
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for_each([&](std::string_view, const Matrix& m) { n += static_cast<std::size_t>(m.size()); });
    return n;
  }
};

struct ConditionEmbedding {
  Matrix vectors;    // M x d gloss features
  RowVector pooled;  // mean of the rows
};

inline ConditionEmbedding embed_condition(const DenoiserParams& p, const Condition& c) {
  require(!c.gloss_ids.empty(), "condition", "condition needs at least one gloss");
  ConditionEmbedding e;
  e.vectors.resize(static_cast<Eigen::Index>(c.gloss_ids.size()), p.cfg.d_model);
  for (std::size_t i = 0; i < c.gloss_ids.size(); ++i) {
    const int g = c.gloss_ids[i];
    require(g >= 0 && g < p.cfg.gloss_vocab, "vocabulary", "gloss id out of range");
    e.vectors.row(static_cast<Eigen::Index>(i)) = p.gloss.row(g);
  }
  e.pooled = e.vectors.colwise().mean();
  return e;
}

namespace detail {

struct DenoiserCache {
  int frames = 0;
  int t = 0;
  Matrix h, mixed_src, u, normalized, a, probs;
  std::vector<double> inv_std;
};

inline int aligned_gloss(const Condition& c, int frame) {
  if (!c.aligned() || frame >= static_cast<int>(c.frame_gloss.size())) return -1;
  return c.gloss_ids.at(c.frame_gloss[frame]);
}

inline int aligned_offset(const Condition& c, int frame, int max_length) {
  return std::min(c.frame_offset.at(frame), max_length - 1);
}

inline void denoiser_forward(const DenoiserParams& p, const TokenGrid& x_t, int t,
                             const Condition& c, DenoiserCache& cache) {
  const ModelConfig& cfg = p.cfg;
  require(t >= 1 && t <= cfg.steps, "timestep", "t outside [1, T]");
  const Alphabet alpha{cfg.vocab};
  const int frames = x_t.frames();
  const int rows = x_t.positions();
  const ConditionEmbedding ce = embed_condition(p, c);

  cache.frames = frames;
  cache.t = t;
  cache.h.resize(rows, cfg.d_model);
  for (int n = 0; n < frames; ++n) {
    const int g = aligned_gloss(c, n);
    RowVector frame_part = p.pos.row(std::min(n, cfg.max_frames - 1)) + ce.pooled;
    if (g >= 0) frame_part += p.gloss.row(g) + p.rel.row(aligned_offset(c, n, cfg.max_length));
    for (int col = 0; col < kPatches; ++col) {
      const Token x = x_t.at(n, col);
      require(alpha.is_valid(x), "token", "x_t token outside [1, V+2]");
      cache.h.row(n * kPatches + col) = p.tok.row(x - 1) + p.col.row(col) + frame_part;
    }
  }
  cache.mixed_src = temporal_resample(temporal_resample(cache.h, Resample::kDown),
                                      Resample::kUp, frames);
  cache.u = cache.h + cache.mixed_src * p.mix;

  cache.normalized.resize(rows, cfg.d_model);
  cache.inv_std.assign(rows, 0.0);
  for (int r = 0; r < rows; ++r) {
    cache.normalized.row(r) = layer_norm(cache.u.row(r), &cache.inv_std[r]);
  }
  cache.a = (cache.normalized.array().rowwise() * p.ada_scale.row(t - 1).array()).matrix();
  cache.a.rowwise() += p.ada_shift.row(t - 1);

  Matrix logits = cache.a * p.out_w;
  logits.rowwise() += p.out_b.row(0);
  cache.probs.resize(rows, cfg.vocab);
  for (int r = 0; r < rows; ++r) {
    const double mx = logits.row(r).maxCoeff();
    const RowVector e = (logits.row(r).array() - mx).exp();
    cache.probs.row(r) = e / e.sum();
  }
}

/// Backprop of dL/dprobs through the denoiser, accumulated into \p grads.
inline void denoiser_backward(const DenoiserParams& p, const TokenGrid& x_t,
                              const Condition& c, const DenoiserCache& cache,
                              const Matrix& grad_probs, DenoiserParams& grads) {
  const ModelConfig& cfg = p.cfg;
  const int rows = x_t.positions();
  const int t = cache.t;

  Matrix dz(rows, cfg.vocab);
  for (int r = 0; r < rows; ++r) {
    const double inner = grad_probs.row(r).dot(cache.probs.row(r));
    dz.row(r) = cache.probs.row(r).cwiseProduct(grad_probs.row(r)) - inner * cache.probs.row(r);
  }
  grads.out_w.noalias() += cache.a.transpose() * dz;
  grads.out_b.row(0) += dz.colwise().sum();
  const Matrix da = dz * p.out_w.transpose();

  grads.ada_scale.row(t - 1) += da.cwiseProduct(cache.normalized).colwise().sum();
  grads.ada_shift.row(t - 1) += da.colwise().sum();
  Matrix du(rows, cfg.d_model);
  for (int r = 0; r < rows; ++r) {
    const RowVector dn = da.row(r).cwiseProduct(p.ada_scale.row(t - 1));
    du.row(r) = layer_norm_backward(cache.normalized.row(r), cache.inv_std[r], dn);
  }

  grads.mix.noalias() += cache.mixed_src.transpose() * du;
  const Matrix d_src = du * p.mix.transpose();
  const int down_frames = (cache.frames + 1) / 2;
  Matrix dh = du + temporal_resample_backward(
                       temporal_resample_backward(d_src, down_frames, Resample::kUp,
                                                  cache.frames),
                       cache.frames, Resample::kDown);

  RowVector d_pooled = RowVector::Zero(cfg.d_model);
  for (int n = 0; n < cache.frames; ++n) {
    const int g = aligned_gloss(c, n);
    RowVector d_frame = RowVector::Zero(cfg.d_model);
    for (int col = 0; col < kPatches; ++col) {
      const RowVector& row = dh.row(n * kPatches + col);
      grads.tok.row(x_t.at(n, col) - 1) += row;
      grads.col.row(col) += row;
      d_frame += row;
    }
    grads.pos.row(std::min(n, cfg.max_frames - 1)) += d_frame;
    d_pooled += d_frame;
    if (g >= 0) {
      grads.gloss.row(g) += d_frame;
      grads.rel.row(aligned_offset(c, n, cfg.max_length)) += d_frame;
    }
  }
  const double inv_m = 1.0 / static_cast<double>(c.gloss_ids.size());
  for (int g : c.gloss_ids) grads.gloss.row(g) += d_pooled * inv_m;
}

}  // namespace detail

/// p(x0 | x_t, c) from the trainable model.
inline DenoiserOutput trainable_denoiser_forward(const DenoiserParams& p, const TokenGrid& x_t,
                                                 int t, const Condition& c) {
  detail::DenoiserCache cache;
  detail::denoiser_forward(p, x_t, t, c, cache);
  DenoiserOutput out(x_t.positions(), p.cfg.vocab);
  for (int r = 0; r < x_t.positions(); ++r) {
    for (int v = 0; v < p.cfg.vocab; ++v) out.row(r)[v] = cache.probs(r, v);
  }
  return out;
}

/// Callable adaptor satisfying the Denoiser concept.
class TrainableDenoiser {
 public:
  explicit TrainableDenoiser(const DenoiserParams& p) : params_(&p) {}
  DenoiserOutput operator()(const TokenGrid& x_t, int t, const Condition& c) const {
    return trainable_denoiser_forward(*params_, x_t, t, c);
  }

 private:
  const DenoiserParams* params_;
};

/// Per-gloss length logits (M x P).
inline Matrix length_logits(const DenoiserParams& p, const Condition& c) {
  const ConditionEmbedding ce = embed_condition(p, c);
  Matrix features = ce.vectors;
  features.rowwise() += ce.pooled;
  Matrix logits = features * p.len_w;
  logits.rowwise() += p.len_b.row(0);
  return logits;
}

inline void length_head_backward(const DenoiserParams& p, const Condition& c,
                                 const Matrix& dlogits, DenoiserParams& grads) {
  const ConditionEmbedding ce = embed_condition(p, c);
  Matrix features = ce.vectors;
  features.rowwise() += ce.pooled;
  grads.len_w.noalias() += features.transpose() * dlogits;
  grads.len_b.row(0) += dlogits.colwise().sum();
  const Matrix df = dlogits * p.len_w.transpose();
  const RowVector d_pooled = df.colwise().sum();
  const double inv_m = 1.0 / static_cast<double>(c.gloss_ids.size());
  for (std::size_t i = 0; i < c.gloss_ids.size(); ++i) {
    grads.gloss.row(c.gloss_ids[i]) += df.row(static_cast<Eigen::Index>(i));
    grads.gloss.row(c.gloss_ids[i]) += d_pooled * inv_m;
  }
}

/// One training example: clean tokens, their corruption at step t, the
/// condition and the per-gloss length supervision.
struct TrainExample {
  TokenGrid x0;
  TokenGrid x_t;
  int t = 1;
  Condition cond;
  LengthTable lengths;
};

/// Batch-mean loss (diffusion + length) and its gradient.
inline LossBreakdown batch_loss_and_grad(const DenoiserParams& p,
                                         const std::vector<TrainExample>& batch,
                                         const NoiseSchedule& sch, double lambda,
                                         double delta, DenoiserParams* grads) {
  require(!batch.empty(), "train", "empty batch");
  require(sch.vocab_size() == p.cfg.vocab && sch.steps() == p.cfg.steps, "config",
          "schedule does not match the model");
  LossBreakdown mean;
  mean.lambda = lambda;
  mean.delta = delta;
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  std::vector<double> gw;
  for (const auto& ex : batch) {
    detail::DenoiserCache cache;
    detail::denoiser_forward(p, ex.x_t, ex.t, ex.cond, cache);
    if (!cache.probs.allFinite()) throw Error("nan", "non-finite denoiser output");
    DenoiserOutput out(ex.x_t.positions(), p.cfg.vocab);
    for (int r = 0; r < out.positions; ++r) {
      for (int v = 0; v < out.vocab; ++v) out.row(r)[v] = cache.probs(r, v);
    }
    const LossBreakdown lb =
        combined_loss(ex.x0, ex.x_t, ex.t, out, sch, lambda, grads ? &gw : nullptr);
    mean.l_vb += lb.l_vb * inv_b;
    mean.l_aux += lb.l_aux * inv_b;
    mean.l_prior += lb.l_prior * inv_b;
    mean.clamp_warnings += lb.clamp_warnings;

    Matrix dlen;
    if (delta > 0.0 || grads) {
      const Matrix logits = length_logits(p, ex.cond);
      mean.l_len += length_loss(logits, ex.lengths, delta, grads ? &dlen : nullptr) * inv_b;
    }
    if (grads) {
      Matrix gp(out.positions, out.vocab);
      for (int r = 0; r < out.positions; ++r) {
        for (int v = 0; v < out.vocab; ++v) gp(r, v) = gw[static_cast<std::size_t>(r) * out.vocab + v] * inv_b;
      }
      detail::denoiser_backward(p, ex.x_t, ex.cond, cache, gp, *grads);
      length_head_backward(p, ex.cond, dlen * inv_b, *grads);
    }
  }
  mean.finalize();
  return mean;
}

/// Adam moments; the update is skipped for tensors with no gradient.
struct AdamState {
  DenoiserParams m, v;
  long step = 0;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

  explicit AdamState(const ModelConfig& cfg)
      : m(DenoiserParams::zeros(cfg)), v(DenoiserParams::zeros(cfg)) {}
};

inline void check_finite(const DenoiserParams& grads, const std::string& where) {
  grads.for_each([&](std::string_view name, const Matrix& g) {
    if (!g.allFinite()) {
      throw Error("nan", "non-finite gradient in '" + std::string(name) + "' (" + where + ")");
    }
  });
}

/// One optimizer step on a batch. Returns the loss before the update.
inline LossBreakdown denoiser_train_step(DenoiserParams& p, AdamState* adam,
                                         const std::vector<TrainExample>& batch,
                                         const NoiseSchedule& sch, double lambda, double delta,
                                         double lr) {
  require(lr > 0.0, "config", "learning rate must be > 0");
  DenoiserParams grads = DenoiserParams::zeros(p.cfg);
  const LossBreakdown lb = batch_loss_and_grad(p, batch, sch, lambda, delta, &grads);
  if (!std::isfinite(lb.total)) throw Error("nan", "non-finite loss");
  check_finite(grads, "train step");
  if (!adam) {
    p.zip(grads, [&](std::string_view, Matrix& w, Matrix& g) { w -= lr * g; });
    return lb;
  }
  ++adam->step;
  const double c1 = 1.0 - std::pow(adam->beta1, static_cast<double>(adam->step));
  const double c2 = 1.0 - std::pow(adam->beta2, static_cast<double>(adam->step));
  std::vector<Matrix*> ms, vs;
  adam->m.for_each([&](std::string_view, Matrix& m) { ms.push_back(&m); });
  adam->v.for_each([&](std::string_view, Matrix& v) { vs.push_back(&v); });
  std::size_t i = 0;
  p.zip(grads, [&](std::string_view, Matrix& w, Matrix& g) {
    Matrix& m = *ms[i];
    Matrix& v = *vs[i];
    ++i;
    m = adam->beta1 * m + (1.0 - adam->beta1) * g;
    v = adam->beta2 * v + (1.0 - adam->beta2) * g.cwiseProduct(g);
    w.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + adam->eps);
  });
  return lb;
}

// ---------------------------------------------------------------------------
// Checkpoint (JSON, versioned, shape-tagged)

inline constexpr int kDenoiserCheckpointVersion = 1;

inline nlohmann::json matrix_to_json(const Matrix& m) {
  std::vector<double> data(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) data[static_cast<std::size_t>(r * m.cols() + c)] = m(r, c);
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

inline Matrix matrix_from_json(const nlohmann::json& j, const std::string& name) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto& data = j.at("data");
  require(static_cast<Eigen::Index>(data.size()) == rows * cols, "checkpoint",
          "tensor '" + name + "' has " + std::to_string(data.size()) + " values, shape says " +
              std::to_string(rows * cols));
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[static_cast<std::size_t>(r * cols + c)].get<double>();
  return m;
}

inline nlohmann::json model_config_to_json(const ModelConfig& c) {
  return {{"vocab", c.vocab},         {"d_model", c.d_model},       {"steps", c.steps},
          {"max_frames", c.max_frames}, {"max_length", c.max_length}, {"gloss_vocab", c.gloss_vocab}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.vocab = j.at("vocab");
  c.d_model = j.at("d_model");
  c.steps = j.at("steps");
  c.max_frames = j.at("max_frames");
  c.max_length = j.at("max_length");
  c.gloss_vocab = j.at("gloss_vocab");
  return c;
}

inline nlohmann::json denoiser_to_json(const DenoiserParams& p) {
  nlohmann::json tensors = nlohmann::json::object();
  p.for_each([&](std::string_view name, const Matrix& m) { tensors[std::string(name)] = matrix_to_json(m); });
  return {{"format", "posediff-denoiser"},
          {"version", kDenoiserCheckpointVersion},
          {"config", model_config_to_json(p.cfg)},
          {"tensors", std::move(tensors)}};
}

inline DenoiserParams denoiser_from_json(const nlohmann::json& j) {
  require(j.value("format", "") == "posediff-denoiser", "checkpoint", "not a denoiser checkpoint");
  require(j.value("version", 0) == kDenoiserCheckpointVersion, "checkpoint",
          "unsupported denoiser checkpoint version");
  DenoiserParams p = DenoiserParams::zeros(model_config_from_json(j.at("config")));
  const auto& tensors = j.at("tensors");
  p.for_each([&](std::string_view name, Matrix& m) {
    const std::string key(name);
    require(tensors.contains(key), "checkpoint", "missing tensor '" + key + "'");
    Matrix loaded = matrix_from_json(tensors.at(key), key);
    require(loaded.rows() == m.rows() && loaded.cols() == m.cols(), "checkpoint",
            "tensor '" + key + "' shape mismatch");
    m = std::move(loaded);
  });
  return p;
}

}  // namespace posediff
