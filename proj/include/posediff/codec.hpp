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
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "posediff/denoiser.hpp"
#include "posediff/error.hpp"
#include "posediff/layers.hpp"
#include "posediff/rng.hpp"
#include "posediff/skeleton.hpp"
#include "posediff/tokens.hpp"

namespace posediff {

struct Codebook {
  Matrix vectors;            // V x h
  std::vector<long> usage;   // assignments seen during fitting

  int size() const { return static_cast<int>(vectors.rows()); }
  int dim() const { return static_cast<int>(vectors.cols()); }
};

/// Nearest code (1-based) in squared Euclidean distance; lowest index wins ties.
inline int nearest_code(const Eigen::Ref<const RowVector>& e, const Codebook& cb) {
  require(cb.size() >= 1, "codebook", "codebook is empty");
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int v = 0; v < cb.size(); ++v) {
    const double d = (cb.vectors.row(v) - e).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = v;
    }
  }
  return best + 1;
}

struct Quantized {
  Matrix z;                  // quantized rows
  std::vector<int> indices;  // 1-based code per row
};

inline Quantized quantize(const Matrix& e, const Codebook& cb) {
  require(e.cols() == cb.dim(), "shape", "feature width differs from codebook width");
  Quantized q;
  q.z.resize(e.rows(), e.cols());
  q.indices.resize(static_cast<std::size_t>(e.rows()));
  for (Eigen::Index r = 0; r < e.rows(); ++r) {
    const int idx = nearest_code(e.row(r), cb);
    q.indices[static_cast<std::size_t>(r)] = idx;
    q.z.row(r) = cb.vectors.row(idx - 1);
  }
  return q;
}

inline double quantization_error(const Matrix& samples, const Codebook& cb) {
  const Quantized q = quantize(samples, cb);
  return (samples - q.z).squaredNorm();
}

struct CodebookFitOptions {
  int max_iterations = 60;
  double ema_decay = 0.5;  // 0 gives plain Lloyd updates
  double tolerance = 1e-10;
};

struct CodebookFit {
  Codebook codebook;
  std::vector<double> error_history;  // total squared error per iteration
};

/// k-means++ seeding followed by full-batch EMA refinement: each used code
/// moves towards the mean of its cell, dead codes are reseeded onto random
/// samples. Total error is non-increasing across iterations.
inline CodebookFit fit_codebook(const Matrix& samples, int vocab, Rng& rng,
                                const CodebookFitOptions& opt = {}) {
  const auto n = samples.rows();
  require(vocab >= 1, "codebook", "V must be >= 1");
  require(n >= vocab, "codebook",
          "fit_codebook needs at least V samples (" + std::to_string(n) + " < " +
              std::to_string(vocab) + ")");
  require(opt.ema_decay >= 0.0 && opt.ema_decay < 1.0, "codebook", "EMA decay must be in [0,1)");
  CodebookFit fit;
  Codebook& cb = fit.codebook;
  cb.vectors.resize(vocab, samples.cols());

  std::vector<double> d2(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  cb.vectors.row(0) = samples.row(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n))));
  for (int v = 1; v < vocab; ++v) {
    for (Eigen::Index i = 0; i < n; ++i) {
      d2[static_cast<std::size_t>(i)] =
          std::min(d2[static_cast<std::size_t>(i)], (samples.row(i) - cb.vectors.row(v - 1)).squaredNorm());
    }
    double total = 0.0;
    for (double d : d2) total += d;
    const Eigen::Index pick = total > 0.0
                                  ? static_cast<Eigen::Index>(rng.categorical(d2))
                                  : static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
    cb.vectors.row(v) = samples.row(pick);
  }

  std::vector<int> assign(static_cast<std::size_t>(n));
  auto assign_all = [&]() {
    double err = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const int c = nearest_code(samples.row(i), cb) - 1;
      assign[static_cast<std::size_t>(i)] = c;
      err += (samples.row(i) - cb.vectors.row(c)).squaredNorm();
    }
    return err;
  };

  double err = assign_all();
  fit.error_history.push_back(err);
  for (int it = 0; it < opt.max_iterations; ++it) {
    Matrix sums = Matrix::Zero(vocab, samples.cols());
    std::vector<long> counts(vocab, 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(assign[static_cast<std::size_t>(i)]) += samples.row(i);
      ++counts[assign[static_cast<std::size_t>(i)]];
    }
    for (int v = 0; v < vocab; ++v) {
      if (counts[v] > 0) {
        const RowVector mean = sums.row(v) / static_cast<double>(counts[v]);
        cb.vectors.row(v) = opt.ema_decay * cb.vectors.row(v) + (1.0 - opt.ema_decay) * mean;
      } else {
        cb.vectors.row(v) = samples.row(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n))));
      }
    }
    const double next = assign_all();
    fit.error_history.push_back(next);
    if (err - next <= opt.tolerance * std::max(1.0, err)) {
      err = next;
      break;
    }
    err = next;
  }
  cb.usage.assign(vocab, 0);
  for (int c : assign) ++cb.usage[c];
  return fit;
}

// ---------------------------------------------------------------------------
// Encoder / decoder

struct CodecConfig {
  int vocab = 2048;
  int hidden = 256;  // h
  double beta = 0.25;
  std::string layout = "separate";  // or "joint"
  CodebookFitOptions kmeans;
  int refine_steps = 0;
  double learning_rate = 3e-4;
  double ridge = 1e-9;
};

/// Per-patch linear encoder, shared codebook and per-joint SPL heads.
/// Decoder features are the quantized vectors themselves (o = z).
struct CodecParams {
  PatchLayout layout;
  int hidden = 0;
  int joints = 0;  // J of the pose sequences
  std::vector<Matrix> enc_w;     // h x (J_p*3)
  std::vector<RowVector> enc_b;  // h
  Codebook codebook;
  std::vector<Matrix> spl_a;     // (J_p*3) x h
  std::vector<Matrix> spl_b;     // (J_p*3) x 3, weight on the parent joint
  std::vector<RowVector> spl_c;  // J_p*3

  int patches() const { return layout.patches(); }

  static CodecParams zeros(const PatchLayout& layout, int hidden, int vocab) {
    CodecParams p;
    p.layout = layout;
    p.hidden = hidden;
    p.joints = layout.total_joints();
    for (int q = 0; q < layout.patches(); ++q) {
      const int d = static_cast<int>(layout.joints[q].size()) * kCoords;
      p.enc_w.push_back(Matrix::Zero(hidden, d));
      p.enc_b.push_back(RowVector::Zero(hidden));
      p.spl_a.push_back(Matrix::Zero(d, hidden));
      p.spl_b.push_back(Matrix::Zero(d, kCoords));
      p.spl_c.push_back(RowVector::Zero(d));
    }
    p.codebook.vectors = Matrix::Zero(vocab, hidden);
    p.codebook.usage.assign(vocab, 0);
    return p;
  }

  template <class F>
  void for_each(F&& f) {
    for (int q = 0; q < patches(); ++q) {
      const std::string s = std::to_string(q);
      f("enc_w" + s, enc_w[q]);
      f("spl_a" + s, spl_a[q]);
      f("spl_b" + s, spl_b[q]);
      // Row vectors are exposed as 1 x n matrices.
      Matrix eb = enc_b[q], sc = spl_c[q];
      f("enc_b" + s, eb);
      f("spl_c" + s, sc);
      enc_b[q] = eb.row(0);
      spl_c[q] = sc.row(0);
    }
    f("codebook", codebook.vectors);
  }
};

/// Flattened coordinates of patch \p q at frame \p n.
inline RowVector patch_coords(const PoseSequence& s, const PatchLayout& layout, int q, int n) {
  const auto& js = layout.joints[q];
  RowVector out(static_cast<Eigen::Index>(js.size()) * kCoords);
  for (std::size_t j = 0; j < js.size(); ++j) {
    for (int k = 0; k < kCoords; ++k) out(static_cast<Eigen::Index>(j) * kCoords + k) = s.at(n, js[j], k);
  }
  return out;
}

/// One h-vector per patch per frame; rows are frame-major (n * P + q).
inline Matrix encode_pose(const PoseSequence& s, const CodecParams& p) {
  require(s.joints == p.joints, "shape",
          "pose has " + std::to_string(s.joints) + " joints, codec expects " +
              std::to_string(p.joints));
  const int P = p.patches();
  Matrix e(static_cast<Eigen::Index>(s.frames) * P, p.hidden);
  for (int n = 0; n < s.frames; ++n) {
    for (int q = 0; q < P; ++q) {
      e.row(n * P + q) = patch_coords(s, p.layout, q, n) * p.enc_w[q].transpose() + p.enc_b[q];
    }
  }
  return e;
}

/// SPL decoding: joints of each patch in topological order, each from an
/// affine map of [patch feature, parent prediction]; roots use the feature
/// only.
inline PoseSequence spl_decode(const Matrix& o, const CodecParams& p) {
  const int P = p.patches();
  require(o.rows() % P == 0 && o.cols() == p.hidden, "shape", "decoder input has wrong shape");
  const int frames = static_cast<int>(o.rows()) / P;
  PoseSequence s(frames, p.joints);
  for (int n = 0; n < frames; ++n) {
    for (int q = 0; q < P; ++q) {
      const auto& js = p.layout.joints[q];
      const auto& parent = p.layout.parents[q];
      const RowVector feat = o.row(n * P + q);
      for (int j : p.layout.orders[q]) {
        for (int k = 0; k < kCoords; ++k) {
          const int r = j * kCoords + k;
          double v = p.spl_a[q].row(r).dot(feat) + p.spl_c[q](r);
          if (parent[j] >= 0) {
            for (int kk = 0; kk < kCoords; ++kk) v += p.spl_b[q](r, kk) * s.at(n, js[parent[j]], kk);
          }
          s.at(n, js[j], k) = static_cast<float>(v);
        }
      }
    }
  }
  return s;
}

/// Quantized rows -> pose via the codebook.
inline PoseSequence decode_indices(const std::vector<int>& indices, const CodecParams& p) {
  Matrix z(static_cast<Eigen::Index>(indices.size()), p.hidden);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    require(indices[r] >= 1 && indices[r] <= p.codebook.size(), "token",
            "code index outside [1, V]");
    z.row(static_cast<Eigen::Index>(r)) = p.codebook.vectors.row(indices[r] - 1);
  }
  return spl_decode(z, p);
}

inline PoseSequence decode_tokens(const TokenGrid& g, const CodecParams& p) {
  require(p.patches() == kPatches, "shape", "token grids need a three-patch codec");
  return decode_indices(std::vector<int>(g.values().begin(), g.values().end()), p);
}

/// Per-frame mean of sum_patches ||s - s~||^2 + ||sg[e] - z||^2 + beta ||e - sg[z]||^2.
inline double vqvae_loss(const PoseSequence& s, const PoseSequence& recon, const Matrix& e,
                         const Matrix& z, double beta) {
  require(s.coords.size() == recon.coords.size() && e.rows() == z.rows() && e.cols() == z.cols(),
          "shape", "vqvae_loss inputs disagree in shape");
  double rec = 0.0;
  for (std::size_t i = 0; i < s.coords.size(); ++i) {
    const double d = static_cast<double>(s.coords[i]) - recon.coords[i];
    rec += d * d;
  }
  const double gap = (e - z).squaredNorm();
  const double frames = std::max(1, s.frames);
  return (rec + gap + beta * gap) / frames;
}

struct CodecLoss {
  double reconstruction = 0.0;
  double codebook = 0.0;
  double commitment = 0.0;  // already scaled by beta
  double total = 0.0;
};

/// vqvae_loss over a batch of sequences (mean over sequences) with
/// straight-through gradients: the reconstruction gradient at z is copied
/// to e, the codebook term only reaches the codebook and the commitment
/// term only reaches the encoder.
inline CodecLoss codec_loss_and_grad(const CodecParams& p, const std::vector<PoseSequence>& batch,
                                     double beta, CodecParams* grads) {
  require(!batch.empty(), "train", "empty batch");
  const int P = p.patches();
  CodecLoss out;
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  for (const auto& s : batch) {
    const Matrix e = encode_pose(s, p);
    const Quantized q = quantize(e, p.codebook);
    const double inv_n = inv_b / std::max(1, s.frames);
    Matrix de = Matrix::Zero(e.rows(), e.cols());

    for (int n = 0; n < s.frames; ++n) {
      for (int pq = 0; pq < P; ++pq) {
        const auto& js = p.layout.joints[pq];
        const auto& parent = p.layout.parents[pq];
        const int d = static_cast<int>(js.size()) * kCoords;
        const RowVector feat = q.z.row(n * P + pq);
        RowVector pred(d);
        for (int j : p.layout.orders[pq]) {
          for (int k = 0; k < kCoords; ++k) {
            const int r = j * kCoords + k;
            double v = p.spl_a[pq].row(r).dot(feat) + p.spl_c[pq](r);
            if (parent[j] >= 0) v += p.spl_b[pq].row(r).dot(pred.segment(parent[j] * kCoords, kCoords));
            pred(r) = v;
          }
        }
        const RowVector target = patch_coords(s, p.layout, pq, n);
        const RowVector resid = pred - target;
        out.reconstruction += resid.squaredNorm() * inv_n;
        if (!grads) continue;
        // Reverse topological sweep: gradient w.r.t. each joint prediction.
        RowVector gpred = 2.0 * resid * inv_n;
        RowVector gfeat = RowVector::Zero(p.hidden);
        const auto& order = p.layout.orders[pq];
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
          const int j = *it;
          for (int k = 0; k < kCoords; ++k) {
            const int r = j * kCoords + k;
            const double g = gpred(r);
            grads->spl_a[pq].row(r) += g * feat;
            grads->spl_c[pq](r) += g;
            gfeat += g * p.spl_a[pq].row(r);
            if (parent[j] >= 0) {
              grads->spl_b[pq].row(r) += g * pred.segment(parent[j] * kCoords, kCoords);
              gpred.segment(parent[j] * kCoords, kCoords) += g * p.spl_b[pq].row(r);
            }
          }
        }
        de.row(n * P + pq) += gfeat;  // straight-through
      }
    }
    const Matrix gap = e - q.z;
    out.codebook += gap.squaredNorm() * inv_n;
    out.commitment += beta * gap.squaredNorm() * inv_n;
    if (grads) {
      de += 2.0 * beta * gap * inv_n;
      for (Eigen::Index r = 0; r < e.rows(); ++r) {
        grads->codebook.vectors.row(q.indices[static_cast<std::size_t>(r)] - 1) -=
            2.0 * gap.row(r) * inv_n;
      }
      for (int n = 0; n < s.frames; ++n) {
        for (int pq = 0; pq < P; ++pq) {
          const RowVector x = patch_coords(s, p.layout, pq, n);
          grads->enc_w[pq] += de.row(n * P + pq).transpose() * x;
          grads->enc_b[pq] += de.row(n * P + pq);
        }
      }
    }
  }
  out.total = out.reconstruction + out.codebook + out.commitment;
  return out;
}

/// Least-squares fit of the SPL heads given fixed decoder features: joints
/// in topological order, each regressed on [feature, predicted parent, 1].
inline void fit_spl(CodecParams& p, const std::vector<PoseSequence>& poses, double ridge) {
  const int P = p.patches();
  std::vector<Matrix> feats;
  for (const auto& s : poses) feats.push_back(quantize(encode_pose(s, p), p.codebook).z);
  for (int q = 0; q < P; ++q) {
    const auto& js = p.layout.joints[q];
    const auto& parent = p.layout.parents[q];
    long rows = 0;
    for (const auto& s : poses) rows += s.frames;
    // Predicted coordinates of this patch, filled joint by joint.
    Matrix pred = Matrix::Zero(rows, static_cast<Eigen::Index>(js.size()) * kCoords);
    Matrix target(rows, static_cast<Eigen::Index>(js.size()) * kCoords);
    Matrix feat(rows, p.hidden);
    long r = 0;
    for (std::size_t i = 0; i < poses.size(); ++i) {
      for (int n = 0; n < poses[i].frames; ++n, ++r) {
        target.row(r) = patch_coords(poses[i], p.layout, q, n);
        feat.row(r) = feats[i].row(n * P + q);
      }
    }
    for (int j : p.layout.orders[q]) {
      const bool has_parent = parent[j] >= 0;
      const int cols = p.hidden + (has_parent ? kCoords : 0) + 1;
      Matrix x(rows, cols);
      x.leftCols(p.hidden) = feat;
      if (has_parent) x.middleCols(p.hidden, kCoords) = pred.middleCols(parent[j] * kCoords, kCoords);
      x.col(cols - 1).setOnes();
      Matrix gram = x.transpose() * x;
      gram.diagonal().array() += ridge * std::max(1.0, gram.diagonal().maxCoeff());
      const Matrix coef = gram.ldlt().solve(x.transpose() * target.middleCols(j * kCoords, kCoords));
      for (int k = 0; k < kCoords; ++k) {
        const int row = j * kCoords + k;
        p.spl_a[q].row(row) = coef.col(k).head(p.hidden).transpose();
        p.spl_b[q].row(row).setZero();
        if (has_parent) p.spl_b[q].row(row) = coef.col(k).segment(p.hidden, kCoords).transpose();
        p.spl_c[q](row) = coef(cols - 1, k);
      }
      pred.middleCols(j * kCoords, kCoords) = x * coef;
    }
  }
}

/// PCA projection onto the top-h principal directions of each patch
/// (zero rows beyond the patch dimension).
inline void fit_pca_encoder(CodecParams& p, const std::vector<PoseSequence>& poses) {
  for (int q = 0; q < p.patches(); ++q) {
    const int d = static_cast<int>(p.layout.joints[q].size()) * kCoords;
    long rows = 0;
    for (const auto& s : poses) rows += s.frames;
    Matrix x(rows, d);
    long r = 0;
    for (const auto& s : poses)
      for (int n = 0; n < s.frames; ++n) x.row(r++) = patch_coords(s, p.layout, q, n);
    const RowVector mean = x.colwise().mean();
    x.rowwise() -= mean;
    const Matrix cov = x.transpose() * x / static_cast<double>(std::max<long>(1, rows));
    Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
    // Eigenvalues ascending; take the largest first.
    const int keep = std::min(d, p.hidden);
    p.enc_w[q].setZero();
    for (int i = 0; i < keep; ++i) {
      Eigen::VectorXd v = eig.eigenvectors().col(d - 1 - i);
      // Deterministic sign: largest-magnitude component positive.
      Eigen::Index arg;
      v.cwiseAbs().maxCoeff(&arg);
      if (v(arg) < 0) v = -v;
      p.enc_w[q].row(i) = v.transpose();
    }
    p.enc_b[q] = -(mean * p.enc_w[q].transpose());
  }
}

inline Matrix stack_features(const std::vector<PoseSequence>& poses, const CodecParams& p) {
  long rows = 0;
  for (const auto& s : poses) rows += static_cast<long>(s.frames) * p.patches();
  Matrix all(rows, p.hidden);
  long r = 0;
  for (const auto& s : poses) {
    const Matrix e = encode_pose(s, p);
    all.middleRows(r, e.rows()) = e;
    r += e.rows();
  }
  return all;
}

struct CodecFitReport {
  std::vector<double> kmeans_error;
  std::vector<double> refine_loss;
};

/// Desk-scale codec fitting: PCA encoder, codebook by k-means with EMA
/// refinement, least-squares SPL heads, then optional gradient refinement
/// of all heads on the VQ loss.
inline CodecParams fit_codec(const std::vector<PoseSequence>& poses, const Skeleton& sk,
                             const CodecConfig& cfg, Rng& rng, CodecFitReport* report = nullptr) {
  require(!poses.empty(), "codec", "no pose sequences to fit");
  const PatchLayout layout =
      cfg.layout == "joint" ? PatchLayout::joint(sk) : PatchLayout::separate(sk);
  require(cfg.layout == "joint" || cfg.layout == "separate", "config",
          "codec layout must be 'separate' or 'joint'");
  CodecParams p = CodecParams::zeros(layout, cfg.hidden, cfg.vocab);
  fit_pca_encoder(p, poses);
  CodebookFit fit = fit_codebook(stack_features(poses, p), cfg.vocab, rng, cfg.kmeans);
  p.codebook = std::move(fit.codebook);
  if (report) report->kmeans_error = fit.error_history;
  fit_spl(p, poses, cfg.ridge);

  if (cfg.refine_steps > 0) {
    // Adam over all codec tensors.
    std::vector<Matrix> m, v;
    p.for_each([&](const std::string&, Matrix& w) {
      m.push_back(Matrix::Zero(w.rows(), w.cols()));
      v.push_back(Matrix::Zero(w.rows(), w.cols()));
    });
    for (int step = 1; step <= cfg.refine_steps; ++step) {
      CodecParams grads = CodecParams::zeros(layout, cfg.hidden, cfg.vocab);
      const CodecLoss loss = codec_loss_and_grad(p, poses, cfg.beta, &grads);
      if (report) report->refine_loss.push_back(loss.total);
      std::vector<Matrix> g;
      grads.for_each([&](const std::string&, Matrix& w) { g.push_back(w); });
      std::size_t i = 0;
      const double c1 = 1.0 - std::pow(0.9, step), c2 = 1.0 - std::pow(0.999, step);
      p.for_each([&](const std::string&, Matrix& w) {
        m[i] = 0.9 * m[i] + 0.1 * g[i];
        v[i] = 0.999 * v[i] + 0.001 * g[i].cwiseProduct(g[i]);
        w.array() -= cfg.learning_rate * (m[i].array() / c1) / ((v[i].array() / c2).sqrt() + 1e-8);
        ++i;
      });
    }
  }
  return p;
}

struct Roundtrip {
  std::vector<int> indices;  // frame-major, one per patch
  TokenGrid tokens;          // filled for three-patch codecs
  PoseSequence reconstruction;
  double mse = 0.0;
};

inline double pose_mse(const PoseSequence& a, const PoseSequence& b) {
  require(a.coords.size() == b.coords.size(), "shape", "pose shapes differ");
  double s = 0.0;
  for (std::size_t i = 0; i < a.coords.size(); ++i) {
    const double d = static_cast<double>(a.coords[i]) - b.coords[i];
    s += d * d;
  }
  return a.coords.empty() ? 0.0 : s / static_cast<double>(a.coords.size());
}

/// encode -> quantize -> decode, with the mean squared error over all
/// frames, joints and coordinates.
inline Roundtrip codec_roundtrip(const PoseSequence& s, const CodecParams& p) {
  Roundtrip rt;
  const Quantized q = quantize(encode_pose(s, p), p.codebook);
  rt.indices = q.indices;
  if (p.patches() == kPatches) {
    rt.tokens = TokenGrid(s.frames, std::vector<Token>(q.indices.begin(), q.indices.end()));
  }
  rt.reconstruction = spl_decode(q.z, p);
  rt.mse = pose_mse(s, rt.reconstruction);
  return rt;
}

/// Per-frame latent (patch vectors concatenated) for sequential-KNN
/// segmentation. Continuous encoder features by default: quantized vectors
/// repeat exactly across neighbouring frames, which flattens the density.
inline Matrix frame_latents(const PoseSequence& s, const CodecParams& p, bool quantized = false) {
  Matrix e = encode_pose(s, p);
  if (quantized) e = quantize(e, p.codebook).z;
  const int P = p.patches();
  Matrix z(s.frames, static_cast<Eigen::Index>(P) * p.hidden);
  for (int n = 0; n < s.frames; ++n)
    for (int q = 0; q < P; ++q) z.block(n, q * p.hidden, 1, p.hidden) = e.row(n * P + q);
  return z;
}

// ---------------------------------------------------------------------------
// Checkpoint

inline constexpr int kCodecCheckpointVersion = 1;

inline nlohmann::json codec_to_json(CodecParams p) {
  nlohmann::json tensors = nlohmann::json::object();
  p.for_each([&](const std::string& name, Matrix& m) { tensors[name] = matrix_to_json(m); });
  nlohmann::json layout = nlohmann::json::array();
  for (int q = 0; q < p.patches(); ++q) {
    layout.push_back({{"joints", p.layout.joints[q]}, {"parents", p.layout.parents[q]}});
  }
  return {{"format", "posediff-codec"}, {"version", kCodecCheckpointVersion},
          {"hidden", p.hidden},        {"vocab", p.codebook.size()},
          {"joints", p.joints},        {"layout", layout},
          {"usage", p.codebook.usage}, {"tensors", tensors}};
}

inline CodecParams codec_from_json(const nlohmann::json& j) {
  require(j.value("format", "") == "posediff-codec", "checkpoint", "not a codec checkpoint");
  require(j.value("version", 0) == kCodecCheckpointVersion, "checkpoint",
          "unsupported codec checkpoint version");
  PatchLayout layout;
  for (const auto& pj : j.at("layout")) {
    layout.joints.push_back(pj.at("joints").get<std::vector<int>>());
    layout.parents.push_back(pj.at("parents").get<std::vector<int>>());
    layout.orders.push_back(topological_order(layout.parents.back()));
  }
  CodecParams p = CodecParams::zeros(layout, j.at("hidden"), j.at("vocab"));
  const auto& tensors = j.at("tensors");
  p.for_each([&](const std::string& name, Matrix& m) {
    require(tensors.contains(name), "checkpoint", "missing tensor '" + name + "'");
    Matrix loaded = matrix_from_json(tensors.at(name), name);
    require(loaded.rows() == m.rows() && loaded.cols() == m.cols(), "checkpoint",
            "tensor '" + name + "' shape mismatch");
    m = std::move(loaded);
  });
  p.codebook.usage = j.value("usage", std::vector<long>(p.codebook.size(), 0));
  return p;
}

}  // namespace posediff
