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
#include <gtest/gtest.h>

#include "test_util.hpp"

namespace posediff {
namespace {

using testing::central_difference;
using testing::default_skeleton;
using testing::rel_error;

Codebook make_codebook(Matrix vectors) {
  Codebook cb;
  cb.usage.assign(static_cast<std::size_t>(vectors.rows()), 0);
  cb.vectors = std::move(vectors);
  return cb;
}

int brute_force_nearest(const RowVector& e, const Matrix& codes) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index v = 0; v < codes.rows(); ++v) {
    double d = 0.0;
    for (Eigen::Index k = 0; k < codes.cols(); ++k) d += (e(k) - codes(v, k)) * (e(k) - codes(v, k));
    if (d < best_d) best_d = d, best = static_cast<int>(v);
  }
  return best + 1;
}

Matrix random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng, double sd = 1.0) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal(0.0, sd);
  return m;
}

std::vector<PoseSequence> corpus_poses(int sequences, std::uint64_t seed) {
  SyntheticCorpusSpec spec;
  spec.sequences = sequences;
  spec.seed = seed;
  std::vector<PoseSequence> out;
  for (auto& s : generate_corpus(spec, default_skeleton())) out.push_back(std::move(s.pose));
  return out;
}

TEST(Quantize, NearestNeighborExample) {
  Matrix codes(2, 2);
  codes << 0, 0, 1, 1;
  const Codebook cb = make_codebook(codes);
  Matrix e(1, 2);
  e << 0.1, 0.2;
  const Quantized q = quantize(e, cb);
  EXPECT_EQ(q.indices, std::vector<int>{1});
  EXPECT_EQ(q.z(0, 0), 0.0);
  EXPECT_EQ(q.z(0, 1), 0.0);
}

TEST(Quantize, MatchesBruteForceScan) {
  Rng rng(1);
  for (int V : {1, 2, 7, 64, 1000, 4096}) {
    const Matrix codes = random_matrix(V, 8, rng);
    const Codebook cb = make_codebook(codes);
    const Matrix e = random_matrix(V >= 1000 ? 300 : 2000, 8, rng, 1.5);
    const Quantized q = quantize(e, cb);
    for (Eigen::Index r = 0; r < e.rows(); ++r) {
      ASSERT_EQ(q.indices[static_cast<std::size_t>(r)], brute_force_nearest(e.row(r), codes))
          << "V=" << V;
      ASSERT_EQ(q.z.row(r), codes.row(q.indices[static_cast<std::size_t>(r)] - 1));
    }
  }
}

TEST(Quantize, TiesGoToLowestIndex) {
  Matrix codes(4, 2);
  codes << 1, 0, -1, 0, 0, 1, 1, 0;
  const Codebook cb = make_codebook(codes);
  EXPECT_EQ(nearest_code(RowVector::Zero(2), cb), 1);
  RowVector on_fourth(2);
  on_fourth << 1, 0;
  EXPECT_EQ(nearest_code(on_fourth, cb), 1);
}

TEST(Quantize, ExactCodeHasZeroErrorAndIsAFixedPoint) {
  Rng rng(2);
  const Codebook cb = make_codebook(random_matrix(16, 5, rng));
  const Quantized exact = quantize(cb.vectors, cb);
  for (int v = 0; v < 16; ++v) EXPECT_EQ(exact.indices[v], v + 1);
  EXPECT_EQ(quantization_error(cb.vectors, cb), 0.0);
  const Matrix e = random_matrix(200, 5, rng);
  const Quantized once = quantize(e, cb);
  const Quantized twice = quantize(once.z, cb);
  EXPECT_EQ(once.indices, twice.indices);
  EXPECT_EQ(once.z, twice.z);
}

// ---------------------------------------------------------------------------
// Codebook fitting

TEST(FitCodebook, DistinctPointsFitExactly) {
  Rng rng(3);
  const Matrix data = random_matrix(12, 4, rng);
  const CodebookFit fit = fit_codebook(data, 12, rng);
  EXPECT_EQ(quantization_error(data, fit.codebook), 0.0);
}

TEST(FitCodebook, SingleCodeIsTheMean) {
  Rng rng(4);
  const Matrix data = random_matrix(500, 3, rng);
  const RowVector mean = data.colwise().mean();
  CodebookFitOptions lloyd;
  lloyd.ema_decay = 0.0;
  const CodebookFit exact = fit_codebook(data, 1, rng, lloyd);
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(exact.codebook.vectors(0, k), mean(k), 1e-12);
  const CodebookFit ema = fit_codebook(data, 1, rng);
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(ema.codebook.vectors(0, k), mean(k), 1e-4);
}

TEST(FitCodebook, TwoBlobsRecoverTheirMeans) {
  Rng rng(5);
  Matrix data(400, 2);
  RowVector a(2), b(2);
  a << -3.0, 1.0;
  b << 4.0, -2.0;
  for (int i = 0; i < 400; ++i) {
    const RowVector& c = i < 200 ? a : b;
    for (int k = 0; k < 2; ++k) data(i, k) = c(k) + rng.normal(0.0, 0.3);
  }
  const RowVector ma = data.topRows(200).colwise().mean(), mb = data.bottomRows(200).colwise().mean();
  const CodebookFit fit = fit_codebook(data, 2, rng);
  const Matrix& cv = fit.codebook.vectors;
  const bool first_is_a = (cv.row(0) - ma).norm() < (cv.row(1) - ma).norm();
  EXPECT_LT((cv.row(first_is_a ? 0 : 1) - ma).norm(), 0.1);
  EXPECT_LT((cv.row(first_is_a ? 1 : 0) - mb).norm(), 0.1);
  EXPECT_LT((ma - a).norm(), 0.1);
  EXPECT_LT((mb - b).norm(), 0.1);
}

TEST(FitCodebook, ErrorNeverIncreasesAcrossIterations) {
  Rng rng(6);
  for (int trial = 0; trial < 5; ++trial) {
    const Matrix data = random_matrix(600, 6, rng);
    for (double decay : {0.0, 0.5, 0.9}) {
      CodebookFitOptions opt;
      opt.ema_decay = decay;
      const CodebookFit fit = fit_codebook(data, 24, rng, opt);
      ASSERT_GE(fit.error_history.size(), 2u);
      for (std::size_t i = 1; i < fit.error_history.size(); ++i)
        EXPECT_LE(fit.error_history[i], fit.error_history[i - 1] * (1 + 1e-12));
    }
  }
}

TEST(FitCodebook, BeatsRandomSubsetInitialization) {
  Rng rng(7);
  int wins = 0;
  const int trials = 20;
  for (int trial = 0; trial < trials; ++trial) {
    const Matrix data = random_matrix(300, 4, rng);
    const CodebookFit fit = fit_codebook(data, 10, rng);
    Matrix subset(10, 4);
    for (int v = 0; v < 10; ++v) subset.row(v) = data.row(static_cast<Eigen::Index>(rng.below(300)));
    wins += quantization_error(data, fit.codebook) <= quantization_error(data, make_codebook(subset));
  }
  EXPECT_EQ(wins, trials);
}

TEST(FitCodebook, UsageCoversEverySampleAndTooFewSamplesThrow) {
  Rng rng(8);
  const Matrix data = random_matrix(100, 3, rng);
  const CodebookFit fit = fit_codebook(data, 8, rng);
  long total = 0;
  for (long u : fit.codebook.usage) total += u;
  EXPECT_EQ(total, 100);
  try {
    fit_codebook(data.topRows(5), 8, rng);
    FAIL() << "expected a codebook error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), "codebook");
  }
}

TEST(FitCodebook, DeadCodesAreReseeded) {
  // Three identical far-away points and many near the origin: seeding with
  // duplicates leaves codes without samples until they are reseeded.
  Rng rng(9);
  Matrix data = random_matrix(60, 2, rng, 0.01);
  const CodebookFit fit = fit_codebook(data, 30, rng);
  int used = 0;
  for (long u : fit.codebook.usage) used += u > 0;
  EXPECT_GE(used, 25);
  EXPECT_LE(quantization_error(data, fit.codebook), fit.error_history.front());
}

// ---------------------------------------------------------------------------
// Encoder and SPL decoder

CodecParams random_codec(const PatchLayout& layout, int hidden, int vocab, Rng& rng) {
  CodecParams p = CodecParams::zeros(layout, hidden, vocab);
  p.for_each([&](const std::string&, Matrix& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal(0.0, 0.3);
  });
  return p;
}

PoseSequence random_pose(int frames, int joints, Rng& rng) {
  PoseSequence s(frames, joints);
  for (float& v : s.coords) v = static_cast<float>(rng.normal(0.0, 0.5));
  return s;
}

TEST(Skeleton, DefaultChainsHaveExpectedShape) {
  const Skeleton sk = default_skeleton();
  ASSERT_EQ(sk.patches.size(), 3u);
  EXPECT_EQ(sk.patches[0].size(), 8);
  EXPECT_EQ(sk.patches[1].size(), 21);
  EXPECT_EQ(sk.patches[2].size(), 21);
  EXPECT_EQ(sk.joints(), 50);
  const PatchLayout joint = PatchLayout::joint(sk);
  ASSERT_EQ(joint.patches(), 1);
  int roots = 0;
  for (int p : joint.parents[0]) roots += p < 0;
  EXPECT_EQ(roots, 1);
}

TEST(Skeleton, CyclesAreRejected) {
  EXPECT_THROW(topological_order({1, 2, 0}), Error);
  EXPECT_THROW(topological_order({-1, 1}), Error);
  const std::vector<int> order = topological_order({-1, 0, 0, 1});
  std::vector<int> pos(4);
  for (int i = 0; i < 4; ++i) pos[order[i]] = i;
  EXPECT_LT(pos[0], pos[1]);
  EXPECT_LT(pos[1], pos[3]);
  const auto doc = nlohmann::json::parse(R"({"format":"posediff-skeleton","version":1,
    "patches":[{"name":"a","joints":[{"name":"x","parent":"y"},{"name":"y","parent":"x"}]}]})");
  EXPECT_THROW(skeleton_from_json(doc), Error);
}

TEST(Encoder, ZeroInputAndBiasGiveZeroFeatures) {
  Rng rng(10);
  const Skeleton sk = default_skeleton();
  CodecParams p = random_codec(PatchLayout::separate(sk), 6, 4, rng);
  for (auto& b : p.enc_b) b.setZero();
  const Matrix e = encode_pose(PoseSequence(3, 50), p);
  EXPECT_EQ(e.rows(), 9);
  EXPECT_TRUE(e.isZero(0.0));
}

TEST(Encoder, FramePermutationPermutesFeatures) {
  Rng rng(11);
  const Skeleton sk = default_skeleton();
  const CodecParams p = random_codec(PatchLayout::separate(sk), 6, 4, rng);
  const PoseSequence s = random_pose(5, 50, rng);
  const std::vector<int> perm{3, 0, 4, 1, 2};
  PoseSequence sp(5, 50);
  for (int n = 0; n < 5; ++n)
    for (int j = 0; j < 50; ++j)
      for (int k = 0; k < 3; ++k) sp.at(n, j, k) = s.at(perm[n], j, k);
  const Matrix e = encode_pose(s, p), ep = encode_pose(sp, p);
  for (int n = 0; n < 5; ++n)
    EXPECT_EQ(ep.middleRows(n * 3, 3), e.middleRows(perm[n] * 3, 3));
  EXPECT_THROW(encode_pose(PoseSequence(2, 49), p), Error);
}

TEST(Spl, ZeroParametersPutEveryJointAtTheOrigin) {
  Rng rng(12);
  const CodecParams p = CodecParams::zeros(PatchLayout::separate(default_skeleton()), 5, 3);
  const PoseSequence s = spl_decode(random_matrix(6, 5, rng), p);
  for (float v : s.coords) EXPECT_EQ(v, 0.0f);
}

TEST(Spl, SingleJointIsAPlainAffineHead) {
  PatchLayout l;
  l.joints = {{0}};
  l.parents = {{-1}};
  l.orders = {{0}};
  Rng rng(13);
  CodecParams p = random_codec(l, 4, 2, rng);
  const Matrix o = random_matrix(3, 4, rng);
  const PoseSequence s = spl_decode(o, p);
  for (int n = 0; n < 3; ++n) {
    const RowVector ref = o.row(n) * p.spl_a[0].transpose() + p.spl_c[0];
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(s.at(n, 0, k), ref(k), 1e-5);
  }
}

std::vector<bool> descendants_of(int root, const std::vector<int>& parent) {
  std::vector<bool> out(parent.size(), false);
  out[root] = true;
  for (bool changed = true; changed;) {
    changed = false;
    for (std::size_t j = 0; j < parent.size(); ++j) {
      if (!out[j] && parent[j] >= 0 && out[parent[j]]) out[j] = changed = true;
    }
  }
  return out;
}

TEST(Spl, OutputsDependOnlyOnAncestors) {
  Rng rng(14);
  const Skeleton sk = default_skeleton();
  const PatchLayout layout = PatchLayout::separate(sk);
  const CodecParams base = random_codec(layout, 4, 2, rng);
  const Matrix o = random_matrix(3 * layout.patches(), 4, rng);
  const PoseSequence ref = spl_decode(o, base);
  for (int q = 0; q < layout.patches(); ++q) {
    const auto& parent = layout.parents[q];
    for (int j = 0; j < static_cast<int>(parent.size()); j += 3) {
      CodecParams p = base;
      p.spl_c[q](j * kCoords) += 1.0;
      const PoseSequence out = spl_decode(o, p);
      const auto desc = descendants_of(j, parent);
      for (int qq = 0; qq < layout.patches(); ++qq) {
        for (std::size_t jj = 0; jj < layout.joints[qq].size(); ++jj) {
          const int g = layout.joints[qq][jj];
          bool moved = false;
          for (int k = 0; k < 3; ++k) moved = moved || out.at(1, g, k) != ref.at(1, g, k);
          EXPECT_EQ(moved, qq == q && desc[jj]) << "patch " << q << " joint " << j << " -> " << g;
        }
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Losses and gradients

TEST(VqLoss, CommitmentArithmetic) {
  const PoseSequence s(1, 2);
  Matrix e(1, 2), z(1, 2);
  e << 1, 0;
  z << 0, 0;
  EXPECT_DOUBLE_EQ(vqvae_loss(s, s, e, z, 0.25), 1.25);
  EXPECT_DOUBLE_EQ(vqvae_loss(s, s, e, e, 0.25), 0.0);
}

/// Double-precision SPL forward for one patch row.
RowVector spl_row(const CodecParams& p, int q, const RowVector& feat) {
  const auto& parent = p.layout.parents[q];
  RowVector pred = RowVector::Zero(static_cast<Eigen::Index>(parent.size()) * kCoords);
  for (int j : p.layout.orders[q]) {
    for (int k = 0; k < kCoords; ++k) {
      const int r = j * kCoords + k;
      double v = p.spl_a[q].row(r).dot(feat) + p.spl_c[q](r);
      if (parent[j] >= 0) v += p.spl_b[q].row(r).dot(pred.segment(parent[j] * kCoords, kCoords));
      pred(r) = v;
    }
  }
  return pred;
}

struct TensorView {
  std::string name;
  double* data;
  Eigen::Index size;
};

std::vector<TensorView> tensor_views(CodecParams& p) {
  std::vector<TensorView> out;
  for (int q = 0; q < p.patches(); ++q) {
    const std::string s = std::to_string(q);
    out.push_back({"enc_w" + s, p.enc_w[q].data(), p.enc_w[q].size()});
    out.push_back({"enc_b" + s, p.enc_b[q].data(), p.enc_b[q].size()});
    out.push_back({"spl_a" + s, p.spl_a[q].data(), p.spl_a[q].size()});
    out.push_back({"spl_b" + s, p.spl_b[q].data(), p.spl_b[q].size()});
    out.push_back({"spl_c" + s, p.spl_c[q].data(), p.spl_c[q].size()});
  }
  out.push_back({"codebook", p.codebook.vectors.data(), p.codebook.vectors.size()});
  return out;
}

/// Straight-through surrogate: indices and z frozen at the reference
/// parameters, decoder input z0 + (e - e0).
double surrogate_loss(const CodecParams& p, const std::vector<PoseSequence>& batch,
                      const std::vector<Matrix>& e0, const std::vector<Quantized>& q0, double beta) {
  double total = 0.0;
  const int P = p.patches();
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const Matrix e = encode_pose(batch[b], p);
    double loss = 0.0;
    for (int n = 0; n < batch[b].frames; ++n) {
      for (int q = 0; q < P; ++q) {
        const int r = n * P + q;
        const RowVector feat = q0[b].z.row(r) + e.row(r) - e0[b].row(r);
        loss += (spl_row(p, q, feat) - patch_coords(batch[b], p.layout, q, n)).squaredNorm();
        const RowVector code = p.codebook.vectors.row(q0[b].indices[static_cast<std::size_t>(r)] - 1);
        loss += (e0[b].row(r) - code).squaredNorm();
        loss += beta * (e.row(r) - q0[b].z.row(r)).squaredNorm();
      }
    }
    total += loss / batch[b].frames;
  }
  return total / static_cast<double>(batch.size());
}

TEST(CodecGradient, HeadsMatchFiniteDifferencesOfStraightThroughLoss) {
  Rng rng(15);
  PatchLayout layout;
  layout.joints = {{0, 1, 2}, {3, 4}};
  layout.parents = {{-1, 0, 1}, {-1, 0}};
  layout.orders = {{0, 1, 2}, {0, 1}};
  CodecParams p = random_codec(layout, 3, 5, rng);
  std::vector<PoseSequence> batch{random_pose(3, 5, rng), random_pose(2, 5, rng)};
  std::vector<Matrix> e0;
  std::vector<Quantized> q0;
  for (const auto& s : batch) {
    e0.push_back(encode_pose(s, p));
    q0.push_back(quantize(e0.back(), p.codebook));
  }
  const double beta = 0.25;
  CodecParams grads = CodecParams::zeros(layout, 3, 5);
  const CodecLoss loss = codec_loss_and_grad(p, batch, beta, &grads);
  EXPECT_NEAR(loss.total, surrogate_loss(p, batch, e0, q0, beta), 1e-9);

  const auto mine = tensor_views(p), theirs = tensor_views(grads);
  ASSERT_EQ(mine.size(), theirs.size());
  for (std::size_t t = 0; t < mine.size(); ++t) {
    for (Eigen::Index i = 0; i < mine[t].size; ++i) {
      const double fd = central_difference([&] { return surrogate_loss(p, batch, e0, q0, beta); },
                                           mine[t].data[i]);
      EXPECT_LE(rel_error(theirs[t].data[i], fd, 1e-6), 1e-4) << mine[t].name << "[" << i << "]";
    }
  }
}

// ---------------------------------------------------------------------------
// Round trips

TEST(Roundtrip, ConstructedInvertibleCodecIsExact) {
  const Skeleton sk = default_skeleton();
  const PatchLayout layout = PatchLayout::separate(sk);
  Rng rng(16);
  std::vector<PoseSequence> frames;
  for (int i = 0; i < 6; ++i) frames.push_back(random_pose(1, 50, rng));
  const int h = 63;
  CodecParams p = CodecParams::zeros(layout, h, 18);
  for (int q = 0; q < 3; ++q) {
    const int d = static_cast<int>(layout.joints[q].size()) * kCoords;
    p.enc_w[q] = Matrix::Identity(h, d);
    p.spl_a[q] = Matrix::Identity(d, h);
  }
  for (int i = 0; i < 6; ++i) p.codebook.vectors.middleRows(i * 3, 3) = encode_pose(frames[i], p);
  PoseSequence seq(12, 50);
  for (int n = 0; n < 12; ++n)
    std::copy_n(frames[(n * 5) % 6].coords.begin(), 150, seq.coords.begin() + n * 150);
  const Roundtrip rt = codec_roundtrip(seq, p);
  EXPECT_LE(rt.mse, 1e-6);
  EXPECT_EQ(rt.tokens.frames(), 12);
}

TEST(Roundtrip, FittedCodecRecoversFewDistinctFrames) {
  const Skeleton sk = default_skeleton();
  Rng rng(17);
  std::vector<PoseSequence> frames;
  for (int i = 0; i < 5; ++i) frames.push_back(random_pose(1, 50, rng));
  std::vector<PoseSequence> poses;
  for (int s = 0; s < 4; ++s) {
    PoseSequence seq(10, 50);
    for (int n = 0; n < 10; ++n)
      std::copy_n(frames[(n + s) % 5].coords.begin(), 150, seq.coords.begin() + n * 150);
    poses.push_back(seq);
  }
  CodecConfig cfg;
  cfg.vocab = 8;
  cfg.hidden = 8;
  const CodecParams p = fit_codec(poses, sk, cfg, rng);
  for (const auto& s : poses) EXPECT_LE(codec_roundtrip(s, p).mse, 1e-6);
}

TEST(Roundtrip, ConstantSequenceErrorEqualsItsFrameError) {
  const Skeleton sk = default_skeleton();
  Rng rng(18);
  const auto poses = corpus_poses(6, 3);
  CodecConfig cfg;
  cfg.vocab = 16;
  cfg.hidden = 6;
  const CodecParams p = fit_codec(poses, sk, cfg, rng);
  PoseSequence frame(1, 50), seq(7, 50);
  std::copy_n(poses[0].coords.begin() + 150 * 4, 150, frame.coords.begin());
  for (int n = 0; n < 7; ++n) std::copy_n(frame.coords.begin(), 150, seq.coords.begin() + n * 150);
  EXPECT_NEAR(codec_roundtrip(seq, p).mse, codec_roundtrip(frame, p).mse, 1e-12);
}

TEST(Roundtrip, BothLayoutsReconstructWellBelowTheDataVariance) {
  const Skeleton sk = default_skeleton();
  const auto poses = corpus_poses(20, 5);
  double mean = 0.0, sq = 0.0, count = 0.0;
  for (const auto& s : poses)
    for (float v : s.coords) mean += v, sq += double(v) * v, count += 1.0;
  const double variance = sq / count - (mean / count) * (mean / count);
  for (const std::string layout : {"separate", "joint"}) {
    CodecConfig cfg;
    cfg.vocab = 64;
    cfg.hidden = 24;
    cfg.layout = layout;
    Rng rng(19);
    const CodecParams p = fit_codec(poses, sk, cfg, rng);
    EXPECT_EQ(p.patches(), layout == "joint" ? 1 : 3);
    double mse = 0.0;
    for (const auto& s : poses) mse += codec_roundtrip(s, p).mse / poses.size();
    EXPECT_LT(mse, 0.05 * variance) << layout;
  }
}

TEST(Roundtrip, RefinementDoesNotIncreaseTheLoss) {
  const Skeleton sk = default_skeleton();
  const auto poses = corpus_poses(4, 9);
  CodecConfig cfg;
  cfg.vocab = 16;
  cfg.hidden = 6;
  cfg.refine_steps = 5;
  cfg.learning_rate = 1e-4;
  Rng rng(20);
  CodecFitReport report;
  fit_codec(poses, sk, cfg, rng, &report);
  ASSERT_EQ(report.refine_loss.size(), 5u);
  EXPECT_LE(report.refine_loss.back(), report.refine_loss.front());
  for (std::size_t i = 1; i < report.kmeans_error.size(); ++i)
    EXPECT_LE(report.kmeans_error[i], report.kmeans_error[i - 1] * (1 + 1e-12));
}

TEST(CodecCheckpoint, RoundTripIsExact) {
  const Skeleton sk = default_skeleton();
  Rng rng(21);
  const auto poses = corpus_poses(3, 11);
  CodecConfig cfg;
  cfg.vocab = 8;
  cfg.hidden = 4;
  const CodecParams p = fit_codec(poses, sk, cfg, rng);
  const CodecParams q = codec_from_json(nlohmann::json::parse(codec_to_json(p).dump()));
  EXPECT_EQ(codec_roundtrip(poses[0], p).reconstruction, codec_roundtrip(poses[0], q).reconstruction);
  EXPECT_EQ(q.codebook.vectors, p.codebook.vectors);
  nlohmann::json bad = codec_to_json(p);
  bad["version"] = 7;
  EXPECT_THROW(codec_from_json(bad), Error);
}

}  // namespace
}  // namespace posediff
