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

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include <json.hpp>

#include "posediff/error.hpp"
#include "posediff/rng.hpp"
#include "posediff/segment.hpp"
#include "posediff/skeleton.hpp"

namespace posediff {

struct SyntheticCorpusSpec {
  int gloss_vocab_size = 12;
  int sequences = 60;
  int min_glosses = 2;
  int max_glosses = 4;
  int min_frames_per_gloss = 10;  // uniform range, mean 16
  int max_frames_per_gloss = 22;
  int handshapes = 4;             // pool shared by all glosses, per hand
  double pose_amplitude = 0.25;   // spread of per-gloss body offsets
  double motion_amplitude = 0.08; // in-sign movement along the prototype direction
  double hand_amplitude = 0.05;
  double motion_halfwidth = 8.0;  // frames from the sign centre at full motion
  bool distinct_neighbors = true; // adjacent glosses differ
  double noise_std = 0.005;       // amplitude of smooth per-sample drift
  double dev_fraction = 0.1;
  double test_fraction = 0.1;
  std::uint64_t seed = 7;

  void validate() const {
    require(gloss_vocab_size >= 1, "config", "gloss_vocab_size must be >= 1");
    require(sequences >= 0, "config", "sequences must be >= 0");
    require(min_glosses >= 1 && min_glosses <= max_glosses, "config",
            "glosses_per_sequence range is empty");
    require(min_frames_per_gloss >= 1 && min_frames_per_gloss <= max_frames_per_gloss, "config",
            "frames_per_gloss range is empty");
    require(handshapes >= 1, "config", "handshapes must be >= 1");
    require(motion_halfwidth > 0.0, "config", "motion_halfwidth must be > 0");
    require(!distinct_neighbors || gloss_vocab_size >= 2 || max_glosses == 1, "config",
            "distinct neighbouring glosses need at least two glosses");
    require(noise_std >= 0.0 && pose_amplitude >= 0.0 && motion_amplitude >= 0.0 &&
                hand_amplitude >= 0.0,
            "config", "amplitudes and noise std must be >= 0");
    require(dev_fraction >= 0.0 && test_fraction >= 0.0 && dev_fraction + test_fraction <= 1.0,
            "config", "split fractions must lie in [0,1] and sum to <= 1");
  }

  double mean_frames_per_gloss() const {
    return 0.5 * (min_frames_per_gloss + max_frames_per_gloss);
  }
};

inline nlohmann::json to_json(const SyntheticCorpusSpec& s) {
  return {{"gloss_vocab_size", s.gloss_vocab_size},
          {"sequences", s.sequences},
          {"min_glosses", s.min_glosses},
          {"max_glosses", s.max_glosses},
          {"min_frames_per_gloss", s.min_frames_per_gloss},
          {"max_frames_per_gloss", s.max_frames_per_gloss},
          {"handshapes", s.handshapes},
          {"pose_amplitude", s.pose_amplitude},
          {"motion_amplitude", s.motion_amplitude},
          {"hand_amplitude", s.hand_amplitude},
          {"motion_halfwidth", s.motion_halfwidth},
          {"distinct_neighbors", s.distinct_neighbors},
          {"noise_std", s.noise_std},
          {"dev_fraction", s.dev_fraction},
          {"test_fraction", s.test_fraction},
          {"seed", s.seed}};
}

inline SyntheticCorpusSpec synthetic_spec_from_json(const nlohmann::json& j) {
  SyntheticCorpusSpec s;
  s.gloss_vocab_size = j.value("gloss_vocab_size", s.gloss_vocab_size);
  s.sequences = j.value("sequences", s.sequences);
  s.min_glosses = j.value("min_glosses", s.min_glosses);
  s.max_glosses = j.value("max_glosses", s.max_glosses);
  s.min_frames_per_gloss = j.value("min_frames_per_gloss", s.min_frames_per_gloss);
  s.max_frames_per_gloss = j.value("max_frames_per_gloss", s.max_frames_per_gloss);
  s.handshapes = j.value("handshapes", s.handshapes);
  s.pose_amplitude = j.value("pose_amplitude", s.pose_amplitude);
  s.motion_amplitude = j.value("motion_amplitude", s.motion_amplitude);
  s.hand_amplitude = j.value("hand_amplitude", s.hand_amplitude);
  s.motion_halfwidth = j.value("motion_halfwidth", s.motion_halfwidth);
  s.distinct_neighbors = j.value("distinct_neighbors", s.distinct_neighbors);
  s.noise_std = j.value("noise_std", s.noise_std);
  s.dev_fraction = j.value("dev_fraction", s.dev_fraction);
  s.test_fraction = j.value("test_fraction", s.test_fraction);
  s.seed = j.value("seed", s.seed);
  s.validate();
  return s;
}

/// FNV-1a over the canonical JSON dump of the spec.
inline std::string spec_hash(const SyntheticCorpusSpec& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : to_json(s).dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

enum class Split { kTrain, kDev, kTest };

inline std::string to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kDev: return "dev";
    case Split::kTest: return "test";
  }
  return "train";
}

inline Split split_from_string(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "dev") return Split::kDev;
  if (s == "test") return Split::kTest;
  throw Error("split", "unknown split '" + s + "' (expected train, dev or test)");
}

struct AlignedSample {
  std::vector<std::string> glosses;
  PoseSequence pose;
  LengthTable lengths;
  Split split = Split::kTrain;

  bool operator==(const AlignedSample&) const = default;
};

using Offsets = std::vector<std::array<double, 3>>;

/// Per-gloss body motion plus one handshape per hand, drawn from a shared pool.
struct MotionBank {
  Offsets rest;                        // skeleton rest pose, all joints
  std::vector<Offsets> body_offset;    // per gloss, pose joints
  std::vector<Offsets> body_motion;
  std::vector<Offsets> hand_offset;    // per handshape, hand-local joints
  std::vector<Offsets> hand_motion;
  std::vector<std::array<int, 2>> gloss_hands;  // right/left handshape per gloss
};

inline std::string gloss_name(int g) { return "G" + std::to_string(g); }

inline MotionBank make_motion_bank(const SyntheticCorpusSpec& spec, const Skeleton& sk) {
  spec.validate();
  require(!sk.patches.empty(), "skeleton", "skeleton has no patches");
  Rng rng(Rng::derive(spec.seed, 0x70726f746fULL));  // "proto"
  MotionBank bank;
  bank.rest = sk.rest_pose();
  const int body = sk.patches[0].size();
  auto draw = [&](int joints, double scale) {
    Offsets o(joints);
    for (auto& v : o)
      for (double& c : v) c = rng.normal(0.0, scale);
    return o;
  };
  auto unit_draw = [&](int joints, double scale) {
    Offsets o = draw(joints, 1.0);
    double norm = 0.0;
    for (const auto& v : o)
      for (double c : v) norm += c * c;
    norm = std::sqrt(norm);
    for (auto& v : o)
      for (double& c : v) c = norm > 0.0 ? c / norm * scale * std::sqrt(double(joints)) : 0.0;
    return o;
  };
  for (int g = 0; g < spec.gloss_vocab_size; ++g) {
    bank.body_offset.push_back(draw(body, spec.pose_amplitude));
    bank.body_motion.push_back(unit_draw(body, spec.motion_amplitude));
  }
  const int hand = sk.patches.size() > 1 ? sk.patches[1].size() : 0;
  for (int h = 0; h < spec.handshapes; ++h) {
    bank.hand_offset.push_back(draw(hand, spec.pose_amplitude * 0.5));
    bank.hand_motion.push_back(unit_draw(hand, spec.hand_amplitude));
  }
  for (int g = 0; g < spec.gloss_vocab_size; ++g) {
    bank.gloss_hands.push_back({static_cast<int>(rng.below(spec.handshapes)),
                                static_cast<int>(rng.below(spec.handshapes))});
  }
  return bank;
}

/// Renders one gloss sequence with the given per-gloss lengths. Within a
/// sign, frame f of L sits at offset + (r/halfwidth)^3 * motion with
/// r = f - (L-1)/2, so frames crowd around the sign centre and the crowding
/// does not depend on L. Drift is a per-sample low-frequency
/// sinusoid per coordinate with amplitude ~ N(0, noise_std).
inline PoseSequence render_sequence(const std::vector<int>& gloss_ids,
                                    const std::vector<int>& lengths, const MotionBank& bank,
                                    const Skeleton& sk, double noise_std, double halfwidth,
                                    Rng& rng) {
  require(gloss_ids.size() == lengths.size(), "shape", "one length per gloss required");
  int frames = 0;
  for (int l : lengths) {
    require(l >= 1, "length", "gloss lengths must be >= 1");
    frames += l;
  }
  const int joints = sk.joints();
  PoseSequence s(frames, joints);
  std::vector<double> drift_amp(static_cast<std::size_t>(joints) * kCoords, 0.0);
  std::vector<double> drift_phase(drift_amp.size(), 0.0);
  if (noise_std > 0.0) {
    for (std::size_t i = 0; i < drift_amp.size(); ++i) {
      drift_amp[i] = rng.normal(0.0, noise_std);
      drift_phase[i] = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
    }
  }
  const int body = sk.patches[0].size();
  int n = 0;
  for (std::size_t m = 0; m < gloss_ids.size(); ++m) {
    const int g = gloss_ids[m];
    require(g >= 0 && g < static_cast<int>(bank.body_offset.size()), "vocabulary",
            "gloss id outside the motion bank");
    for (int f = 0; f < lengths[m]; ++f, ++n) {
      const double r = f - 0.5 * (lengths[m] - 1);
      const double c = std::pow(r / halfwidth, 3);
      std::vector<std::array<double, 3>> pos = bank.rest;
      for (int j = 0; j < body; ++j)
        for (int k = 0; k < kCoords; ++k)
          pos[j][k] += bank.body_offset[g][j][k] + c * bank.body_motion[g][j][k];
      for (int p = 1; p < static_cast<int>(sk.patches.size()); ++p) {
        const auto& chain = sk.patches[p];
        const int base = sk.patch_offset(p);
        const int hs = bank.gloss_hands[g][(p - 1) % 2];
        // Hands follow their anchor joint rigidly, then add the handshape.
        std::array<double, 3> shift{0, 0, 0};
        if (chain.anchor_patch >= 0) {
          const int a = sk.patch_offset(chain.anchor_patch) + chain.anchor_joint;
          for (int k = 0; k < kCoords; ++k) shift[k] = pos[a][k] - bank.rest[a][k];
        }
        for (int j = 0; j < chain.size(); ++j)
          for (int k = 0; k < kCoords; ++k) {
            double extra = 0.0;
            if (j < static_cast<int>(bank.hand_offset[hs].size()))
              extra = bank.hand_offset[hs][j][k] + c * bank.hand_motion[hs][j][k];
            pos[base + j][k] += shift[k] + extra;
          }
      }
      for (int j = 0; j < joints; ++j)
        for (int k = 0; k < kCoords; ++k) {
          const std::size_t i = static_cast<std::size_t>(j) * kCoords + k;
          const double drift =
              drift_amp[i] * std::sin(2.0 * 3.14159265358979323846 * n / std::max(1, frames) +
                                      drift_phase[i]);
          s.at(n, j, k) = static_cast<float>(pos[j][k] + drift);
        }
    }
  }
  return s;
}

/// Deterministic per seed; sample i draws from its own derived stream. The
/// last test_fraction of samples is the test split, the dev split precedes
/// it, the rest is train.
inline std::vector<AlignedSample> generate_corpus(const SyntheticCorpusSpec& spec,
                                                  const Skeleton& sk) {
  spec.validate();
  const MotionBank bank = make_motion_bank(spec, sk);
  std::vector<AlignedSample> out;
  out.reserve(static_cast<std::size_t>(spec.sequences));
  const int n_test = static_cast<int>(std::lround(spec.test_fraction * spec.sequences));
  const int n_dev = static_cast<int>(std::lround(spec.dev_fraction * spec.sequences));
  const int n_train = spec.sequences - n_test - n_dev;
  for (int i = 0; i < spec.sequences; ++i) {
    Rng rng(Rng::derive(spec.seed, static_cast<std::uint64_t>(i) + 1));
    const int m = static_cast<int>(rng.between(spec.min_glosses, spec.max_glosses));
    std::vector<int> ids(m), lens(m);
    for (int k = 0; k < m; ++k) {
      do {
        ids[k] = static_cast<int>(rng.below(spec.gloss_vocab_size));
      } while (spec.distinct_neighbors && k > 0 && ids[k] == ids[k - 1]);
      lens[k] = static_cast<int>(rng.between(spec.min_frames_per_gloss, spec.max_frames_per_gloss));
    }
    AlignedSample s;
    for (int g : ids) s.glosses.push_back(gloss_name(g));
    s.pose = render_sequence(ids, lens, bank, sk, spec.noise_std, spec.motion_halfwidth, rng);
    s.lengths.lengths = lens;
    s.split = i < n_train ? Split::kTrain : (i < n_train + n_dev ? Split::kDev : Split::kTest);
    out.push_back(std::move(s));
  }
  return out;
}

inline std::vector<AlignedSample> select_split(const std::vector<AlignedSample>& all, Split s) {
  std::vector<AlignedSample> out;
  for (const auto& a : all)
    if (a.split == s) out.push_back(a);
  return out;
}

}  // namespace posediff
