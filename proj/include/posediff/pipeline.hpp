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
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "posediff/codec.hpp"
#include "posediff/config.hpp"
#include "posediff/dataset.hpp"
#include "posediff/denoiser.hpp"
#include "posediff/diffusion.hpp"
#include "posediff/metrics.hpp"
#include "posediff/oracle.hpp"
#include "posediff/segment.hpp"
#include "posediff/transition.hpp"
#include "posediff/vocab.hpp"

namespace posediff {

// ---------------------------------------------------------------------------
// Files

inline void write_text(const std::string& path, const std::string& text) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("io", "cannot write '" + path + "'");
  out << text;
  if (!out) throw Error("io", "failed writing '" + path + "'");
}

inline nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io", "cannot open '" + path + "'");
  try {
    nlohmann::json j;
    in >> j;
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw Error("io", "'" + path + "' is not valid JSON: " + e.what());
  }
}

/// \p dir/\p stem_<UTC timestamp><ext>, with a numeric suffix when that
/// name is taken. Never overwrites.
inline std::string fresh_report_path(const std::string& dir, const std::string& stem,
                                     const std::string& ext) {
  std::filesystem::create_directories(dir);
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char ts[32];
  std::strftime(ts, sizeof ts, "%Y%m%dT%H%M%SZ", &tm);
  const std::string base = (std::filesystem::path(dir) / (stem + "_" + ts)).string();
  std::string path = base + ext;
  for (int k = 1; std::filesystem::exists(path); ++k) path = base + "_" + std::to_string(k) + ext;
  return path;
}

// ---------------------------------------------------------------------------
// Data and tokens

inline Dataset gen_data(const RunConfig& cfg, const Skeleton& sk) {
  Dataset d = make_dataset(cfg.data, sk);
  save_dataset(d, cfg.paths.dataset);
  return d;
}

inline std::vector<PoseSequence> poses_of(const std::vector<AlignedSample>& samples) {
  std::vector<PoseSequence> out;
  for (const auto& s : samples) out.push_back(s.pose);
  return out;
}

/// Codec fitted on the train split with its own RNG stream.
inline CodecParams fit_codec_stage(const RunConfig& cfg, const Dataset& d, const Skeleton& sk,
                                   CodecFitReport* report = nullptr) {
  const auto train = select_split(d.samples, Split::kTrain);
  require(!train.empty(), "split", "dataset has no train split");
  Rng rng(Rng::derive(cfg.seed, 0xc0dec));
  return fit_codec(poses_of(train), sk, cfg.codec, rng, report);
}

/// Sorted gloss inventory of the samples.
inline Vocabulary gloss_vocabulary(const std::vector<AlignedSample>& samples) {
  std::set<std::string> words;
  for (const auto& s : samples) words.insert(s.glosses.begin(), s.glosses.end());
  return Vocabulary(std::vector<std::string>(words.begin(), words.end()));
}

inline Condition make_condition(const Vocabulary& vocab, const std::vector<std::string>& glosses,
                                const LengthTable* lengths = nullptr) {
  require(!glosses.empty(), "vocabulary", "empty gloss sequence");
  Condition c;
  c.gloss_ids = vocab.encode(glosses);
  c.key = join_glosses(glosses);
  if (lengths) align_condition(c, lengths->lengths);
  return c;
}

struct TokenizedSample {
  AlignedSample sample;
  TokenGrid tokens;
};

inline std::vector<TokenizedSample> tokenize(const std::vector<AlignedSample>& samples,
                                             const CodecParams& codec) {
  require(codec.patches() == kPatches, "codec", "diffusion needs a three-patch codec");
  std::vector<TokenizedSample> out;
  for (const auto& s : samples) out.push_back({s, codec_roundtrip(s.pose, codec).tokens});
  return out;
}

// ---------------------------------------------------------------------------
// Model bundle (denoiser + gloss inventory)

struct ModelBundle {
  DenoiserParams params;
  Vocabulary glosses;
  int step = 0;
};

inline nlohmann::json bundle_to_json(const ModelBundle& m) {
  return {{"format", "posediff-model"},
          {"version", 1},
          {"step", m.step},
          {"glosses", m.glosses.words()},
          {"denoiser", denoiser_to_json(m.params)}};
}

inline ModelBundle bundle_from_json(const nlohmann::json& j) {
  require(j.value("format", "") == "posediff-model" && j.value("version", 0) == 1, "checkpoint",
          "not a posediff model checkpoint");
  ModelBundle m;
  m.step = j.value("step", 0);
  m.glosses = Vocabulary(j.at("glosses").get<std::vector<std::string>>());
  m.params = denoiser_from_json(j.at("denoiser"));
  return m;
}

inline ModelConfig model_config(const RunConfig& cfg, int gloss_vocab) {
  ModelConfig m;
  m.vocab = cfg.codec.vocab;
  m.d_model = cfg.d_model;
  m.steps = cfg.diffusion_steps;
  m.max_frames = cfg.max_frames;
  m.max_length = cfg.max_length;
  m.gloss_vocab = gloss_vocab;
  return m;
}

// ---------------------------------------------------------------------------
// Training

struct TrainLogRow {
  int step = 0;
  double t_mean = 0.0;  // batch mean of the sampled timesteps
  LossBreakdown loss;
};

struct TrainResult {
  ModelBundle model;
  std::vector<TrainLogRow> log;
};

/// Columns step,t_mean,l_vb,l_aux,l_len,total; l_aux is the weighted term
/// lambda * l_aux and l_len is already delta-weighted, so total is their sum.
inline std::string format_train_log(const std::vector<TrainLogRow>& log) {
  std::string out = "step,t_mean,l_vb,l_aux,l_len,total\n";
  char buf[160];
  for (const auto& r : log) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.step, r.t_mean,
                  r.loss.l_vb,
                  r.loss.lambda * r.loss.l_aux, r.loss.l_len, r.loss.total);
    out += buf;
  }
  return out;
}

/// Builds the batch for one step: per example a uniform sample, its own
/// uniform t and independent corruption per position.
inline std::vector<TrainExample> draw_batch(const std::vector<TokenizedSample>& data,
                                            const Vocabulary& vocab, const NoiseSchedule& sch,
                                            int batch_size, Rng& rng) {
  std::vector<TrainExample> batch;
  for (int b = 0; b < batch_size; ++b) {
    const auto& s = data[rng.below(data.size())];
    const int t = static_cast<int>(rng.between(1, sch.steps()));
    TrainExample ex;
    ex.x0 = s.tokens;
    ex.t = t;
    ex.x_t = sample_corrupted(s.tokens, t, sch, rng);
    ex.cond = make_condition(vocab, s.sample.glosses, &s.sample.lengths);
    ex.lengths = s.sample.lengths;
    batch.push_back(std::move(ex));
  }
  return batch;
}

using CheckpointHook = std::function<void(const ModelBundle&)>;

inline TrainResult train_denoiser(const RunConfig& cfg, const std::vector<TokenizedSample>& data,
                                  const Vocabulary& vocab, const NoiseSchedule& sch,
                                  const CheckpointHook& on_checkpoint = {}) {
  require(!data.empty(), "train", "no training sequences");
  for (const auto& s : data) {
    require(s.tokens.frames() <= cfg.max_frames, "config",
            "sequence longer than model.max_frames");
    for (int l : s.sample.lengths.lengths)
      require(l <= cfg.max_length, "config", "gloss length above model.max_length");
  }
  TrainResult res;
  Rng init_rng(Rng::derive(cfg.seed, 0x1417));
  res.model.glosses = vocab;
  res.model.params = DenoiserParams::init(model_config(cfg, vocab.size()), init_rng);
  AdamState adam(res.model.params.cfg);
  Rng rng(Rng::derive(cfg.seed, 0x7a41));
  for (int step = 1; step <= cfg.train.steps; ++step) {
    const auto batch = draw_batch(data, vocab, sch, cfg.train.batch_size, rng);
    double t_mean = 0.0;
    for (const auto& ex : batch) t_mean += static_cast<double>(ex.t) / batch.size();
    LossBreakdown lb;
    try {
      lb = denoiser_train_step(res.model.params, cfg.train.optimizer == "adam" ? &adam : nullptr,
                               batch, sch, cfg.train.lambda, cfg.train.delta,
                               cfg.train.learning_rate);
    } catch (const Error& e) {
      if (e.kind() != "nan") throw;
      throw Error("nan", std::string(e.what()) + " at batch " + std::to_string(step));
    }
    res.model.step = step;
    res.log.push_back({step, t_mean, lb});
    if (on_checkpoint && cfg.train.checkpoint_every > 0 && step % cfg.train.checkpoint_every == 0)
      on_checkpoint(res.model);
  }
  return res;
}

// ---------------------------------------------------------------------------
// Inference

/// Type-erased denoiser.
class AnyDenoiser {
 public:
  using Fn = std::function<DenoiserOutput(const TokenGrid&, int, const Condition&)>;
  explicit AnyDenoiser(Fn f) : f_(std::move(f)) {}
  DenoiserOutput operator()(const TokenGrid& x, int t, const Condition& c) const {
    return f_(x, t, c);
  }

 private:
  Fn f_;
};

/// Length scores for a gloss sequence (M x P logits).
using LengthScorer = std::function<Matrix(const Condition&)>;

/// Per-gloss empirical length distribution of a corpus, add-epsilon
/// smoothed; stands in for a learned length head.
inline LengthScorer empirical_length_scorer(const std::vector<AlignedSample>& samples,
                                            const Vocabulary& vocab, int max_length) {
  Matrix counts = Matrix::Zero(vocab.size(), max_length);
  for (const auto& s : samples) {
    for (std::size_t i = 0; i < s.glosses.size(); ++i) {
      const int l = s.lengths.lengths[i];
      if (vocab.contains(s.glosses[i]) && l >= 1 && l <= max_length)
        counts(vocab.id(s.glosses[i]), l - 1) += 1.0;
    }
  }
  return [counts](const Condition& c) {
    Matrix logits(static_cast<Eigen::Index>(c.gloss_ids.size()), counts.cols());
    for (std::size_t i = 0; i < c.gloss_ids.size(); ++i)
      logits.row(static_cast<Eigen::Index>(i)) = (counts.row(c.gloss_ids[i]).array() + 1e-3).log();
    return logits;
  };
}

inline LengthScorer trained_length_scorer(const DenoiserParams& p) {
  return [&p](const Condition& c) { return length_logits(p, c); };
}

struct Candidate {
  LengthTable lengths;
  double length_log_prob = 0.0;
  TokenGrid tokens;
  SampleTrace trace;
};

struct Generation {
  std::vector<Candidate> candidates;
  int best = 0;
};

/// Length candidates -> one reverse run each (seeded by rank) -> the
/// candidate with the highest mean final-step log-probability wins (ties to
/// the better length rank). With \p gold set, only the gold table is run.
inline Generation generate(const std::vector<std::string>& glosses, const Vocabulary& vocab,
                           const LengthScorer& scorer, const AnyDenoiser& denoiser,
                           const NoiseSchedule& sch, int n_candidates, std::uint64_t seed,
                           int max_frames, const LengthTable* gold = nullptr) {
  Condition base = make_condition(vocab, glosses);
  std::vector<LengthCandidate> tables;
  if (gold) {
    require(gold->glosses() == static_cast<int>(glosses.size()), "length",
            "gold length table does not match the gloss count");
    tables.push_back({*gold, 0.0});
  } else {
    tables = predict_lengths(scorer(base), n_candidates);
  }
  Generation g;
  for (std::size_t r = 0; r < tables.size(); ++r) {
    Candidate c;
    c.lengths = tables[r].table;
    c.length_log_prob = tables[r].log_prob;
    const int frames = c.lengths.total();
    require(frames <= max_frames, "length", "predicted length exceeds model.max_frames");
    Condition cond = base;
    align_condition(cond, c.lengths.lengths);
    Rng rng(Rng::derive(seed, r));
    c.tokens = sample_sequence(cond, frames, denoiser, sch, rng, &c.trace);
    g.candidates.push_back(std::move(c));
  }
  for (std::size_t r = 1; r < g.candidates.size(); ++r) {
    if (g.candidates[r].trace.final_log_prob > g.candidates[g.best].trace.final_log_prob)
      g.best = static_cast<int>(r);
  }
  return g;
}

inline std::vector<Token> flatten(const TokenGrid& g) {
  return std::vector<Token>(g.values().begin(), g.values().end());
}

inline nlohmann::json generation_to_json(const Generation& g, const PoseSequence* pose) {
  nlohmann::json cands = nlohmann::json::array();
  for (const auto& c : g.candidates) {
    cands.push_back({{"lengths", c.lengths.lengths},
                     {"length_log_prob", c.length_log_prob},
                     {"final_log_prob", c.trace.final_log_prob},
                     {"mask_counts", c.trace.mask_counts},
                     {"tokens", flatten(c.tokens)}});
  }
  nlohmann::json j = {{"best", g.best}, {"candidates", cands}};
  if (pose) {
    nlohmann::json frames = nlohmann::json::array();
    for (int n = 0; n < pose->frames; ++n) {
      nlohmann::json f = nlohmann::json::array();
      for (int q = 0; q < pose->joints; ++q)
        f.push_back({pose->at(n, q, 0), pose->at(n, q, 1), pose->at(n, q, 2)});
      frames.push_back(f);
    }
    j["pose"] = frames;
  }
  return j;
}

// ---------------------------------------------------------------------------
// Evaluation

struct EvalRow {
  std::string glosses;
  double token_wer = 0.0;
  double dtw_mje = 0.0;
  double mse = 0.0;
  bool length_exact = false;
  std::vector<int> lengths;
  std::vector<Token> tokens;
};

struct EvalReport {
  std::string split;
  std::string denoiser;
  bool gold_lengths = false;
  int sequences = 0;
  double token_wer = 0.0;  // corpus level
  double bleu4 = 0.0;
  double dtw_mje = 0.0;    // mean over sequences
  double mse = 0.0;
  double length_accuracy = 0.0;  // fraction of glosses with exact length
  std::vector<EvalRow> rows;
};

/// Frame-wise MSE after nearest-frame resampling of \p gen to the length
/// of \p ref.
inline double resampled_mse(const PoseSequence& gen, const PoseSequence& ref) {
  PoseSequence r(ref.frames, ref.joints);
  for (int n = 0; n < ref.frames; ++n) {
    const int src = static_cast<int>(static_cast<long long>(n) * gen.frames / ref.frames);
    for (int j = 0; j < ref.joints; ++j)
      for (int k = 0; k < kCoords; ++k) r.at(n, j, k) = gen.at(src, j, k);
  }
  return pose_mse(r, ref);
}

inline EvalReport evaluate_samples(const std::vector<TokenizedSample>& samples,
                                   const Vocabulary& vocab, const LengthScorer& scorer,
                                   const AnyDenoiser& denoiser, const NoiseSchedule& sch,
                                   const CodecParams& codec, int n_candidates, bool gold_lengths,
                                   std::uint64_t seed, int max_frames) {
  EvalReport rep;
  rep.gold_lengths = gold_lengths;
  rep.sequences = static_cast<int>(samples.size());
  std::vector<std::vector<Token>> hyps, refs;
  long glosses = 0, exact = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    const Generation g =
        generate(s.sample.glosses, vocab, scorer, denoiser, sch, n_candidates,
                 Rng::derive(seed, i), max_frames, gold_lengths ? &s.sample.lengths : nullptr);
    const Candidate& best = g.candidates[static_cast<std::size_t>(g.best)];
    const PoseSequence pose = decode_tokens(best.tokens, codec);
    EvalRow row;
    row.glosses = join_glosses(s.sample.glosses);
    row.tokens = flatten(best.tokens);
    row.lengths = best.lengths.lengths;
    row.token_wer = wer(row.tokens, flatten(s.tokens));
    row.dtw_mje = dtw_mje(pose, s.sample.pose);
    row.mse = resampled_mse(pose, s.sample.pose);
    row.length_exact = best.lengths == s.sample.lengths;
    for (std::size_t k = 0; k < row.lengths.size(); ++k) {
      ++glosses;
      if (row.lengths[k] == s.sample.lengths.lengths[k]) ++exact;
    }
    hyps.push_back(row.tokens);
    refs.push_back(flatten(s.tokens));
    rep.dtw_mje += row.dtw_mje / samples.size();
    rep.mse += row.mse / samples.size();
    rep.rows.push_back(std::move(row));
  }
  if (!samples.empty()) {
    rep.token_wer = corpus_wer(hyps, refs);
    rep.bleu4 = corpus_bleu(hyps, refs, 4);
    rep.length_accuracy = static_cast<double>(exact) / std::max<long>(1, glosses);
  }
  return rep;
}

inline nlohmann::json report_to_json(const EvalReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"glosses", row.glosses},
                    {"token_wer", row.token_wer},
                    {"dtw_mje", row.dtw_mje},
                    {"mse", row.mse},
                    {"length_exact", row.length_exact},
                    {"lengths", row.lengths},
                    {"tokens", row.tokens}});
  }
  return {{"split", r.split},
          {"denoiser", r.denoiser},
          {"gold_lengths", r.gold_lengths},
          {"sequences", r.sequences},
          {"token_wer", r.token_wer},
          {"bleu4", r.bleu4},
          {"dtw_mje", r.dtw_mje},
          {"mse", r.mse},
          {"length_accuracy", r.length_accuracy},
          {"rows", rows}};
}

inline std::string report_to_csv(const EvalReport& r) {
  std::string out = "glosses,token_wer,dtw_mje,mse,length_exact\n";
  char buf[128];
  for (const auto& row : r.rows) {
    std::snprintf(buf, sizeof buf, ",%.17g,%.17g,%.17g,%d\n", row.token_wer, row.dtw_mje, row.mse,
                  row.length_exact ? 1 : 0);
    out += "\"" + row.glosses + "\"" + buf;
  }
  std::snprintf(buf, sizeof buf, ",%.17g,%.17g,%.17g,%.17g\n", r.token_wer, r.dtw_mje, r.mse,
                r.length_accuracy);
  out += "\"<corpus>\"";
  out += buf;
  return out;
}

// ---------------------------------------------------------------------------
// Segmentation export

struct SegmentReport {
  int sequences = 0;
  int exact = 0;     // all boundaries equal to gold
  int partition = 0; // lengths sum to N
  std::vector<LengthTable> predicted;
};

inline SegmentReport segment_samples(const std::vector<AlignedSample>& samples,
                                     const CodecParams& codec, const SegmentationConfig& cfg) {
  SegmentReport rep;
  for (const auto& s : samples) {
    const Segmentation seg = segment_sequence(frame_latents(s.pose, codec),
                                              static_cast<int>(s.glosses.size()), cfg);
    ++rep.sequences;
    if (seg.lengths == s.lengths) ++rep.exact;
    if (seg.lengths.total() == s.pose.frames) ++rep.partition;
    rep.predicted.push_back(seg.lengths);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Stage drivers (file based)

struct Workspace {
  Skeleton skeleton;
  Dataset dataset;
  CodecParams codec;
};

inline Workspace load_workspace(const RunConfig& cfg, bool need_codec = true) {
  Workspace w;
  w.skeleton = load_skeleton(cfg.paths.skeleton);
  w.dataset = load_dataset(cfg.paths.dataset);
  if (need_codec) w.codec = codec_from_json(read_json(cfg.paths.codec));
  return w;
}

inline std::string checkpoint_path(const RunConfig& cfg, const std::string& name) {
  return (std::filesystem::path(cfg.paths.checkpoint_dir) / name).string();
}

inline TrainResult run_train(const RunConfig& cfg) {
  const Workspace w = load_workspace(cfg);
  const auto train = select_split(w.dataset.samples, Split::kTrain);
  require(!train.empty(), "split", "dataset has no train split");
  const Vocabulary vocab = gloss_vocabulary(train);
  const NoiseSchedule sch = make_schedule(cfg);
  const auto data = tokenize(train, w.codec);
  TrainResult res = train_denoiser(cfg, data, vocab, sch, [&](const ModelBundle& m) {
    write_text(checkpoint_path(cfg, "step_" + std::to_string(m.step) + ".json"),
               bundle_to_json(m).dump());
  });
  write_text(checkpoint_path(cfg, "model.json"), bundle_to_json(res.model).dump());
  write_text(checkpoint_path(cfg, "train_log.csv"), format_train_log(res.log));
  return res;
}

/// Denoiser and length scorer selected by cfg.infer.denoiser. The bundle
/// and oracle objects are owned by the returned context.
struct InferenceContext {
  Workspace workspace;
  std::optional<NoiseSchedule> schedule;
  Vocabulary vocab;
  ModelBundle model;
  std::vector<AlignedSample> train;
  std::unique_ptr<OracleDenoiser> oracle;
  LengthScorer scorer;
  std::unique_ptr<AnyDenoiser> denoiser;
  int max_frames = 0;
};

inline std::unique_ptr<InferenceContext> make_inference_context(const RunConfig& cfg) {
  auto ctx = std::make_unique<InferenceContext>();
  ctx->workspace = load_workspace(cfg);
  ctx->schedule = make_schedule(cfg);
  ctx->train = select_split(ctx->workspace.dataset.samples, Split::kTrain);
  const NoiseSchedule* sch = &*ctx->schedule;
  const int V = cfg.codec.vocab;
  if (cfg.infer.denoiser == "trained") {
    ctx->model = bundle_from_json(read_json(checkpoint_path(cfg, "model.json")));
    ctx->vocab = ctx->model.glosses;
    require(ctx->model.params.cfg.vocab == V && ctx->model.params.cfg.steps == sch->steps(),
            "checkpoint", "checkpoint does not match codec.vocab / schedule.steps");
    const DenoiserParams* p = &ctx->model.params;
    ctx->scorer = trained_length_scorer(*p);
    ctx->denoiser = std::make_unique<AnyDenoiser>(
        [p](const TokenGrid& x, int t, const Condition& c) {
          return trainable_denoiser_forward(*p, x, t, c);
        });
    ctx->max_frames = p->cfg.max_frames;
  } else {
    ctx->vocab = gloss_vocabulary(ctx->train);
    ctx->scorer = empirical_length_scorer(ctx->train, ctx->vocab, cfg.max_length);
    ctx->max_frames = cfg.max_frames;
    if (cfg.infer.denoiser == "oracle") {
      std::vector<OracleDenoiser::Entry> entries;
      for (const auto& t : tokenize(ctx->train, ctx->workspace.codec))
        entries.push_back({t.tokens, join_glosses(t.sample.glosses), 1.0});
      ctx->oracle = std::make_unique<OracleDenoiser>(*sch, std::move(entries));
      const OracleDenoiser* o = ctx->oracle.get();
      ctx->denoiser = std::make_unique<AnyDenoiser>(
          [o](const TokenGrid& x, int t, const Condition& c) { return (*o)(x, t, c); });
    } else {
      ctx->denoiser = std::make_unique<AnyDenoiser>(
          [V](const TokenGrid& x, int, const Condition&) {
            return DenoiserOutput::uniform(x.positions(), V);
          });
    }
  }
  return ctx;
}

inline nlohmann::json run_infer(const RunConfig& cfg, const std::string& gloss_text,
                                const LengthTable* gold = nullptr) {
  const auto ctx = make_inference_context(cfg);
  const auto glosses = split_glosses(gloss_text);
  const Generation g = generate(glosses, ctx->vocab, ctx->scorer, *ctx->denoiser, *ctx->schedule,
                                cfg.infer.n_candidates, Rng::derive(cfg.seed, 0x1f),
                                ctx->max_frames, gold);
  const PoseSequence pose =
      decode_tokens(g.candidates[static_cast<std::size_t>(g.best)].tokens, ctx->workspace.codec);
  nlohmann::json j = generation_to_json(g, &pose);
  j["glosses"] = glosses;
  return j;
}

struct EvaluateOutput {
  EvalReport report;
  std::string json_path;
  std::string csv_path;
};

inline EvaluateOutput run_evaluate(const RunConfig& cfg) {
  const auto ctx = make_inference_context(cfg);
  const auto split = select_split(ctx->workspace.dataset.samples, split_from_string(cfg.infer.split));
  require(!split.empty(), "split", "dataset has no '" + cfg.infer.split + "' split");
  EvaluateOutput out;
  out.report = evaluate_samples(tokenize(split, ctx->workspace.codec), ctx->vocab, ctx->scorer,
                                *ctx->denoiser, *ctx->schedule, ctx->workspace.codec,
                                cfg.infer.n_candidates, cfg.infer.gold_lengths,
                                Rng::derive(cfg.seed, 0xe7a1), ctx->max_frames);
  out.report.split = cfg.infer.split;
  out.report.denoiser = cfg.infer.denoiser;
  const std::string stem = "eval_" + cfg.infer.split + "_" + cfg.infer.denoiser;
  out.json_path = fresh_report_path(cfg.paths.reports, stem, ".json");
  write_text(out.json_path, report_to_json(out.report).dump(2) + "\n");
  out.csv_path = fresh_report_path(cfg.paths.reports, stem, ".csv");
  write_text(out.csv_path, report_to_csv(out.report));
  return out;
}

inline nlohmann::json corrupt_view(const TokenGrid& x0, int t, const NoiseSchedule& sch, Rng& rng) {
  const Alphabet a{sch.vocab_size()};
  const TokenGrid xt = sample_corrupted(x0, t, sch, rng);
  nlohmann::json rows = nlohmann::json::array();
  for (int n = 0; n < xt.frames(); ++n) {
    nlohmann::json r = nlohmann::json::array();
    for (int c = 0; c < kPatches; ++c) {
      const Token v = xt.at(n, c);
      if (v == a.mask()) r.push_back("M");
      else if (v == a.pad()) r.push_back("P");
      else r.push_back(v);
    }
    rows.push_back(r);
  }
  int kept = 0;
  for (int i = 0; i < xt.positions(); ++i) kept += xt[i] == x0[i];
  return {{"t", t},
          {"alpha_bar", sch.alpha_bar(t)},
          {"gamma_bar", sch.gamma_bar(t)},
          {"masked", xt.count(a.mask())},
          {"unchanged", kept},
          {"positions", xt.positions()},
          {"grid", rows}};
}

}  // namespace posediff
