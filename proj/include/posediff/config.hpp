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

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "posediff/codec.hpp"
#include "posediff/error.hpp"
#include "posediff/schedule.hpp"
#include "posediff/segment.hpp"
#include "posediff/synthetic.hpp"

#ifndef POSEDIFF_DATA_DIR
#define POSEDIFF_DATA_DIR "data"
#endif

namespace posediff {

struct RunPaths {
  std::string dataset = "runs/corpus.jsonl";
  std::string skeleton = std::string(POSEDIFF_DATA_DIR) + "/skeleton_chains.json";
  std::string codec = "runs/codec.json";
  std::string checkpoint_dir = "runs/checkpoints";
  std::string reports = "runs/reports";
  std::string output = "runs/output";
};

struct TrainConfig {
  int steps = 200;
  int batch_size = 4;
  double learning_rate = 3e-4;
  double lambda = 1.0;
  double delta = 0.01;
  int checkpoint_every = 100;
  std::string optimizer = "adam";  // or "sgd"
};

struct InferConfig {
  int n_candidates = 3;
  bool gold_lengths = false;
  std::string denoiser = "trained";  // "trained", "oracle" or "uniform"
  std::string split = "test";
};

struct RunConfig {
  std::uint64_t seed = 7;
  RunPaths paths;
  SyntheticCorpusSpec data;
  int diffusion_steps = 100;  // T
  ScheduleSpec schedule;
  CodecConfig codec;
  int d_model = 512;
  int max_frames = 256;
  int max_length = 64;  // P
  TrainConfig train;
  InferConfig infer;
  SegmentationConfig segment;

  void validate() const {
    data.validate();
    segment.validate();
    require(diffusion_steps >= 1, "config", "diffusion steps must be >= 1");
    require(codec.vocab >= 1 && codec.hidden >= 1, "config", "codec V and h must be >= 1");
    require(codec.beta >= 0.0, "config", "commitment weight must be >= 0");
    require(d_model >= 1 && max_frames >= 1 && max_length >= 1, "config",
            "model sizes must be >= 1");
    require(train.steps >= 0 && train.batch_size >= 1 && train.checkpoint_every >= 0, "config",
            "train steps/batch/checkpoint cadence out of range");
    require(train.learning_rate > 0.0, "config", "learning rate must be > 0");
    require(train.lambda >= 0.0 && train.delta >= 0.0, "config", "loss weights must be >= 0");
    require(train.optimizer == "adam" || train.optimizer == "sgd", "config",
            "optimizer must be 'adam' or 'sgd'");
    require(infer.n_candidates >= 1, "config", "n_candidates must be >= 1");
    require(infer.denoiser == "trained" || infer.denoiser == "oracle" ||
                infer.denoiser == "uniform",
            "config", "denoiser must be 'trained', 'oracle' or 'uniform'");
  }
};

inline nlohmann::json to_json(const RunConfig& c) {
  return {
      {"seed", c.seed},
      {"paths",
       {{"dataset", c.paths.dataset},
        {"skeleton", c.paths.skeleton},
        {"codec", c.paths.codec},
        {"checkpoint_dir", c.paths.checkpoint_dir},
        {"reports", c.paths.reports},
        {"output", c.paths.output}}},
      {"data", to_json(c.data)},
      {"schedule",
       {{"kind", std::string(to_string(c.schedule.kind))},
        {"steps", c.diffusion_steps},
        {"alpha_bar_end", c.schedule.alpha_bar_end},
        {"gamma_bar_end", c.schedule.gamma_bar_end}}},
      {"codec",
       {{"vocab", c.codec.vocab},
        {"hidden", c.codec.hidden},
        {"beta", c.codec.beta},
        {"layout", c.codec.layout},
        {"kmeans_iterations", c.codec.kmeans.max_iterations},
        {"ema_decay", c.codec.kmeans.ema_decay},
        {"refine_steps", c.codec.refine_steps},
        {"learning_rate", c.codec.learning_rate}}},
      {"model", {{"d_model", c.d_model}, {"max_frames", c.max_frames}, {"max_length", c.max_length}}},
      {"train",
       {{"steps", c.train.steps},
        {"batch_size", c.train.batch_size},
        {"learning_rate", c.train.learning_rate},
        {"lambda", c.train.lambda},
        {"delta", c.train.delta},
        {"checkpoint_every", c.train.checkpoint_every},
        {"optimizer", c.train.optimizer}}},
      {"infer",
       {{"n_candidates", c.infer.n_candidates},
        {"gold_lengths", c.infer.gold_lengths},
        {"denoiser", c.infer.denoiser},
        {"split", c.infer.split}}},
      {"segment", {{"k", c.segment.k}, {"l", c.segment.l}}},
  };
}

/// Strict: every key must be known, which catches typos in config files.
inline RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig c;
  nlohmann::json merged = to_json(c);
  std::vector<std::string> unknown;
  auto check = [&](const nlohmann::json& have, const nlohmann::json& ref, const std::string& prefix,
                   auto&& self) -> void {
    for (auto it = have.begin(); it != have.end(); ++it) {
      const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
      if (!ref.contains(it.key())) {
        unknown.push_back(key);
      } else if (ref.at(it.key()).is_object()) {
        require(it.value().is_object(), "config", "'" + key + "' must be an object");
        self(it.value(), ref.at(it.key()), key, self);
      }
    }
  };
  require(j.is_object(), "config", "config must be a JSON object");
  check(j, merged, "", check);
  require(unknown.empty(), "config", "unknown config key '" + (unknown.empty() ? "" : unknown[0]) + "'");
  merged.merge_patch(j);
  try {
    c.seed = merged.at("seed").get<std::uint64_t>();
    const auto& p = merged.at("paths");
    c.paths = {p.at("dataset"), p.at("skeleton"), p.at("codec"),
               p.at("checkpoint_dir"), p.at("reports"), p.at("output")};
    c.data = synthetic_spec_from_json(merged.at("data"));
    const auto& s = merged.at("schedule");
    c.diffusion_steps = s.at("steps");
    c.schedule.kind = schedule_kind_from_string(s.at("kind").get<std::string>());
    c.schedule.alpha_bar_end = s.at("alpha_bar_end");
    c.schedule.gamma_bar_end = s.at("gamma_bar_end");
    const auto& k = merged.at("codec");
    c.codec.vocab = k.at("vocab");
    c.codec.hidden = k.at("hidden");
    c.codec.beta = k.at("beta");
    c.codec.layout = k.at("layout");
    c.codec.kmeans.max_iterations = k.at("kmeans_iterations");
    c.codec.kmeans.ema_decay = k.at("ema_decay");
    c.codec.refine_steps = k.at("refine_steps");
    c.codec.learning_rate = k.at("learning_rate");
    const auto& m = merged.at("model");
    c.d_model = m.at("d_model");
    c.max_frames = m.at("max_frames");
    c.max_length = m.at("max_length");
    const auto& t = merged.at("train");
    c.train.steps = t.at("steps");
    c.train.batch_size = t.at("batch_size");
    c.train.learning_rate = t.at("learning_rate");
    c.train.lambda = t.at("lambda");
    c.train.delta = t.at("delta");
    c.train.checkpoint_every = t.at("checkpoint_every");
    c.train.optimizer = t.at("optimizer");
    const auto& i = merged.at("infer");
    c.infer.n_candidates = i.at("n_candidates");
    c.infer.gold_lengths = i.at("gold_lengths");
    c.infer.denoiser = i.at("denoiser");
    c.infer.split = i.at("split");
    const auto& g = merged.at("segment");
    c.segment.k = g.at("k");
    c.segment.l = g.at("l");
  } catch (const nlohmann::json::exception& e) {
    throw Error("config", std::string("bad config value: ") + e.what());
  }
  c.validate();
  return c;
}

/// Applies "a.b.c=value" to \p j. The value is parsed as JSON when it
/// parses, otherwise taken as a string. The key must already exist.
inline void apply_override(nlohmann::json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  require(eq != std::string::npos && eq > 0, "config",
          "override '" + assignment + "' is not of the form key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  nlohmann::json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    require(node->is_object() && node->contains(part), "config", "unknown config key '" + key + "'");
    node = &(*node)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  nlohmann::json value = nlohmann::json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  *node = value;
}

/// Defaults, then the file (if any), then overrides, then --seed.
inline RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides,
                                 const std::uint64_t* seed = nullptr) {
  nlohmann::json j = to_json(RunConfig{});
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw Error("io", "cannot open config '" + path + "'");
    nlohmann::json file;
    try {
      in >> file;
    } catch (const nlohmann::json::exception& e) {
      throw Error("config", "config '" + path + "': " + e.what());
    }
    run_config_from_json(file);  // key check
    j.merge_patch(file);
  }
  for (const auto& o : overrides) apply_override(j, o);
  if (seed) j["seed"] = *seed;
  return run_config_from_json(j);
}

inline NoiseSchedule make_schedule(const RunConfig& c) {
  return build_schedule(c.diffusion_steps, c.schedule, c.codec.vocab);
}

}  // namespace posediff
