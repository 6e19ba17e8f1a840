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
// Command-line driver: data generation, codec fitting, training, inference,
// segmentation, evaluation and a view of the forward corruption.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "posediff/posediff.hpp"

namespace {

using namespace posediff;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;

  RunConfig load() const {
    const std::uint64_t s = seed.value_or(0);
    return load_run_config(config, overrides, seed ? &s : nullptr);
  }
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "JSON run config");
  app->add_option("--seed", c.seed, "override the run seed");
  app->add_option("--override", c.overrides, "dotted key=value, repeatable");
}

void print(const nlohmann::json& j) { std::cout << j.dump(2) << '\n'; }

std::vector<int> parse_lengths(const std::string& text) {
  std::vector<int> out;
  std::string cur;
  for (char ch : text + ",") {
    if (ch == ',' || ch == ' ') {
      if (!cur.empty()) {
        try {
          out.push_back(std::stoi(cur));
        } catch (const std::exception&) {
          throw Error("length", "bad length '" + cur + "'");
        }
      }
      cur.clear();
    } else {
      cur += ch;
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"posediff: discrete diffusion for gloss-to-pose generation"};
  app.require_subcommand(1);
  Common common;

  auto* gen = app.add_subcommand("gen-data", "generate the synthetic corpus");
  add_common(gen, common);

  auto* fit = app.add_subcommand("fit-codebook", "fit the pose codec on the train split");
  add_common(fit, common);

  auto* train = app.add_subcommand("train", "train the denoiser and length head");
  add_common(train, common);

  auto* infer = app.add_subcommand("infer", "generate poses for a gloss sequence");
  add_common(infer, common);
  std::string glosses, gold, out_path;
  infer->add_option("--glosses", glosses, "space-separated gloss sequence")->required();
  infer->add_option("--gold-lengths", gold, "comma-separated per-gloss lengths");
  infer->add_option("--out", out_path, "write the result JSON here");

  auto* seg = app.add_subcommand("segment", "sequential-KNN segmentation of a split");
  add_common(seg, common);
  std::string seg_split = "train";
  seg->add_option("--split", seg_split, "train, dev or test");

  auto* eval = app.add_subcommand("evaluate", "token-WER, BLEU, DTW-MJE, MSE and length accuracy");
  add_common(eval, common);

  auto* corrupt = app.add_subcommand("corrupt", "show q(x_t | x_0) for one sample");
  add_common(corrupt, common);
  int sample_index = 0, step = 50;
  corrupt->add_option("--sample", sample_index, "sample index in the dataset");
  corrupt->add_option("--t", step, "timestep in [0, T]");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    const RunConfig cfg = common.load();
    if (*gen) {
      const Skeleton sk = load_skeleton(cfg.paths.skeleton);
      const Dataset d = gen_data(cfg, sk);
      print({{"dataset", cfg.paths.dataset},
             {"samples", d.samples.size()},
             {"spec_hash", d.header.spec_hash},
             {"rng", d.header.rng}});
    } else if (*fit) {
      const Workspace w = load_workspace(cfg, false);
      CodecFitReport report;
      const CodecParams codec = fit_codec_stage(cfg, w.dataset, w.skeleton, &report);
      write_text(cfg.paths.codec, codec_to_json(codec).dump());
      double mse = 0.0;
      const auto trainset = select_split(w.dataset.samples, Split::kTrain);
      for (const auto& s : trainset) mse += codec_roundtrip(s.pose, codec).mse / trainset.size();
      print({{"codec", cfg.paths.codec},
             {"kmeans_error", report.kmeans_error},
             {"train_mse", mse}});
    } else if (*train) {
      const TrainResult res = run_train(cfg);
      print({{"checkpoint", checkpoint_path(cfg, "model.json")},
             {"log", checkpoint_path(cfg, "train_log.csv")},
             {"steps", res.model.step},
             {"first_total", res.log.empty() ? 0.0 : res.log.front().loss.total},
             {"last_total", res.log.empty() ? 0.0 : res.log.back().loss.total}});
    } else if (*infer) {
      std::optional<LengthTable> table;
      if (!gold.empty()) table = LengthTable{parse_lengths(gold)};
      const nlohmann::json result = run_infer(cfg, glosses, table ? &*table : nullptr);
      if (!out_path.empty()) write_text(out_path, result.dump() + "\n");
      nlohmann::json summary = result;
      summary.erase("pose");
      print(summary);
    } else if (*seg) {
      const Workspace w = load_workspace(cfg);
      const auto samples = select_split(w.dataset.samples, split_from_string(seg_split));
      const SegmentReport rep = segment_samples(samples, w.codec, cfg.segment);
      nlohmann::json rows = nlohmann::json::array();
      for (std::size_t i = 0; i < samples.size(); ++i) {
        rows.push_back({{"glosses", samples[i].glosses},
                        {"gold", samples[i].lengths.lengths},
                        {"predicted", rep.predicted[i].lengths}});
      }
      const nlohmann::json out = {{"split", seg_split},
                                  {"sequences", rep.sequences},
                                  {"exact", rep.exact},
                                  {"partition", rep.partition},
                                  {"rows", rows}};
      const std::string path = fresh_report_path(cfg.paths.reports, "segment_" + seg_split, ".json");
      write_text(path, out.dump(2) + "\n");
      print({{"report", path},
             {"sequences", rep.sequences},
             {"exact", rep.exact},
             {"partition", rep.partition}});
    } else if (*eval) {
      const EvaluateOutput out = run_evaluate(cfg);
      nlohmann::json summary = report_to_json(out.report);
      summary.erase("rows");
      summary["json"] = out.json_path;
      summary["csv"] = out.csv_path;
      print(summary);
    } else if (*corrupt) {
      const Workspace w = load_workspace(cfg);
      require(sample_index >= 0 && sample_index < static_cast<int>(w.dataset.samples.size()),
              "dataset", "sample index out of range");
      const NoiseSchedule sch = make_schedule(cfg);
      const TokenGrid x0 =
          codec_roundtrip(w.dataset.samples[static_cast<std::size_t>(sample_index)].pose, w.codec)
              .tokens;
      Rng rng(Rng::derive(cfg.seed, 0xc0));
      print(corrupt_view(x0, step, sch, rng));
    }
  } catch (const Error& e) {
    std::cerr << nlohmann::json({{"error", e.what()}, {"kind", e.kind()}}).dump() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << nlohmann::json({{"error", e.what()}, {"kind", "internal"}}).dump() << '\n';
    return 2;
  }
  return 0;
}
