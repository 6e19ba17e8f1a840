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
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "posediff/error.hpp"
#include "posediff/rng.hpp"
#include "posediff/synthetic.hpp"

namespace posediff {

inline constexpr const char* kDatasetFormat = "posediff-dataset";
inline constexpr int kDatasetVersion = 1;

struct DatasetHeader {
  std::string spec_hash;
  std::string rng = std::string(Rng::kAlgorithm);
  int joints = 0;
  nlohmann::json spec = nlohmann::json::object();
};

struct Dataset {
  DatasetHeader header;
  std::vector<AlignedSample> samples;
};

namespace detail {

inline void append_float(std::string& out, float v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(v));
  out += buf;
}

inline std::string sample_line(const AlignedSample& s) {
  std::string out = "{\"glosses\":";
  out += nlohmann::json(s.glosses).dump();
  out += ",\"lengths\":";
  out += nlohmann::json(s.lengths.lengths).dump();
  out += ",\"split\":\"" + to_string(s.split) + "\",\"frames\":[";
  for (int n = 0; n < s.pose.frames; ++n) {
    if (n) out += ',';
    out += '[';
    for (int j = 0; j < s.pose.joints; ++j) {
      if (j) out += ',';
      out += '[';
      for (int k = 0; k < kCoords; ++k) {
        if (k) out += ',';
        append_float(out, s.pose.at(n, j, k));
      }
      out += ']';
    }
    out += ']';
  }
  out += "]}";
  return out;
}

inline AlignedSample parse_sample(const std::string& line, int lineno, int joints) {
  const std::string where = "line " + std::to_string(lineno) + ": ";
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw Error("dataset", where + "malformed record (" + e.what() + ")");
  }
  try {
    AlignedSample s;
    s.glosses = j.at("glosses").get<std::vector<std::string>>();
    s.lengths.lengths = j.at("lengths").get<std::vector<int>>();
    s.split = split_from_string(j.value("split", "train"));
    const auto& frames = j.at("frames");
    require(frames.is_array(), "dataset", "frames must be an array");
    const int n = static_cast<int>(frames.size());
    const int J = n > 0 ? static_cast<int>(frames[0].size()) : joints;
    s.pose = PoseSequence(n, J);
    for (int f = 0; f < n; ++f) {
      require(static_cast<int>(frames[f].size()) == J, "dataset",
              "frame " + std::to_string(f) + " has a different joint count");
      for (int q = 0; q < J; ++q) {
        const auto& xyz = frames[f][q];
        require(xyz.is_array() && xyz.size() == kCoords, "dataset",
                "joints need exactly 3 coordinates");
        for (int k = 0; k < kCoords; ++k) {
          const double v = xyz[k].get<double>();
          require(std::isfinite(v), "dataset", "non-finite coordinate");
          s.pose.at(f, q, k) = static_cast<float>(v);
        }
      }
    }
    require(s.glosses.size() == s.lengths.lengths.size(), "dataset",
            "one length per gloss required");
    require(s.lengths.total() == n, "dataset",
            "lengths sum to " + std::to_string(s.lengths.total()) + " but the record has " +
                std::to_string(n) + " frames");
    require(joints <= 0 || J == joints, "dataset",
            "record has " + std::to_string(J) + " joints, header says " + std::to_string(joints));
    return s;
  } catch (const Error& e) {
    throw Error("dataset", where + e.what());
  } catch (const nlohmann::json::exception& e) {
    throw Error("dataset", where + "malformed record (" + e.what() + ")");
  }
}

}  // namespace detail

/// JSON lines: a header record, then one sample per line. Coordinates are
/// written with 9 significant digits, which round-trips every float.
inline void save_dataset(const Dataset& d, const std::string& path) {
  const std::filesystem::path fp(path);
  if (fp.has_parent_path()) std::filesystem::create_directories(fp.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("io", "cannot write dataset '" + path + "'");
  const nlohmann::json header = {{"format", kDatasetFormat}, {"version", kDatasetVersion},
                                 {"rng", d.header.rng},      {"spec_hash", d.header.spec_hash},
                                 {"joints", d.header.joints}, {"spec", d.header.spec}};
  out << header.dump() << '\n';
  for (const auto& s : d.samples) out << detail::sample_line(s) << '\n';
  if (!out) throw Error("io", "failed writing dataset '" + path + "'");
}

/// A zero-byte file is an empty dataset. Errors name the first bad line.
inline Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io", "cannot open dataset '" + path + "'");
  Dataset d;
  std::string line;
  int lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (!have_header) {
      nlohmann::json h;
      try {
        h = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception& e) {
        throw Error("dataset", "line 1: malformed header (" + std::string(e.what()) + ")");
      }
      if (h.value("format", "") != kDatasetFormat || h.value("version", 0) != kDatasetVersion) {
        throw Error("dataset", "line " + std::to_string(lineno) + ": not a posediff dataset header");
      }
      d.header.rng = h.value("rng", "");
      d.header.spec_hash = h.value("spec_hash", "");
      d.header.joints = h.value("joints", 0);
      d.header.spec = h.value("spec", nlohmann::json::object());
      have_header = true;
      continue;
    }
    d.samples.push_back(detail::parse_sample(line, lineno, d.header.joints));
  }
  return d;
}

inline Dataset make_dataset(const SyntheticCorpusSpec& spec, const Skeleton& sk) {
  Dataset d;
  d.header.spec_hash = spec_hash(spec);
  d.header.joints = sk.joints();
  d.header.spec = to_json(spec);
  d.samples = generate_corpus(spec, sk);
  return d;
}

}  // namespace posediff
