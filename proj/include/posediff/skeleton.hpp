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
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "posediff/error.hpp"

namespace posediff {

inline constexpr int kCoords = 3;  // x, y, z

/// N frames x J joints x 3 coordinates, stored as float.
struct PoseSequence {
  int frames = 0;
  int joints = 0;
  std::vector<float> coords;

  PoseSequence() = default;
  PoseSequence(int frames_, int joints_)
      : frames(frames_), joints(joints_),
        coords(static_cast<std::size_t>(frames_) * joints_ * kCoords, 0.0f) {}

  float& at(int n, int j, int k) {
    return coords[(static_cast<std::size_t>(n) * joints + j) * kCoords + k];
  }
  float at(int n, int j, int k) const {
    return coords[(static_cast<std::size_t>(n) * joints + j) * kCoords + k];
  }

  bool operator==(const PoseSequence&) const = default;
};

/// Topological order of a parent array (-1 marks a root). Throws on cycles
/// or out-of-range parents.
inline std::vector<int> topological_order(const std::vector<int>& parent) {
  const int n = static_cast<int>(parent.size());
  std::vector<std::vector<int>> children(n);
  std::vector<int> roots;
  for (int j = 0; j < n; ++j) {
    if (parent[j] < 0) {
      roots.push_back(j);
    } else {
      require(parent[j] < n && parent[j] != j, "skeleton",
              "joint " + std::to_string(j) + " has an invalid parent");
      children[parent[j]].push_back(j);
    }
  }
  std::vector<int> order;
  std::vector<int> stack(roots.rbegin(), roots.rend());
  while (!stack.empty()) {
    const int j = stack.back();
    stack.pop_back();
    order.push_back(j);
    for (auto it = children[j].rbegin(); it != children[j].rend(); ++it) stack.push_back(*it);
  }
  if (static_cast<int>(order.size()) != n) {
    throw Error("skeleton", "joint hierarchy contains a cycle");
  }
  return order;
}

/// One patch of the skeleton with its parent hierarchy.
struct SkeletonChain {
  std::string name;
  std::vector<std::string> joint_names;
  std::vector<int> parent;  // local indices, -1 = root
  std::vector<std::array<double, 3>> offsets;  // rest offset from parent
  int anchor_patch = -1;  // patch/joint the root hangs from, if any
  int anchor_joint = -1;
  std::vector<int> order;

  int size() const { return static_cast<int>(parent.size()); }
};

struct Skeleton {
  std::vector<SkeletonChain> patches;

  int joints() const {
    int n = 0;
    for (const auto& p : patches) n += p.size();
    return n;
  }
  int patch_offset(int patch) const {
    int n = 0;
    for (int p = 0; p < patch; ++p) n += patches[p].size();
    return n;
  }

  /// Global rest coordinates obtained by chaining offsets from the roots.
  std::vector<std::array<double, 3>> rest_pose() const {
    std::vector<std::array<double, 3>> out(joints(), {0, 0, 0});
    for (int p = 0; p < static_cast<int>(patches.size()); ++p) {
      const auto& chain = patches[p];
      const int base = patch_offset(p);
      for (int j : chain.order) {
        std::array<double, 3> origin{0, 0, 0};
        if (chain.parent[j] >= 0) {
          origin = out[base + chain.parent[j]];
        } else if (chain.anchor_patch >= 0) {
          origin = out[patch_offset(chain.anchor_patch) + chain.anchor_joint];
        }
        for (int k = 0; k < 3; ++k) out[base + j][k] = origin[k] + chain.offsets[j][k];
      }
    }
    return out;
  }
};

inline Skeleton skeleton_from_json(const nlohmann::json& doc) {
  require(doc.value("format", "") == "posediff-skeleton", "skeleton",
          "not a skeleton chain file");
  require(doc.value("version", 0) == 1, "skeleton", "unsupported skeleton file version");
  Skeleton sk;
  for (const auto& pj : doc.at("patches")) {
    SkeletonChain chain;
    chain.name = pj.at("name").get<std::string>();
    for (const auto& jj : pj.at("joints")) chain.joint_names.push_back(jj.at("name"));
    for (const auto& jj : pj.at("joints")) {
      int parent = -1;
      if (!jj.at("parent").is_null()) {
        const auto pname = jj.at("parent").get<std::string>();
        for (int k = 0; k < static_cast<int>(chain.joint_names.size()); ++k) {
          if (chain.joint_names[k] == pname) parent = k;
        }
        require(parent >= 0, "skeleton",
                "unknown parent '" + pname + "' in patch '" + chain.name + "'");
      }
      chain.parent.push_back(parent);
      const auto off = jj.value("offset", std::vector<double>{0, 0, 0});
      require(off.size() == 3, "skeleton", "joint offsets need 3 coordinates");
      chain.offsets.push_back({off[0], off[1], off[2]});
    }
    if (pj.contains("anchor")) {
      const auto& a = pj.at("anchor");
      const auto pname = a.at("patch").get<std::string>();
      for (int p = 0; p < static_cast<int>(sk.patches.size()); ++p) {
        if (sk.patches[p].name != pname) continue;
        chain.anchor_patch = p;
        const auto& names = sk.patches[p].joint_names;
        for (int k = 0; k < static_cast<int>(names.size()); ++k) {
          if (names[k] == a.at("joint").get<std::string>()) chain.anchor_joint = k;
        }
      }
      require(chain.anchor_patch >= 0 && chain.anchor_joint >= 0, "skeleton",
              "anchor of patch '" + chain.name + "' must name an earlier patch joint");
    }
    chain.order = topological_order(chain.parent);
    sk.patches.push_back(std::move(chain));
  }
  require(!sk.patches.empty(), "skeleton", "skeleton has no patches");
  return sk;
}

inline Skeleton load_skeleton(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("io", "cannot open skeleton file '" + path + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw Error("skeleton", "skeleton file '" + path + "': " + e.what());
  }
  return skeleton_from_json(doc);
}

/// Joint sets and local hierarchies used by the codec. Each patch is
/// encoded to one feature vector per frame.
struct PatchLayout {
  std::vector<std::vector<int>> joints;   // global joint indices
  std::vector<std::vector<int>> parents;  // local parent per joint
  std::vector<std::vector<int>> orders;

  int patches() const { return static_cast<int>(joints.size()); }
  int total_joints() const {
    int n = 0;
    for (const auto& j : joints) n += static_cast<int>(j.size());
    return n;
  }

  /// One patch per skeleton chain (pose / right hand / left hand).
  static PatchLayout separate(const Skeleton& sk) {
    PatchLayout l;
    for (int p = 0; p < static_cast<int>(sk.patches.size()); ++p) {
      std::vector<int> js;
      for (int j = 0; j < sk.patches[p].size(); ++j) js.push_back(sk.patch_offset(p) + j);
      l.joints.push_back(js);
      l.parents.push_back(sk.patches[p].parent);
      l.orders.push_back(sk.patches[p].order);
    }
    return l;
  }

  /// All joints in a single patch; hand roots hang from their anchors.
  static PatchLayout joint(const Skeleton& sk) {
    PatchLayout l;
    std::vector<int> js, parents;
    for (int p = 0; p < static_cast<int>(sk.patches.size()); ++p) {
      const auto& chain = sk.patches[p];
      const int base = sk.patch_offset(p);
      for (int j = 0; j < chain.size(); ++j) {
        js.push_back(base + j);
        if (chain.parent[j] >= 0) {
          parents.push_back(base + chain.parent[j]);
        } else if (chain.anchor_patch >= 0) {
          parents.push_back(sk.patch_offset(chain.anchor_patch) + chain.anchor_joint);
        } else {
          parents.push_back(-1);
        }
      }
    }
    l.joints.push_back(js);
    l.orders.push_back(topological_order(parents));
    l.parents.push_back(std::move(parents));
    return l;
  }
};

}  // namespace posediff
