#pragma once

#include <algorithm>
#include <array>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "vimcan/error.hpp"

namespace vimcan::skeleton {

inline constexpr std::size_t kNumJoints = 17;
inline constexpr std::size_t kNumImus = 6;
inline constexpr std::size_t kRoot = static_cast<std::size_t>(-1);

enum Joint : std::size_t {
  Hips = 0,
  RightUpLeg,
  RightLeg,
  RightFoot,
  LeftUpLeg,
  LeftLeg,
  LeftFoot,
  Spine,
  Spine3,
  Neck,
  Head,
  LeftArm,
  LeftForeArm,
  LeftHand,
  RightArm,
  RightForeArm,
  RightHand,
};

inline constexpr std::array<std::string_view, kNumJoints> kJointNames = {
    "Hips",  "RightUpLeg", "RightLeg", "RightFoot",   "LeftUpLeg", "LeftLeg",  "LeftFoot",
    "Spine", "Spine3",     "Neck",     "Head",        "LeftArm",   "LeftForeArm", "LeftHand",
    "RightArm", "RightForeArm", "RightHand"};

enum Imu : std::size_t { Pelvis = 0, Sternum, LeftLegImu, RightLegImu, LeftArmImu, RightArmImu };

inline constexpr std::array<std::string_view, kNumImus> kImuNames = {"pelvis",   "sternum",  "left_leg",
                                                                    "right_leg", "left_arm", "right_arm"};

/// Joint whose global orientation each IMU measures.
inline constexpr std::array<std::size_t, kNumImus> kImuBone = {Hips, Spine3, LeftLeg, RightLeg, LeftForeArm,
                                                              RightForeArm};

inline std::size_t joint_index(std::string_view name) {
  for (std::size_t i = 0; i < kNumJoints; ++i)
    if (kJointNames[i] == name) return i;
  fail(ErrorCode::FormatError, "unknown joint name '" + std::string(name) + "'");
}

struct Topology {
  std::vector<std::size_t> parent;  // kRoot marks the root

  std::size_t size() const { return parent.size(); }
  std::size_t edge_count() const {
    return static_cast<std::size_t>(std::count_if(parent.begin(), parent.end(), [](auto p) { return p != kRoot; }));
  }
};

inline Topology default_topology() {
  return {{kRoot, 0, 1, 2, 0, 4, 5, 0, 7, 8, 9, 8, 11, 12, 8, 14, 15}};
}

/// Exactly one root, parents in range, acyclic.
inline void validate_topology(const Topology& t) {
  const std::size_t n = t.size();
  require(n > 0, ErrorCode::InvalidArgument, "empty topology");
  std::size_t roots = 0;
  for (std::size_t j = 0; j < n; ++j) {
    if (t.parent[j] == kRoot) {
      ++roots;
    } else {
      require(t.parent[j] < n, ErrorCode::InvalidArgument, "parent index out of range");
      require(t.parent[j] != j, ErrorCode::CyclicTopology, "joint is its own parent");
    }
  }
  require(roots == 1, ErrorCode::CyclicTopology, "topology needs exactly one root, has " + std::to_string(roots));
  for (std::size_t j = 0; j < n; ++j) {
    std::size_t cur = j, steps = 0;
    while (t.parent[cur] != kRoot) {
      cur = t.parent[cur];
      require(++steps <= n, ErrorCode::CyclicTopology, "cycle through joint " + std::to_string(j));
    }
  }
}

/// Depth-first order from the root, children in ascending index; every parent
/// precedes its descendants.
inline std::vector<std::size_t> skeleton_scan_order(const Topology& t) {
  validate_topology(t);
  const std::size_t n = t.size();
  std::vector<std::vector<std::size_t>> children(n);
  std::size_t root = 0;
  for (std::size_t j = 0; j < n; ++j) {
    if (t.parent[j] == kRoot)
      root = j;
    else
      children[t.parent[j]].push_back(j);
  }
  std::vector<std::size_t> order;
  order.reserve(n);
  std::vector<std::size_t> stack{root};
  while (!stack.empty()) {
    const std::size_t j = stack.back();
    stack.pop_back();
    order.push_back(j);
    for (auto it = children[j].rbegin(); it != children[j].rend(); ++it) stack.push_back(*it);
  }
  return order;
}

struct Group {
  std::string name;
  std::vector<std::size_t> joints;
  std::vector<std::size_t> imus;
};

struct GroupPartition {
  int G = 5;  // 0 means a single all-inclusive group
  std::vector<Group> groups;

  std::size_t group_count() const { return groups.size(); }
};

inline GroupPartition group_partition(int G) {
  switch (G) {
    case 0: {
      Group all{"All", {}, {}};
      for (std::size_t j = 0; j < kNumJoints; ++j) all.joints.push_back(j);
      for (std::size_t i = 0; i < kNumImus; ++i) all.imus.push_back(i);
      return {0, {all}};
    }
    case 3:
      return {3,
              {{"Torso", {0, 7, 8, 9, 10}, {0, 1}},
               {"Upper", {11, 12, 13, 14, 15, 16}, {4, 5}},
               {"Lower", {1, 2, 3, 4, 5, 6}, {2, 3}}}};
    case 5:
      return {5,
              {{"Torso", {0, 7, 8, 9, 10}, {0, 1}},
               {"LeftArm", {0, 7, 8, 11, 12, 13}, {0, 1, 4}},
               {"RightArm", {0, 7, 8, 14, 15, 16}, {0, 1, 5}},
               {"LeftLeg", {0, 4, 5, 6}, {0, 2}},
               {"RightLeg", {0, 1, 2, 3}, {0, 3}}}};
    default:
      fail(ErrorCode::UnsupportedG, "G must be 0, 3 or 5, got " + std::to_string(G));
  }
}

enum class ViolationKind { IndexOutOfRange, EmptyGroup, CoverageGap };

struct Violation {
  ViolationKind kind;
  std::size_t group;  // offending group, or the missing joint for CoverageGap
  std::string detail;
};

/// Collects every violation instead of stopping at the first.
inline std::vector<Violation> validate_partition(const GroupPartition& p) {
  std::vector<Violation> out;
  std::vector<bool> covered(kNumJoints, false);
  for (std::size_t g = 0; g < p.groups.size(); ++g) {
    const auto& grp = p.groups[g];
    if (grp.joints.empty()) out.push_back({ViolationKind::EmptyGroup, g, grp.name + " has no joints"});
    if (grp.imus.empty()) out.push_back({ViolationKind::EmptyGroup, g, grp.name + " has no IMUs"});
    for (std::size_t j : grp.joints) {
      if (j >= kNumJoints)
        out.push_back({ViolationKind::IndexOutOfRange, g, "joint index " + std::to_string(j)});
      else
        covered[j] = true;
    }
    for (std::size_t i : grp.imus) {
      if (i >= kNumImus) out.push_back({ViolationKind::IndexOutOfRange, g, "imu index " + std::to_string(i)});
    }
  }
  for (std::size_t j = 0; j < kNumJoints; ++j) {
    if (!covered[j]) out.push_back({ViolationKind::CoverageGap, j, "joint " + std::string(kJointNames[j])});
  }
  return out;
}

// -- config file --------------------------------------------------------------
// {"parents": {"RightUpLeg": "Hips", ...}, "groups": [{"name": .., "joints": [names], "imus": [ints]}]}

inline nlohmann::json to_json(const Topology& t, const GroupPartition& p) {
  nlohmann::json j;
  j["joints"] = nlohmann::json::array();
  for (auto n : kJointNames) j["joints"].push_back(std::string(n));
  nlohmann::json parents = nlohmann::json::object();
  for (std::size_t k = 0; k < t.size(); ++k) {
    parents[std::string(kJointNames[k])] =
        t.parent[k] == kRoot ? nlohmann::json(nullptr) : nlohmann::json(std::string(kJointNames[t.parent[k]]));
  }
  j["parents"] = parents;
  j["G"] = p.G;
  j["groups"] = nlohmann::json::array();
  for (const auto& g : p.groups) {
    nlohmann::json jg;
    jg["name"] = g.name;
    jg["joints"] = nlohmann::json::array();
    for (auto k : g.joints) jg["joints"].push_back(std::string(kJointNames.at(k)));
    jg["imus"] = g.imus;
    j["groups"].push_back(jg);
  }
  return j;
}

inline Topology topology_from_json(const nlohmann::json& j) {
  if (!j.contains("parents")) return default_topology();
  Topology t{std::vector<std::size_t>(kNumJoints, kRoot)};
  try {
    for (const auto& [name, parent] : j.at("parents").items()) {
      t.parent[joint_index(name)] = parent.is_null() ? kRoot : joint_index(parent.get<std::string>());
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::FormatError, std::string("skeleton parents: ") + e.what());
  }
  validate_topology(t);
  return t;
}

inline GroupPartition partition_from_json(const nlohmann::json& j) {
  GroupPartition p;
  try {
    p.G = j.value("G", static_cast<int>(j.at("groups").size()));
    for (const auto& jg : j.at("groups")) {
      Group g;
      g.name = jg.value("name", std::string("group") + std::to_string(p.groups.size()));
      for (const auto& jn : jg.at("joints")) {
        g.joints.push_back(jn.is_string() ? joint_index(jn.get<std::string>()) : jn.get<std::size_t>());
      }
      g.imus = jg.at("imus").get<std::vector<std::size_t>>();
      p.groups.push_back(std::move(g));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::FormatError, std::string("skeleton groups: ") + e.what());
  }
  return p;
}

}  // namespace vimcan::skeleton
