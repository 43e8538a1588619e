#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vimcan/preprocess/sequences.hpp"

namespace vimcan::preprocess {

// JSON-lines: one sequence per line,
//   {"id": str, "T": int, "keypoints": [T*17*2], "imu": [T*6*4], "gt3d": [T*17*3]}
// Arrays are flat and row-major. Doubles are written in shortest round-trip
// form, so reading back is exact.

inline nlohmann::json to_json(const Sequence& s) {
  return {{"id", s.id}, {"T", s.frames()}, {"keypoints", s.keypoints.values}, {"imu", s.imu.values},
          {"gt3d", s.gt3d.values}};
}

inline Sequence sequence_from_json(const nlohmann::json& j) {
  const std::size_t T = j.at("T").get<std::size_t>();
  Sequence s;
  s.id = j.at("id").get<std::string>();
  s.keypoints = KeypointSequence2D(T, j.at("keypoints").get<std::vector<double>>());
  s.imu = ImuSequence(T, j.at("imu").get<std::vector<double>>());
  s.gt3d = PoseSequence3D(T, j.at("gt3d").get<std::vector<double>>());
  return s;
}

inline void save_dataset(const std::string& path, const std::vector<Sequence>& sequences) {
  std::ofstream out(path, std::ios::trunc);
  require(out.good(), ErrorCode::IoError, "cannot open " + path + " for writing");
  for (const auto& s : sequences) out << to_json(s).dump() << '\n';
  require(out.good(), ErrorCode::IoError, "write to " + path + " failed");
}

inline std::vector<Sequence> load_dataset(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::IoError, "cannot open " + path);
  std::vector<Sequence> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(sequence_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::FormatError, path + " line " + std::to_string(lineno) + ": " + e.what());
    } catch (const Error& e) {
      fail(ErrorCode::FormatError, path + " line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace vimcan::preprocess
