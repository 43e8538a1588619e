#pragma once

#include <fstream>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "vimcan/model/vimcan_model.hpp"

namespace vimcan::model {

// Checkpoint file: a single JSON document
//   {"format": "vimcan-checkpoint", "version": 1, "config": {...},
//    "params": {"<name>": {"shape": [...], "data": [...]}, ...}}
// Parameter data is decimal text in shortest round-trip form (lossless).

inline constexpr const char* kCheckpointFormat = "vimcan-checkpoint";
inline constexpr int kCheckpointVersion = 1;

inline nlohmann::json checkpoint_to_json(VimcanModel& m) {
  nlohmann::json params = nlohmann::json::object();
  m.visit([&](const std::string& name, Tensor& t) {
    params[name] = {{"shape", t.shape()}, {"data", t.to_vector()}};
  });
  return {{"format", kCheckpointFormat},
          {"version", kCheckpointVersion},
          {"config", m.config().to_json()},
          {"params", std::move(params)}};
}

inline VimcanModel checkpoint_from_json(const nlohmann::json& j, const std::optional<ModelConfig>& expected = {}) {
  try {
    require(j.value("format", std::string()) == kCheckpointFormat, ErrorCode::FormatError, "not a vimcan checkpoint");
    const int version = j.at("version").get<int>();
    require(version == kCheckpointVersion, ErrorCode::VersionMismatch,
            "checkpoint version " + std::to_string(version) + ", expected " + std::to_string(kCheckpointVersion));
    const ModelConfig cfg = ModelConfig::from_json(j.at("config"));
    if (expected && !(*expected == cfg)) {
      fail(ErrorCode::VersionMismatch,
           "checkpoint config " + cfg.to_json().dump() + " differs from expected " + expected->to_json().dump());
    }
    VimcanModel m = VimcanModel::init(cfg, 0);
    const auto& params = j.at("params");
    m.visit([&](const std::string& name, Tensor& t) {
      auto it = params.find(name);
      require(it != params.end(), ErrorCode::MissingParameter, name);
      const auto shape = it->at("shape").get<ad::Shape>();
      require(shape == t.shape(), ErrorCode::FormatError,
              name + " has shape " + ad::shape_str(shape) + ", model expects " + ad::shape_str(t.shape()));
      const auto data = it->at("data").get<std::vector<double>>();
      t = ad::parameter(ad::new_tensor(shape, data));
    });
    return m;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::FormatError, std::string("checkpoint: ") + e.what());
  }
}

inline void save_checkpoint(VimcanModel& m, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  require(out.good(), ErrorCode::IoError, "cannot open " + path + " for writing");
  out << checkpoint_to_json(m).dump();
  require(out.good(), ErrorCode::IoError, "write to " + path + " failed");
}

inline VimcanModel load_checkpoint(const std::string& path, const std::optional<ModelConfig>& expected = {}) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::IoError, "cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::FormatError, path + ": " + e.what());
  }
  return checkpoint_from_json(j, expected);
}

}  // namespace vimcan::model
