#pragma once

#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "vimcan/skeleton.hpp"
#include "vimcan/ssm/blocks.hpp"

namespace vimcan::model {

enum class FusionKind { CrossAttention, CrossMamba };

inline std::string to_string(FusionKind f) { return f == FusionKind::CrossAttention ? "cross-attention" : "cross-mamba"; }

inline FusionKind fusion_from_string(const std::string& s) {
  if (s == "cross-attention") return FusionKind::CrossAttention;
  if (s == "cross-mamba") return FusionKind::CrossMamba;
  fail(ErrorCode::InvalidConfig, "unknown fusion '" + s + "' (expected cross-attention or cross-mamba)");
}

struct ModelConfig {
  std::size_t embed_dim = 64;      // D_e
  std::size_t group_dim = 256;     // D_g
  std::size_t global_blocks = 5;   // L_N
  int groups = 5;                  // G
  std::size_t heads = 8;
  FusionKind fusion = FusionKind::CrossAttention;
  std::size_t state = 16;          // N
  std::size_t kernel = 3;
  std::size_t expand = 1;
  std::size_t mlp_ratio = 2;
  std::size_t max_frames = ssm::kMaxFrames;
  // The head regresses metres; outputs are reported in millimetres.
  double output_scale = 1000.0;
  std::optional<skeleton::GroupPartition> partition;  // overrides `groups` when set

  static constexpr std::size_t joints = skeleton::kNumJoints;
  static constexpr std::size_t imus = skeleton::kNumImus;

  /// Rows of the D_e / D_g ablation table (L_N = 5 throughout).
  static ModelConfig table_row(std::size_t row) {
    ModelConfig c;
    switch (row) {
      case 1: c.group_dim = 64; break;
      case 2: c.group_dim = 128; break;
      case 3: c.group_dim = 256; break;
      default: fail(ErrorCode::InvalidConfig, "table rows are 1..3");
    }
    return c;
  }

  /// Gradient-check scale: D_e=8, D_g=16, L_N=1, N=4.
  static ModelConfig tiny() {
    ModelConfig c;
    c.embed_dim = 8;
    c.group_dim = 16;
    c.global_blocks = 1;
    c.heads = 2;
    c.state = 4;
    return c;
  }

  static ModelConfig small() {
    ModelConfig c;
    c.embed_dim = 16;
    c.group_dim = 32;
    c.global_blocks = 2;
    c.heads = 4;
    c.state = 8;
    return c;
  }

  skeleton::GroupPartition resolved_partition() const {
    return partition ? *partition : skeleton::group_partition(groups);
  }

  ssm::BlockConfig block(std::size_t width) const {
    ssm::BlockConfig b;
    b.width = width;
    b.expand = expand;
    b.state = state;
    b.kernel = kernel;
    b.mlp_ratio = mlp_ratio;
    return b;
  }

  void validate() const {
    auto bad = [](const std::string& m) { fail(ErrorCode::InvalidConfig, m); };
    if (embed_dim == 0 || group_dim == 0 || state == 0 || expand == 0 || mlp_ratio == 0) bad("dimensions must be positive");
    if (heads == 0 || embed_dim % heads != 0) bad("heads must divide embed_dim");
    if (global_blocks < 1) bad("global_blocks must be >= 1");
    if (kernel % 2 == 0) bad("kernel must be odd");
    if (max_frames != ssm::kMaxFrames) bad("max_frames is fixed at 81");
    if (!(output_scale > 0)) bad("output_scale must be positive");
    if (partition) {
      const auto v = skeleton::validate_partition(*partition);
      if (!v.empty()) bad("partition: " + v.front().detail);
    } else if (groups != 0 && groups != 3 && groups != 5) {
      bad("groups must be 0, 3 or 5");
    }
  }

  bool operator==(const ModelConfig& o) const { return to_json() == o.to_json(); }

  nlohmann::json to_json() const {
    nlohmann::json j = {{"embed_dim", embed_dim}, {"group_dim", group_dim}, {"global_blocks", global_blocks},
                        {"groups", groups},       {"heads", heads},         {"fusion", to_string(fusion)},
                        {"state", state},         {"kernel", kernel},       {"expand", expand},
                        {"mlp_ratio", mlp_ratio}, {"max_frames", max_frames}, {"output_scale", output_scale}};
    if (partition) j["partition"] = skeleton::to_json(skeleton::default_topology(), *partition);
    return j;
  }

  static ModelConfig from_json(const nlohmann::json& j) {
    ModelConfig c;
    try {
      c.embed_dim = j.value("embed_dim", c.embed_dim);
      c.group_dim = j.value("group_dim", c.group_dim);
      c.global_blocks = j.value("global_blocks", c.global_blocks);
      c.groups = j.value("groups", c.groups);
      c.heads = j.value("heads", c.heads);
      c.fusion = fusion_from_string(j.value("fusion", to_string(c.fusion)));
      c.state = j.value("state", c.state);
      c.kernel = j.value("kernel", c.kernel);
      c.expand = j.value("expand", c.expand);
      c.mlp_ratio = j.value("mlp_ratio", c.mlp_ratio);
      c.max_frames = j.value("max_frames", c.max_frames);
      c.output_scale = j.value("output_scale", c.output_scale);
      if (j.contains("partition")) c.partition = skeleton::partition_from_json(j.at("partition"));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::InvalidConfig, e.what());
    }
    c.validate();
    return c;
  }
};

}  // namespace vimcan::model
