#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vimcan/losses.hpp"
#include "vimcan/metrics.hpp"
#include "vimcan/model/vimcan_model.hpp"
#include "vimcan/train/optimizer.hpp"

namespace vimcan::train {

using preprocess::Sequence;

inline const std::vector<std::size_t>& default_length_set() {
  static const std::vector<std::size_t> s = {9, 18, 27, 36, 45, 54, 63, 72, 81};
  return s;
}

struct TrainConfig {
  double lr0 = 2e-4;
  double decay = 0.99;  // per epoch, multiplicative
  std::size_t batch = 16;
  std::size_t epochs = 20;
  std::size_t steps_per_epoch = 0;  // 0 -> ceil(dataset / batch)
  AdamWConfig adamw;
  std::uint64_t seed = 0;
  std::vector<std::size_t> length_set = default_length_set();
  bool clip = true;
  double clip_norm = 5.0;
  loss::LossWeights loss;

  double lr_at_epoch(std::size_t e) const { return lr0 * std::pow(decay, static_cast<double>(e)); }

  void validate() const {
    auto bad = [](const std::string& m) { fail(ErrorCode::InvalidConfig, m); };
    if (!(lr0 > 0)) bad("lr0 must be positive");
    if (!(decay > 0 && decay <= 1)) bad("decay must lie in (0, 1]");
    if (batch == 0 || epochs == 0) bad("batch and epochs must be positive");
    if (length_set.empty()) bad("length_set is empty");
    for (std::size_t l : length_set)
      if (l < 2 || l > ssm::kMaxFrames) bad("lengths must lie in [2, 81]");
    if (!(adamw.beta1 >= 0 && adamw.beta1 < 1 && adamw.beta2 >= 0 && adamw.beta2 < 1)) bad("betas must lie in [0, 1)");
    if (!(adamw.eps > 0) || adamw.weight_decay < 0) bad("eps must be positive and weight_decay non-negative");
    if (clip && !(clip_norm > 0)) bad("clip_norm must be positive");
    loss.validate();
  }

  nlohmann::json to_json() const {
    return {{"lr0", lr0},
            {"decay", decay},
            {"batch", batch},
            {"epochs", epochs},
            {"steps_per_epoch", steps_per_epoch},
            {"betas", {adamw.beta1, adamw.beta2}},
            {"eps", adamw.eps},
            {"weight_decay", adamw.weight_decay},
            {"seed", seed},
            {"length_set", length_set},
            {"clip", clip},
            {"clip_norm", clip_norm},
            {"loss_weights",
             {{"mpjpe", loss.mpjpe},
              {"nmpjpe", loss.nmpjpe},
              {"velocity", loss.velocity},
              {"tc", loss.tc},
              {"joint_weights", loss.joint_weights}}}};
  }

  static TrainConfig from_json(const nlohmann::json& j) {
    TrainConfig c;
    try {
      c.lr0 = j.value("lr0", c.lr0);
      c.decay = j.value("decay", c.decay);
      c.batch = j.value("batch", c.batch);
      c.epochs = j.value("epochs", c.epochs);
      c.steps_per_epoch = j.value("steps_per_epoch", c.steps_per_epoch);
      if (j.contains("betas")) {
        const auto b = j.at("betas").get<std::vector<double>>();
        require(b.size() == 2, ErrorCode::InvalidConfig, "betas needs two values");
        c.adamw.beta1 = b[0];
        c.adamw.beta2 = b[1];
      }
      c.adamw.eps = j.value("eps", c.adamw.eps);
      c.adamw.weight_decay = j.value("weight_decay", c.adamw.weight_decay);
      c.seed = j.value("seed", c.seed);
      c.length_set = j.value("length_set", c.length_set);
      c.clip = j.value("clip", c.clip);
      c.clip_norm = j.value("clip_norm", c.clip_norm);
      if (j.contains("loss_weights")) {
        const auto& w = j.at("loss_weights");
        c.loss.mpjpe = w.value("mpjpe", c.loss.mpjpe);
        c.loss.nmpjpe = w.value("nmpjpe", c.loss.nmpjpe);
        c.loss.velocity = w.value("velocity", c.loss.velocity);
        c.loss.tc = w.value("tc", c.loss.tc);
        c.loss.joint_weights = w.value("joint_weights", c.loss.joint_weights);
      }
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::InvalidConfig, e.what());
    }
    c.validate();
    return c;
  }
};

/// Uniform draw from `lengths`.
inline std::size_t sample_length(std::mt19937_64& rng, const std::vector<std::size_t>& lengths = default_length_set()) {
  require(!lengths.empty(), ErrorCode::InvalidArgument, "no lengths to sample from");
  std::uniform_int_distribution<std::size_t> pick(0, lengths.size() - 1);
  return lengths[pick(rng)];
}

struct Batch {
  Tensor keypoints;  // [B, L, 17, 2]
  Tensor imus;       // [B, L, 6, 4]
  Tensor gt;         // [B, L, 17, 3]
};

/// Stacks equal-length windows. Every window must already have exactly
/// `length` frames; nothing is padded.
inline Batch stack_windows(const std::vector<Sequence>& windows, std::size_t length) {
  require(!windows.empty(), ErrorCode::EmptyDataset, "empty batch");
  std::vector<double> k, i, g;
  for (const auto& w : windows) {
    require(w.frames() == length, ErrorCode::LengthMismatch, "batch windows must share one length (no padding)");
    k.insert(k.end(), w.keypoints.values.begin(), w.keypoints.values.end());
    i.insert(i.end(), w.imu.values.begin(), w.imu.values.end());
    g.insert(g.end(), w.gt3d.values.begin(), w.gt3d.values.end());
  }
  const std::size_t B = windows.size();
  return {ad::new_tensor({B, length, skeleton::kNumJoints, 2}, k),
          ad::new_tensor({B, length, skeleton::kNumImus, 4}, i),
          ad::new_tensor({B, length, skeleton::kNumJoints, 3}, g)};
}

struct StepResult {
  loss::LossTerms terms;
  double grad_norm = 0.0;
};

/// Forward, total loss, backward, optional clipping and one AdamW update.
inline StepResult train_step(model::VimcanModel& m, const Batch& b, OptimizerState& st, double lr,
                             const TrainConfig& cfg) {
  std::vector<Tensor> params = m.parameters();
  StepResult r;
  r.terms = loss::total_loss(m.forward(b.keypoints, b.imus), b.gt, cfg.loss);
  const ad::Gradients grads = ad::backward(r.terms.total);
  std::vector<std::vector<double>> g;
  g.reserve(params.size());
  for (const auto& p : params) {
    if (grads.contains(p)) g.push_back(grads.at(p).to_vector());
    else g.emplace_back(p.numel(), 0.0);
  }
  r.grad_norm = cfg.clip ? clip_global_norm(g, cfg.clip_norm) : 0.0;
  adamw_step(params, g, st, lr, cfg.adamw);
  return r;
}

struct EpochLog {
  std::size_t epoch = 0;
  double lr = 0.0;
  double mean_loss = 0.0;
  std::vector<std::size_t> lengths;  // sampled length of every batch
};

struct TrainResult {
  std::vector<EpochLog> epochs;
  OptimizerState optimizer;
  std::size_t steps = 0;

  std::vector<double> loss_log() const {
    std::vector<double> out;
    for (const auto& e : epochs) out.push_back(e.mean_loss);
    return out;
  }

  nlohmann::json to_json() const {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& e : epochs)
      j.push_back({{"epoch", e.epoch}, {"lr", e.lr}, {"mean_loss", e.mean_loss}, {"lengths", e.lengths}});
    return j;
  }
};

/// Variable-length training. Each batch samples one length L, then crops a
/// seeded random window of length L from each selected sequence. Lengths
/// longer than the shortest training sequence are never drawn.
inline TrainResult train(model::VimcanModel& m, const std::vector<Sequence>& data, const TrainConfig& cfg,
                         const std::function<void(const EpochLog&)>& on_epoch = {}) {
  cfg.validate();
  require(!data.empty(), ErrorCode::EmptyDataset, "training set is empty");
  std::size_t shortest = data.front().frames();
  for (const auto& s : data) {
    s.validate();
    shortest = std::min(shortest, s.frames());
  }
  std::vector<std::size_t> lengths;
  for (std::size_t l : cfg.length_set)
    if (l <= shortest) lengths.push_back(l);
  require(!lengths.empty(), ErrorCode::TooShort,
          "shortest sequence has " + std::to_string(shortest) + " frames, below every training length");

  const std::size_t per_batch = std::min(cfg.batch, data.size());
  const std::size_t steps = cfg.steps_per_epoch ? cfg.steps_per_epoch : (data.size() + cfg.batch - 1) / cfg.batch;
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t cursor = order.size();  // forces a shuffle on first use

  TrainResult res;
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    EpochLog log;
    log.epoch = e;
    log.lr = cfg.lr_at_epoch(e);
    double total = 0.0;
    for (std::size_t s = 0; s < steps; ++s) {
      const std::size_t L = sample_length(rng, lengths);
      std::vector<Sequence> windows;
      windows.reserve(per_batch);
      for (std::size_t b = 0; b < per_batch; ++b) {
        if (cursor == order.size()) {
          std::shuffle(order.begin(), order.end(), rng);
          cursor = 0;
        }
        const Sequence& seq = data[order[cursor++]];
        std::uniform_int_distribution<std::size_t> start(0, seq.frames() - L);
        windows.push_back(seq.window(start(rng), L));
      }
      const StepResult r = train_step(m, stack_windows(windows, L), res.optimizer, log.lr, cfg);
      total += r.terms.total.item();
      log.lengths.push_back(L);
      ++res.steps;
    }
    log.mean_loss = total / static_cast<double>(steps);
    if (on_epoch) on_epoch(log);
    res.epochs.push_back(std::move(log));
  }
  return res;
}

using Predictor = std::function<preprocess::PoseSequence3D(const Sequence&)>;

/// Full-length inference. Sequences longer than the model's frame limit are
/// split into consecutive windows; the final window is aligned to the end of
/// the sequence so every window has the full limit.
inline preprocess::PoseSequence3D predict_sequence(const model::VimcanModel& m, const Sequence& s) {
  const std::size_t limit = m.config().max_frames;
  const std::size_t T = s.frames();
  if (T <= limit) return m.predict(s.keypoints, s.imu);
  preprocess::PoseSequence3D out(T);
  constexpr std::size_t F = preprocess::PoseSequence3D::kFrameSize;
  for (std::size_t begin = 0; begin < T; begin += limit) {
    const std::size_t start = std::min(begin, T - limit);
    const auto part = m.predict(s.keypoints.window(start, limit), s.imu.window(start, limit));
    std::copy(part.values.begin() + static_cast<std::ptrdiff_t>((begin - start) * F), part.values.end(),
              out.values.begin() + static_cast<std::ptrdiff_t>(begin * F));
  }
  return out;
}

inline metrics::MetricReport evaluate_with(const Predictor& predict, const std::vector<Sequence>& data) {
  require(!data.empty(), ErrorCode::EmptyDataset, "evaluation set is empty");
  std::vector<std::string> ids;
  std::vector<preprocess::PoseSequence3D> preds, gts;
  for (const auto& s : data) {
    s.validate();
    ids.push_back(s.id);
    preds.push_back(predict(s));
    gts.push_back(s.gt3d);
  }
  return metrics::build_report(ids, preds, gts);
}

inline metrics::MetricReport evaluate(const model::VimcanModel& m, const std::vector<Sequence>& data) {
  return evaluate_with([&](const Sequence& s) { return predict_sequence(m, s); }, data);
}

}  // namespace vimcan::train
