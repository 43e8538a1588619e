// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "vimcan/train/gradcheck_suite.hpp"
#include "oracles.hpp"

using namespace vimcan;
using ad::Tensor;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// 1 ---------------------------------------------------------------------------
Outcome scan_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::size_t> Ld(1, 16), Dd(1, 4), Nd(1, 8);
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const std::size_t L = Ld(rng), D = Dd(rng), N = Nd(rng);
    const auto p = oracle::random_params(D, N, 10 + i);
    const auto u = oracle::random_values(L * D, 500 + i, -2.0, 2.0);
    const auto y = ssm::selective_scan(ad::new_tensor({1, L, D}, u), p).to_vector();
    worst = std::max(worst, oracle::max_abs_diff(y, oracle::naive_scan(u, L, D, p)));
  }
  const double s = seconds_since(t0);
  return {worst <= 1e-12 && s < 5.0, fmt("200 instances, max abs diff %.3g, %.2f s", worst, s)};
}

// 2 ---------------------------------------------------------------------------
Outcome ss2d_decomposition() {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<std::size_t> Td(1, 6), Sd(1, 6), Dd(1, 4), Nd(1, 4);
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const std::size_t T = Td(rng), S = Sd(rng), D = Dd(rng), N = Nd(rng);
    ssm::DirectionalParams p4;
    for (std::size_t k = 0; k < 4; ++k) p4[k] = oracle::random_params(D, N, 40 * i + k);
    std::vector<std::size_t> order = ssm::identity_order(S);
    std::shuffle(order.begin(), order.end(), rng);
    const auto x = oracle::random_values(T * S * D, 7000 + i);
    const auto y = ssm::ss2d(ad::new_tensor({1, T, S, D}, x), p4, order).to_vector();
    std::vector<double> want(x.size(), 0.0);
    for (int dir = 0; dir < 4; ++dir) {
      const auto part = oracle::naive_direction(x, 1, T, S, D, p4[dir], dir, order);
      for (std::size_t k = 0; k < want.size(); ++k) want[k] += part[k];
    }
    worst = std::max(worst, oracle::max_abs_diff(y, want));
  }
  return {worst <= 1e-12, fmt("50 instances, max abs diff %.3g", worst)};
}

// 3 ---------------------------------------------------------------------------
Outcome gradient_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst_block = 0.0;
  std::string worst_name;
  for (const auto& r : checks::block_suite()) {
    if (r.result.max_rel_error >= worst_block) {
      worst_block = r.result.max_rel_error;
      worst_name = r.name;
    }
  }
  auto cfg = model::ModelConfig::tiny();
  const auto full = checks::check_full_model(cfg, 5);
  const double s = seconds_since(t0);
  const bool ok = worst_block <= 1e-4 && full.max_rel_error <= 1e-4 && s < 120.0;
  return {ok, fmt("blocks max %.3g (%s); full model max %.3g over %zu coords (floor %.2g); %.1f s", worst_block,
                  worst_name.c_str(), full.max_rel_error, full.coords_checked, full.floor, s)};
}

// 4 ---------------------------------------------------------------------------
Outcome loss_identities() {
  std::vector<preprocess::Sequence> seqs = {preprocess::synth_sequence(1, 12, 0.0), preprocess::synth_sequence(2, 12, 0.0)};
  const Tensor gt = train::stack_windows(seqs, 12).gt;
  const double total = loss::total_loss(gt, gt, {}).total.item();
  const Tensor frame = ad::slice(gt, 1, 0, 1);
  const Tensor still = ad::index_select(frame, 1, std::vector<std::size_t>(12, 0));
  const double static_total = loss::total_loss(still, still, {}).total.item();
  double nm = 0.0;
  for (double c : {0.5, 1.0, 2.0}) nm = std::max(nm, loss::nmpjpe_loss(ad::scale(gt, c), gt).item());
  const double tc = loss::tc_loss(still, loss::default_joint_weights()).item();
  // total_loss(gt, gt) keeps the TC term of a moving ground truth; the static
  // case is the one that must vanish entirely.
  const auto terms = loss::total_loss(gt, gt, {});
  const bool ok = terms.mpjpe == 0.0 && terms.nmpjpe <= 1e-12 && terms.velocity == 0.0 && static_total == 0.0 &&
                  nm <= 1e-12 && tc == 0.0;
  return {ok, fmt("gt vs gt: mpjpe %.3g nmpjpe %.3g velocity %.3g (total incl. tc %.4g); static total %.3g; "
                  "nmpjpe(c*gt) max %.3g; tc(static) %.3g",
                  terms.mpjpe, terms.nmpjpe, terms.velocity, total, static_total, nm, tc)};
}

// 5 ---------------------------------------------------------------------------
Outcome procrustes() {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> sc(0.2, 4.0), off(-1000, 1000);
  double worst_p2 = 0.0;
  bool ordered = true;
  for (int i = 0; i < 100; ++i) {
    const auto gt = preprocess::synth_sequence(100 + i, 4, 0.0).gt3d;
    const Eigen::Matrix3d r = oracle::random_rotation(rng);
    const double s = sc(rng);
    const Eigen::RowVector3d t(off(rng), off(rng), off(rng));
    preprocess::PoseSequence3D pred(gt.frames), noisy = gt;
    for (std::size_t f = 0; f < gt.frames; ++f) {
      const Eigen::MatrixXd m = (s * metrics::frame_matrix(gt, f) * r).rowwise() + t;
      for (std::size_t j = 0; j < 17; ++j)
        for (std::size_t c = 0; c < 3; ++c) pred(f, j, c) = m(j, c);
    }
    worst_p2 = std::max(worst_p2, metrics::metric_p2(pred, gt));
    const auto n = oracle::random_values(noisy.values.size(), 900 + i, -80, 80);
    for (std::size_t k = 0; k < n.size(); ++k) noisy.values[k] += n[k];
    ordered = ordered && metrics::metric_p2(noisy, gt) <= metrics::metric_p1(noisy, gt) &&
              metrics::metric_p2(pred, gt) <= metrics::metric_p1(pred, gt);
  }
  return {worst_p2 <= 1e-8 && ordered, fmt("max p2 under similarity %.3g mm; p2 <= p1 on all trials: %s", worst_p2,
                                           ordered ? "yes" : "no")};
}

// 6 ---------------------------------------------------------------------------
Outcome census() {
  const double want[] = {1.8e6, 3.9e6, 12.3e6};
  std::string detail;
  bool ok = true;
  for (std::size_t row = 1; row <= 3; ++row) {
    const auto cfg = model::ModelConfig::table_row(row);
    const double n = static_cast<double>(model::count_params(model::init_model(cfg, 0)));
    const double dev = (n - want[row - 1]) / want[row - 1];
    ok = ok && std::abs(dev) <= 0.25;
    detail += fmt("%s64/%zu: %.0f (%+.1f%%)", row > 1 ? "; " : "", cfg.group_dim, n, 100.0 * dev);
  }
  return {ok, detail};
}

// 7 ---------------------------------------------------------------------------
Outcome memory_scaling() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto rows = train::bench_memory({});
  std::vector<double> T, ssm_b, att_b;
  for (const auto& r : rows) {
    if (r.out_of_memory) return {false, "out of memory at T=" + std::to_string(r.T)};
    if (r.variant == train::BenchVariant::Ssm) {
      T.push_back(static_cast<double>(r.T));
      ssm_b.push_back(static_cast<double>(r.peak_bytes));
    } else {
      att_b.push_back(static_cast<double>(r.peak_bytes));
    }
  }
  double ssm_ratio = 0.0, att_ratio = 1e300;
  for (std::size_t k = 1; k < T.size(); ++k) {
    ssm_ratio = std::max(ssm_ratio, ssm_b[k] / ssm_b[k - 1]);
    att_ratio = std::min(att_ratio, att_b[k] / att_b[k - 1]);
  }
  const auto lin = train::poly_fit(T, ssm_b, 1);
  const auto att_lin = train::poly_fit(T, att_b, 1), att_quad = train::poly_fit(T, att_b, 2);
  const double s = seconds_since(t0);
  const bool ok = lin.r2 >= 0.98 && ssm_ratio <= 2.5 && att_ratio >= 3.0 && att_quad.sse < att_lin.sse && s < 300;
  return {ok, fmt("ssm R2 %.5f, max ratio %.2f; attention min ratio %.2f, quad SSE %.3g < linear SSE %.3g; %.1f s",
                  lin.r2, ssm_ratio, att_ratio, att_quad.sse, att_lin.sse, s)};
}

// 8 ---------------------------------------------------------------------------
Outcome variable_length() {
  auto m = model::init_model(model::ModelConfig::tiny(), 0);
  train::TrainConfig cfg;
  train::OptimizerState st;
  std::string failures;
  for (std::size_t T : train::default_length_set()) {
    try {
      const std::vector<preprocess::Sequence> seqs = {preprocess::synth_sequence(T, T, 0.01),
                                                      preprocess::synth_sequence(T + 1, T, 0.01)};
      // stack_windows refuses unequal lengths, so the batch is exactly T frames.
      const auto b = train::stack_windows(seqs, T);
      {
        ad::NoGradGuard ng;
        const Tensor y = m.forward(b.keypoints, b.imus);
        if (y.shape() != ad::Shape{2, T, 17, 3}) failures += " shape@" + std::to_string(T);
      }
      const auto r = train::train_step(m, b, st, cfg.lr0, cfg);
      if (!std::isfinite(r.terms.total.item())) failures += " loss@" + std::to_string(T);
    } catch (const std::exception& e) {
      failures += " " + std::to_string(T) + ":" + e.what();
    }
  }
  return {failures.empty(), failures.empty() ? fmt("T = 9..81 step 9: forward + step ok, %zu optimizer steps", st.step)
                                             : "failed:" + failures};
}

// 9 ---------------------------------------------------------------------------
Outcome overfit() {
  const auto t0 = std::chrono::steady_clock::now();
  preprocess::SynthOptions so;
  so.max_amplitude = 0.1;
  std::vector<preprocess::Sequence> data;
  for (std::uint64_t i = 0; i < 4; ++i) data.push_back(preprocess::synth_sequence(i, 81, 0.0, so));
  auto m = model::init_model(model::ModelConfig::tiny(), 0);
  const double p1_before = train::evaluate(m, data).p1_mm;
  train::TrainConfig cfg;
  cfg.lr0 = 2e-3;
  cfg.batch = 4;
  cfg.epochs = 200;
  cfg.steps_per_epoch = 1;
  cfg.seed = 0;
  const auto res = train::train(m, data, cfg);
  const double p1_after = train::evaluate(m, data).p1_mm;
  const auto log = res.loss_log();
  const double ratio = log.back() / log.front();
  const bool ok = res.steps == 200 && ratio <= 0.10 && p1_before >= 5.0 * p1_after;
  return {ok, fmt("%zu steps; loss %.1f -> %.1f (%.1f%%); P1 %.1f -> %.1f mm (%.1fx); %.0f s", res.steps, log.front(),
                  log.back(), 100.0 * ratio, p1_before, p1_after, p1_before / p1_after, seconds_since(t0))};
}

// 10 --------------------------------------------------------------------------
Outcome partitions() {
  using V = std::vector<std::size_t>;
  const std::vector<std::pair<V, V>> three = {{{0, 7, 8, 9, 10}, {0, 1}}, {{11, 12, 13, 14, 15, 16}, {4, 5}},
                                              {{1, 2, 3, 4, 5, 6}, {2, 3}}};
  const std::vector<std::pair<V, V>> five = {{{0, 7, 8, 9, 10}, {0, 1}},     {{0, 7, 8, 11, 12, 13}, {0, 1, 4}},
                                             {{0, 7, 8, 14, 15, 16}, {0, 1, 5}}, {{0, 4, 5, 6}, {0, 2}},
                                             {{0, 1, 2, 3}, {0, 3}}};
  auto matches = [](const skeleton::GroupPartition& p, const std::vector<std::pair<V, V>>& want) {
    if (p.groups.size() != want.size()) return false;
    for (std::size_t g = 0; g < want.size(); ++g)
      if (p.groups[g].joints != want[g].first || p.groups[g].imus != want[g].second) return false;
    return true;
  };
  const auto all = skeleton::group_partition(0);
  V every(17), imus(6);
  std::iota(every.begin(), every.end(), std::size_t{0});
  std::iota(imus.begin(), imus.end(), std::size_t{0});
  const bool g0 = all.groups.size() == 1 && all.groups[0].joints == every && all.groups[0].imus == imus;
  const bool g3 = matches(skeleton::group_partition(3), three);
  const bool g5 = matches(skeleton::group_partition(5), five);
  const auto topo = skeleton::default_topology();
  const auto order = skeleton::skeleton_scan_order(topo);
  V pos(17);
  for (std::size_t i = 0; i < order.size(); ++i) pos[order[i]] = i;
  bool parent_first = true;
  for (std::size_t j = 0; j < 17; ++j)
    if (topo.parent[j] != skeleton::kRoot) parent_first = parent_first && pos[topo.parent[j]] < pos[j];
  return {g0 && g3 && g5 && parent_first,
          fmt("G=0 %s, G=3 %s, G=5 %s, parent-before-child %s", g0 ? "ok" : "MISMATCH", g3 ? "ok" : "MISMATCH",
              g5 ? "ok" : "MISMATCH", parent_first ? "ok" : "VIOLATED")};
}

// 11 --------------------------------------------------------------------------
Outcome preprocessing() {
  using namespace preprocess;
  RawLandmarks lm;
  for (const auto& [joint, name] : direct_landmarks()) lm[name] = {double(joint), 0.0};
  lm["left_hip"] = {0, 0};
  lm["right_hip"] = {2, 0};
  lm["left_shoulder"] = {0, 4};
  lm["right_shoulder"] = {2, 4};
  lm["nose"] = {1, 7};
  const auto j = derive_composite_joints(lm);
  using namespace skeleton;
  const bool composite = j[Hips].x == 1 && j[Hips].y == 0 && j[Spine].x == 1 && j[Spine].y == 1 && j[Spine3].x == 1 &&
                         j[Spine3].y == 3 && j[Neck].x == 1 && std::abs(j[Neck].y - 4.99) <= 1e-12;

  KeypointSequence2D px(1);
  for (std::size_t k = 0; k < 17; ++k) px(0, k, 0) = 2, px(0, k, 1) = 1;
  px(0, 1, 0) = 4;
  px(0, 2, 0) = 0, px(0, 2, 1) = 0;
  px(0, 3, 0) = 0, px(0, 3, 1) = 2;
  const auto n = normalize_keypoints(px);
  const bool norm_ok = n(0, 1, 0) == 0.5 && n(0, 1, 1) == 0.0;

  std::mt19937_64 rng(11);
  std::normal_distribution<double> g;
  double worst = 0.0;
  auto dist = [](const Quat& a, const Quat& b) {
    return std::max({std::abs(a.w - b.w), std::abs(a.x - b.x), std::abs(a.y - b.y), std::abs(a.z - b.z)});
  };
  const Quat I = Quat::identity();
  worst = std::max(worst, dist(bone_orientation_camera(I, I, I, I), I));
  for (int k = 0; k < 100; ++k) {
    const Quat m = normalized({g(rng), g(rng), g(rng), g(rng)});
    const Quat sg = normalized({g(rng), g(rng), g(rng), g(rng)});
    worst = std::max(worst, dist(bone_orientation_camera(I, m, I, I), canonical(m)));
    worst = std::max(worst, dist(bone_orientation_camera(I, I, sg, sg.conjugate()), I));
  }
  return {composite && norm_ok && worst <= 1e-12,
          fmt("composite joints %s; bbox normalization %s; calibration collapse max dev %.3g", composite ? "exact" : "WRONG",
              norm_ok ? "exact" : "WRONG", worst)};
}

// 12 --------------------------------------------------------------------------
Outcome determinism() {
  std::vector<preprocess::Sequence> data;
  for (std::uint64_t i = 0; i < 4; ++i) data.push_back(preprocess::synth_sequence(20 + i, 30, 0.02));
  train::TrainConfig cfg;
  cfg.batch = 2;
  cfg.epochs = 3;
  cfg.steps_per_epoch = 2;
  cfg.seed = 17;
  auto run = [&](std::uint64_t seed) {
    train::TrainConfig c = cfg;
    c.seed = seed;
    auto m = model::init_model(model::ModelConfig::tiny(), seed);
    const auto res = train::train(m, data, c);
    return std::make_pair(res.to_json().dump(), model::checkpoint_to_json(m).dump());
  };
  const auto a = run(17), b = run(17), c = run(18);
  const bool same = a == b;
  const bool differs = a.first != c.first;
  return {same && differs, fmt("loss logs %s, checkpoints %s (%zu bytes); other seed differs: %s",
                               a.first == b.first ? "identical" : "DIFFER", a.second == b.second ? "identical" : "DIFFER",
                               a.second.size(), differs ? "yes" : "no")};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"scan-oracle", scan_oracle},          {"ss2d-decomposition", ss2d_decomposition},
      {"gradient-suite", gradient_suite},    {"loss-identities", loss_identities},
      {"procrustes", procrustes},            {"param-census", census},
      {"memory-scaling", memory_scaling},    {"variable-length", variable_length},
      {"overfit", overfit},                  {"partition-topology", partitions},
      {"preprocessing", preprocessing},      {"determinism", determinism}};
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::printf("%s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
  return failed ? 1 : 0;
}
