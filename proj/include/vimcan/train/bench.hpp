#pragma once

#include <algorithm>
#include <chrono>
#include <new>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "vimcan/fusion/temporal_attention.hpp"
#include "vimcan/model/vimcan_model.hpp"
#include "vimcan/ssm/blocks.hpp"

namespace vimcan::train {

enum class BenchVariant { Ssm, Attention };

inline std::string to_string(BenchVariant v) { return v == BenchVariant::Ssm ? "ssm" : "attention-temporal"; }

struct BenchRow {
  BenchVariant variant = BenchVariant::Ssm;
  std::size_t T = 0;
  std::size_t peak_bytes = 0;
  double wall_ms = 0.0;
  double fps = 0.0;
  bool out_of_memory = false;
};

struct MemoryBenchConfig {
  std::vector<std::size_t> lengths = {64, 128, 256, 512};
  std::vector<BenchVariant> variants = {BenchVariant::Ssm, BenchVariant::Attention};
  std::size_t width = 64;
  std::size_t tokens = 4;  // spatial tokens per frame
  std::size_t heads = 8;
  std::size_t state = 16;
  std::uint64_t seed = 0;
  std::size_t runs = 1;  // timed forwards per row; peak comes from the first
};

/// Peak tracked memory of one temporal block forward (no graph recorded) for
/// each length and variant. The ssm variant is the temporal BiSTSSM block; the
/// attention variant swaps in a temporal self-attention block of equal width.
/// An allocation failure is recorded as a flagged row.
inline std::vector<BenchRow> bench_memory(const MemoryBenchConfig& cfg) {
  nn::ParamInit init(cfg.seed);
  ssm::BlockConfig bc;
  bc.width = cfg.width;
  bc.state = cfg.state;
  const ssm::BiSTSSMBlock block = ssm::BiSTSSMBlock::init(bc, init);
  const fusion::TemporalSelfAttention attn = fusion::TemporalSelfAttention::init(cfg.width, cfg.heads, bc.mlp_ratio, init);
  const std::vector<std::size_t> order = ssm::identity_order(cfg.tokens);

  std::vector<BenchRow> rows;
  for (std::size_t T : cfg.lengths) {
    for (BenchVariant v : cfg.variants) {
      BenchRow row;
      row.variant = v;
      row.T = T;
      try {
        ad::NoGradGuard ng;
        const Tensor x = ad::seeded_randn({1, T, cfg.tokens, cfg.width}, cfg.seed + T, 1.0);
        auto run = [&] {
          const Tensor y = v == BenchVariant::Ssm ? block.forward(x, ssm::Axis::Temporal, order) : attn.forward(x);
          return y.sum();
        };
        const auto t0 = std::chrono::steady_clock::now();
        row.peak_bytes = ad::peak_memory_scope(run).peak_bytes;
        for (std::size_t i = 1; i < std::max<std::size_t>(cfg.runs, 1); ++i) (void)run();
        const auto t1 = std::chrono::steady_clock::now();
        const double total_s = std::chrono::duration<double>(t1 - t0).count();
        const double n = static_cast<double>(std::max<std::size_t>(cfg.runs, 1));
        row.wall_ms = 1000.0 * total_s / n;
        row.fps = static_cast<double>(T) * n / total_s;
      } catch (const std::bad_alloc&) {
        row.out_of_memory = true;
      }
      rows.push_back(row);
    }
  }
  return rows;
}

inline std::string bench_csv(const std::vector<BenchRow>& rows) {
  std::ostringstream os;
  os << "variant,T,peak_bytes,wall_ms,fps\n";
  for (const auto& r : rows) {
    os << to_string(r.variant) << ',' << r.T << ',';
    if (r.out_of_memory) os << "OOM,,\n";
    else os << r.peak_bytes << ',' << r.wall_ms << ',' << r.fps << '\n';
  }
  return os.str();
}

/// Least-squares polynomial fit of y on x; returns the residual sum of squares
/// and the coefficient of determination.
struct PolyFit {
  double sse = 0.0;
  double r2 = 0.0;
};

inline PolyFit poly_fit(const std::vector<double>& x, const std::vector<double>& y, int degree) {
  require(x.size() == y.size() && x.size() > static_cast<std::size_t>(degree), ErrorCode::InvalidArgument,
          "poly_fit needs more points than the degree");
  const auto n = static_cast<Eigen::Index>(x.size());
  Eigen::MatrixXd a(n, degree + 1);
  Eigen::VectorXd b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int d = 0; d <= degree; ++d) a(i, d) = std::pow(x[static_cast<std::size_t>(i)], d);
    b(i) = y[static_cast<std::size_t>(i)];
  }
  const Eigen::VectorXd coef = a.colPivHouseholderQr().solve(b);
  const Eigen::VectorXd res = a * coef - b;
  const double mean = b.mean();
  const double sst = (b.array() - mean).square().sum();
  PolyFit f;
  f.sse = res.squaredNorm();
  f.r2 = sst > 0 ? 1.0 - f.sse / sst : 1.0;
  return f;
}

struct ThroughputResult {
  std::vector<double> run_ms;
  double median_ms = 0.0;
  double fps = 0.0;
};

/// Median wall time of `runs` full-model forwards on a random length-T input.
inline ThroughputResult bench_throughput(const model::VimcanModel& m, std::size_t T, std::size_t runs,
                                         std::uint64_t seed = 0) {
  require(runs >= 3, ErrorCode::InvalidArgument, "throughput needs at least 3 runs");
  ad::NoGradGuard ng;
  const Tensor kps = ad::seeded_randn({1, T, skeleton::kNumJoints, 2}, seed, 0.3);
  const Tensor imu = ad::seeded_randn({1, T, skeleton::kNumImus, 4}, seed + 1, 0.5);
  ThroughputResult r;
  for (std::size_t i = 0; i < runs; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    const Tensor y = m.forward(kps, imu);
    const auto t1 = std::chrono::steady_clock::now();
    (void)y;
    r.run_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  std::vector<double> sorted = r.run_ms;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  r.median_ms = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  r.fps = static_cast<double>(T) / (r.median_ms / 1000.0);
  return r;
}

}  // namespace vimcan::train
