#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "expect_code.hpp"
#include "vimcan/train/gradcheck_suite.hpp"
#include "oracles.hpp"

using namespace vimcan;
using ad::Tensor;

namespace {

void zero_out(Tensor& t) {
  for (double& v : t.mutable_data()) v = 0.0;
}

ssm::BiSTSSMBlock small_block(std::uint64_t seed, std::size_t width = 6) {
  nn::ParamInit init(seed);
  ssm::BlockConfig c;
  c.width = width;
  c.state = 4;
  return ssm::BiSTSSMBlock::init(c, init);
}

}  // namespace

TEST(SelectiveScan, MatchesNaiveOracle) {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::size_t> Ld(1, 16), Dd(1, 4), Nd(1, 8), Bd(1, 2);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t L = Ld(rng), D = Dd(rng), N = Nd(rng), B = Bd(rng);
    const auto p = oracle::random_params(D, N, 1000 + trial);
    const auto u = oracle::random_values(B * L * D, 5000 + trial, -2.0, 2.0);
    const auto y = ssm::selective_scan(ad::new_tensor({B, L, D}, u), p).to_vector();
    for (std::size_t b = 0; b < B; ++b) {
      const std::vector<double> ub(u.begin() + b * L * D, u.begin() + (b + 1) * L * D);
      const auto want = oracle::naive_scan(ub, L, D, p);
      const std::span<const double> got(y.data() + b * L * D, L * D);
      ASSERT_LE(oracle::max_abs_diff(got, want), 1e-12) << "trial " << trial << " L=" << L << " D=" << D << " N=" << N;
    }
  }
}

TEST(SelectiveScan, ZeroInput) {
  const auto p = oracle::random_params(3, 4, 1);
  const auto y = ssm::selective_scan(ad::zeros({2, 7, 3}), p).to_vector();
  for (double v : y) EXPECT_EQ(v, 0.0);
}

TEST(SelectiveScan, SingleStepClosedForm) {
  const std::size_t D = 3, N = 4;
  const auto p = oracle::random_params(D, N, 9);
  const std::vector<double> u = {0.4, -1.3, 0.8};
  const auto y = ssm::selective_scan(ad::new_tensor({1, 1, D}, u), p).to_vector();
  const std::size_t r = p.dt_rank(), W = r + 2 * N;
  const auto xp = p.x_proj.to_vector(), dtp = p.dt_proj.to_vector(), dtb = p.dt_bias.to_vector(),
             skip = p.d_skip.to_vector();
  std::vector<double> proj(W, 0.0);
  for (std::size_t c = 0; c < W; ++c)
    for (std::size_t d = 0; d < D; ++d) proj[c] += u[d] * xp[d * W + c];
  for (std::size_t d = 0; d < D; ++d) {
    double pre = dtb[d];
    for (std::size_t k = 0; k < r; ++k) pre += proj[k] * dtp[k * D + d];
    const double delta = oracle::softplus(pre);
    double cb = 0.0;  // <C, B_bar> with B_bar = delta * B
    for (std::size_t n = 0; n < N; ++n) cb += proj[r + N + n] * delta * proj[r + n];
    EXPECT_NEAR(y[d], cb * u[d] + skip[d] * u[d], 1e-14);
  }
}

TEST(SelectiveScan, StableOnLongSequences) {
  const auto p = oracle::random_params(2, 4, 3);
  const std::size_t L = 10000;
  const auto y = ssm::selective_scan(ad::new_tensor({1, L, 2}, oracle::random_values(L * 2, 4)), p).to_vector();
  double peak = 0.0;
  for (double v : y) {
    ASSERT_TRUE(std::isfinite(v));
    peak = std::max(peak, std::abs(v));
  }
  EXPECT_LT(peak, 1e3);
}

TEST(SelectiveScan, Errors) {
  const auto p = oracle::random_params(3, 2, 1);
  expect_code(ErrorCode::ShapeMismatch, [&] { ssm::selective_scan(ad::zeros({1, 4, 2}), p); });
  expect_code(ErrorCode::ShapeMismatch, [&] { ssm::selective_scan(ad::zeros({4, 3}), p); });
  // Zero extents are refused when the tensor is built.
  expect_code(ErrorCode::ShapeMismatch, [&] { ssm::selective_scan(ad::zeros({1, 0, 3}), p); });
}

TEST(SS2D, EqualsSumOfIndependentDirections) {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<std::size_t> Td(1, 6), Sd(1, 5), Dd(1, 3), Nd(1, 4), Bd(1, 2);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t B = Bd(rng), T = Td(rng), S = Sd(rng), D = Dd(rng), N = Nd(rng);
    ssm::DirectionalParams p4;
    for (std::size_t k = 0; k < 4; ++k) p4[k] = oracle::random_params(D, N, 100 * trial + k);
    std::vector<std::size_t> order = ssm::identity_order(S);
    std::shuffle(order.begin(), order.end(), rng);
    const auto x = oracle::random_values(B * T * S * D, 900 + trial);
    const auto y = ssm::ss2d(ad::new_tensor({B, T, S, D}, x), p4, order).to_vector();
    std::vector<double> want(x.size(), 0.0);
    for (int dir = 0; dir < 4; ++dir) {
      const auto part = oracle::naive_direction(x, B, T, S, D, p4[dir], dir, order);
      for (std::size_t i = 0; i < want.size(); ++i) want[i] += part[i];
    }
    ASSERT_LE(oracle::max_abs_diff(y, want), 1e-12) << "trial " << trial;
  }
}

TEST(SS2D, ZeroInputAndSingleToken) {
  ssm::DirectionalParams p4;
  for (std::size_t k = 0; k < 4; ++k) p4[k] = oracle::random_params(2, 3, k + 1);
  for (double v : ssm::ss2d(ad::zeros({1, 3, 4, 2}), p4, {3, 1, 0, 2}).to_vector()) EXPECT_EQ(v, 0.0);

  // S = 1: each spatial pass is a single-step scan per frame.
  const auto x = oracle::random_values(5 * 2, 8);
  const Tensor xt = ad::new_tensor({1, 5, 1, 2}, x);
  for (auto dir : {ssm::Direction::SpatialForward, ssm::Direction::SpatialReverse}) {
    const auto y = ssm::ss2d_direction(xt, p4[0], dir, {0}).to_vector();
    for (std::size_t t = 0; t < 5; ++t) {
      const auto want = oracle::naive_scan({x[2 * t], x[2 * t + 1]}, 1, 2, p4[0]);
      EXPECT_NEAR(y[2 * t], want[0], 1e-14);
      EXPECT_NEAR(y[2 * t + 1], want[1], 1e-14);
    }
  }
}

TEST(SS2D, BadPermutation) {
  ssm::DirectionalParams p4;
  for (std::size_t k = 0; k < 4; ++k) p4[k] = oracle::random_params(2, 2, k);
  const Tensor x = ad::zeros({1, 2, 3, 2});
  expect_code(ErrorCode::BadPermutation, [&] { ssm::ss2d(x, p4, {0, 0, 1}); });
  expect_code(ErrorCode::BadPermutation, [&] { ssm::ss2d(x, p4, {0, 1}); });
  expect_code(ErrorCode::BadPermutation, [&] { ssm::ss2d(x, p4, {0, 1, 3}); });
}

TEST(BiSTSSM, ResidualIdentity) {
  auto blk = small_block(5);
  zero_out(blk.out_proj.weight);
  zero_out(blk.out_proj.bias);
  zero_out(blk.mlp.fc2.weight);
  zero_out(blk.mlp.fc2.bias);
  const Tensor x = ad::seeded_randn({2, 4, 5, 6}, 6, 1.0);
  for (auto axis : {ssm::Axis::Spatial, ssm::Axis::Temporal}) {
    const auto y = blk.forward(x, axis, {4, 3, 2, 1, 0}).to_vector();
    EXPECT_EQ(y, x.to_vector());
  }
}

TEST(BiSTSSM, WrongWidth) {
  const auto blk = small_block(1);
  expect_code(ErrorCode::ShapeMismatch, [&] { blk.forward(ad::zeros({1, 2, 3, 5}), ssm::Axis::Spatial, {0, 1, 2}); });
  expect_code(ErrorCode::EvenKernel, [] {
    nn::ParamInit init(0);
    ssm::BlockConfig c;
    c.kernel = 4;
    ssm::BiSTSSMBlock::init(c, init);
  });
}

TEST(STMamba, ShapesAcrossLengths) {
  nn::ParamInit init(3);
  ssm::BlockConfig c;
  c.width = 8;
  c.state = 4;
  const auto blk = ssm::STMambaBlock::init(c, 17, ssm::Flavor::SkeletonAware,
                                           skeleton::skeleton_scan_order(skeleton::default_topology()), init);
  ad::NoGradGuard ng;
  for (std::size_t T : {1, 9, 81}) {
    const Tensor y = blk.forward(ad::seeded_randn({1, T, 17, 8}, T, 1.0));
    EXPECT_EQ(y.shape(), (ad::Shape{1, T, 17, 8}));
    for (double v : y.to_vector()) ASSERT_TRUE(std::isfinite(v));
  }
  expect_code(ErrorCode::SequenceTooLong, [&] { blk.forward(ad::zeros({1, 82, 17, 8})); });
  expect_code(ErrorCode::ShapeMismatch, [&] { blk.forward(ad::zeros({1, 4, 16, 8})); });
}

TEST(STMamba, PartAwareUsesIndexOrder) {
  nn::ParamInit init(3);
  ssm::BlockConfig c;
  c.width = 4;
  const auto blk = ssm::STMambaBlock::init(c, 3, ssm::Flavor::PartAware, {2, 1, 0}, init);
  EXPECT_EQ(blk.order, ssm::identity_order(3));
  nn::ParamInit init2(3);
  const auto sk = ssm::STMambaBlock::init(c, 3, ssm::Flavor::SkeletonAware, {2, 1, 0}, init2);
  EXPECT_EQ(sk.order, (std::vector<std::size_t>{2, 1, 0}));
}

TEST(SsmGradients, ScanAndBlocks) {
  const auto o = checks::block_options();
  EXPECT_LE(checks::check_scan(o).max_rel_error, 1e-4);
  EXPECT_LE(checks::check_bistssm(ssm::Axis::Spatial, o).max_rel_error, 1e-4);
  EXPECT_LE(checks::check_bistssm(ssm::Axis::Temporal, o).max_rel_error, 1e-4);
  EXPECT_LE(checks::check_stmamba(ssm::Flavor::SkeletonAware, o).max_rel_error, 1e-4);
  EXPECT_LE(checks::check_stmamba(ssm::Flavor::PartAware, o).max_rel_error, 1e-4);
}
