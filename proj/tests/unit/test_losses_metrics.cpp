#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "expect_code.hpp"
#include "oracles.hpp"

using namespace vimcan;
using ad::Tensor;
using preprocess::PoseSequence3D;

namespace {

Tensor pose(std::size_t B, std::size_t T, std::size_t J, std::vector<double> v) {
  return ad::new_tensor({B, T, J, 3}, std::move(v));
}

Tensor random_pose(std::size_t B, std::size_t T, std::uint64_t seed) {
  return ad::seeded_randn({B, T, skeleton::kNumJoints, 3}, seed, 300.0);
}

PoseSequence3D random_seq(std::size_t T, std::uint64_t seed) {
  return PoseSequence3D(T, oracle::random_values(T * 51, seed, -800, 800));
}

}  // namespace

TEST(Mpjpe, Examples) {
  EXPECT_EQ(loss::mpjpe_loss(pose(1, 1, 1, {0, 0, 0}), pose(1, 1, 1, {0, 0, 0})).item(), 0.0);
  EXPECT_DOUBLE_EQ(loss::mpjpe_loss(pose(1, 1, 1, {3, 4, 0}), pose(1, 1, 1, {0, 0, 0})).item(), 5.0);
  const Tensor p = random_pose(2, 3, 1), g = random_pose(2, 3, 2);
  const Tensor shift = ad::seeded_randn({3}, 3, 50.0);
  EXPECT_NEAR(loss::mpjpe_loss(ad::add(p, shift), ad::add(g, shift)).item(), loss::mpjpe_loss(p, g).item(), 1e-10);
  expect_code(ErrorCode::ShapeMismatch, [&] { loss::mpjpe_loss(p, random_pose(2, 4, 2)); });
}

TEST(Nmpjpe, ScaleInvariance) {
  const Tensor g = random_pose(2, 4, 5);
  for (double c : {0.5, 1.0, 2.0}) {
    EXPECT_LE(loss::nmpjpe_loss(ad::scale(g, c), g).item(), 1e-12) << c;
    for (double s : loss::nmpjpe_scales(ad::scale(g, c), g)) EXPECT_NEAR(s, c, 1e-14);
  }
}

TEST(Nmpjpe, HandExample) {
  const Tensor g = pose(1, 1, 2, {1, 0, 0, 0, 1, 0});
  const Tensor p = pose(1, 1, 2, {2, 0, 0, 0, 0, 0});
  EXPECT_DOUBLE_EQ(loss::nmpjpe_scales(p, g)[0], 1.0);
  EXPECT_DOUBLE_EQ(loss::nmpjpe_loss(p, g).item(), 1.0);
}

TEST(Nmpjpe, DegenerateGroundTruth) {
  expect_code(ErrorCode::DegenerateGroundTruth, [] { loss::nmpjpe_loss(pose(1, 1, 1, {1, 2, 3}), pose(1, 1, 1, {0, 0, 0})); });
}

TEST(Nmpjpe, ScaleIsConstantForDifferentiation) {
  // d/dpred of mean |s*gt - pred| with s held fixed.
  const Tensor g = pose(1, 1, 1, {1, 0, 0});
  Tensor p = ad::parameter(pose(1, 1, 1, {0, 3, 0}));
  const auto grads = ad::backward(loss::nmpjpe_loss(p, g));
  const auto gp = grads.at(p).to_vector();
  // s = 0, residual = -pred, gradient = pred / |pred|.
  EXPECT_NEAR(gp[0], 0.0, 1e-15);
  EXPECT_NEAR(gp[1], 1.0, 1e-15);
}

TEST(Mpjve, Examples) {
  const Tensor g = random_pose(2, 5, 7);
  const Tensor offset = ad::seeded_randn({2, 1, skeleton::kNumJoints, 3}, 8, 100.0);
  const Tensor p = ad::add(g, ad::index_select(offset, 1, {0, 0, 0, 0, 0}));
  EXPECT_LE(loss::mpjve_loss(p, g).item(), 1e-12);
  EXPECT_DOUBLE_EQ(loss::mpjve_loss(pose(1, 2, 1, {0, 0, 0, 0, 0, 0}), pose(1, 2, 1, {0, 0, 0, 1, 0, 0})).item(), 1.0);
  expect_code(ErrorCode::TooShort, [] { loss::mpjve_loss(pose(1, 1, 1, {0, 0, 0}), pose(1, 1, 1, {0, 0, 0})); });
}

TEST(TemporalConsistency, Examples) {
  const Tensor frame = ad::seeded_randn({1, 1, skeleton::kNumJoints, 3}, 9, 100.0);
  const Tensor still = ad::index_select(frame, 1, {0, 0, 0, 0});
  EXPECT_EQ(loss::tc_loss(still, loss::default_joint_weights()).item(), 0.0);
  EXPECT_DOUBLE_EQ(loss::tc_loss(pose(1, 2, 1, {0, 0, 0, 2, 0, 0}), {1.0}).item(), 4.0);
  // Distal joints count double.
  std::vector<double> v(2 * 17 * 3, 0.0);
  v[(17 + skeleton::Head) * 3] = 1.0;
  EXPECT_DOUBLE_EQ(loss::tc_loss(pose(1, 2, 17, v), loss::default_joint_weights()).item(), 2.0 / 17.0);
  expect_code(ErrorCode::ShapeMismatch, [&] { loss::tc_loss(still, {1.0, 2.0}); });
}

TEST(TotalLoss, Combination) {
  const Tensor g = random_pose(2, 4, 10);
  const Tensor p = random_pose(2, 4, 11);
  const loss::LossWeights w;
  const auto terms = loss::total_loss(p, g, w);
  const double want = terms.mpjpe + 0.5 * terms.nmpjpe + 20.0 * terms.velocity + 0.5 * terms.tc;
  EXPECT_NEAR(terms.total.item(), want, 1e-9 * want);

  const Tensor still = ad::index_select(ad::slice(g, 1, 0, 1), 1, {0, 0, 0, 0});
  EXPECT_EQ(loss::total_loss(still, still, w).total.item(), 0.0);

  loss::LossWeights zero;
  zero.mpjpe = zero.nmpjpe = zero.velocity = zero.tc = 0.0;
  EXPECT_EQ(loss::total_loss(p, g, zero).total.item(), 0.0);

  loss::LossWeights neg;
  neg.velocity = -1;
  expect_code(ErrorCode::InvalidConfig, [&] { loss::total_loss(p, g, neg); });
}

TEST(TotalLoss, GtAgainstItself) {
  const Tensor g = random_pose(3, 6, 12);
  const auto t = loss::total_loss(g, g, {});
  EXPECT_EQ(t.mpjpe, 0.0);
  EXPECT_LE(t.nmpjpe, 1e-12);
  EXPECT_EQ(t.velocity, 0.0);
  EXPECT_GT(t.tc, 0.0);  // moving ground truth still has displacement
}

TEST(Procrustes, AbsorbsSimilarity) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> scale(0.3, 3.0), off(-500, 500);
  for (int trial = 0; trial < 100; ++trial) {
    const auto gt = random_seq(3, 100 + trial);
    const Eigen::Matrix3d r = oracle::random_rotation(rng);
    const double s = scale(rng);
    const Eigen::RowVector3d t(off(rng), off(rng), off(rng));
    PoseSequence3D pred(3);
    for (std::size_t f = 0; f < 3; ++f) {
      const Eigen::MatrixXd m = (s * metrics::frame_matrix(gt, f) * r).rowwise() + t;
      for (std::size_t j = 0; j < 17; ++j)
        for (std::size_t c = 0; c < 3; ++c) pred(f, j, c) = m(j, c);
    }
    ASSERT_LE(metrics::metric_p2(pred, gt), 1e-8) << trial;
    ASSERT_GT(metrics::metric_p1(pred, gt), 1.0);
  }
}

TEST(Procrustes, NeverWorseThanP1) {
  for (int trial = 0; trial < 100; ++trial) {
    const auto gt = random_seq(2, 300 + trial);
    auto pred = gt;
    const auto noise = oracle::random_values(pred.values.size(), 400 + trial, -60, 60);
    for (std::size_t i = 0; i < noise.size(); ++i) pred.values[i] += noise[i];
    ASSERT_LT(metrics::metric_p2(pred, gt), metrics::metric_p1(pred, gt)) << trial;
  }
}

TEST(Procrustes, HandlesReflection) {
  // A mirrored pose must not be aligned by a reflection.
  const auto gt = random_seq(1, 5);
  auto mirrored = gt;
  for (std::size_t j = 0; j < 17; ++j) mirrored(0, j, 0) = -gt(0, j, 0);
  EXPECT_GT(metrics::metric_p2(mirrored, gt), 1.0);
  PoseSequence3D flat(1);
  expect_code(ErrorCode::DegenerateFrame, [&] { metrics::metric_p2(flat, gt); });
}

TEST(Pck, Examples) {
  const auto pck = metrics::metric_pck({10, 30, 60}, {25, 50});
  EXPECT_NEAR(pck.at(50), 200.0 / 3.0, 1e-12);
  EXPECT_NEAR(pck.at(25), 100.0 / 3.0, 1e-12);
  EXPECT_EQ(metrics::metric_pck({0, 0}, {1e-9}).at(1e-9), 100.0);
  expect_code(ErrorCode::InvalidArgument, [] { metrics::metric_pck({1}, {0}); });
}

TEST(Report, JsonAndCsv) {
  const auto g1 = random_seq(4, 1), g2 = random_seq(6, 2);
  auto p1 = g1, p2 = g2;
  for (double& v : p1.values) v += 10;
  const auto r = metrics::build_report({"a", "b"}, {p1, p2}, {g1, g2});
  // 4 frames off by |(10,10,10)| = 17.32 mm, 6 exact.
  EXPECT_NEAR(r.p1_mm, 4.0 * std::sqrt(300.0) / 10.0, 1e-9);
  EXPECT_NEAR(r.pck.at(25), 100.0, 1e-12);
  ASSERT_EQ(r.sequences.size(), 2u);
  EXPECT_NEAR(r.sequences[1].p1_mm, 0.0, 1e-12);

  const auto j = r.to_json();
  EXPECT_TRUE(j.contains("p1_mm"));
  EXPECT_TRUE(j.contains("p2_mm"));
  EXPECT_TRUE(j["pck"].contains("25"));
  EXPECT_TRUE(j["per_joint_p1"].contains("Hips"));
  EXPECT_EQ(j["sequences"].size(), 2u);

  const std::string csv = r.to_csv();
  std::istringstream in(csv);
  std::string header, row_a, row_b, row_all;
  std::getline(in, header);
  std::getline(in, row_a);
  std::getline(in, row_b);
  std::getline(in, row_all);
  EXPECT_EQ(header.rfind("sequence_id,p1,p2,pck25,pck50,p1_Hips", 0), 0u) << header;
  EXPECT_EQ(row_a.rfind("a,", 0), 0u);
  EXPECT_EQ(row_all.rfind("ALL,", 0), 0u);
  expect_code(ErrorCode::EmptyDataset, [] { metrics::build_report({}, {}, {}); });
}
