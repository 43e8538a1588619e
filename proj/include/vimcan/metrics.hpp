#pragma once

#include <array>
#include <cmath>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "vimcan/preprocess/sequences.hpp"

namespace vimcan::metrics {

using preprocess::PoseSequence3D;
using Joints3 = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

inline Joints3 frame_matrix(const PoseSequence3D& s, std::size_t t) {
  Joints3 m(PoseSequence3D::kRows, 3);
  for (std::size_t j = 0; j < PoseSequence3D::kRows; ++j)
    for (std::size_t c = 0; c < 3; ++c) m(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(c)) = s(t, j, c);
  return m;
}

/// Similarity transform (rotation, uniform scale, translation; no reflection)
/// of `pred` that best matches `gt` in the least-squares sense.
inline Joints3 procrustes_align(const Joints3& pred, const Joints3& gt) {
  const Eigen::RowVector3d mu_gt = gt.colwise().mean();
  const Eigen::RowVector3d mu_pred = pred.colwise().mean();
  Joints3 x = gt.rowwise() - mu_gt;
  Joints3 y = pred.rowwise() - mu_pred;
  const double nx = x.norm(), ny = y.norm();
  require(nx > 0 && ny > 0, ErrorCode::DegenerateFrame, "Procrustes on a frame whose joints coincide");
  x /= nx;
  y /= ny;
  const Eigen::Matrix3d h = x.transpose() * y;
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d v = svd.matrixV();
  Eigen::Vector3d s = svd.singularValues();
  const Eigen::Matrix3d u = svd.matrixU();
  Eigen::Matrix3d r = v * u.transpose();
  if (r.determinant() < 0) {
    v.col(2) *= -1;
    s(2) *= -1;
    r = v * u.transpose();
  }
  const double a = s.sum() * nx / ny;
  const Eigen::RowVector3d t = mu_gt - a * mu_pred * r;
  return ((a * pred * r).rowwise() + t);
}

/// Per-frame, per-joint Euclidean errors (T x J).
inline std::vector<std::vector<double>> joint_errors(const PoseSequence3D& pred, const PoseSequence3D& gt,
                                                     bool aligned) {
  require(pred.frames == gt.frames, ErrorCode::LengthMismatch, "prediction and ground truth lengths differ");
  std::vector<std::vector<double>> err(pred.frames, std::vector<double>(PoseSequence3D::kRows));
  for (std::size_t t = 0; t < pred.frames; ++t) {
    const Joints3 g = frame_matrix(gt, t);
    const Joints3 p = aligned ? procrustes_align(frame_matrix(pred, t), g) : frame_matrix(pred, t);
    for (std::size_t j = 0; j < PoseSequence3D::kRows; ++j) err[t][j] = (p.row(static_cast<Eigen::Index>(j)) - g.row(static_cast<Eigen::Index>(j))).norm();
  }
  return err;
}

inline double mean_of(const std::vector<std::vector<double>>& e) {
  double s = 0.0;
  std::size_t n = 0;
  for (const auto& row : e)
    for (double v : row) {
      s += v;
      ++n;
    }
  return n ? s / static_cast<double>(n) : 0.0;
}

/// P1: mean per-joint position error.
inline double metric_p1(const PoseSequence3D& pred, const PoseSequence3D& gt) {
  return mean_of(joint_errors(pred, gt, false));
}

/// P2: per-frame similarity Procrustes alignment, then mean joint error,
/// averaged over frames.
inline double metric_p2(const PoseSequence3D& pred, const PoseSequence3D& gt) {
  return mean_of(joint_errors(pred, gt, true));
}

/// Percentage of errors strictly below each threshold.
inline std::map<double, double> metric_pck(const std::vector<double>& errors, const std::vector<double>& thresholds) {
  std::map<double, double> out;
  for (double th : thresholds) {
    require(th > 0, ErrorCode::InvalidArgument, "PCK thresholds must be positive");
    std::size_t hit = 0;
    for (double e : errors) hit += e < th ? 1 : 0;
    out[th] = errors.empty() ? 0.0 : 100.0 * static_cast<double>(hit) / static_cast<double>(errors.size());
  }
  return out;
}

inline const std::vector<double>& default_pck_thresholds() {
  static const std::vector<double> t = {25.0, 50.0};
  return t;
}

struct SequenceMetrics {
  std::string id;
  double p1_mm = 0, p2_mm = 0;
  std::map<double, double> pck;
  std::vector<double> per_joint_p1;  // joint order of skeleton::kJointNames
};

struct MetricReport {
  double p1_mm = 0, p2_mm = 0;
  std::map<double, double> pck;
  std::vector<double> per_joint_p1;
  std::vector<SequenceMetrics> sequences;

  nlohmann::json to_json() const {
    auto pck_json = [](const std::map<double, double>& m) {
      nlohmann::json j = nlohmann::json::object();
      for (const auto& [th, v] : m) j[std::to_string(static_cast<int>(th))] = v;
      return j;
    };
    auto joints_json = [](const std::vector<double>& v) {
      nlohmann::json j = nlohmann::json::object();
      for (std::size_t k = 0; k < v.size(); ++k) j[std::string(skeleton::kJointNames[k])] = v[k];
      return j;
    };
    nlohmann::json j = {{"p1_mm", p1_mm}, {"p2_mm", p2_mm}, {"pck", pck_json(pck)}, {"per_joint_p1", joints_json(per_joint_p1)}};
    j["sequences"] = nlohmann::json::array();
    for (const auto& s : sequences) {
      j["sequences"].push_back({{"id", s.id}, {"p1_mm", s.p1_mm}, {"p2_mm", s.p2_mm}, {"pck", pck_json(s.pck)},
                                {"per_joint_p1", joints_json(s.per_joint_p1)}});
    }
    return j;
  }

  /// Fixed columns: sequence id, p1, p2, pck25, pck50, per-joint p1. The last
  /// row ("ALL") holds the aggregate.
  std::string to_csv() const {
    std::ostringstream os;
    os.precision(17);
    os << "sequence_id,p1,p2,pck25,pck50";
    for (auto n : skeleton::kJointNames) os << ",p1_" << n;
    os << '\n';
    auto row = [&](const std::string& id, double p1, double p2, const std::map<double, double>& pck,
                   const std::vector<double>& joints) {
      auto at = [&](double th) {
        auto it = pck.find(th);
        return it == pck.end() ? 0.0 : it->second;
      };
      os << id << ',' << p1 << ',' << p2 << ',' << at(25.0) << ',' << at(50.0);
      for (double v : joints) os << ',' << v;
      os << '\n';
    };
    for (const auto& s : sequences) row(s.id, s.p1_mm, s.p2_mm, s.pck, s.per_joint_p1);
    row("ALL", p1_mm, p2_mm, pck, per_joint_p1);
    return os.str();
  }
};

/// Metrics over a set of (prediction, ground truth) pairs. Aggregates weight
/// every frame equally.
inline MetricReport build_report(const std::vector<std::string>& ids, const std::vector<PoseSequence3D>& preds,
                                 const std::vector<PoseSequence3D>& gts) {
  require(ids.size() == preds.size() && preds.size() == gts.size(), ErrorCode::LengthMismatch, "report inputs");
  require(!preds.empty(), ErrorCode::EmptyDataset, "no sequences to evaluate");
  const std::size_t J = PoseSequence3D::kRows;
  MetricReport r;
  r.per_joint_p1.assign(J, 0.0);
  std::vector<double> all_errors;
  double sum_p1 = 0, sum_p2 = 0;
  std::size_t frames = 0;
  for (std::size_t k = 0; k < preds.size(); ++k) {
    const auto e1 = joint_errors(preds[k], gts[k], false);
    const auto e2 = joint_errors(preds[k], gts[k], true);
    SequenceMetrics s;
    s.id = ids[k];
    s.p1_mm = mean_of(e1);
    s.p2_mm = mean_of(e2);
    s.per_joint_p1.assign(J, 0.0);
    std::vector<double> flat;
    for (const auto& row : e1) {
      for (std::size_t j = 0; j < J; ++j) {
        s.per_joint_p1[j] += row[j] / static_cast<double>(e1.size());
        r.per_joint_p1[j] += row[j];
      }
      flat.insert(flat.end(), row.begin(), row.end());
    }
    s.pck = metric_pck(flat, default_pck_thresholds());
    all_errors.insert(all_errors.end(), flat.begin(), flat.end());
    sum_p1 += s.p1_mm * static_cast<double>(e1.size());
    sum_p2 += s.p2_mm * static_cast<double>(e1.size());
    frames += e1.size();
    r.sequences.push_back(std::move(s));
  }
  r.p1_mm = sum_p1 / static_cast<double>(frames);
  r.p2_mm = sum_p2 / static_cast<double>(frames);
  for (double& v : r.per_joint_p1) v /= static_cast<double>(frames);
  r.pck = metric_pck(all_errors, default_pck_thresholds());
  return r;
}

}  // namespace vimcan::metrics
