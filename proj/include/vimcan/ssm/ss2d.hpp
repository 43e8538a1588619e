#pragma once

#include <array>
#include <vector>

#include "vimcan/ssm/selective_scan.hpp"

namespace vimcan::ssm {

enum class Direction { SpatialForward = 0, SpatialReverse = 1, TemporalForward = 2, TemporalReverse = 3 };

using DirectionalParams = std::array<SsmParams, 4>;

inline void check_permutation(const std::vector<std::size_t>& order, std::size_t n) {
  require(order.size() == n, ErrorCode::BadPermutation,
          "spatial order has " + std::to_string(order.size()) + " entries for " + std::to_string(n) + " tokens");
  std::vector<bool> seen(n, false);
  for (std::size_t i : order) {
    require(i < n && !seen[i], ErrorCode::BadPermutation, "spatial order is not a permutation");
    seen[i] = true;
  }
}

inline std::vector<std::size_t> inverse_permutation(const std::vector<std::size_t>& order) {
  std::vector<std::size_t> inv(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) inv[order[i]] = i;
  return inv;
}

inline std::vector<std::size_t> identity_order(std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = i;
  return v;
}

/// One directional pass over x: [B, T, S, D], returned in original token
/// positions. Spatial passes scan each frame's S tokens (forward in `order`,
/// reverse in reversed `order`); temporal passes scan each token's T steps.
inline Tensor ss2d_direction(const Tensor& x, const SsmParams& p, Direction dir,
                             const std::vector<std::size_t>& order) {
  const std::size_t B = x.dim(0), T = x.dim(1), S = x.dim(2), D = x.dim(3);
  switch (dir) {
    case Direction::SpatialForward:
    case Direction::SpatialReverse: {
      std::vector<std::size_t> seq = order;
      if (dir == Direction::SpatialReverse) std::reverse(seq.begin(), seq.end());
      const Tensor gathered = ad::index_select(x, 2, seq);
      const Tensor y = selective_scan(ad::reshape(gathered, {B * T, S, D}), p);
      return ad::index_select(ad::reshape(y, {B, T, S, D}), 2, inverse_permutation(seq));
    }
    case Direction::TemporalForward:
    case Direction::TemporalReverse: {
      Tensor seq = ad::permute(x, {0, 2, 1, 3});  // [B, S, T, D]
      if (dir == Direction::TemporalReverse) seq = ad::flip(seq, 2);
      Tensor y = ad::reshape(selective_scan(ad::reshape(seq, {B * S, T, D}), p), {B, S, T, D});
      if (dir == Direction::TemporalReverse) y = ad::flip(y, 2);
      return ad::permute(y, {0, 2, 1, 3});
    }
  }
  fail(ErrorCode::InvalidArgument, "unknown scan direction");
}

/// Four-direction selective scan over a [B, T, S, D] token grid; the
/// directional outputs are summed in the fixed order sf, sr, tf, tr.
inline Tensor ss2d(const Tensor& x, const DirectionalParams& p, const std::vector<std::size_t>& spatial_order) {
  require(x.ndim() == 4, ErrorCode::ShapeMismatch, "ss2d input must be [B, T, S, D]");
  check_permutation(spatial_order, x.dim(2));
  Tensor acc = ss2d_direction(x, p[0], Direction::SpatialForward, spatial_order);
  acc = ad::add(acc, ss2d_direction(x, p[1], Direction::SpatialReverse, spatial_order));
  acc = ad::add(acc, ss2d_direction(x, p[2], Direction::TemporalForward, spatial_order));
  acc = ad::add(acc, ss2d_direction(x, p[3], Direction::TemporalReverse, spatial_order));
  return acc;
}

}  // namespace vimcan::ssm
