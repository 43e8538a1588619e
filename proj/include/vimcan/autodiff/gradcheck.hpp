#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "vimcan/autodiff/tensor.hpp"

namespace vimcan::ad {

struct GradcheckOptions {
  double eps = 1e-6;
  // Coordinates probed per tensor; 0 probes all of them. Sampled ones are
  // drawn without replacement from a seeded stream.
  std::size_t max_coords_per_tensor = 0;
  std::uint64_t seed = 0;
  double denominator_floor = 1e-8;
  // Optional floor proportional to the largest gradient magnitude. Needed when
  // some coordinates have gradients below the rounding noise of the
  // difference quotient.
  double relative_floor = 0.0;
  // 2: (f(+h) - f(-h)) / 2h. 4: fourth-order central stencil, which allows a
  // larger h (less cancellation) at the same truncation error.
  int stencil = 2;
};

struct GradProbe {
  std::size_t tensor = 0;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

struct GradcheckResult {
  double max_rel_error = 0.0;
  std::size_t coords_checked = 0;
  double floor = 0.0;  // denominator floor actually used
  // Location of the worst coordinate.
  std::size_t worst_tensor = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::vector<GradProbe> probes;
};

/// Compares reverse-mode gradients of `f` against central differences.
/// `f` must rebuild its graph from the current values of `params` on every
/// call; values are perturbed in place and restored exactly afterwards.
inline GradcheckResult finite_diff_check(const std::function<Tensor()>& f, std::vector<Tensor> params,
                                         const GradcheckOptions& opt = {}) {
  require(opt.eps >= 1e-7 && opt.eps <= 1e-3, ErrorCode::InvalidArgument,
          "eps must lie in [1e-7, 1e-3], got " + std::to_string(opt.eps));
  require(opt.stencil == 2 || opt.stencil == 4, ErrorCode::InvalidArgument, "stencil must be 2 or 4");
  for (auto& p : params) p.set_requires_grad(true);

  const Tensor loss = f();
  const double f0 = loss.item();
  const Gradients grads = backward(loss);
  {
    NoGradGuard ng;
    const double again = f().item();
    require(again == f0, ErrorCode::NonDeterministicFunction, "two evaluations at the same point disagree");
  }

  GradcheckResult res;
  double gmax = 0.0;
  for (const auto& p : params)
    if (grads.contains(p))
      for (double v : grads.at(p).data()) gmax = std::max(gmax, std::abs(v));
  res.floor = std::max(opt.denominator_floor, opt.relative_floor * gmax);
  std::mt19937_64 rng(opt.seed);
  NoGradGuard ng;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = params[k];
    std::vector<double> g(p.numel(), 0.0);
    if (grads.contains(p)) {
      const auto gd = grads.at(p).data();
      std::copy(gd.begin(), gd.end(), g.begin());
    }
    std::vector<std::size_t> coords(p.numel());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (opt.max_coords_per_tensor > 0 && coords.size() > opt.max_coords_per_tensor) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(opt.max_coords_per_tensor);
      std::sort(coords.begin(), coords.end());
    }
    auto values = p.mutable_data();
    for (std::size_t i : coords) {
      const double orig = values[i];
      auto at = [&](double h) {
        values[i] = orig + h;
        const double v = f().item();
        values[i] = orig;
        return v;
      };
      const double h = opt.eps;
      double numeric = (at(h) - at(-h)) / (2.0 * h);
      if (opt.stencil == 4) numeric = (4.0 * numeric - (at(2 * h) - at(-2 * h)) / (4.0 * h)) / 3.0;
      const double rel = std::abs(numeric - g[i]) / std::max(std::abs(g[i]), res.floor);
      ++res.coords_checked;
      res.probes.push_back({k, i, g[i], numeric});
      if (rel > res.max_rel_error || res.coords_checked == 1) {
        res.max_rel_error = rel;
        res.worst_tensor = k;
        res.worst_index = i;
        res.worst_analytic = g[i];
        res.worst_numeric = numeric;
      }
    }
  }
  return res;
}

}  // namespace vimcan::ad
