#pragma once

#include <cstdint>
#include <string>

#include "vimcan/autodiff/ops.hpp"

namespace vimcan::nn {

using ad::Shape;
using ad::Tensor;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Hands out parameter leaves. Each draw gets its own seed derived from the
/// base seed and a running counter, so a fixed construction order yields a
/// fixed parameter set.
class ParamInit {
 public:
  static constexpr double kProjectionStd = 0.02;

  explicit ParamInit(std::uint64_t seed) : seed_(seed) {}

  Tensor normal(Shape shape, double stddev = kProjectionStd) {
    return ad::parameter(ad::seeded_randn(std::move(shape), splitmix64(seed_ ^ splitmix64(counter_++)), stddev));
  }
  Tensor constant(Shape shape, double value) {
    ++counter_;
    return ad::parameter(ad::full(std::move(shape), value));
  }
  Tensor from(Shape shape, std::span<const double> values) {
    ++counter_;
    return ad::parameter(ad::new_tensor(std::move(shape), values));
  }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

struct Linear {
  Tensor weight;  // [in, out]
  Tensor bias;    // [out]

  static Linear init(std::size_t in, std::size_t out, ParamInit& init) {
    return {init.normal({in, out}), init.constant({out}, 0.0)};
  }

  std::size_t in_features() const { return weight.dim(0); }
  std::size_t out_features() const { return weight.dim(1); }

  Tensor operator()(const Tensor& x) const { return ad::add(ad::matmul(x, weight), bias); }

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + ".weight", weight);
    f(prefix + ".bias", bias);
  }
};

struct LayerNorm {
  Tensor gamma;
  Tensor beta;

  static LayerNorm init(std::size_t d, ParamInit& init) { return {init.constant({d}, 1.0), init.constant({d}, 0.0)}; }

  Tensor operator()(const Tensor& x) const { return ad::layer_norm(x, gamma, beta, 1e-5); }

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + ".gamma", gamma);
    f(prefix + ".beta", beta);
  }
};

/// Two affine maps around a GELU.
struct Mlp {
  Linear fc1;
  Linear fc2;

  static Mlp init(std::size_t d, std::size_t hidden, ParamInit& init) {
    return {Linear::init(d, hidden, init), Linear::init(hidden, d, init)};
  }

  Tensor operator()(const Tensor& x) const { return fc2(ad::gelu(fc1(x))); }

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    fc1.visit(prefix + ".fc1", f);
    fc2.visit(prefix + ".fc2", f);
  }
};

}  // namespace vimcan::nn
