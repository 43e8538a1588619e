#pragma once

#include <cmath>
#include <numbers>

#include "vimcan/autodiff/tensor.hpp"

namespace vimcan::ad {

namespace detail {

/// Number of times `small` tiles `big` when `small.shape` is a suffix of
/// `big.shape`; 0 if it is not a suffix.
inline std::size_t suffix_repeats(const Shape& big, const Shape& small) {
  if (small.size() > big.size()) return 0;
  for (std::size_t i = 0; i < small.size(); ++i) {
    if (big[big.size() - small.size() + i] != small[i]) return 0;
  }
  return numel_of(big) / numel_of(small);
}

inline std::size_t norm_axis(std::ptrdiff_t axis, std::size_t ndim) {
  const auto n = static_cast<std::ptrdiff_t>(ndim);
  if (axis < 0) axis += n;
  require(axis >= 0 && axis < n, ErrorCode::ShapeMismatch, "axis out of range");
  return static_cast<std::size_t>(axis);
}

struct AxisSplit {
  std::size_t outer, len, inner;
};

inline AxisSplit split_at(const Shape& s, std::size_t axis) {
  AxisSplit r{1, s[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) r.outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
  return r;
}

enum class BinaryKind { Add, Sub, Mul };

inline Tensor binary(const Tensor& a, const Tensor& b, BinaryKind kind, const char* name) {
  const std::size_t reps = suffix_repeats(a.shape(), b.shape());
  require(reps > 0, ErrorCode::ShapeMismatch,
          std::string(name) + ": " + shape_str(b.shape()) + " does not broadcast onto " + shape_str(a.shape()));
  const std::size_t nb = b.numel();
  const auto& av = a.node().value;
  const auto& bv = b.node().value;
  Buffer out(av.size());
  for (std::size_t r = 0; r < reps; ++r) {
    const std::size_t off = r * nb;
    for (std::size_t i = 0; i < nb; ++i) {
      const double x = av[off + i], y = bv[i];
      out[off + i] = kind == BinaryKind::Add ? x + y : kind == BinaryKind::Sub ? x - y : x * y;
    }
  }
  return make_result(
      a.shape(), std::move(out), {a, b},
      [reps, nb, kind](Node& self) {
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        const auto& g = self.grad;
        if (pa.requires_grad) {
          auto& ga = pa.grad_buffer();
          for (std::size_t i = 0; i < g.size(); ++i) {
            ga[i] += kind == BinaryKind::Mul ? g[i] * pb.value[i % nb] : g[i];
          }
        }
        if (pb.requires_grad) {
          auto& gb = pb.grad_buffer();
          for (std::size_t r = 0; r < reps; ++r) {
            const std::size_t off = r * nb;
            for (std::size_t i = 0; i < nb; ++i) {
              const double gi = g[off + i];
              gb[i] += kind == BinaryKind::Add ? gi : kind == BinaryKind::Sub ? -gi : gi * pa.value[off + i];
            }
          }
        }
      },
      name);
}

}  // namespace detail

// Elementwise arithmetic. `b` may have the shape of any suffix of `a`'s shape
// and is then tiled over the leading axes.
inline Tensor add(const Tensor& a, const Tensor& b) { return detail::binary(a, b, detail::BinaryKind::Add, "add"); }
inline Tensor sub(const Tensor& a, const Tensor& b) { return detail::binary(a, b, detail::BinaryKind::Sub, "sub"); }
inline Tensor mul(const Tensor& a, const Tensor& b) { return detail::binary(a, b, detail::BinaryKind::Mul, "mul"); }

inline Tensor scale(const Tensor& a, double s) {
  Buffer out(a.node().value);
  for (double& v : out) v *= s;
  return detail::make_result(
      a.shape(), std::move(out), {a},
      [s](Node& self) {
        auto& ga = self.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += s * self.grad[i];
      },
      "scale");
}

inline Tensor add_scalar(const Tensor& a, double s) {
  Buffer out(a.node().value);
  for (double& v : out) v += s;
  return detail::make_result(
      a.shape(), std::move(out), {a},
      [](Node& self) {
        auto& ga = self.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i];
      },
      "add_scalar");
}

// ---------------------------------------------------------------------------
// Elementwise nonlinearities.
// ---------------------------------------------------------------------------
enum class UnaryKind { Silu, Sigmoid, Gelu, Softplus, Exp, Square };

namespace detail {
inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}
inline double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }
}  // namespace detail

inline Tensor unary(UnaryKind kind, const Tensor& x) {
  const auto& xv = x.node().value;
  Buffer out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) {
    const double v = xv[i];
    switch (kind) {
      case UnaryKind::Silu: out[i] = v * detail::sigmoid(v); break;
      case UnaryKind::Sigmoid: out[i] = detail::sigmoid(v); break;
      case UnaryKind::Gelu: out[i] = 0.5 * v * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0)); break;
      case UnaryKind::Softplus: out[i] = detail::softplus(v); break;
      case UnaryKind::Exp: out[i] = std::exp(v); break;
      case UnaryKind::Square: out[i] = v * v; break;
    }
  }
  return detail::make_result(
      x.shape(), std::move(out), {x},
      [kind](Node& self) {
        Node& p = *self.parents[0];
        auto& gp = p.grad_buffer();
        for (std::size_t i = 0; i < gp.size(); ++i) {
          const double v = p.value[i];
          double d = 0.0;
          switch (kind) {
            case UnaryKind::Silu: {
              const double s = detail::sigmoid(v);
              d = s * (1.0 + v * (1.0 - s));
              break;
            }
            case UnaryKind::Sigmoid: {
              const double s = self.value[i];
              d = s * (1.0 - s);
              break;
            }
            case UnaryKind::Gelu: {
              constexpr double kInvSqrt2Pi = 0.39894228040143267794;
              d = 0.5 * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0)) + v * kInvSqrt2Pi * std::exp(-0.5 * v * v);
              break;
            }
            case UnaryKind::Softplus: d = detail::sigmoid(v); break;
            case UnaryKind::Exp: d = self.value[i]; break;
            case UnaryKind::Square: d = 2.0 * v; break;
          }
          gp[i] += d * self.grad[i];
        }
      },
      "unary");
}

inline Tensor silu(const Tensor& x) { return unary(UnaryKind::Silu, x); }
inline Tensor sigmoid(const Tensor& x) { return unary(UnaryKind::Sigmoid, x); }
inline Tensor gelu(const Tensor& x) { return unary(UnaryKind::Gelu, x); }
inline Tensor softplus(const Tensor& x) { return unary(UnaryKind::Softplus, x); }
inline Tensor exp(const Tensor& x) { return unary(UnaryKind::Exp, x); }
inline Tensor square(const Tensor& x) { return unary(UnaryKind::Square, x); }

// ---------------------------------------------------------------------------
// Matrix product.
// ---------------------------------------------------------------------------

/// a: [..., m, k]. b: [k, n] (shared across the batch) or [..., k, n] with
/// the same leading extents as a. Result [..., m, n].
inline Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.ndim() >= 2 && b.ndim() >= 2, ErrorCode::ShapeMismatch, "matmul needs rank >= 2");
  const std::size_t m = a.dim(a.ndim() - 2), k = a.dim(a.ndim() - 1);
  const std::size_t kb = b.dim(b.ndim() - 2), n = b.dim(b.ndim() - 1);
  require(k == kb, ErrorCode::ShapeMismatch, "matmul " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  const bool shared = b.ndim() == 2;
  if (!shared) {
    require(b.ndim() == a.ndim() && std::equal(a.shape().begin(), a.shape().end() - 2, b.shape().begin()),
            ErrorCode::ShapeMismatch, "matmul batch " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  const std::size_t batch = a.numel() / (m * k);
  Shape out_shape(a.shape().begin(), a.shape().end() - 1);
  out_shape.push_back(n);

  const auto& av = a.node().value;
  const auto& bv = b.node().value;
  Buffer out(batch * m * n, 0.0);
  for (std::size_t q = 0; q < batch; ++q) {
    const double* A = av.data() + q * m * k;
    const double* B = bv.data() + (shared ? 0 : q * k * n);
    double* C = out.data() + q * m * n;
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t p = 0; p < k; ++p) {
        const double aip = A[i * k + p];
        const double* brow = B + p * n;
        double* crow = C + i * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
      }
    }
  }
  return detail::make_result(
      std::move(out_shape), std::move(out), {a, b},
      [batch, m, k, n, shared](Node& self) {
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        const auto& G = self.grad;
        for (std::size_t q = 0; q < batch; ++q) {
          const double* g = G.data() + q * m * n;
          const double* A = pa.value.data() + q * m * k;
          const double* B = pb.value.data() + (shared ? 0 : q * k * n);
          if (pa.requires_grad) {
            double* gA = pa.grad_buffer().data() + q * m * k;  // dA = G Bᵀ
            for (std::size_t i = 0; i < m; ++i)
              for (std::size_t p = 0; p < k; ++p) {
                double s = 0.0;
                for (std::size_t j = 0; j < n; ++j) s += g[i * n + j] * B[p * n + j];
                gA[i * k + p] += s;
              }
          }
          if (pb.requires_grad) {
            double* gB = pb.grad_buffer().data() + (shared ? 0 : q * k * n);  // dB = Aᵀ G
            for (std::size_t i = 0; i < m; ++i)
              for (std::size_t p = 0; p < k; ++p) {
                const double aip = A[i * k + p];
                for (std::size_t j = 0; j < n; ++j) gB[p * n + j] += aip * g[i * n + j];
              }
          }
        }
      },
      "matmul");
}

// ---------------------------------------------------------------------------
// Normalization and softmax over the last axis.
// ---------------------------------------------------------------------------
inline Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5) {
  require(eps > 0, ErrorCode::InvalidArgument, "layer_norm eps must be positive");
  const std::size_t d = x.dim(x.ndim() - 1);
  require(gamma.numel() == d && beta.numel() == d && gamma.ndim() == 1 && beta.ndim() == 1,
          ErrorCode::ShapeMismatch, "layer_norm affine extents must equal last extent " + std::to_string(d));
  const std::size_t rows = x.numel() / d;
  const auto& xv = x.node().value;
  const auto& gv = gamma.node().value;
  const auto& bv = beta.node().value;
  Buffer out(xv.size());
  Buffer xhat(xv.size());
  Buffer rstd(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = xv.data() + r * d;
    double mean = 0.0;
    for (std::size_t i = 0; i < d; ++i) mean += xr[i];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t i = 0; i < d; ++i) var += (xr[i] - mean) * (xr[i] - mean);
    var /= static_cast<double>(d);
    const double rs = 1.0 / std::sqrt(var + eps);
    rstd[r] = rs;
    for (std::size_t i = 0; i < d; ++i) {
      const double h = (xr[i] - mean) * rs;
      xhat[r * d + i] = h;
      out[r * d + i] = h * gv[i] + bv[i];
    }
  }
  return detail::make_result(
      x.shape(), std::move(out), {x, gamma, beta},
      [rows, d, xhat = std::move(xhat), rstd = std::move(rstd)](Node& self) {
        Node& px = *self.parents[0];
        Node& pg = *self.parents[1];
        Node& pb = *self.parents[2];
        const auto& G = self.grad;
        const auto& gam = pg.value;
        for (std::size_t r = 0; r < rows; ++r) {
          const double* g = G.data() + r * d;
          const double* h = xhat.data() + r * d;
          if (pg.requires_grad) {
            auto& gg = pg.grad_buffer();
            for (std::size_t i = 0; i < d; ++i) gg[i] += g[i] * h[i];
          }
          if (pb.requires_grad) {
            auto& gb = pb.grad_buffer();
            for (std::size_t i = 0; i < d; ++i) gb[i] += g[i];
          }
          if (px.requires_grad) {
            double m1 = 0.0, m2 = 0.0;
            for (std::size_t i = 0; i < d; ++i) {
              const double gh = g[i] * gam[i];
              m1 += gh;
              m2 += gh * h[i];
            }
            m1 /= static_cast<double>(d);
            m2 /= static_cast<double>(d);
            double* gx = px.grad_buffer().data() + r * d;
            for (std::size_t i = 0; i < d; ++i) gx[i] += rstd[r] * (g[i] * gam[i] - m1 - h[i] * m2);
          }
        }
      },
      "layer_norm");
}

inline Tensor softmax_last(const Tensor& x) {
  const std::size_t d = x.dim(x.ndim() - 1);
  const std::size_t rows = x.numel() / d;
  const auto& xv = x.node().value;
  Buffer out(xv.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = xv.data() + r * d;
    double* yr = out.data() + r * d;
    const double mx = *std::max_element(xr, xr + d);
    double z = 0.0;
    for (std::size_t i = 0; i < d; ++i) z += (yr[i] = std::exp(xr[i] - mx));
    for (std::size_t i = 0; i < d; ++i) yr[i] /= z;
  }
  return detail::make_result(
      x.shape(), std::move(out), {x},
      [rows, d](Node& self) {
        auto& gx = self.parents[0]->grad_buffer();
        for (std::size_t r = 0; r < rows; ++r) {
          const double* y = self.value.data() + r * d;
          const double* g = self.grad.data() + r * d;
          double dot = 0.0;
          for (std::size_t i = 0; i < d; ++i) dot += g[i] * y[i];
          for (std::size_t i = 0; i < d; ++i) gx[r * d + i] += y[i] * (g[i] - dot);
        }
      },
      "softmax_last");
}

/// Euclidean norm over the last axis; the derivative at a zero vector is
/// taken as zero.
inline Tensor norm_last(const Tensor& x) {
  const std::size_t d = x.dim(x.ndim() - 1);
  const std::size_t rows = x.numel() / d;
  Shape out_shape(x.shape().begin(), x.shape().end() - 1);
  if (out_shape.empty()) out_shape.push_back(1);
  const auto& xv = x.node().value;
  Buffer out(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t i = 0; i < d; ++i) s += xv[r * d + i] * xv[r * d + i];
    out[r] = std::sqrt(s);
  }
  return detail::make_result(
      std::move(out_shape), std::move(out), {x},
      [rows, d](Node& self) {
        Node& p = *self.parents[0];
        auto& gx = p.grad_buffer();
        for (std::size_t r = 0; r < rows; ++r) {
          const double nrm = self.value[r];
          if (nrm == 0.0) continue;
          const double f = self.grad[r] / nrm;
          for (std::size_t i = 0; i < d; ++i) gx[r * d + i] += f * p.value[r * d + i];
        }
      },
      "norm_last");
}

// ---------------------------------------------------------------------------
// Reductions.
// ---------------------------------------------------------------------------
inline Tensor sum(const Tensor& x) {
  Buffer out(1, x.sum());
  return detail::make_result(
      {1}, std::move(out), {x},
      [](Node& self) {
        auto& gx = self.parents[0]->grad_buffer();
        for (double& g : gx) g += self.grad[0];
      },
      "sum");
}

inline Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.numel())); }

/// Sum over one axis. With keepdim the axis stays with extent 1.
inline Tensor sum_axis(const Tensor& x, std::ptrdiff_t axis_in, bool keepdim = false) {
  const std::size_t axis = detail::norm_axis(axis_in, x.ndim());
  const auto sp = detail::split_at(x.shape(), axis);
  Shape out_shape = x.shape();
  if (keepdim || x.ndim() == 1) {
    out_shape[axis] = 1;
  } else {
    out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  }
  const auto& xv = x.node().value;
  Buffer out(sp.outer * sp.inner, 0.0);
  for (std::size_t o = 0; o < sp.outer; ++o)
    for (std::size_t l = 0; l < sp.len; ++l)
      for (std::size_t i = 0; i < sp.inner; ++i) out[o * sp.inner + i] += xv[(o * sp.len + l) * sp.inner + i];
  return detail::make_result(
      std::move(out_shape), std::move(out), {x},
      [sp](Node& self) {
        auto& gx = self.parents[0]->grad_buffer();
        for (std::size_t o = 0; o < sp.outer; ++o)
          for (std::size_t l = 0; l < sp.len; ++l)
            for (std::size_t i = 0; i < sp.inner; ++i) gx[(o * sp.len + l) * sp.inner + i] += self.grad[o * sp.inner + i];
      },
      "sum_axis");
}

// ---------------------------------------------------------------------------
// Shape manipulation.
// ---------------------------------------------------------------------------
inline Tensor reshape(const Tensor& x, Shape shape) {
  require(numel_of(shape) == x.numel(), ErrorCode::ShapeMismatch,
          "reshape " + shape_str(x.shape()) + " -> " + shape_str(shape));
  Buffer out(x.node().value);
  return detail::make_result(
      std::move(shape), std::move(out), {x},
      [](Node& self) {
        auto& gx = self.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += self.grad[i];
      },
      "reshape");
}

/// Output axis i is input axis `axes[i]`.
inline Tensor permute(const Tensor& x, const std::vector<std::size_t>& axes) {
  const std::size_t nd = x.ndim();
  require(axes.size() == nd, ErrorCode::ShapeMismatch, "permute rank");
  std::vector<bool> seen(nd, false);
  for (std::size_t a : axes) {
    require(a < nd && !seen[a], ErrorCode::BadPermutation, "permute axes");
    seen[a] = true;
  }
  const Shape& in = x.shape();
  std::vector<std::size_t> in_stride(nd, 1);
  for (std::size_t i = nd - 1; i > 0; --i) in_stride[i - 1] = in_stride[i] * in[i];
  Shape out_shape(nd);
  std::vector<std::size_t> src_stride(nd);
  for (std::size_t i = 0; i < nd; ++i) {
    out_shape[i] = in[axes[i]];
    src_stride[i] = in_stride[axes[i]];
  }
  // map[out_flat] = in_flat
  std::vector<std::size_t> map(x.numel());
  std::vector<std::size_t> idx(nd, 0);
  std::size_t src = 0;
  for (std::size_t f = 0; f < map.size(); ++f) {
    map[f] = src;
    for (std::size_t ax = nd; ax-- > 0;) {
      if (++idx[ax] < out_shape[ax]) {
        src += src_stride[ax];
        break;
      }
      src -= src_stride[ax] * (out_shape[ax] - 1);
      idx[ax] = 0;
    }
  }
  const auto& xv = x.node().value;
  Buffer out(map.size());
  for (std::size_t f = 0; f < map.size(); ++f) out[f] = xv[map[f]];
  return detail::make_result(
      std::move(out_shape), std::move(out), {x},
      [map = std::move(map)](Node& self) {
        auto& gx = self.parents[0]->grad_buffer();
        for (std::size_t f = 0; f < map.size(); ++f) gx[map[f]] += self.grad[f];
      },
      "permute");
}

/// Gathers entries along `axis`; indices may repeat (the backward pass
/// scatter-adds).
inline Tensor index_select(const Tensor& x, std::ptrdiff_t axis_in, const std::vector<std::size_t>& index) {
  const std::size_t axis = detail::norm_axis(axis_in, x.ndim());
  require(!index.empty(), ErrorCode::ShapeMismatch, "index_select with no indices");
  const auto sp = detail::split_at(x.shape(), axis);
  for (std::size_t i : index) require(i < sp.len, ErrorCode::ShapeMismatch, "index_select index out of range");
  Shape out_shape = x.shape();
  out_shape[axis] = index.size();
  const std::size_t nl = index.size();
  const auto& xv = x.node().value;
  Buffer out(sp.outer * nl * sp.inner);
  for (std::size_t o = 0; o < sp.outer; ++o)
    for (std::size_t l = 0; l < nl; ++l)
      std::copy_n(xv.data() + (o * sp.len + index[l]) * sp.inner, sp.inner, out.data() + (o * nl + l) * sp.inner);
  return detail::make_result(
      std::move(out_shape), std::move(out), {x},
      [sp, index](Node& self) {
        auto& gx = self.parents[0]->grad_buffer();
        const std::size_t nl = index.size();
        for (std::size_t o = 0; o < sp.outer; ++o)
          for (std::size_t l = 0; l < nl; ++l) {
            const double* g = self.grad.data() + (o * nl + l) * sp.inner;
            double* dst = gx.data() + (o * sp.len + index[l]) * sp.inner;
            for (std::size_t i = 0; i < sp.inner; ++i) dst[i] += g[i];
          }
      },
      "index_select");
}

inline Tensor flip(const Tensor& x, std::ptrdiff_t axis_in) {
  const std::size_t axis = detail::norm_axis(axis_in, x.ndim());
  std::vector<std::size_t> idx(x.dim(axis));
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = idx.size() - 1 - i;
  return index_select(x, static_cast<std::ptrdiff_t>(axis), idx);
}

inline Tensor slice(const Tensor& x, std::ptrdiff_t axis_in, std::size_t start, std::size_t length) {
  const std::size_t axis = detail::norm_axis(axis_in, x.ndim());
  require(length > 0 && start + length <= x.dim(axis), ErrorCode::ShapeMismatch,
          "slice [" + std::to_string(start) + ", +" + std::to_string(length) + ") of " + shape_str(x.shape()));
  std::vector<std::size_t> idx(length);
  std::iota(idx.begin(), idx.end(), start);
  return index_select(x, static_cast<std::ptrdiff_t>(axis), idx);
}

inline Tensor concat(const std::vector<Tensor>& parts, std::ptrdiff_t axis_in) {
  require(!parts.empty(), ErrorCode::ShapeMismatch, "concat of nothing");
  const std::size_t axis = detail::norm_axis(axis_in, parts[0].ndim());
  Shape out_shape = parts[0].shape();
  out_shape[axis] = 0;
  std::vector<std::size_t> lens;
  for (const auto& p : parts) {
    Shape s = p.shape();
    require(s.size() == out_shape.size(), ErrorCode::ShapeMismatch, "concat rank");
    lens.push_back(s[axis]);
    s[axis] = 0;
    require(s == [&] { Shape t = out_shape; t[axis] = 0; return t; }(), ErrorCode::ShapeMismatch,
            "concat extents " + shape_str(p.shape()));
    out_shape[axis] += lens.back();
  }
  const auto sp = detail::split_at(out_shape, axis);
  Buffer out(numel_of(out_shape));
  std::size_t base = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto& v = parts[k].node().value;
    const std::size_t chunk = lens[k] * sp.inner;
    for (std::size_t o = 0; o < sp.outer; ++o)
      std::copy_n(v.data() + o * chunk, chunk, out.data() + (o * sp.len + base) * sp.inner);
    base += lens[k];
  }
  return detail::make_result(
      std::move(out_shape), std::move(out), parts,
      [sp, lens](Node& self) {
        std::size_t base = 0;
        for (std::size_t k = 0; k < lens.size(); ++k) {
          Node& p = *self.parents[k];
          const std::size_t chunk = lens[k] * sp.inner;
          if (p.requires_grad) {
            auto& g = p.grad_buffer();
            for (std::size_t o = 0; o < sp.outer; ++o) {
              const double* src = self.grad.data() + (o * sp.len + base) * sp.inner;
              for (std::size_t i = 0; i < chunk; ++i) g[o * chunk + i] += src[i];
            }
          }
          base += lens[k];
        }
      },
      "concat");
}

// ---------------------------------------------------------------------------
// Depthwise 1D convolution along the second-to-last axis.
// ---------------------------------------------------------------------------

/// x: [..., L, D]; kernels: [D, k] with k odd; optional bias [D]. Zero
/// same-padding, centered (non-causal) taps, output [..., L, D].
inline Tensor depthwise_conv1d(const Tensor& x, const Tensor& kernels, const Tensor* bias = nullptr) {
  require(x.ndim() >= 2, ErrorCode::ShapeMismatch, "depthwise_conv1d needs [..., L, D]");
  const std::size_t L = x.dim(x.ndim() - 2), D = x.dim(x.ndim() - 1);
  require(kernels.ndim() == 2 && kernels.dim(0) == D, ErrorCode::ShapeMismatch,
          "kernels must be [D, k] with D = " + std::to_string(D));
  const std::size_t k = kernels.dim(1);
  require(k % 2 == 1, ErrorCode::EvenKernel, "kernel width " + std::to_string(k) + " is even");
  if (bias) require(bias->ndim() == 1 && bias->numel() == D, ErrorCode::ShapeMismatch, "conv bias extent");
  const std::size_t batch = x.numel() / (L * D);
  const auto half = static_cast<std::ptrdiff_t>(k / 2);
  const auto& xv = x.node().value;
  const auto& wv = kernels.node().value;
  Buffer out(xv.size(), 0.0);
  for (std::size_t b = 0; b < batch; ++b) {
    const double* X = xv.data() + b * L * D;
    double* Y = out.data() + b * L * D;
    for (std::size_t t = 0; t < L; ++t) {
      for (std::size_t j = 0; j < k; ++j) {
        const std::ptrdiff_t s = static_cast<std::ptrdiff_t>(t) + static_cast<std::ptrdiff_t>(j) - half;
        if (s < 0 || s >= static_cast<std::ptrdiff_t>(L)) continue;
        const double* xs = X + static_cast<std::size_t>(s) * D;
        for (std::size_t d = 0; d < D; ++d) Y[t * D + d] += wv[d * k + j] * xs[d];
      }
      if (bias) {
        for (std::size_t d = 0; d < D; ++d) Y[t * D + d] += bias->node().value[d];
      }
    }
  }
  std::vector<Tensor> inputs{x, kernels};
  if (bias) inputs.push_back(*bias);
  return detail::make_result(
      x.shape(), std::move(out), std::move(inputs),
      [batch, L, D, k, half](Node& self) {
        Node& px = *self.parents[0];
        Node& pw = *self.parents[1];
        Node* pb = self.parents.size() > 2 ? self.parents[2].get() : nullptr;
        for (std::size_t b = 0; b < batch; ++b) {
          const double* G = self.grad.data() + b * L * D;
          const double* X = px.value.data() + b * L * D;
          for (std::size_t t = 0; t < L; ++t) {
            for (std::size_t j = 0; j < k; ++j) {
              const std::ptrdiff_t s = static_cast<std::ptrdiff_t>(t) + static_cast<std::ptrdiff_t>(j) - half;
              if (s < 0 || s >= static_cast<std::ptrdiff_t>(L)) continue;
              const std::size_t su = static_cast<std::size_t>(s);
              if (px.requires_grad) {
                double* gx = px.grad_buffer().data() + b * L * D + su * D;
                for (std::size_t d = 0; d < D; ++d) gx[d] += pw.value[d * k + j] * G[t * D + d];
              }
              if (pw.requires_grad) {
                auto& gw = pw.grad_buffer();
                for (std::size_t d = 0; d < D; ++d) gw[d * k + j] += X[su * D + d] * G[t * D + d];
              }
            }
            if (pb && pb->requires_grad) {
              auto& gb = pb->grad_buffer();
              for (std::size_t d = 0; d < D; ++d) gb[d] += G[t * D + d];
            }
          }
        }
      },
      "depthwise_conv1d");
}

}  // namespace vimcan::ad
