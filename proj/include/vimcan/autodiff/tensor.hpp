#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "vimcan/error.hpp"

namespace vimcan::ad {

using Shape = std::vector<std::size_t>;

inline std::size_t numel_of(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ']';
  return os.str();
}

// ---------------------------------------------------------------------------
// Memory accounting. Only tensor payload bytes (values and gradients) are
// tracked; graph bookkeeping is not.
// ---------------------------------------------------------------------------
class MemoryStats {
 public:
  static std::size_t live_bytes() { return live().load(std::memory_order_relaxed); }
  static std::size_t peak_bytes() { return peak().load(std::memory_order_relaxed); }

  static void on_alloc(std::size_t bytes) {
    const std::size_t now = live().fetch_add(bytes, std::memory_order_relaxed) + bytes;
    std::size_t prev = peak().load(std::memory_order_relaxed);
    while (now > prev && !peak().compare_exchange_weak(prev, now, std::memory_order_relaxed)) {
    }
  }
  static void on_free(std::size_t bytes) { live().fetch_sub(bytes, std::memory_order_relaxed); }

  // Peak restarts from the current live count.
  static void reset_peak() { peak().store(live_bytes(), std::memory_order_relaxed); }

 private:
  static std::atomic<std::size_t>& live() {
    static std::atomic<std::size_t> v{0};
    return v;
  }
  static std::atomic<std::size_t>& peak() {
    static std::atomic<std::size_t> v{0};
    return v;
  }
};

template <class T>
struct TrackingAllocator {
  using value_type = T;
  TrackingAllocator() noexcept = default;
  template <class U>
  TrackingAllocator(const TrackingAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) {
    T* p = std::allocator<T>{}.allocate(n);
    MemoryStats::on_alloc(n * sizeof(T));
    return p;
  }
  void deallocate(T* p, std::size_t n) noexcept {
    MemoryStats::on_free(n * sizeof(T));
    std::allocator<T>{}.deallocate(p, n);
  }
  template <class U>
  bool operator==(const TrackingAllocator<U>&) const noexcept { return true; }
};

using Buffer = std::vector<double, TrackingAllocator<double>>;

// ---------------------------------------------------------------------------
// Execution flags.
// ---------------------------------------------------------------------------
namespace detail {
inline bool& grad_enabled_flag() {
  thread_local bool enabled = true;
  return enabled;
}
inline std::atomic<bool>& checked_flag() {
  static std::atomic<bool> checked{true};
  return checked;
}
inline std::uint64_t next_node_id() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}
}  // namespace detail

inline bool grad_enabled() { return detail::grad_enabled_flag(); }

/// Disables graph recording for the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard() : prev_(detail::grad_enabled_flag()) { detail::grad_enabled_flag() = false; }
  ~NoGradGuard() { detail::grad_enabled_flag() = prev_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

/// Checked mode scans every op output for NaN/Inf.
inline bool checked_mode() { return detail::checked_flag().load(std::memory_order_relaxed); }
inline void set_checked_mode(bool on) { detail::checked_flag().store(on, std::memory_order_relaxed); }

class CheckedModeGuard {
 public:
  explicit CheckedModeGuard(bool on) : prev_(checked_mode()) { set_checked_mode(on); }
  ~CheckedModeGuard() { set_checked_mode(prev_); }
  CheckedModeGuard(const CheckedModeGuard&) = delete;
  CheckedModeGuard& operator=(const CheckedModeGuard&) = delete;

 private:
  bool prev_;
};

// ---------------------------------------------------------------------------
// Graph node and tensor handle.
// ---------------------------------------------------------------------------
struct Node {
  Shape shape;
  Buffer value;
  Buffer grad;  // empty until the reverse pass reaches the node
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;
  bool requires_grad = false;
  std::uint64_t id = detail::next_node_id();

  bool is_leaf() const { return !backward_fn; }

  Buffer& grad_buffer() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> n) : node_(std::move(n)) {}

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t ndim() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t numel() const { return node_->value.size(); }
  std::uint64_t id() const { return node_->id; }

  std::span<const double> data() const { return {node_->value.data(), node_->value.size()}; }
  // Direct writes bypass the graph; intended for parameter updates and
  // finite-difference perturbation of leaves.
  std::span<double> mutable_data() { return {node_->value.data(), node_->value.size()}; }

  double item() const {
    require(numel() == 1, ErrorCode::ShapeMismatch, "item() on tensor of shape " + shape_str(shape()));
    return node_->value[0];
  }

  double at(std::initializer_list<std::size_t> index) const {
    require(index.size() == ndim(), ErrorCode::ShapeMismatch, "index rank");
    std::size_t flat = 0;
    std::size_t axis = 0;
    for (std::size_t i : index) {
      require(i < dim(axis), ErrorCode::ShapeMismatch, "index out of range");
      flat = flat * dim(axis) + i;
      ++axis;
    }
    return node_->value[flat];
  }

  bool requires_grad() const { return node_->requires_grad; }
  Tensor& set_requires_grad(bool on) {
    node_->requires_grad = on;
    return *this;
  }

  double sum() const { return std::accumulate(node_->value.begin(), node_->value.end(), 0.0); }

  std::vector<double> to_vector() const { return {node_->value.begin(), node_->value.end()}; }

  Node& node() const { return *node_; }
  const std::shared_ptr<Node>& node_ptr() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

inline void check_finite(std::span<const double> values, ErrorCode code, const char* what) {
  for (double v : values) {
    if (!std::isfinite(v)) fail(code, std::string(what) + " produced a non-finite value");
  }
}

inline Tensor new_tensor(Shape shape, std::span<const double> data) {
  for (std::size_t e : shape) require(e > 0, ErrorCode::ShapeMismatch, "zero extent in " + shape_str(shape));
  require(numel_of(shape) == data.size(), ErrorCode::ShapeMismatch,
          "shape " + shape_str(shape) + " needs " + std::to_string(numel_of(shape)) + " elements, got " +
              std::to_string(data.size()));
  check_finite(data, ErrorCode::NonFiniteInput, "new_tensor");
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value.assign(data.begin(), data.end());
  return Tensor(std::move(n));
}

inline Tensor new_tensor(Shape shape, std::initializer_list<double> data) {
  return new_tensor(std::move(shape), std::span<const double>(data.begin(), data.size()));
}

inline Tensor full(Shape shape, double value) {
  for (std::size_t e : shape) require(e > 0, ErrorCode::ShapeMismatch, "zero extent in " + shape_str(shape));
  require(std::isfinite(value), ErrorCode::NonFiniteInput, "full");
  auto n = std::make_shared<Node>();
  n->value.assign(numel_of(shape), value);
  n->shape = std::move(shape);
  return Tensor(std::move(n));
}

inline Tensor zeros(Shape shape) { return full(std::move(shape), 0.0); }
inline Tensor ones(Shape shape) { return full(std::move(shape), 1.0); }
inline Tensor scalar(double v) { return full({1}, v); }

inline Tensor parameter(Tensor t) {
  t.set_requires_grad(true);
  return t;
}

/// Standard normal stream: mt19937_64 feeding Box-Muller. Both halves of each
/// pair are used, so the stream is fully determined by the seed.
class GaussianStream {
 public:
  explicit GaussianStream(std::uint64_t seed) : engine_(seed) {}

  double next() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    constexpr double kTwoPi = 6.283185307179586476925286766559;
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(kTwoPi * u2);
    has_spare_ = true;
    return r * std::cos(kTwoPi * u2);
  }

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

inline Tensor seeded_randn(Shape shape, std::uint64_t seed, double stddev) {
  require(stddev > 0 && std::isfinite(stddev), ErrorCode::InvalidArgument, "seeded_randn needs stddev > 0");
  GaussianStream g(seed);
  std::vector<double> v(numel_of(shape));
  for (double& x : v) x = stddev * g.next();
  return new_tensor(std::move(shape), v);
}

/// A copy of `t` with no graph history.
inline Tensor detach(const Tensor& t) {
  auto n = std::make_shared<Node>();
  n->shape = t.shape();
  n->value = t.node().value;
  return Tensor(std::move(n));
}

namespace detail {

/// Wraps a freshly computed value into a tensor, wiring it into the graph when
/// recording is on and some input needs a gradient.
inline Tensor make_result(Shape shape, Buffer value, std::vector<Tensor> inputs,
                          std::function<void(Node&)> backward, const char* op) {
  if (checked_mode()) check_finite({value.data(), value.size()}, ErrorCode::NonFiniteValue, op);
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  if (grad_enabled()) {
    bool any = false;
    for (const auto& t : inputs) any = any || t.requires_grad();
    if (any) {
      n->requires_grad = true;
      n->parents.reserve(inputs.size());
      for (auto& t : inputs) n->parents.push_back(t.node_ptr());
      n->backward_fn = std::move(backward);
    }
  }
  return Tensor(std::move(n));
}

inline Buffer make_buffer(std::size_t n, double fill = 0.0) { return Buffer(n, fill); }

}  // namespace detail

// ---------------------------------------------------------------------------
// Reverse pass.
// ---------------------------------------------------------------------------

/// Gradients keyed by leaf node id.
class Gradients {
 public:
  void set(std::uint64_t id, Tensor g) { grads_.insert_or_assign(id, std::move(g)); }
  bool contains(const Tensor& t) const { return grads_.count(t.id()) > 0; }
  const Tensor& at(const Tensor& t) const {
    auto it = grads_.find(t.id());
    require(it != grads_.end(), ErrorCode::DetachedGraph, "no gradient reached this tensor");
    return it->second;
  }
  std::size_t size() const { return grads_.size(); }

 private:
  std::map<std::uint64_t, Tensor> grads_;
};

/// Topological order of the recorded graph feeding `root`, inputs first.
/// Iterative DFS with parents visited in recorded order, so the order (and
/// hence gradient accumulation order) is deterministic.
inline std::vector<Node*> topological_order(Node& root) {
  std::vector<Node*> order;
  std::vector<std::pair<Node*, std::size_t>> stack;
  std::map<Node*, int> state;  // 1 = on stack, 2 = done
  stack.emplace_back(&root, 0);
  state[&root] = 1;
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node* p = n->parents[next++].get();
      if (!p->requires_grad) continue;
      auto it = state.find(p);
      if (it == state.end()) {
        state[p] = 1;
        stack.emplace_back(p, 0);
      } else if (it->second == 1) {
        fail(ErrorCode::InvalidArgument, "cycle in gradient graph");
      }
    } else {
      state[n] = 2;
      order.push_back(n);
      stack.pop_back();
    }
  }
  return order;
}

inline Gradients backward(const Tensor& loss) {
  require(loss.defined(), ErrorCode::DetachedGraph, "undefined loss");
  require(loss.numel() == 1, ErrorCode::NonScalarLoss, "loss has shape " + shape_str(loss.shape()));
  require(loss.requires_grad(), ErrorCode::DetachedGraph, "loss is not connected to any parameter");

  auto order = topological_order(loss.node());
  loss.node().grad_buffer()[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
  }

  Gradients out;
  for (Node* n : order) {
    if (n->is_leaf()) {
      auto g = std::make_shared<Node>();
      g->shape = n->shape;
      g->value = n->grad.empty() ? Buffer(n->value.size(), 0.0) : std::move(n->grad);
      out.set(n->id, Tensor(std::move(g)));
    }
  }
  // Consume the graph: intermediate nodes drop their history and gradients.
  for (Node* n : order) {
    n->grad.clear();
    n->grad.shrink_to_fit();
    if (!n->is_leaf()) {
      n->backward_fn = nullptr;
      n->parents.clear();
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Peak memory scope.
// ---------------------------------------------------------------------------
namespace detail {
inline std::atomic<bool>& scope_active() {
  static std::atomic<bool> active{false};
  return active;
}
}  // namespace detail

template <class F>
struct ScopeResult {
  std::invoke_result_t<F> result;
  std::size_t peak_bytes;
};

/// Runs `f` and reports the peak tracked payload bytes above the live count at
/// entry. Scopes do not nest and must not overlap other tracked work.
template <class F>
auto peak_memory_scope(F&& f) {
  bool expected = false;
  if (!detail::scope_active().compare_exchange_strong(expected, true)) {
    fail(ErrorCode::NestedScope, "peak_memory_scope is already active");
  }
  struct Release {
    ~Release() { detail::scope_active().store(false); }
  } release;
  const std::size_t base = MemoryStats::live_bytes();
  MemoryStats::reset_peak();
  auto result = std::forward<F>(f)();
  const std::size_t peak = MemoryStats::peak_bytes();
  return ScopeResult<F>{std::move(result), peak > base ? peak - base : 0};
}

}  // namespace vimcan::ad
