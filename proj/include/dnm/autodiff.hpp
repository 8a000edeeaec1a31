#ifndef DNM_AUTODIFF_HPP
#define DNM_AUTODIFF_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dnm/error.hpp"
#include "dnm/tensor.hpp"

namespace dnm {

class Tape;

/// Handle to a node recorded on a Tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
};

/// Reverse-mode tape. Nodes are appended in evaluation order, so insertion
/// order is a topological order and backward is a single reverse sweep.
///
/// A tape is single-threaded; build a fresh one per forward/backward pass.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  struct Node {
    const char* op;
    std::vector<std::size_t> inputs;
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool has_grad = false;
    BackwardFn backward;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value, bool requires_grad = true) {
    nodes_.push_back(Node{"leaf", {}, std::move(value), Tensor{}, requires_grad, false, nullptr});
    return Var{this, nodes_.size() - 1};
  }

  Var constant(Tensor value) { return leaf(std::move(value), false); }

  /// Append an op node. `backward` reads the node's adjoint via grad(self) and
  /// accumulates into inputs through accumulate_grad(); it is only called when
  /// at least one input requires a gradient.
  Var record(const char* op, std::initializer_list<Var> inputs, Tensor value, BackwardFn backward) {
    return record(op, std::vector<Var>(inputs), std::move(value), std::move(backward));
  }

  Var record(const char* op, const std::vector<Var>& inputs, Tensor value, BackwardFn backward) {
    Node node{op, {}, std::move(value), Tensor{}, false, false, nullptr};
    node.inputs.reserve(inputs.size());
    for (const Var& v : inputs) {
      if (v.tape != this) throw Error(std::string(op) + ": input recorded on a different tape");
      node.inputs.push_back(v.id);
      node.requires_grad = node.requires_grad || nodes_[v.id].requires_grad;
    }
    if (node.requires_grad) node.backward = std::move(backward);
    nodes_.push_back(std::move(node));
    return Var{this, nodes_.size() - 1};
  }

  const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
  const Tensor& value(Var v) const { return value(v.id); }
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }
  const Node& node(std::size_t id) const { return nodes_.at(id); }

  /// Adjoint of a node after backward(); zeros if the node was not reached.
  const Tensor& grad(Var v) { return ensure_grad(v.id); }

  /// Adjoint buffer for an input, or nullptr when the input needs no gradient.
  Tensor* grad_sink(std::size_t id) {
    if (!nodes_[id].requires_grad) return nullptr;
    return &ensure_grad(id);
  }

  const Tensor& grad_of(std::size_t id) { return ensure_grad(id); }

  void backward(Var root) {
    if (root.tape != this) throw Error("backward: root belongs to a different tape");
    if (nodes_[root.id].value.size() != 1) {
      throw ShapeError("backward: root must be a scalar, got shape " + to_string(nodes_[root.id].value.shape()));
    }
    for (auto& n : nodes_) {
      if (n.has_grad) std::fill(n.grad.storage().begin(), n.grad.storage().end(), 0.0);
    }
    ensure_grad(root.id)[0] = 1.0;
    for (std::size_t i = root.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.requires_grad && n.backward && n.has_grad) n.backward(*this, i);
    }
  }

 private:
  Tensor& ensure_grad(std::size_t id) {
    Node& n = nodes_.at(id);
    if (!n.has_grad) {
      n.grad = Tensor(n.value.shape(), 0.0);
      n.has_grad = true;
    }
    return n.grad;
  }

  std::vector<Node> nodes_;
};

inline const Tensor& Var::value() const { return tape->value(id); }

namespace detail {

inline Tape& common_tape(Var a, Var b, const char* op) {
  if (a.tape == nullptr || a.tape != b.tape) throw Error(std::string(op) + ": operands on different tapes");
  return *a.tape;
}

template <typename Fwd, typename Bwd>
Var unary(const char* op, Var a, Fwd fwd, Bwd dfdx) {
  Tape& t = *a.tape;
  const Tensor& x = a.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = fwd(x[i]);
  return t.record(op, {a}, std::move(y), [ia = a.id, dfdx](Tape& tp, std::size_t self) {
    Tensor* gx = tp.grad_sink(ia);
    if (!gx) return;
    const Tensor& g = tp.grad_of(self);
    const Tensor& xv = tp.value(ia);
    const Tensor& yv = tp.value(self);
    for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i] * dfdx(xv[i], yv[i]);
  });
}

}  // namespace detail

inline Var operator+(Var a, Var b) {
  Tape& t = detail::common_tape(a, b, "add");
  require_same_shape(a.value(), b.value(), "add");
  Tensor y = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += bv[i];
  return t.record("add", {a, b}, std::move(y), [ia = a.id, ib = b.id](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad_of(self);
    for (std::size_t in : {ia, ib}) {
      if (Tensor* gi = tp.grad_sink(in)) {
        for (std::size_t i = 0; i < g.size(); ++i) (*gi)[i] += g[i];
      }
    }
  });
}

inline Var operator-(Var a, Var b) {
  Tape& t = detail::common_tape(a, b, "sub");
  require_same_shape(a.value(), b.value(), "sub");
  Tensor y = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] -= bv[i];
  return t.record("sub", {a, b}, std::move(y), [ia = a.id, ib = b.id](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad_of(self);
    if (Tensor* ga = tp.grad_sink(ia)) {
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i];
    }
    if (Tensor* gb = tp.grad_sink(ib)) {
      for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] -= g[i];
    }
  });
}

inline Var operator*(Var a, Var b) {
  Tape& t = detail::common_tape(a, b, "mul");
  require_same_shape(a.value(), b.value(), "mul");
  Tensor y = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= bv[i];
  return t.record("mul", {a, b}, std::move(y), [ia = a.id, ib = b.id](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad_of(self);
    const Tensor& av = tp.value(ia);
    const Tensor& bv = tp.value(ib);
    if (Tensor* ga = tp.grad_sink(ia)) {
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * bv[i];
    }
    if (Tensor* gb = tp.grad_sink(ib)) {
      for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] += g[i] * av[i];
    }
  });
}

inline Var operator/(Var a, Var b) {
  Tape& t = detail::common_tape(a, b, "div");
  require_same_shape(a.value(), b.value(), "div");
  Tensor y = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] /= bv[i];
  return t.record("div", {a, b}, std::move(y), [ia = a.id, ib = b.id](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad_of(self);
    const Tensor& bv = tp.value(ib);
    const Tensor& yv = tp.value(self);
    if (Tensor* ga = tp.grad_sink(ia)) {
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] / bv[i];
    }
    if (Tensor* gb = tp.grad_sink(ib)) {
      for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] -= g[i] * yv[i] / bv[i];
    }
  });
}

inline Var operator-(Var a) {
  return detail::unary("neg", a, [](double x) { return -x; }, [](double, double) { return -1.0; });
}

/// Multiply by a constant.
inline Var scale(Var a, double c) {
  return detail::unary("scale", a, [c](double x) { return c * x; }, [c](double, double) { return c; });
}
inline Var operator*(double c, Var a) { return scale(a, c); }

inline Var add_scalar(Var a, double c) {
  return detail::unary("add_scalar", a, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

/// |x|, with subgradient 0 at x == 0.
inline Var abs(Var a) {
  return detail::unary(
      "abs", a, [](double x) { return std::abs(x); },
      [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

inline constexpr double kExpClamp = 40.0;

/// e^x with the argument clamped to at most kExpClamp.
inline Var exp(Var a) {
  return detail::unary(
      "exp", a, [](double x) { return std::exp(std::min(x, kExpClamp)); },
      [](double x, double y) { return x > kExpClamp ? 0.0 : y; });
}

inline Var square(Var a) {
  return detail::unary("square", a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

namespace detail {

/// Neumaier-compensated sum.
inline double compensated_sum(std::span<const double> values) {
  double s = 0.0, c = 0.0;
  for (double v : values) {
    const double t = s + v;
    c += std::abs(s) >= std::abs(v) ? (s - t) + v : (v - t) + s;
    s = t;
  }
  return s + c;
}

}  // namespace detail

inline Var sum_all(Var a) {
  Tape& t = *a.tape;
  const Tensor& x = a.value();
  const double s = detail::compensated_sum(x.values());
  return t.record("sum_all", {a}, Tensor::scalar(s), [ia = a.id](Tape& tp, std::size_t self) {
    Tensor* gx = tp.grad_sink(ia);
    if (!gx) return;
    const double g = tp.grad_of(self)[0];
    for (double& v : gx->values()) v += g;
  });
}

/// Mean over every element; backward spreads adjoint/N.
inline Var mean_all(Var a) {
  Tape& t = *a.tape;
  const Tensor& x = a.value();
  const double n = static_cast<double>(x.size());
  const double s = detail::compensated_sum(x.values());
  return t.record("mean_all", {a}, Tensor::scalar(s / n), [ia = a.id, n](Tape& tp, std::size_t self) {
    Tensor* gx = tp.grad_sink(ia);
    if (!gx) return;
    const double g = tp.grad_of(self)[0] / n;
    for (double& v : gx->values()) v += g;
  });
}

}  // namespace dnm

#endif  // DNM_AUTODIFF_HPP
