// Copyright 2026 The bmm-lab Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bmm/array2.hpp"
#include "bmm/error.hpp"

namespace bmm::ad {

/// Backward rule attached to a recorded node.
enum class OpKind {
  kLeaf,
  kLinear,
  kRelu,
  kAdd,
  kConcatCols,
  kSliceCols,
  kLerpRows,
  kSoftmaxCrossEntropy,
  kSum,
};

class Tape;

/// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Array2& value() const;
  const Array2& grad() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
};

/// Adjoint buffers for one backward sweep. Buffers are allocated on first
/// touch, so nodes unreachable from the root never get one.
class Adjoints {
 public:
  explicit Adjoints(const Tape& tape);

  const Array2& value(std::size_t id) const;
  bool wants(std::size_t id) const;
  Array2& at(std::size_t id);
  const std::optional<Array2>& find(std::size_t id) const { return adj_[id]; }

 private:
  const Tape& tape_;
  std::vector<std::optional<Array2>> adj_;
};

using Backprop = std::function<void(const Array2& out_grad, Adjoints& adj)>;

/// Records the forward computation in creation order, which is a valid
/// topological order because a node can only reference existing nodes.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Array2 value, bool requires_grad = true) {
    return record(std::move(value), OpKind::kLeaf, {}, {}, requires_grad);
  }
  Var constant(Array2 value) { return leaf(std::move(value), false); }

  const Array2& value(std::size_t id) const { return nodes_.at(id).value; }
  const Array2& grad(std::size_t id) const { return nodes_.at(id).grad; }
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
  OpKind kind(std::size_t id) const { return nodes_.at(id).kind; }
  std::span<const std::size_t> parents(std::size_t id) const { return nodes_.at(id).parents; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Adds d(root)/d(node) into the grad slot of every node reachable from
  /// the scalar root. Repeated calls accumulate.
  void backward(Var root) {
    check_owned(root, "backward");
    const Array2& rv = value(root.id);
    if (rv.rows() != 1 || rv.cols() != 1) {
      throw StateError("backward: root must be 1x1, got " + rv.shape());
    }
    if (!nodes_[root.id].requires_grad) return;

    Adjoints adj(*this);
    adj.at(root.id)(0, 0) = 1.0;
    for (std::size_t k = root.id + 1; k-- > 0;) {
      const auto& g = adj.find(k);
      if (!g) continue;
      Node& node = nodes_[k];
      node.grad += *g;
      if (node.backprop) node.backprop(*g, adj);
    }
  }

  void zero_grad() {
    for (auto& n : nodes_) n.grad.fill(0.0);
  }

  /// Appends a node. Used by the op implementations below.
  Var record(Array2 value, OpKind kind, std::vector<std::size_t> parents, Backprop backprop,
             std::optional<bool> requires_grad = std::nullopt) {
    bool rg = requires_grad.value_or(false);
    if (!requires_grad) {
      rg = std::any_of(parents.begin(), parents.end(),
                       [this](std::size_t p) { return nodes_[p].requires_grad; });
    }
    Node node;
    node.grad = Array2(value.rows(), value.cols());
    node.value = std::move(value);
    node.kind = kind;
    node.parents = std::move(parents);
    node.requires_grad = rg;
    if (rg) node.backprop = std::move(backprop);
    nodes_.push_back(std::move(node));
    return Var{this, nodes_.size() - 1};
  }

  void check_owned(Var v, const char* op) const {
    if (v.tape != this || v.id >= nodes_.size()) {
      throw StateError(std::string(op) + ": variable does not belong to this tape");
    }
  }

 private:
  struct Node {
    Array2 value;
    Array2 grad;
    OpKind kind = OpKind::kLeaf;
    std::vector<std::size_t> parents;
    bool requires_grad = false;
    Backprop backprop;
  };
  std::vector<Node> nodes_;
};

inline const Array2& Var::value() const { return tape->value(id); }
inline const Array2& Var::grad() const { return tape->grad(id); }

inline Adjoints::Adjoints(const Tape& tape) : tape_(tape), adj_(tape.size()) {}
inline const Array2& Adjoints::value(std::size_t id) const { return tape_.value(id); }
inline bool Adjoints::wants(std::size_t id) const { return tape_.requires_grad(id); }
inline Array2& Adjoints::at(std::size_t id) {
  auto& slot = adj_[id];
  if (!slot) {
    const Array2& v = tape_.value(id);
    slot.emplace(v.rows(), v.cols());
  }
  return *slot;
}

namespace detail {
inline Tape& common_tape(std::initializer_list<Var> vars, const char* op) {
  Tape* t = vars.begin()->tape;
  for (const Var& v : vars) {
    if (v.tape == nullptr || v.tape != t) {
      throw StateError(std::string(op) + ": operands live on different tapes");
    }
    t->check_owned(v, op);
  }
  return *t;
}
}  // namespace detail

/// x * W + b with b broadcast over rows.
inline Var linear(Var x, Var w, Var b) {
  Tape& tape = detail::common_tape({x, w, b}, "linear");
  Array2 out = ops::affine(x.value(), w.value(), &b.value());
  const std::size_t xi = x.id, wi = w.id, bi = b.id;
  return tape.record(std::move(out), OpKind::kLinear, {xi, wi, bi},
                     [xi, wi, bi](const Array2& g, Adjoints& adj) {
                       if (adj.wants(xi)) ops::accumulate_a_bt(g, adj.value(wi), adj.at(xi));
                       if (adj.wants(wi)) ops::accumulate_at_b(adj.value(xi), g, adj.at(wi));
                       if (adj.wants(bi)) {
                         Array2& gb = adj.at(bi);
                         for (std::size_t i = 0; i < g.rows(); ++i) {
                           for (std::size_t j = 0; j < g.cols(); ++j) gb(0, j) += g(i, j);
                         }
                       }
                     });
}

/// Elementwise max(0, x). The subgradient at exactly zero is 0.
inline Var relu(Var x) {
  Tape& tape = detail::common_tape({x}, "relu");
  const std::size_t xi = x.id;
  return tape.record(ops::relu(x.value()), OpKind::kRelu, {xi},
                     [xi](const Array2& g, Adjoints& adj) {
                       const Array2& xv = adj.value(xi);
                       Array2& gx = adj.at(xi);
                       for (std::size_t k = 0; k < g.size(); ++k) {
                         if (xv[k] > 0.0) gx[k] += g[k];
                       }
                     });
}

inline Var add(Var a, Var b) {
  Tape& tape = detail::common_tape({a, b}, "add");
  Array2::require_same_shape(a.value(), b.value(), "add");
  const std::size_t ai = a.id, bi = b.id;
  return tape.record(ops::add(a.value(), b.value()), OpKind::kAdd, {ai, bi},
                     [ai, bi](const Array2& g, Adjoints& adj) {
                       if (adj.wants(ai)) adj.at(ai) += g;
                       if (adj.wants(bi)) adj.at(bi) += g;
                     });
}

/// Columnwise concatenation [a | b].
inline Var concat_cols(Var a, Var b) {
  Tape& tape = detail::common_tape({a, b}, "concat_cols");
  const Array2& av = a.value();
  const Array2& bv = b.value();
  if (av.rows() != bv.rows()) {
    throw DimensionError("concat_cols: row-count mismatch " + av.shape() + " vs " + bv.shape());
  }
  const std::size_t p = av.cols(), q = bv.cols();
  Array2 out(av.rows(), p + q);
  for (std::size_t i = 0; i < av.rows(); ++i) {
    std::copy_n(av.row(i).data(), p, &out(i, 0));
    std::copy_n(bv.row(i).data(), q, &out(i, 0) + p);
  }
  const std::size_t ai = a.id, bi = b.id;
  return tape.record(std::move(out), OpKind::kConcatCols, {ai, bi},
                     [ai, bi, p, q](const Array2& g, Adjoints& adj) {
                       const bool wa = adj.wants(ai), wb = adj.wants(bi);
                       for (std::size_t i = 0; i < g.rows(); ++i) {
                         if (wa) {
                           Array2& ga = adj.at(ai);
                           for (std::size_t j = 0; j < p; ++j) ga(i, j) += g(i, j);
                         }
                         if (wb) {
                           Array2& gb = adj.at(bi);
                           for (std::size_t j = 0; j < q; ++j) gb(i, j) += g(i, p + j);
                         }
                       }
                     });
}

/// Columns [begin, end) of x.
inline Var slice_cols(Var x, std::size_t begin, std::size_t end) {
  Tape& tape = detail::common_tape({x}, "slice_cols");
  const Array2& xv = x.value();
  if (begin > end || end > xv.cols()) {
    throw DimensionError("slice_cols: range [" + std::to_string(begin) + "," +
                         std::to_string(end) + ") out of " + xv.shape());
  }
  Array2 out(xv.rows(), end - begin);
  for (std::size_t i = 0; i < xv.rows(); ++i) {
    std::copy_n(xv.row(i).data() + begin, end - begin, &out(i, 0));
  }
  const std::size_t xi = x.id;
  return tape.record(std::move(out), OpKind::kSliceCols, {xi},
                     [xi, begin](const Array2& g, Adjoints& adj) {
                       Array2& gx = adj.at(xi);
                       for (std::size_t i = 0; i < g.rows(); ++i) {
                         for (std::size_t j = 0; j < g.cols(); ++j) gx(i, begin + j) += g(i, j);
                       }
                     });
}

/// Throws unless `perm` is a permutation of {0..n-1}.
inline void validate_permutation(std::span<const std::size_t> perm, std::size_t n) {
  if (perm.size() != n) {
    throw ValidationError("permutation length " + std::to_string(perm.size()) +
                          " != row count " + std::to_string(n));
  }
  std::vector<bool> seen(n, false);
  for (std::size_t p : perm) {
    if (p >= n || seen[p]) {
      throw ValidationError("not a permutation: index " + std::to_string(p) +
                            (p >= n ? " out of range" : " repeated"));
    }
    seen[p] = true;
  }
}

inline void validate_mix_coefficient(double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw RangeError("mixing coefficient " + std::to_string(lambda) + " outside [0,1]");
  }
}

/// Row i of the result is lambda * z[i] + (1 - lambda) * z[perm[i]].
/// Values-only variant, shared with the target interpolation.
inline Array2 lerp_rows_values(const Array2& z, std::span<const std::size_t> perm, double lambda) {
  validate_permutation(perm, z.rows());
  validate_mix_coefficient(lambda);
  const double mu = 1.0 - lambda;
  Array2 out(z.rows(), z.cols());
  for (std::size_t i = 0; i < z.rows(); ++i) {
    const auto zi = z.row(i);
    const auto zj = z.row(perm[i]);
    auto o = out.row(i);
    for (std::size_t c = 0; c < z.cols(); ++c) o[c] = lambda * zi[c] + mu * zj[c];
  }
  return out;
}

inline Var lerp_rows(Var z, std::span<const std::size_t> perm, double lambda) {
  Tape& tape = detail::common_tape({z}, "lerp_rows");
  Array2 out = lerp_rows_values(z.value(), perm, lambda);
  const std::size_t zi = z.id;
  return tape.record(std::move(out), OpKind::kLerpRows, {zi},
                     [zi, lambda, perm = std::vector<std::size_t>(perm.begin(), perm.end())](
                         const Array2& g, Adjoints& adj) {
                       const double mu = 1.0 - lambda;
                       Array2& gz = adj.at(zi);
                       for (std::size_t i = 0; i < g.rows(); ++i) {
                         const std::size_t j = perm[i];
                         for (std::size_t c = 0; c < g.cols(); ++c) {
                           gz(i, c) += lambda * g(i, c);
                           gz(j, c) += mu * g(i, c);
                         }
                       }
                     });
}

/// Throws unless every row of `targets` is a probability distribution.
inline void validate_soft_targets(const Array2& targets) {
  for (std::size_t i = 0; i < targets.rows(); ++i) {
    double s = 0.0;
    for (double t : targets.row(i)) {
      if (!(t >= 0.0)) {
        throw ValidationError("target row " + std::to_string(i) + " has a negative entry");
      }
      s += t;
    }
    if (std::abs(s - 1.0) > 1e-9) {
      throw ValidationError("target row " + std::to_string(i) + " sums to " + std::to_string(s));
    }
  }
}

/// Mean over rows of -sum_c target_c * log softmax(logits)_c, fused with the
/// softmax so the gradient is exactly (softmax - target) / n.
inline Var softmax_ce_soft(Var logits, const Array2& targets) {
  Tape& tape = detail::common_tape({logits}, "softmax_ce_soft");
  const Array2& lv = logits.value();
  Array2::require_same_shape(lv, targets, "softmax_ce_soft");
  if (lv.rows() == 0) throw DimensionError("softmax_ce_soft: empty batch");
  validate_soft_targets(targets);

  const std::size_t n = lv.rows(), m = lv.cols();
  Array2 probs(n, m);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto l = lv.row(i);
    const double mx = *std::max_element(l.begin(), l.end());
    double z = 0.0;
    for (std::size_t c = 0; c < m; ++c) z += std::exp(l[c] - mx);
    const double lse = mx + std::log(z);
    for (std::size_t c = 0; c < m; ++c) {
      const double logp = l[c] - lse;
      probs(i, c) = std::exp(logp);
      if (targets(i, c) != 0.0) total -= targets(i, c) * logp;
    }
  }
  Array2 out(1, 1, total / static_cast<double>(n));
  const std::size_t li = logits.id;
  return tape.record(std::move(out), OpKind::kSoftmaxCrossEntropy, {li},
                     [li, probs = std::move(probs), targets](const Array2& g, Adjoints& adj) {
                       const double s = g(0, 0) / static_cast<double>(probs.rows());
                       Array2& gl = adj.at(li);
                       for (std::size_t k = 0; k < probs.size(); ++k) {
                         gl[k] += s * (probs[k] - targets[k]);
                       }
                     });
}

/// Sum of all entries, as a 1x1 node.
inline Var sum(Var x) {
  Tape& tape = detail::common_tape({x}, "sum");
  double s = 0.0;
  for (double v : x.value().flat()) s += v;
  const std::size_t xi = x.id;
  return tape.record(Array2(1, 1, s), OpKind::kSum, {xi}, [xi](const Array2& g, Adjoints& adj) {
    Array2& gx = adj.at(xi);
    for (double& v : gx.flat()) v += g(0, 0);
  });
}

/// Scalar function of a parameter set, built on a fresh tape per call.
using ScalarFn = std::function<Var(Tape&, std::span<const Var>)>;

/// Maximum over all parameter entries of
///   |g_ad - g_fd| / max(1e-8, |g_ad| + |g_fd|)
/// with g_fd the central difference at step eps.
inline double grad_check(const ScalarFn& f, std::vector<Array2> params, double eps) {
  if (!(eps > 0.0)) throw RangeError("grad_check: eps must be positive");

  std::vector<Array2> analytic;
  {
    Tape tape;
    std::vector<Var> vars;
    vars.reserve(params.size());
    for (const auto& p : params) vars.push_back(tape.leaf(p));
    Var out = f(tape, vars);
    tape.backward(out);
    for (const Var& v : vars) analytic.push_back(v.grad());
  }

  auto eval = [&]() {
    Tape tape;
    std::vector<Var> vars;
    vars.reserve(params.size());
    for (const auto& p : params) vars.push_back(tape.leaf(p));
    return f(tape, vars).value()(0, 0);
  };

  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    for (std::size_t e = 0; e < params[k].size(); ++e) {
      const double orig = params[k][e];
      params[k][e] = orig + eps;
      const double up = eval();
      params[k][e] = orig - eps;
      const double down = eval();
      params[k][e] = orig;
      const double g_fd = (up - down) / (2.0 * eps);
      const double g_ad = analytic[k][e];
      const double rel = std::abs(g_ad - g_fd) / std::max(1e-8, std::abs(g_ad) + std::abs(g_fd));
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

}  // namespace bmm::ad
