#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "umcmc/tensor.hpp"

namespace umcmc {

/// Handle to a node on a Tape.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

/// Gradients of a scalar root with respect to tape nodes, keyed by node id.
using GradMap = std::map<int, Tensor>;

/// Reverse-mode differentiation tape. Nodes are appended in creation order
/// (parents always precede children) and hold their value plus a closure
/// computing vector-Jacobian products. A tape is built fresh per evaluation
/// and is single-threaded; values are immutable once recorded.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Non-differentiable input.
  Var constant(Tensor v);
  /// Trainable input; backward() reports its gradient.
  Var leaf(Tensor v);

  const Tensor& value(Var v) const;
  double scalar_value(Var v) const { return value(v).item(); }
  std::size_t size() const { return nodes_.size(); }
  bool is_leaf(Var v) const;

  // -- primitives ----------------------------------------------------------
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);              // elementwise
  Var scale(double c, Var x);         // constant scalar times tensor
  Var scale(Var s, Var x);            // scalar node times tensor
  Var matvec(Var w, Var x);           // (m,n) x (n) -> (m)
  Var matvec_t(Var w, Var u);         // (m,n)^T x (m) -> (n)
  Var matmul(Var a, Var b);           // (m,k) x (k,n) -> (m,n)
  Var sigmoid(Var x);
  Var tanh_op(Var x);
  Var exp_op(Var x);                  // elementwise
  Var sqrt_op(Var x);
  Var reciprocal(Var x);
  Var leaky_relu(Var x, double slope);
  /// Elementwise leaky-ReLU slope indicator (slope where x<=0, 1 where x>0),
  /// treated as locally constant: zero gradient to x.
  Var leaky_slope_of(Var x, double slope);
  Var soft_threshold(Var x, Var lambda);     // lambda: positive scalar node
  Var soft_threshold(Var x, double lambda);
  Var l1_sum(Var x);                  // scalar
  Var sq_l2_sum(Var x);               // scalar
  Var sum_op(Var x);                  // scalar
  Var mean_op(Var x);                 // scalar
  Var concat(const std::vector<Var>& parts);  // flat 1-d result
  Var index(Var x, std::size_t i);    // scalar pick by flat index
  Var slice(Var x, std::size_t offset, std::size_t len);  // flat contiguous slice
  Var reshape_op(Var x, std::vector<std::size_t> shape);
  /// mu + sigma * zeta with zeta a recorded constant (reparameterized noise):
  /// gradient flows to mu (identity) and sigma (zeta-weighted), never to zeta.
  Var gaussian_reparam(Var mu, Var sigma, const Tensor& zeta);

  /// Custom primitive: value plus a closure mapping the output gradient to
  /// per-parent gradients (same order as parents). Used by linear-operator
  /// solve/sample wrappers.
  Var custom(Tensor value, std::vector<Var> parents,
             std::function<std::vector<Tensor>(const Tensor&)> vjp);

  /// Gradients of a scalar-valued root with respect to every leaf.
  /// Deterministic: two calls on the same tape give bitwise-equal results.
  GradMap backward(Var root) const;

 private:
  struct Node {
    Tensor value;
    std::vector<int> parents;
    std::function<std::vector<Tensor>(const Tensor&)> vjp;
    bool trainable_leaf = false;
  };

  int push(Tensor value, std::vector<int> parents);
  void set_vjp(int id, std::function<std::vector<Tensor>(const Tensor&)> fn);
  const Tensor& val(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  void check(Var v, const char* who) const;

  std::vector<Node> nodes_;
};

/// Max relative error between the tape gradient of `build` at x and central
/// finite differences with step h; denominator max(1, |analytic|).
double finite_diff_check(const std::function<Var(Tape&, Var)>& build, const Tensor& x,
                         double h);

}  // namespace umcmc
