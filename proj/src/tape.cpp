#include "umcmc/tape.hpp"

#include <cmath>

namespace umcmc {

namespace {

Tensor transpose2(const Tensor& a) {
  Tensor r({a.extent(1), a.extent(0)});
  for (std::size_t i = 0; i < a.extent(0); ++i)
    for (std::size_t j = 0; j < a.extent(1); ++j) r.at(j, i) = a.at(i, j);
  return r;
}

double sign0(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

int Tape::push(Tensor value, std::vector<int> parents) {
  Node n;
  n.value = std::move(value);
  n.parents = std::move(parents);
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

void Tape::set_vjp(int id, std::function<std::vector<Tensor>(const Tensor&)> fn) {
  nodes_[static_cast<std::size_t>(id)].vjp = std::move(fn);
}

void Tape::check(Var v, const char* who) const {
  if (!v.valid() || v.id >= static_cast<int>(nodes_.size())) {
    throw Error(std::string(who) + ": invalid tape handle");
  }
}

Var Tape::constant(Tensor v) { return Var{push(std::move(v), {})}; }

Var Tape::leaf(Tensor v) {
  int id = push(std::move(v), {});
  nodes_.back().trainable_leaf = true;
  return Var{id};
}

const Tensor& Tape::value(Var v) const {
  check(v, "Tape::value");
  return nodes_[static_cast<std::size_t>(v.id)].value;
}

bool Tape::is_leaf(Var v) const {
  check(v, "Tape::is_leaf");
  return nodes_[static_cast<std::size_t>(v.id)].trainable_leaf;
}

Var Tape::add(Var a, Var b) {
  check(a, "add");
  check(b, "add");
  int id = push(umcmc::add(val(a.id), val(b.id)), {a.id, b.id});
  set_vjp(id, [](const Tensor& g) { return std::vector<Tensor>{g, g}; });
  return Var{id};
}

Var Tape::sub(Var a, Var b) {
  check(a, "sub");
  check(b, "sub");
  int id = push(umcmc::sub(val(a.id), val(b.id)), {a.id, b.id});
  set_vjp(id, [](const Tensor& g) { return std::vector<Tensor>{g, umcmc::scale(-1.0, g)}; });
  return Var{id};
}

Var Tape::mul(Var a, Var b) {
  check(a, "mul");
  check(b, "mul");
  int id = push(umcmc::mul(val(a.id), val(b.id)), {a.id, b.id});
  set_vjp(id, [this, a, b](const Tensor& g) {
    return std::vector<Tensor>{umcmc::mul(g, val(b.id)), umcmc::mul(g, val(a.id))};
  });
  return Var{id};
}

Var Tape::scale(double c, Var x) {
  check(x, "scale");
  int id = push(umcmc::scale(c, val(x.id)), {x.id});
  set_vjp(id, [c](const Tensor& g) { return std::vector<Tensor>{umcmc::scale(c, g)}; });
  return Var{id};
}

Var Tape::scale(Var s, Var x) {
  check(s, "scale");
  check(x, "scale");
  const double sv = val(s.id).item();
  int id = push(umcmc::scale(sv, val(x.id)), {s.id, x.id});
  set_vjp(id, [this, s, x](const Tensor& g) {
    return std::vector<Tensor>{Tensor::scalar(umcmc::dot(g, val(x.id))),
                               umcmc::scale(val(s.id).item(), g)};
  });
  return Var{id};
}

Var Tape::matvec(Var w, Var x) {
  check(w, "matvec");
  check(x, "matvec");
  int id = push(umcmc::matvec(val(w.id), val(x.id)), {w.id, x.id});
  set_vjp(id, [this, w, x](const Tensor& g) {
    return std::vector<Tensor>{umcmc::outer(g, val(x.id)), umcmc::matvec_t(val(w.id), g)};
  });
  return Var{id};
}

Var Tape::matvec_t(Var w, Var u) {
  check(w, "matvec_t");
  check(u, "matvec_t");
  int id = push(umcmc::matvec_t(val(w.id), val(u.id)), {w.id, u.id});
  set_vjp(id, [this, w, u](const Tensor& g) {
    return std::vector<Tensor>{umcmc::outer(val(u.id), g), umcmc::matvec(val(w.id), g)};
  });
  return Var{id};
}

Var Tape::matmul(Var a, Var b) {
  check(a, "matmul");
  check(b, "matmul");
  int id = push(umcmc::matmul(val(a.id), val(b.id)), {a.id, b.id});
  set_vjp(id, [this, a, b](const Tensor& g) {
    return std::vector<Tensor>{umcmc::matmul(g, transpose2(val(b.id))),
                               umcmc::matmul(transpose2(val(a.id)), g)};
  });
  return Var{id};
}

Var Tape::sigmoid(Var x) {
  check(x, "sigmoid");
  Tensor out = val(x.id);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-out[i]));
  int id = push(std::move(out), {x.id});
  set_vjp(id, [this, id](const Tensor& g) {
    const Tensor& s = val(id);
    Tensor r = g;
    for (std::size_t i = 0; i < r.size(); ++i) r[i] *= s[i] * (1.0 - s[i]);
    return std::vector<Tensor>{std::move(r)};
  });
  return Var{id};
}

Var Tape::tanh_op(Var x) {
  check(x, "tanh");
  Tensor out = val(x.id);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(out[i]);
  int id = push(std::move(out), {x.id});
  set_vjp(id, [this, id](const Tensor& g) {
    const Tensor& t = val(id);
    Tensor r = g;
    for (std::size_t i = 0; i < r.size(); ++i) r[i] *= 1.0 - t[i] * t[i];
    return std::vector<Tensor>{std::move(r)};
  });
  return Var{id};
}

Var Tape::exp_op(Var x) {
  check(x, "exp");
  Tensor out = val(x.id);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(out[i]);
  int id = push(std::move(out), {x.id});
  set_vjp(id, [this, id](const Tensor& g) {
    return std::vector<Tensor>{umcmc::mul(g, val(id))};
  });
  return Var{id};
}

Var Tape::sqrt_op(Var x) {
  check(x, "sqrt");
  Tensor out = val(x.id);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::sqrt(out[i]);
  int id = push(std::move(out), {x.id});
  set_vjp(id, [this, id](const Tensor& g) {
    const Tensor& s = val(id);
    Tensor r = g;
    for (std::size_t i = 0; i < r.size(); ++i) r[i] *= 0.5 / s[i];
    return std::vector<Tensor>{std::move(r)};
  });
  return Var{id};
}

Var Tape::reciprocal(Var x) {
  check(x, "reciprocal");
  Tensor out = val(x.id);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0 / out[i];
  int id = push(std::move(out), {x.id});
  set_vjp(id, [this, id](const Tensor& g) {
    const Tensor& r = val(id);
    Tensor out = g;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= -r[i] * r[i];
    return std::vector<Tensor>{std::move(out)};
  });
  return Var{id};
}

Var Tape::leaky_relu(Var x, double slope) {
  check(x, "leaky_relu");
  Tensor out = val(x.id);
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i] <= 0.0) out[i] *= slope;
  }
  int id = push(std::move(out), {x.id});
  set_vjp(id, [this, x, slope](const Tensor& g) {
    const Tensor& in = val(x.id);
    Tensor r = g;
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (in[i] <= 0.0) r[i] *= slope;
    }
    return std::vector<Tensor>{std::move(r)};
  });
  return Var{id};
}

Var Tape::leaky_slope_of(Var x, double slope) {
  check(x, "leaky_slope_of");
  Tensor out = val(x.id);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = out[i] > 0.0 ? 1.0 : slope;
  int id = push(std::move(out), {x.id});
  set_vjp(id, [this, x](const Tensor& g) {
    (void)g;
    return std::vector<Tensor>{Tensor::zeros_like(val(x.id))};
  });
  return Var{id};
}

Var Tape::soft_threshold(Var x, Var lambda) {
  check(x, "soft_threshold");
  check(lambda, "soft_threshold");
  const double lam = val(lambda.id).item();
  Tensor out = val(x.id);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = sign0(out[i]) * std::max(std::abs(out[i]) - lam, 0.0);
  }
  int id = push(std::move(out), {x.id, lambda.id});
  set_vjp(id, [this, x, lambda](const Tensor& g) {
    const Tensor& in = val(x.id);
    const double lam = val(lambda.id).item();
    Tensor gx = g;
    double glam = 0.0;
    for (std::size_t i = 0; i < gx.size(); ++i) {
      if (std::abs(in[i]) > lam) {
        glam -= g[i] * sign0(in[i]);
      } else {
        gx[i] = 0.0;  // interior and kinks: subgradient 0
      }
    }
    return std::vector<Tensor>{std::move(gx), Tensor::scalar(glam)};
  });
  return Var{id};
}

Var Tape::soft_threshold(Var x, double lambda) {
  return soft_threshold(x, constant(Tensor::scalar(lambda)));
}

Var Tape::l1_sum(Var x) {
  check(x, "l1_sum");
  int id = push(Tensor::scalar(umcmc::norm1(val(x.id))), {x.id});
  set_vjp(id, [this, x](const Tensor& g) {
    const Tensor& in = val(x.id);
    Tensor r = Tensor::zeros_like(in);
    const double gs = g.item();
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = gs * sign0(in[i]);
    return std::vector<Tensor>{std::move(r)};
  });
  return Var{id};
}

Var Tape::sq_l2_sum(Var x) {
  check(x, "sq_l2_sum");
  int id = push(Tensor::scalar(umcmc::dot(val(x.id), val(x.id))), {x.id});
  set_vjp(id, [this, x](const Tensor& g) {
    return std::vector<Tensor>{umcmc::scale(2.0 * g.item(), val(x.id))};
  });
  return Var{id};
}

Var Tape::sum_op(Var x) {
  check(x, "sum");
  int id = push(Tensor::scalar(umcmc::sum(val(x.id))), {x.id});
  set_vjp(id, [this, x](const Tensor& g) {
    Tensor r(val(x.id).shape(), g.item());
    return std::vector<Tensor>{std::move(r)};
  });
  return Var{id};
}

Var Tape::mean_op(Var x) {
  check(x, "mean");
  const std::size_t n = val(x.id).size();
  int id = push(Tensor::scalar(umcmc::mean_value(val(x.id))), {x.id});
  set_vjp(id, [this, x, n](const Tensor& g) {
    Tensor r(val(x.id).shape(), g.item() / static_cast<double>(n));
    return std::vector<Tensor>{std::move(r)};
  });
  return Var{id};
}

Var Tape::concat(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat: empty input");
  std::vector<const Tensor*> ptrs;
  std::vector<int> parents;
  for (Var p : parts) {
    check(p, "concat");
    ptrs.push_back(&val(p.id));
    parents.push_back(p.id);
  }
  int id = push(umcmc::concat(ptrs), parents);
  set_vjp(id, [this, parents](const Tensor& g) {
    std::vector<Tensor> out;
    std::size_t off = 0;
    for (int pid : parents) {
      const Tensor& pv = val(pid);
      Tensor piece(pv.shape());
      for (std::size_t i = 0; i < pv.size(); ++i) piece[i] = g[off + i];
      off += pv.size();
      out.push_back(std::move(piece));
    }
    return out;
  });
  return Var{id};
}

Var Tape::index(Var x, std::size_t i) {
  check(x, "index");
  if (i >= val(x.id).size()) throw ShapeError("index: out of range");
  int id = push(Tensor::scalar(val(x.id)[i]), {x.id});
  set_vjp(id, [this, x, i](const Tensor& g) {
    Tensor r = Tensor::zeros_like(val(x.id));
    r[i] = g.item();
    return std::vector<Tensor>{std::move(r)};
  });
  return Var{id};
}

Var Tape::slice(Var x, std::size_t offset, std::size_t len) {
  check(x, "slice");
  if (len == 0 || offset + len > val(x.id).size()) {
    throw ShapeError("slice: range [" + std::to_string(offset) + "," +
                     std::to_string(offset + len) + ") out of " + val(x.id).shape_str());
  }
  Tensor out({len});
  for (std::size_t i = 0; i < len; ++i) out[i] = val(x.id)[offset + i];
  int id = push(std::move(out), {x.id});
  set_vjp(id, [this, x, offset, len](const Tensor& g) {
    Tensor r = Tensor::zeros_like(val(x.id));
    for (std::size_t i = 0; i < len; ++i) r[offset + i] = g[i];
    return std::vector<Tensor>{std::move(r)};
  });
  return Var{id};
}

Var Tape::reshape_op(Var x, std::vector<std::size_t> shape) {
  check(x, "reshape");
  int id = push(umcmc::reshape(val(x.id), shape), {x.id});
  set_vjp(id, [this, x](const Tensor& g) {
    return std::vector<Tensor>{umcmc::reshape(g, val(x.id).shape())};
  });
  return Var{id};
}

Var Tape::gaussian_reparam(Var mu, Var sigma, const Tensor& zeta) {
  check(mu, "gaussian_reparam");
  check(sigma, "gaussian_reparam");
  require_same_shape("gaussian_reparam", val(mu.id), zeta);
  const double sv = val(sigma.id).item();
  Tensor out = val(mu.id);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += sv * zeta[i];
  int id = push(std::move(out), {mu.id, sigma.id});
  set_vjp(id, [zeta](const Tensor& g) {
    return std::vector<Tensor>{g, Tensor::scalar(umcmc::dot(g, zeta))};
  });
  return Var{id};
}

Var Tape::custom(Tensor value, std::vector<Var> parents,
                 std::function<std::vector<Tensor>(const Tensor&)> vjp) {
  std::vector<int> pids;
  for (Var p : parents) {
    check(p, "custom");
    pids.push_back(p.id);
  }
  int id = push(std::move(value), std::move(pids));
  set_vjp(id, std::move(vjp));
  return Var{id};
}

GradMap Tape::backward(Var root) const {
  check(root, "backward");
  if (value(root).size() != 1) {
    throw ShapeError("backward: root must be scalar, got " + value(root).shape_str());
  }
  const std::size_t n = nodes_.size();
  std::vector<Tensor> adj(n);
  std::vector<char> seeded(n, 0);
  adj[static_cast<std::size_t>(root.id)] = Tensor::scalar(1.0);
  seeded[static_cast<std::size_t>(root.id)] = 1;

  for (int i = root.id; i >= 0; --i) {
    const std::size_t ui = static_cast<std::size_t>(i);
    if (!seeded[ui]) continue;
    const Node& node = nodes_[ui];
    if (!node.vjp || node.parents.empty()) continue;
    std::vector<Tensor> pgrads = node.vjp(adj[ui]);
    if (pgrads.size() != node.parents.size()) {
      throw Error("backward: vjp arity mismatch");
    }
    for (std::size_t k = 0; k < node.parents.size(); ++k) {
      const std::size_t p = static_cast<std::size_t>(node.parents[k]);
      require_same_shape("backward accumulate", nodes_[p].value, pgrads[k]);
      if (!seeded[p]) {
        adj[p] = std::move(pgrads[k]);
        seeded[p] = 1;
      } else {
        add_in_place(adj[p], pgrads[k]);
      }
    }
  }

  GradMap out;
  for (std::size_t i = 0; i < n; ++i) {
    if (!nodes_[i].trainable_leaf) continue;
    out.emplace(static_cast<int>(i),
                seeded[i] ? std::move(adj[i]) : Tensor::zeros_like(nodes_[i].value));
  }
  return out;
}

double finite_diff_check(const std::function<Var(Tape&, Var)>& build, const Tensor& x,
                         double h) {
  if (!(h > 0.0)) throw NumericError("finite_diff_check: h must be positive");

  Tape tape;
  Var leaf = tape.leaf(x);
  Var root = build(tape, leaf);
  GradMap grads = tape.backward(root);
  const Tensor& analytic = grads.at(leaf.id);

  auto eval = [&](const Tensor& p) {
    Tape t;
    Var l = t.leaf(p);
    return t.scalar_value(build(t, l));
  };

  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    Tensor plus = x;
    Tensor minus = x;
    plus[i] += h;
    minus[i] -= h;
    const double fd = (eval(plus) - eval(minus)) / (2.0 * h);
    const double denom = std::max(1.0, std::abs(analytic[i]));
    worst = std::max(worst, std::abs(fd - analytic[i]) / denom);
  }
  return worst;
}

}  // namespace umcmc
