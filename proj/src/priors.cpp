#include "umcmc/priors.hpp"

#include <cmath>

namespace umcmc {

double LatentLaplacePrior::lambda() const { return std::exp(log_lambda.item()); }

LatentLaplacePrior LatentLaplacePrior::init(std::size_t d_x, std::size_t d_z, double lambda0,
                                            Rng& rng) {
  if (!(lambda0 > 0.0)) throw NumericError("LatentLaplacePrior: lambda0 must be positive");
  LatentLaplacePrior p;
  p.d_z = d_z;
  p.W = Tensor({d_x, d_z});
  const double std = 1.0 / std::sqrt(static_cast<double>(d_z));
  for (std::size_t i = 0; i < p.W.size(); ++i) p.W[i] = std * rng.gaussian();
  p.log_lambda = Tensor::scalar(std::log(lambda0));
  return p;
}

double VPSchedule::mu(double t) const { return std::exp(-beta_integral(t)); }

double VPSchedule::sigma(double t) const {
  const double m = mu(t);
  return std::sqrt(std::max(1.0 - m * m, 0.0));
}

double VPSchedule::dmu_dt(double t) const { return -beta(t) * mu(t); }

double VPSchedule::dsigma_dt(double t) const {
  const double m = mu(t);
  const double s = sigma(t);
  return s > 0.0 ? beta(t) * m * m / s : 0.0;
}

Tensor laplace_score_smoothed(const Tensor& z, double lambda) {
  if (!(lambda > 0.0)) throw NumericError("laplace_score_smoothed: lambda must be positive");
  Tensor out = z;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = out[i];
    const double st = v > lambda ? v - lambda : (v < -lambda ? v + lambda : 0.0);
    out[i] = (st - v) / lambda;
  }
  return out;
}

Tensor prior_mean(const LatentLaplacePrior& prior, const Tensor& z) {
  Tensor s = matvec(prior.W, z);
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = 1.0 / (1.0 + std::exp(-s[i]));
  return s;
}

Tensor vp_forward_sample_with_noise(const Tensor& x0, double t, const VPSchedule& sched,
                                    const Tensor& zeta) {
  if (t < 0.0 || t > 1.0) throw NumericError("vp_forward_sample: t must lie in [0,1]");
  require_same_shape("vp_forward_sample", x0, zeta);
  const double m = sched.mu(t);
  const double s = sched.sigma(t);
  Tensor out = scale(m, x0);
  add_scaled_in_place(out, s, zeta);
  return out;
}

Tensor vp_forward_sample(const Tensor& x0, double t, const VPSchedule& sched, Rng& rng) {
  return vp_forward_sample_with_noise(x0, t, sched, rng.gaussian_tensor(x0.shape()));
}

Tensor analytic_mmse_denoiser(const AnalyticGaussianDenoiser& d, const Tensor& x_t, double t,
                              const VPSchedule& sched) {
  require_same_shape("analytic_mmse_denoiser", d.mu0, x_t);
  const double m = sched.mu(t);
  const double s2 = sched.sigma(t) * sched.sigma(t);
  Tensor out = x_t;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double gain = m * d.c0[i] / (m * m * d.c0[i] + s2);
    out[i] = d.mu0[i] + gain * (x_t[i] - m * d.mu0[i]);
  }
  return out;
}

SmallDenseDenoiser SmallDenseDenoiser::init(std::size_t d_x, std::size_t hidden, Rng& rng) {
  SmallDenseDenoiser d;
  d.w1 = Tensor({hidden, d_x + 2});
  d.b1 = Tensor({hidden});
  d.w2 = Tensor({d_x, hidden});
  d.b2 = Tensor({d_x});
  const double s1 = 1.0 / std::sqrt(static_cast<double>(d_x + 2));
  const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden));
  for (std::size_t i = 0; i < d.w1.size(); ++i) d.w1[i] = s1 * rng.gaussian();
  for (std::size_t i = 0; i < d.w2.size(); ++i) d.w2[i] = s2 * rng.gaussian();
  return d;
}

Tensor SmallDenseDenoiser::forward(const Tensor& x_t, double mu_t, double sigma_t) const {
  Tensor flat = x_t.rank() == 1 ? x_t : reshape(x_t, {x_t.size()});
  Tensor timef({2});
  timef[0] = mu_t;
  timef[1] = sigma_t;
  Tensor in = concat({&flat, &timef});
  Tensor h = add(matvec(w1, in), b1);
  for (std::size_t i = 0; i < h.size(); ++i) h[i] = std::tanh(h[i]);
  Tensor out = add(matvec(w2, h), b2);
  add_in_place(out, flat);
  return x_t.rank() == 1 ? out : reshape(out, x_t.shape());
}

Var vp_coeffs_node(Tape& tape, Var t, const VPSchedule& sched, double t_min) {
  const double t_raw = tape.scalar_value(t);
  const double t_eff = std::min(std::max(t_raw, t_min), 1.0);
  const bool interior = (t_raw > t_min) && (t_raw < 1.0);
  Tensor value({2});
  value[0] = sched.mu(t_eff);
  value[1] = sched.sigma(t_eff);
  const double dmu = interior ? sched.dmu_dt(t_eff) : 0.0;
  const double dsg = interior ? sched.dsigma_dt(t_eff) : 0.0;
  return tape.custom(std::move(value), {t}, [dmu, dsg](const Tensor& g) {
    return std::vector<Tensor>{Tensor::scalar(g[0] * dmu + g[1] * dsg)};
  });
}

SmallDenseVars bind_denoiser(Tape& tape, const SmallDenseDenoiser& d, bool trainable) {
  SmallDenseVars v;
  if (trainable) {
    v.w1 = tape.leaf(d.w1);
    v.b1 = tape.leaf(d.b1);
    v.w2 = tape.leaf(d.w2);
    v.b2 = tape.leaf(d.b2);
  } else {
    v.w1 = tape.constant(d.w1);
    v.b1 = tape.constant(d.b1);
    v.w2 = tape.constant(d.w2);
    v.b2 = tape.constant(d.b2);
  }
  return v;
}

Var small_dense_forward(Tape& tape, const SmallDenseVars& vars, Var x_t, Var coeffs) {
  const auto shape = tape.value(x_t).shape();
  Var flat = tape.reshape_op(x_t, {tape.value(x_t).size()});
  Var in = tape.concat({flat, coeffs});
  Var h = tape.tanh_op(tape.add(tape.matvec(vars.w1, in), vars.b1));
  Var out = tape.add(tape.add(tape.matvec(vars.w2, h), vars.b2), flat);
  return tape.reshape_op(out, shape);
}

Var analytic_denoiser_node(Tape& tape, const AnalyticGaussianDenoiser& d, Var x_t, Var coeffs) {
  Var mu_t = tape.index(coeffs, 0);
  Var sg_t = tape.index(coeffs, 1);
  Var c0 = tape.constant(d.c0);
  Var mu0 = tape.constant(d.mu0);
  Var ones = tape.constant(Tensor(d.c0.shape(), 1.0));
  Var denom = tape.add(tape.scale(tape.mul(mu_t, mu_t), c0),
                       tape.scale(tape.mul(sg_t, sg_t), ones));
  Var gain = tape.mul(tape.scale(mu_t, c0), tape.reciprocal(denom));
  Var centered = tape.sub(x_t, tape.scale(mu_t, mu0));
  return tape.add(mu0, tape.mul(gain, centered));
}

Var score_matching_loss(Tape& tape, const SmallDenseVars& vars,
                        const std::vector<Tensor>& batch, const std::vector<double>& t_draws,
                        const VPSchedule& sched, Rng& rng) {
  if (batch.empty()) throw NumericError("score_matching_loss: empty batch");
  if (batch.size() != t_draws.size()) {
    throw ShapeError("score_matching_loss: batch and t_draws lengths differ");
  }
  Var total;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double t = t_draws[i];
    Tensor x_t = vp_forward_sample(batch[i], t, sched, rng);
    Tensor coeffs({2});
    coeffs[0] = sched.mu(t);
    coeffs[1] = sched.sigma(t);
    Var pred = small_dense_forward(tape, vars, tape.constant(x_t), tape.constant(coeffs));
    Var err = tape.sub(tape.constant(batch[i]), pred);
    Var term = tape.sq_l2_sum(err);
    total = i == 0 ? term : tape.add(total, term);
  }
  return tape.scale(1.0 / static_cast<double>(batch.size()), total);
}

}  // namespace umcmc
