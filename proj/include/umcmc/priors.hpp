#pragma once

#include <vector>

#include "umcmc/rng.hpp"
#include "umcmc/tape.hpp"
#include "umcmc/tensor.hpp"

namespace umcmc {

/// Sparse latent prior: z Laplace-like, x | z ~ N(Sig(W z), rho^2).
/// lambda is trained in log-space to stay positive.
struct LatentLaplacePrior {
  Tensor W;           // (d_x, d_z)
  Tensor log_lambda;  // scalar
  std::size_t d_z = 0;

  double lambda() const;
  static LatentLaplacePrior init(std::size_t d_x, std::size_t d_z, double lambda0, Rng& rng);
};

/// Variance-preserving diffusion schedule, beta_t linear on [0,1].
struct VPSchedule {
  double beta_min = 0.1;
  double beta_max = 20.0;

  double beta(double t) const { return beta_min + t * (beta_max - beta_min); }
  double beta_integral(double t) const {
    return beta_min * t + 0.5 * (beta_max - beta_min) * t * t;
  }
  double mu(double t) const;     // exp(-integral)
  double sigma(double t) const;  // sqrt(1 - mu^2)
  double dmu_dt(double t) const;
  double dsigma_dt(double t) const;
};

/// Elementwise (ST_lambda(z) - z) / lambda: the smoothed score used by the
/// split-Gibbs z-update. 1/lambda-Lipschitz and odd.
Tensor laplace_score_smoothed(const Tensor& z, double lambda);

/// Sig(W z); entries strictly inside (0,1).
Tensor prior_mean(const LatentLaplacePrior& prior, const Tensor& z);

/// mu_t x0 + sigma_t zeta with zeta ~ N(0, I).
Tensor vp_forward_sample(const Tensor& x0, double t, const VPSchedule& sched, Rng& rng);
Tensor vp_forward_sample_with_noise(const Tensor& x0, double t, const VPSchedule& sched,
                                    const Tensor& zeta);

/// Exact MMSE denoiser for a Gaussian prior N(mu0, diag(c0)).
struct AnalyticGaussianDenoiser {
  Tensor mu0;
  Tensor c0;  // diagonal covariance entries, positive
};

/// E[x0 | x_t] = mu0 + mu_t c0 (mu_t^2 c0 + sigma_t^2)^-1 (x_t - mu_t mu0).
Tensor analytic_mmse_denoiser(const AnalyticGaussianDenoiser& d, const Tensor& x_t, double t,
                              const VPSchedule& sched);

/// Small trainable denoiser: dense(64) with tanh, time entering as the two
/// features (mu_t, sigma_t), residual connection from the noisy input.
struct SmallDenseDenoiser {
  Tensor w1;  // (hidden, d_x + 2)
  Tensor b1;  // (hidden)
  Tensor w2;  // (d_x, hidden)
  Tensor b2;  // (d_x)

  static SmallDenseDenoiser init(std::size_t d_x, std::size_t hidden, Rng& rng);
  Tensor forward(const Tensor& x_t, double mu_t, double sigma_t) const;
  std::size_t input_dim() const { return w1.extent(1) - 2; }
};

struct Denoiser {
  enum class Kind { AnalyticGaussian, SmallDense };
  Kind kind = Kind::SmallDense;
  AnalyticGaussianDenoiser analytic;
  SmallDenseDenoiser dense;
};

// -- tape builders -----------------------------------------------------------

/// [mu_t, sigma_t] as a 2-vector node; t clamped to [t_min, 1] with zero
/// gradient outside.
Var vp_coeffs_node(Tape& tape, Var t, const VPSchedule& sched, double t_min = 1e-6);

struct SmallDenseVars {
  Var w1, b1, w2, b2;
};
SmallDenseVars bind_denoiser(Tape& tape, const SmallDenseDenoiser& d, bool trainable);
/// coeffs: 2-vector node [mu_t, sigma_t].
Var small_dense_forward(Tape& tape, const SmallDenseVars& vars, Var x_t, Var coeffs);
Var analytic_denoiser_node(Tape& tape, const AnalyticGaussianDenoiser& d, Var x_t, Var coeffs);

/// Mean over the batch of ||x - D(mu_t x + sigma_t zeta)||^2, differentiable
/// in the denoiser weights.
Var score_matching_loss(Tape& tape, const SmallDenseVars& vars,
                        const std::vector<Tensor>& batch, const std::vector<double>& t_draws,
                        const VPSchedule& sched, Rng& rng);

}  // namespace umcmc
