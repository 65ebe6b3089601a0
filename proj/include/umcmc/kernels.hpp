#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "umcmc/linops.hpp"
#include "umcmc/priors.hpp"
#include "umcmc/rng.hpp"
#include "umcmc/tape.hpp"

namespace umcmc {

struct Observation {
  Tensor y;
  GaussianLikelihood likelihood;
};

/// Trainable unfolded chain: per-layer kernel hyperparameters plus the shared
/// prior/denoiser weights. Positivity of gamma/rho is kept by log-space
/// parameters; LATINO times are stored raw and clamped to (0,1] at use.
struct UnfoldedModel {
  enum class KernelKind { SGS, LATINO };

  KernelKind kind = KernelKind::SGS;
  int L = 8;
  int L0 = 2;
  std::size_t d_x = 0;
  std::size_t d_z = 0;

  Tensor W;           // (d_x, d_z), SGS
  Tensor log_lambda;  // scalar, SGS
  Tensor log_gamma;   // (L+1)
  Tensor log_rho;     // (L+1), SGS
  Tensor t_raw;       // (L+1), LATINO

  Denoiser denoiser;  // LATINO
  VPSchedule sched;
  bool latino_backprojection_init = true;

  static int default_burn_in(KernelKind kind, int L);
  static UnfoldedModel sgs(std::size_t d_x, std::size_t d_z, int L, int L0, Rng& rng);
  static UnfoldedModel latino(std::size_t d_x, int L, int L0, Denoiser denoiser,
                              const VPSchedule& sched);

  std::vector<std::pair<std::string, Tensor*>> params();
  std::vector<std::pair<std::string, const Tensor*>> params() const;
};

/// Per-layer LATINO defaults: gamma = lipschitz/2, t = 3(L+1-l)/(4L) clipped
/// to (0,1].
std::vector<std::pair<double, double>> zero_shot_latino_defaults(int L, double lipschitz);

/// Model parameters bound onto a tape (leaves when trainable).
struct ModelVars {
  Var W, log_lambda, log_gamma, log_rho, t_raw;
  SmallDenseVars denoiser;
};
ModelVars bind_model(Tape& tape, const UnfoldedModel& model, bool trainable = true);

struct SgsState {
  Var x, z;
};

/// One split-Gibbs transition: Langevin z-update with the smoothed Laplace
/// score, then an exact Gaussian conditional x-update. Noise comes from
/// counter streams keyed by (chain_seed, layer, role).
SgsState sgs_step(Tape& tape, const UnfoldedModel& model, const ModelVars& vars,
                  const SgsState& state, const Observation& obs, int layer,
                  std::uint64_t chain_seed);

/// One LATINO transition: forward-diffusion noising, denoise, then the
/// data-fidelity proximal step with gamma normalized by the operator constant.
Var latino_step(Tape& tape, const UnfoldedModel& model, const ModelVars& vars, Var x,
                const Observation& obs, int layer, std::uint64_t chain_seed);

/// Post-burn-in trajectory of one chain with its ergodic mean; nodes remain
/// differentiable when the caller backpropagates through the tape.
struct ChainTrace {
  std::vector<Var> sample_nodes;  // x_{L0..L}
  std::vector<Tensor> samples;
  Var ergodic_mean_node;
  Tensor ergodic_mean;
  Tensor aux_z;  // final latent (SGS)
  std::uint64_t seed = 0;
};

ChainTrace unfold_chain(Tape& tape, const UnfoldedModel& model, const ModelVars& vars,
                        const Observation& obs, std::uint64_t chain_seed);

/// Value-only chain run on a throwaway tape.
struct PlainTrace {
  std::vector<Tensor> samples;
  Tensor ergodic_mean;
  Tensor aux_z;
  std::uint64_t seed = 0;
};
PlainTrace run_chain(const UnfoldedModel& model, const Observation& obs,
                     std::uint64_t chain_seed);

}  // namespace umcmc
