#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "umcmc/checkpoint.hpp"
#include "umcmc/data.hpp"
#include "umcmc/kernels.hpp"

namespace umcmc {

struct DiscVars {
  Var w1, b1, w2, b2, w3, b3;
};
DiscVars bind_disc(Tape& tape, const Discriminator& d, bool trainable);
Var disc_forward(Tape& tape, const DiscVars& v, Var x, Var y);
/// Gradient of the critic with respect to its image input, built from tape
/// primitives so the gradient-penalty loss stays differentiable in phi.
Var disc_input_grad_x(Tape& tape, const DiscVars& v, Var x, Var y, std::size_t d_x);

/// Differentiable distance for the perceptual term; default is the mean
/// absolute difference.
using PerceptualDistance = std::function<Var(Tape&, Var, Var)>;
PerceptualDistance mean_abs_perceptual();

struct TrainingConfig {
  double w1 = 1.0;
  double w_sd_init = 0.0;
  double w_ps = 0.0;
  int n_val = 8;
  double sd_threshold = std::numeric_limits<double>::quiet_NaN();  // required
  int batch_size = 8;
  double generator_lr = 1e-3;
  double discriminator_lr = 1e-3;
  int discriminator_steps_per_generator_step = 5;
  double robbins_monro_step = 0.1;
  int total_steps = 500;
  int validation_interval = 50;
  double rm_direction = 1.0;
  PerceptualDistance perceptual;  // mean_abs_perceptual() when unset
};

// -- loss components ---------------------------------------------------------

struct AdvBatch {
  Var loss;                       // mean[D(x,y) - D(x_l, y)]
  std::vector<ChainTrace> traces;
  std::vector<int> layers;        // sampled l per item
};

/// Layer-sampled adversarial loss; runs one chain per pair with layer draws
/// and chain noise keyed from `seed`.
AdvBatch loss_adv_with_traces(Tape& tape, const UnfoldedModel& model, const ModelVars& mvars,
                              const DiscVars& dvars,
                              const std::vector<const TrainItem*>& batch, std::uint64_t seed);
Var loss_adv(Tape& tape, const UnfoldedModel& model, const ModelVars& mvars,
             const DiscVars& dvars, const std::vector<const TrainItem*>& batch,
             std::uint64_t seed);

/// Gradient penalty (||grad_x D(alpha x + (1-alpha) xhat, y)|| - 1)^2 with
/// alpha drawn per pair from `seed`.
Var loss_gp(Tape& tape, const DiscVars& dvars, const std::vector<const TrainItem*>& batch,
            const std::vector<Tensor>& generated, std::uint64_t seed);

Var loss_l1(Tape& tape, const std::vector<ChainTrace>& traces,
            const std::vector<const Tensor*>& truths);
Var loss_sd(Tape& tape, const std::vector<ChainTrace>& traces);

struct GeneratorLoss {
  Var total, adv, l1, sd, ps;
};
GeneratorLoss total_generator_loss(Tape& tape, const UnfoldedModel& model,
                                   const ModelVars& mvars, const DiscVars& dvars,
                                   const std::vector<const TrainItem*>& batch,
                                   const TrainingConfig& cfg, double w_sd,
                                   std::uint64_t seed);

// -- standard-deviation weight scheduling -------------------------------------

double robbins_monro_target(int n_val);
/// One stochastic-approximation step toward the target ratio; never negative.
double robbins_monro_update(double w_sd, double single_mse, double multi_mse, int n_val,
                            double step, double direction = 1.0);
/// Zero whenever validation MSE exceeds the threshold.
double sd_safeguard(double w_sd, double val_mse, double threshold);
/// Probes the ratio at two weights and returns the update direction (+1 when
/// the ratio increases with w_sd).
double calibrate_rm_direction(const std::function<double(double)>& ratio_at, double w_lo,
                              double w_hi);

// -- driver -------------------------------------------------------------------

struct MetricsRow {
  std::int64_t step = 0;
  double loss_adv = 0, loss_l1 = 0, loss_sd = 0, loss_total = 0, disc_loss = 0;
  double w_sd = 0, val_mse = 0, val_psnr = 0, val_sw = 0;
  std::string to_csv() const;
  static std::string csv_header();
};

struct TrainDataset {
  std::vector<TrainItem> train;
  std::vector<TrainItem> val;
};

struct TrainResult {
  Checkpoint last;
  bool diverged = false;
  std::int64_t steps_completed = 0;
};

/// Alternating critic/generator updates with periodic validation; emits a
/// checkpoint plus metrics row at every validation. Deterministic given
/// (config, data, seed); pass `resume` to continue a run bitwise.
TrainResult train(const TrainingConfig& cfg, const TrainDataset& data, UnfoldedModel model,
                  Discriminator disc, std::uint64_t seed, const std::string& config_snapshot,
                  const std::function<void(const Checkpoint&, const MetricsRow&)>& on_validation,
                  const Checkpoint* resume = nullptr);

}  // namespace umcmc
