#include "umcmc/kernels.hpp"

#include <cmath>

namespace umcmc {

int UnfoldedModel::default_burn_in(KernelKind kind, int L) {
  return kind == KernelKind::SGS ? L / 4 : std::min(2, L - 1);
}

UnfoldedModel UnfoldedModel::sgs(std::size_t d_x, std::size_t d_z, int L, int L0, Rng& rng) {
  // L0 == L is the single-sample edge case.
  if (L < 0 || L0 < 0 || L0 > L) throw NumericError("UnfoldedModel: need 0 <= L0 <= L");
  UnfoldedModel m;
  m.kind = KernelKind::SGS;
  m.L = L;
  m.L0 = L0;
  m.d_x = d_x;
  m.d_z = d_z;
  LatentLaplacePrior prior = LatentLaplacePrior::init(d_x, d_z, 1.0, rng);
  m.W = prior.W;
  m.log_lambda = prior.log_lambda;
  m.log_gamma = Tensor({static_cast<std::size_t>(L + 1)}, std::log(0.05));
  m.log_rho = Tensor({static_cast<std::size_t>(L + 1)}, std::log(0.5));
  return m;
}

UnfoldedModel UnfoldedModel::latino(std::size_t d_x, int L, int L0, Denoiser denoiser,
                                    const VPSchedule& sched) {
  if (L < 0 || L0 < 0 || L0 > L) throw NumericError("UnfoldedModel: need 0 <= L0 <= L");
  UnfoldedModel m;
  m.kind = KernelKind::LATINO;
  m.L = L;
  m.L0 = L0;
  m.d_x = d_x;
  m.denoiser = std::move(denoiser);
  m.sched = sched;
  m.log_gamma = Tensor({static_cast<std::size_t>(L + 1)}, std::log(0.5));
  m.t_raw = Tensor({static_cast<std::size_t>(L + 1)});
  auto defaults = zero_shot_latino_defaults(L, 1.0);
  for (int l = 0; l <= L; ++l) m.t_raw[static_cast<std::size_t>(l)] = defaults[l].second;
  return m;
}

std::vector<std::pair<std::string, Tensor*>> UnfoldedModel::params() {
  std::vector<std::pair<std::string, Tensor*>> out;
  out.emplace_back("model.log_gamma", &log_gamma);
  if (kind == KernelKind::SGS) {
    out.emplace_back("model.W", &W);
    out.emplace_back("model.log_lambda", &log_lambda);
    out.emplace_back("model.log_rho", &log_rho);
  } else {
    out.emplace_back("model.t_raw", &t_raw);
    if (denoiser.kind == Denoiser::Kind::SmallDense) {
      out.emplace_back("model.denoiser.w1", &denoiser.dense.w1);
      out.emplace_back("model.denoiser.b1", &denoiser.dense.b1);
      out.emplace_back("model.denoiser.w2", &denoiser.dense.w2);
      out.emplace_back("model.denoiser.b2", &denoiser.dense.b2);
    }
  }
  return out;
}

std::vector<std::pair<std::string, const Tensor*>> UnfoldedModel::params() const {
  std::vector<std::pair<std::string, const Tensor*>> out;
  for (auto& [name, ptr] : const_cast<UnfoldedModel*>(this)->params()) {
    out.emplace_back(name, ptr);
  }
  return out;
}

std::vector<std::pair<double, double>> zero_shot_latino_defaults(int L, double lipschitz) {
  if (L < 1) throw NumericError("zero_shot_latino_defaults: L must be >= 1");
  std::vector<std::pair<double, double>> out;
  out.reserve(static_cast<std::size_t>(L + 1));
  for (int l = 0; l <= L; ++l) {
    double t = 3.0 * static_cast<double>(L + 1 - l) / (4.0 * static_cast<double>(L));
    t = std::min(t, 1.0);  // schedule can exceed 1 for tiny L
    out.emplace_back(lipschitz / 2.0, t);
  }
  return out;
}

ModelVars bind_model(Tape& tape, const UnfoldedModel& model, bool trainable) {
  auto bind = [&](const Tensor& t) { return trainable ? tape.leaf(t) : tape.constant(t); };
  ModelVars v;
  v.log_gamma = bind(model.log_gamma);
  if (model.kind == UnfoldedModel::KernelKind::SGS) {
    v.W = bind(model.W);
    v.log_lambda = bind(model.log_lambda);
    v.log_rho = bind(model.log_rho);
  } else {
    v.t_raw = bind(model.t_raw);
    if (model.denoiser.kind == Denoiser::Kind::SmallDense) {
      v.denoiser = bind_denoiser(tape, model.denoiser.dense, trainable);
    }
  }
  return v;
}

namespace {

void check_finite_state(const Tape& tape, Var v, const char* kernel, int layer) {
  if (!tape.value(v).all_finite()) {
    throw ChainDivergenceError(std::string(kernel) + ": non-finite state at layer " +
                                   std::to_string(layer),
                               layer);
  }
}

}  // namespace

SgsState sgs_step(Tape& tape, const UnfoldedModel& model, const ModelVars& vars,
                  const SgsState& state, const Observation& obs, int layer,
                  std::uint64_t chain_seed) {
  if (layer < 0 || layer > model.L) throw NumericError("sgs_step: layer out of range");
  const std::size_t ul = static_cast<std::size_t>(layer);

  Var lg = tape.index(vars.log_gamma, ul);
  Var lr = tape.index(vars.log_rho, ul);
  Var gamma = tape.exp_op(lg);
  Var rho = tape.exp_op(lr);
  Var inv_rho2 = tape.exp_op(tape.scale(-2.0, lr));
  Var lambda = tape.exp_op(vars.log_lambda);
  Var inv_lambda = tape.exp_op(tape.scale(-1.0, vars.log_lambda));

  // Langevin z-update targeting p(z | x) with the smoothed Laplace score.
  Var s = tape.matvec(vars.W, state.z);
  Var sig = tape.sigmoid(s);
  Var resid = tape.scale(inv_rho2, tape.sub(state.x, sig));
  Var ones = tape.constant(Tensor(tape.value(sig).shape(), 1.0));
  Var sig_prime = tape.mul(sig, tape.sub(ones, sig));
  Var pull = tape.matvec_t(vars.W, tape.mul(sig_prime, resid));
  Var lap = tape.scale(inv_lambda, tape.sub(tape.soft_threshold(state.z, lambda), state.z));
  Var drift = tape.add(pull, lap);
  Var z_mean = tape.add(state.z, tape.scale(gamma, drift));
  Var step_sigma = tape.scale(std::sqrt(2.0), tape.exp_op(tape.scale(0.5, lg)));
  Tensor zeta_z = Rng::keyed(chain_seed, ul, static_cast<std::uint64_t>(NoiseRole::kLatentStep))
                      .gaussian_tensor(tape.value(state.z).shape());
  Var z_next = tape.gaussian_reparam(z_mean, step_sigma, zeta_z);
  check_finite_state(tape, z_next, "sgs_step", layer);

  // Exact Gaussian conditional x-update around Sig(W z_{l+1}).
  Var mean = tape.sigmoid(tape.matvec(vars.W, z_next));
  Var mean_img = tape.reshape_op(mean, obs.likelihood.op.domain_shape());
  Tensor zeta_x = Rng::keyed(chain_seed, ul, static_cast<std::uint64_t>(NoiseRole::kConditional))
                      .gaussian_tensor(obs.likelihood.op.domain_shape());
  Var x_next = sample_gaussian_conditional_node(tape, obs.likelihood, obs.y, rho, mean_img,
                                                zeta_x);
  check_finite_state(tape, x_next, "sgs_step", layer);
  return SgsState{x_next, z_next};
}

Var latino_step(Tape& tape, const UnfoldedModel& model, const ModelVars& vars, Var x,
                const Observation& obs, int layer, std::uint64_t chain_seed) {
  if (layer < 0 || layer > model.L) throw NumericError("latino_step: layer out of range");
  const std::size_t ul = static_cast<std::size_t>(layer);

  Var t = tape.index(vars.t_raw, ul);
  Var coeffs = vp_coeffs_node(tape, t, model.sched);
  Var mu_t = tape.index(coeffs, 0);
  Var sigma_t = tape.index(coeffs, 1);
  Tensor zeta = Rng::keyed(chain_seed, ul, static_cast<std::uint64_t>(NoiseRole::kForwardSde))
                    .gaussian_tensor(tape.value(x).shape());
  Var x_t = tape.gaussian_reparam(tape.scale(mu_t, x), sigma_t, zeta);

  Var denoised;
  if (model.denoiser.kind == Denoiser::Kind::SmallDense) {
    denoised = small_dense_forward(tape, vars.denoiser, x_t, coeffs);
  } else {
    denoised = analytic_denoiser_node(tape, model.denoiser.analytic, x_t, coeffs);
  }

  const double norm = std::max(obs.likelihood.op.lipschitz(), 1e-12);
  Var gamma = tape.scale(1.0 / norm, tape.exp_op(tape.index(vars.log_gamma, ul)));
  Var x_next = prox_gaussian_nll_node(tape, obs.likelihood, obs.y, gamma, denoised);
  check_finite_state(tape, x_next, "latino_step", layer);
  return x_next;
}

ChainTrace unfold_chain(Tape& tape, const UnfoldedModel& model, const ModelVars& vars,
                        const Observation& obs, std::uint64_t chain_seed) {
  ChainTrace trace;
  trace.seed = chain_seed;
  const auto domain = obs.likelihood.op.domain_shape();

  std::vector<Var> retained;
  if (model.kind == UnfoldedModel::KernelKind::SGS) {
    SgsState state;
    state.x = tape.constant(Tensor(domain));
    state.z = tape.constant(Tensor({model.d_z}));
    for (int l = 0; l <= model.L; ++l) {
      state = sgs_step(tape, model, vars, state, obs, l, chain_seed);
      if (l >= model.L0) retained.push_back(state.x);
    }
    trace.aux_z = tape.value(state.z);
  } else {
    Var x;
    if (model.latino_backprojection_init) {
      const double lm = std::max(obs.likelihood.op.lipschitz(), 1e-12);
      x = tape.constant(scale(1.0 / (lm * lm), obs.likelihood.op.adjoint(obs.y)));
    } else {
      x = tape.constant(Tensor(domain));
    }
    for (int l = 0; l <= model.L; ++l) {
      x = latino_step(tape, model, vars, x, obs, l, chain_seed);
      if (l >= model.L0) retained.push_back(x);
    }
  }

  Var total = retained.front();
  for (std::size_t i = 1; i < retained.size(); ++i) total = tape.add(total, retained[i]);
  trace.ergodic_mean_node = tape.scale(1.0 / static_cast<double>(retained.size()), total);
  trace.sample_nodes = std::move(retained);
  for (Var v : trace.sample_nodes) trace.samples.push_back(tape.value(v));
  trace.ergodic_mean = tape.value(trace.ergodic_mean_node);
  return trace;
}

PlainTrace run_chain(const UnfoldedModel& model, const Observation& obs,
                     std::uint64_t chain_seed) {
  Tape tape;
  ModelVars vars = bind_model(tape, model, /*trainable=*/false);
  ChainTrace trace = unfold_chain(tape, model, vars, obs, chain_seed);
  PlainTrace out;
  out.samples = std::move(trace.samples);
  out.ergodic_mean = std::move(trace.ergodic_mean);
  out.aux_z = std::move(trace.aux_z);
  out.seed = chain_seed;
  return out;
}

}  // namespace umcmc
