#include "umcmc/training.hpp"

#include <cmath>
#include <cstdio>

#include "umcmc/metrics.hpp"
#include "umcmc/parallel.hpp"

namespace umcmc {

namespace {

constexpr double kLeakySlope = 0.2;

enum Role : std::uint64_t {
  kRoleBatchDisc = 101,
  kRoleChainDisc = 102,
  kRoleLayerDisc = 103,
  kRoleAlpha = 104,
  kRoleBatchGen = 105,
  kRoleChainGen = 106,
  kRoleLayerGen = 107,
  kRoleValSingle = 108,
  kRoleValMulti = 109,
  kRoleValSw = 110,
};

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t role, std::uint64_t step,
                          std::uint64_t index) {
  return Rng::keyed(Rng::keyed(master, role, step).next_u64(), index, 13).next_u64();
}

std::vector<std::pair<std::string, Tensor>> extract_grads(
    const GradMap& grads, const std::vector<std::pair<std::string, Var>>& leaves) {
  std::vector<std::pair<std::string, Tensor>> out;
  for (const auto& [name, var] : leaves) {
    auto it = grads.find(var.id);
    if (it != grads.end()) out.emplace_back(name, it->second);
  }
  return out;
}

std::vector<std::pair<std::string, Var>> model_leaves(const UnfoldedModel& model,
                                                      const ModelVars& vars) {
  std::vector<std::pair<std::string, Var>> out;
  out.emplace_back("model.log_gamma", vars.log_gamma);
  if (model.kind == UnfoldedModel::KernelKind::SGS) {
    out.emplace_back("model.W", vars.W);
    out.emplace_back("model.log_lambda", vars.log_lambda);
    out.emplace_back("model.log_rho", vars.log_rho);
  } else {
    out.emplace_back("model.t_raw", vars.t_raw);
    if (model.denoiser.kind == Denoiser::Kind::SmallDense) {
      out.emplace_back("model.denoiser.w1", vars.denoiser.w1);
      out.emplace_back("model.denoiser.b1", vars.denoiser.b1);
      out.emplace_back("model.denoiser.w2", vars.denoiser.w2);
      out.emplace_back("model.denoiser.b2", vars.denoiser.b2);
    }
  }
  return out;
}

std::vector<std::pair<std::string, Var>> disc_leaves(const DiscVars& v) {
  return {{"disc.w1", v.w1}, {"disc.b1", v.b1}, {"disc.w2", v.w2},
          {"disc.b2", v.b2}, {"disc.w3", v.w3}, {"disc.b3", v.b3}};
}

Var mean_of(Tape& tape, const std::vector<Var>& terms) {
  Var total = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) total = tape.add(total, terms[i]);
  return tape.scale(1.0 / static_cast<double>(terms.size()), total);
}

int draw_layer(const UnfoldedModel& model, std::uint64_t seed) {
  Rng rng(seed);
  return model.L0 +
         static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(model.L - model.L0 + 1)));
}

}  // namespace

DiscVars bind_disc(Tape& tape, const Discriminator& d, bool trainable) {
  auto bind = [&](const Tensor& t) { return trainable ? tape.leaf(t) : tape.constant(t); };
  return DiscVars{bind(d.w1), bind(d.b1), bind(d.w2), bind(d.b2), bind(d.w3), bind(d.b3)};
}

Var disc_forward(Tape& tape, const DiscVars& v, Var x, Var y) {
  Var xf = tape.reshape_op(x, {tape.value(x).size()});
  Var yf = tape.reshape_op(y, {tape.value(y).size()});
  Var in = tape.concat({xf, yf});
  Var h1 = tape.leaky_relu(tape.add(tape.matvec(v.w1, in), v.b1), kLeakySlope);
  Var h2 = tape.leaky_relu(tape.add(tape.matvec(v.w2, h1), v.b2), kLeakySlope);
  return tape.index(tape.add(tape.matvec(v.w3, h2), v.b3), 0);
}

Var disc_input_grad_x(Tape& tape, const DiscVars& v, Var x, Var y, std::size_t d_x) {
  Var xf = tape.reshape_op(x, {tape.value(x).size()});
  Var yf = tape.reshape_op(y, {tape.value(y).size()});
  Var in = tape.concat({xf, yf});
  Var a1 = tape.add(tape.matvec(v.w1, in), v.b1);
  Var h1 = tape.leaky_relu(a1, kLeakySlope);
  Var a2 = tape.add(tape.matvec(v.w2, h1), v.b2);
  Var d1 = tape.leaky_slope_of(a1, kLeakySlope);
  Var d2 = tape.leaky_slope_of(a2, kLeakySlope);
  Var top = tape.matvec_t(v.w3, tape.constant(Tensor({1}, 1.0)));
  Var g2 = tape.mul(d2, top);
  Var g1 = tape.mul(d1, tape.matvec_t(v.w2, g2));
  Var gin = tape.matvec_t(v.w1, g1);
  return tape.slice(gin, 0, d_x);
}

PerceptualDistance mean_abs_perceptual() {
  return [](Tape& tape, Var a, Var b) { return tape.mean_op(tape.l1_sum(tape.sub(a, b))); };
}

AdvBatch loss_adv_with_traces(Tape& tape, const UnfoldedModel& model, const ModelVars& mvars,
                              const DiscVars& dvars,
                              const std::vector<const TrainItem*>& batch,
                              std::uint64_t seed) {
  if (batch.empty()) throw NumericError("loss_adv: empty batch");
  AdvBatch out;
  std::vector<Var> terms;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const TrainItem& item = *batch[i];
    const std::uint64_t chain_seed = Rng::keyed(seed, i, 21).next_u64();
    ChainTrace trace = unfold_chain(tape, model, mvars, item.obs, chain_seed);
    const int layer = draw_layer(model, Rng::keyed(seed, i, 22).next_u64());
    Var x_l = trace.sample_nodes[static_cast<std::size_t>(layer - model.L0)];
    Var d_real = disc_forward(tape, dvars, tape.constant(item.x), tape.constant(item.obs.y));
    Var d_fake = disc_forward(tape, dvars, x_l, tape.constant(item.obs.y));
    terms.push_back(tape.sub(d_real, d_fake));
    out.traces.push_back(std::move(trace));
    out.layers.push_back(layer);
  }
  out.loss = mean_of(tape, terms);
  return out;
}

Var loss_adv(Tape& tape, const UnfoldedModel& model, const ModelVars& mvars,
             const DiscVars& dvars, const std::vector<const TrainItem*>& batch,
             std::uint64_t seed) {
  return loss_adv_with_traces(tape, model, mvars, dvars, batch, seed).loss;
}

Var loss_gp(Tape& tape, const DiscVars& dvars, const std::vector<const TrainItem*>& batch,
            const std::vector<Tensor>& generated, std::uint64_t seed) {
  if (batch.size() != generated.size()) {
    throw ShapeError("loss_gp: batch and generated misaligned");
  }
  std::vector<Var> terms;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const TrainItem& item = *batch[i];
    const double alpha = Rng::keyed(seed, i, 23).uniform();
    Tensor mix = scale(alpha, item.x);
    Tensor gen = generated[i].same_shape(item.x) ? generated[i]
                                                 : reshape(generated[i], item.x.shape());
    add_scaled_in_place(mix, 1.0 - alpha, gen);
    Var grad = disc_input_grad_x(tape, dvars, tape.constant(mix),
                                 tape.constant(item.obs.y), item.x.size());
    Var norm = tape.sqrt_op(tape.sq_l2_sum(grad));
    Var dev = tape.sub(norm, tape.constant(Tensor::scalar(1.0)));
    terms.push_back(tape.mul(dev, dev));
  }
  return mean_of(tape, terms);
}

Var loss_l1(Tape& tape, const std::vector<ChainTrace>& traces,
            const std::vector<const Tensor*>& truths) {
  if (traces.size() != truths.size() || traces.empty()) {
    throw ShapeError("loss_l1: traces and truths misaligned");
  }
  std::vector<Var> terms;
  for (std::size_t i = 0; i < traces.size(); ++i) {
    Var truth = tape.constant(*truths[i]);
    Var mean = traces[i].ergodic_mean_node;
    if (tape.value(mean).shape() != truths[i]->shape()) {
      mean = tape.reshape_op(mean, truths[i]->shape());
    }
    terms.push_back(tape.l1_sum(tape.sub(truth, mean)));
  }
  return mean_of(tape, terms);
}

Var loss_sd(Tape& tape, const std::vector<ChainTrace>& traces) {
  if (traces.empty()) throw ShapeError("loss_sd: no traces");
  std::vector<Var> terms;
  for (const ChainTrace& trace : traces) {
    Var acc;
    for (std::size_t l = 0; l < trace.sample_nodes.size(); ++l) {
      Var dev = tape.l1_sum(tape.sub(trace.sample_nodes[l], trace.ergodic_mean_node));
      acc = l == 0 ? dev : tape.add(acc, dev);
    }
    terms.push_back(acc);
  }
  return mean_of(tape, terms);
}

GeneratorLoss total_generator_loss(Tape& tape, const UnfoldedModel& model,
                                   const ModelVars& mvars, const DiscVars& dvars,
                                   const std::vector<const TrainItem*>& batch,
                                   const TrainingConfig& cfg, double w_sd,
                                   std::uint64_t seed) {
  AdvBatch adv = loss_adv_with_traces(tape, model, mvars, dvars, batch, seed);
  std::vector<const Tensor*> truths;
  for (const TrainItem* item : batch) truths.push_back(&item->x);
  GeneratorLoss out;
  out.adv = adv.loss;
  out.l1 = loss_l1(tape, adv.traces, truths);
  out.sd = loss_sd(tape, adv.traces);
  PerceptualDistance ps = cfg.perceptual ? cfg.perceptual : mean_abs_perceptual();
  std::vector<Var> ps_terms;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    Var last = adv.traces[i].sample_nodes.back();
    Var truth = tape.constant(batch[i]->x);
    if (tape.value(last).shape() != batch[i]->x.shape()) {
      last = tape.reshape_op(last, batch[i]->x.shape());
    }
    ps_terms.push_back(ps(tape, truth, last));
  }
  out.ps = mean_of(tape, ps_terms);
  out.total = tape.add(out.adv, tape.scale(cfg.w1, out.l1));
  out.total = tape.sub(out.total, tape.scale(w_sd, out.sd));
  out.total = tape.add(out.total, tape.scale(cfg.w_ps, out.ps));
  return out;
}

double robbins_monro_target(int n_val) {
  return 2.0 * static_cast<double>(n_val + 1) / static_cast<double>(n_val);
}

double robbins_monro_update(double w_sd, double single_mse, double multi_mse, int n_val,
                            double step, double direction) {
  if (!(multi_mse > 0.0)) return w_sd;
  const double r = single_mse / multi_mse;
  return std::max(0.0, w_sd + direction * step * (robbins_monro_target(n_val) - r));
}

double sd_safeguard(double w_sd, double val_mse, double threshold) {
  if (!(threshold > 0.0)) throw NumericError("sd_safeguard: threshold must be positive");
  return val_mse > threshold ? 0.0 : w_sd;
}

double calibrate_rm_direction(const std::function<double(double)>& ratio_at, double w_lo,
                              double w_hi) {
  return ratio_at(w_hi) >= ratio_at(w_lo) ? 1.0 : -1.0;
}

std::string MetricsRow::csv_header() {
  return "step,loss_adv,loss_l1,loss_sd,loss_total,disc_loss,w_sd,val_mse,val_psnr,val_sw";
}

std::string MetricsRow::to_csv() const {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "%lld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g",
                static_cast<long long>(step), loss_adv, loss_l1, loss_sd, loss_total,
                disc_loss, w_sd, val_mse, val_psnr, val_sw);
  return buf;
}

TrainResult train(const TrainingConfig& cfg, const TrainDataset& data, UnfoldedModel model,
                  Discriminator disc, std::uint64_t seed, const std::string& config_snapshot,
                  const std::function<void(const Checkpoint&, const MetricsRow&)>& on_validation,
                  const Checkpoint* resume) {
  if (std::isnan(cfg.sd_threshold)) {
    throw NumericError("train: sd_threshold is required and has no default");
  }
  if (data.train.empty()) throw NumericError("train: empty training set");

  double w_sd = cfg.w_sd_init;
  double rm_direction = cfg.rm_direction;
  std::int64_t start_step = 0;
  AdamState gen_opt, disc_opt;
  if (resume != nullptr) {
    model = resume->model;
    disc = resume->disc;
    w_sd = resume->w_sd;
    rm_direction = resume->rm_direction;
    start_step = resume->step;
    gen_opt = resume->gen_opt;
    disc_opt = resume->disc_opt;
  }

  auto make_checkpoint = [&](std::int64_t step) {
    Checkpoint ckpt;
    ckpt.model = model;
    ckpt.disc = disc;
    ckpt.config_text = config_snapshot;
    ckpt.step = step;
    ckpt.w_sd = w_sd;
    ckpt.rm_direction = rm_direction;
    ckpt.gen_opt = gen_opt;
    ckpt.disc_opt = disc_opt;
    Rng master(seed);
    ckpt.rng_state = master.save_state();
    return ckpt;
  };

  TrainResult result;
  result.last = make_checkpoint(start_step);

  auto pick_batch = [&](std::uint64_t role, std::int64_t step, std::uint64_t sub) {
    Rng rng(derive_seed(seed, role, static_cast<std::uint64_t>(step), sub));
    std::vector<const TrainItem*> batch;
    for (int b = 0; b < cfg.batch_size; ++b) {
      batch.push_back(&data.train[rng.uniform_index(data.train.size())]);
    }
    return batch;
  };

  double acc_adv = 0, acc_l1 = 0, acc_sd = 0, acc_total = 0, acc_disc = 0;
  int acc_count = 0;

  for (std::int64_t step = start_step; step < cfg.total_steps; ++step) {
    try {
      // Critic updates.
      double disc_loss_value = 0.0;
      for (int k = 0; k < cfg.discriminator_steps_per_generator_step; ++k) {
        auto batch = pick_batch(kRoleBatchDisc, step, static_cast<std::uint64_t>(k));
        std::vector<Tensor> generated(batch.size());
        parallel_for(batch.size(), [&](std::size_t i) {
          const std::uint64_t cs = derive_seed(seed, kRoleChainDisc,
                                               static_cast<std::uint64_t>(step),
                                               static_cast<std::uint64_t>(k) * 1000 + i);
          PlainTrace trace = run_chain(model, batch[i]->obs, cs);
          const int layer = draw_layer(
              model, derive_seed(seed, kRoleLayerDisc, static_cast<std::uint64_t>(step),
                                 static_cast<std::uint64_t>(k) * 1000 + i));
          generated[i] = trace.samples[static_cast<std::size_t>(layer - model.L0)];
        });

        Tape tape;
        DiscVars dvars = bind_disc(tape, disc, /*trainable=*/true);
        std::vector<Var> terms;
        for (std::size_t i = 0; i < batch.size(); ++i) {
          Var d_real = disc_forward(tape, dvars, tape.constant(batch[i]->x),
                                    tape.constant(batch[i]->obs.y));
          Var d_fake = disc_forward(tape, dvars, tape.constant(generated[i]),
                                    tape.constant(batch[i]->obs.y));
          terms.push_back(tape.sub(d_real, d_fake));
        }
        Var adv = mean_of(tape, terms);
        Var gp = loss_gp(tape, dvars, batch, generated,
                         derive_seed(seed, kRoleAlpha, static_cast<std::uint64_t>(step),
                                     static_cast<std::uint64_t>(k)));
        Var loss = tape.add(tape.scale(-1.0, adv), gp);
        disc_loss_value = tape.scalar_value(loss);
        if (!std::isfinite(disc_loss_value)) {
          throw NumericError("train: non-finite critic loss");
        }
        GradMap grads = tape.backward(loss);
        disc_opt.update(disc.params(), extract_grads(grads, disc_leaves(dvars)),
                        cfg.discriminator_lr);
      }

      // Generator update.
      auto batch = pick_batch(kRoleBatchGen, step, 0);
      Tape tape;
      ModelVars mvars = bind_model(tape, model, /*trainable=*/true);
      DiscVars dvars = bind_disc(tape, disc, /*trainable=*/false);
      GeneratorLoss loss = total_generator_loss(
          tape, model, mvars, dvars, batch, cfg, w_sd,
          derive_seed(seed, kRoleChainGen, static_cast<std::uint64_t>(step), 0));
      const double total_value = tape.scalar_value(loss.total);
      if (!std::isfinite(total_value)) throw NumericError("train: non-finite generator loss");
      GradMap grads = tape.backward(loss.total);
      gen_opt.update(model.params(), extract_grads(grads, model_leaves(model, mvars)),
                     cfg.generator_lr);

      acc_adv += tape.scalar_value(loss.adv);
      acc_l1 += tape.scalar_value(loss.l1);
      acc_sd += tape.scalar_value(loss.sd);
      acc_total += total_value;
      acc_disc += disc_loss_value;
      ++acc_count;
    } catch (const NumericError&) {
      result.diverged = true;
      result.steps_completed = step;
      return result;
    }

    // Validation, weight scheduling, checkpoint emission.
    if ((step + 1) % cfg.validation_interval == 0 && !data.val.empty()) {
      const std::size_t nv = data.val.size();
      std::vector<double> single_se(nv), multi_se(nv), psnrs(nv);
      std::vector<Tensor> singles(nv);
      parallel_for(nv, [&](std::size_t i) {
        const TrainItem& item = data.val[i];
        PlainTrace single = run_chain(
            model, item.obs,
            derive_seed(seed, kRoleValSingle, static_cast<std::uint64_t>(step), i));
        Tensor x_last = single.samples.back();
        if (!x_last.same_shape(item.x)) x_last = reshape(x_last, item.x.shape());
        singles[i] = x_last;
        Tensor err = sub(item.x, x_last);
        single_se[i] = dot(err, err);

        Tensor mean_acc = Tensor::zeros_like(item.x);
        for (int j = 0; j < cfg.n_val; ++j) {
          PlainTrace chain = run_chain(
              model, item.obs,
              derive_seed(seed, kRoleValMulti, static_cast<std::uint64_t>(step),
                          i * 1000 + static_cast<std::uint64_t>(j)));
          Tensor last = chain.samples.back();
          add_in_place(mean_acc, last.same_shape(item.x) ? last : reshape(last, item.x.shape()));
        }
        mean_acc = scale(1.0 / static_cast<double>(cfg.n_val), mean_acc);
        Tensor merr = sub(item.x, mean_acc);
        multi_se[i] = dot(merr, merr);
        psnrs[i] = psnr(item.x, mean_acc, 1.0);
      });
      double val_mse = 0, multi_mse = 0, val_psnr = 0;
      for (std::size_t i = 0; i < nv; ++i) {
        val_mse += single_se[i];
        multi_mse += multi_se[i];
        val_psnr += psnrs[i];
      }
      val_mse /= static_cast<double>(nv);
      multi_mse /= static_cast<double>(nv);
      val_psnr /= static_cast<double>(nv);

      w_sd = robbins_monro_update(w_sd, val_mse, multi_mse, cfg.n_val,
                                  cfg.robbins_monro_step, rm_direction);
      w_sd = sd_safeguard(w_sd, val_mse, cfg.sd_threshold);

      SampleSet gen_set, truth_set;
      for (std::size_t i = 0; i < nv; ++i) {
        gen_set.points.push_back(singles[i]);
        truth_set.points.push_back(data.val[i].x);
      }
      Rng sw_rng(derive_seed(seed, kRoleValSw, static_cast<std::uint64_t>(step), 0));
      const double val_sw = sliced_wasserstein(gen_set, truth_set, 64, sw_rng);

      MetricsRow row;
      row.step = step + 1;
      const double denom = acc_count > 0 ? static_cast<double>(acc_count) : 1.0;
      row.loss_adv = acc_adv / denom;
      row.loss_l1 = acc_l1 / denom;
      row.loss_sd = acc_sd / denom;
      row.loss_total = acc_total / denom;
      row.disc_loss = acc_disc / denom;
      row.w_sd = w_sd;
      row.val_mse = val_mse;
      row.val_psnr = val_psnr;
      row.val_sw = val_sw;
      acc_adv = acc_l1 = acc_sd = acc_total = acc_disc = 0;
      acc_count = 0;

      result.last = make_checkpoint(step + 1);
      if (on_validation) on_validation(result.last, row);
    }
    result.steps_completed = step + 1;
  }

  result.last = make_checkpoint(cfg.total_steps);
  return result;
}

}  // namespace umcmc
