#include "umcmc/checkpoint.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace umcmc {

namespace {

template <typename T>
void write_raw(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::istream& in, const char* what) {
  T v;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    throw FormatError(std::string("UMC1: truncated reading ") + what);
  }
  return v;
}

Tensor meta_scalar(double v) { return Tensor::scalar(v); }

}  // namespace

const Tensor& NamedArrayFile::find(const std::string& name) const {
  const Tensor* t = find_optional(name);
  if (t == nullptr) throw FormatError("UMC1: missing array '" + name + "'");
  return *t;
}

const Tensor* NamedArrayFile::find_optional(const std::string& name) const {
  for (const auto& [n, t] : arrays) {
    if (n == name) return &t;
  }
  return nullptr;
}

void write_umc1(const std::string& path, const NamedArrayFile& file) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("UMC1: cannot open " + path + " for writing");
  out.write("UMC1", 4);
  write_raw<std::uint32_t>(out, file.version);
  write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(file.arrays.size()));
  for (const auto& [name, tensor] : file.arrays) {
    write_raw<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_raw<std::uint8_t>(out, static_cast<std::uint8_t>(tensor.rank()));
    for (std::size_t e : tensor.shape()) write_raw<std::uint64_t>(out, e);
    out.write(reinterpret_cast<const char*>(tensor.data()),
              static_cast<std::streamsize>(tensor.size() * sizeof(double)));
  }
  write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(file.config_text.size()));
  out.write(file.config_text.data(), static_cast<std::streamsize>(file.config_text.size()));
  out.write(reinterpret_cast<const char*>(file.rng_state.data()), 16);
  if (!out) throw FormatError("UMC1: write failed for " + path);
}

NamedArrayFile read_umc1(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("UMC1: cannot open " + path);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "UMC1", 4) != 0) {
    throw FormatError("UMC1: bad magic in " + path);
  }
  NamedArrayFile file;
  file.version = read_raw<std::uint32_t>(in, "version");
  const std::uint32_t count = read_raw<std::uint32_t>(in, "array count");
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint16_t name_len = read_raw<std::uint16_t>(in, "name length");
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len)) throw FormatError("UMC1: truncated name");
    const std::uint8_t rank = read_raw<std::uint8_t>(in, "rank");
    std::vector<std::size_t> shape;
    for (std::uint8_t r = 0; r < rank; ++r) {
      shape.push_back(static_cast<std::size_t>(read_raw<std::uint64_t>(in, "extent")));
    }
    Tensor t(shape);
    if (!in.read(reinterpret_cast<char*>(t.data()),
                 static_cast<std::streamsize>(t.size() * sizeof(double)))) {
      throw FormatError("UMC1: truncated data for '" + name + "'");
    }
    file.arrays.emplace_back(std::move(name), std::move(t));
  }
  const std::uint32_t cfg_len = read_raw<std::uint32_t>(in, "config length");
  file.config_text.resize(cfg_len);
  if (cfg_len > 0 && !in.read(file.config_text.data(), cfg_len)) {
    throw FormatError("UMC1: truncated config blob");
  }
  if (!in.read(reinterpret_cast<char*>(file.rng_state.data()), 16)) {
    throw FormatError("UMC1: truncated rng state");
  }
  return file;
}

void AdamState::update(const std::vector<std::pair<std::string, Tensor*>>& params,
                       const std::vector<std::pair<std::string, Tensor>>& grads, double lr) {
  if (m.empty()) {
    for (const auto& [name, p] : params) {
      m.emplace_back(name, Tensor::zeros_like(*p));
      v.emplace_back(name, Tensor::zeros_like(*p));
    }
  }
  ++t;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = *params[k].second;
    const Tensor* g = nullptr;
    for (const auto& [name, grad] : grads) {
      if (name == params[k].first) g = &grad;
    }
    if (g == nullptr) continue;
    Tensor& mk = m[k].second;
    Tensor& vk = v[k].second;
    for (std::size_t i = 0; i < p.size(); ++i) {
      mk[i] = beta1 * mk[i] + (1.0 - beta1) * (*g)[i];
      vk[i] = beta2 * vk[i] + (1.0 - beta2) * (*g)[i] * (*g)[i];
      p[i] -= lr * (mk[i] / bc1) / (std::sqrt(vk[i] / bc2) + eps);
    }
  }
}

Discriminator Discriminator::init(std::size_t d_x, std::size_t d_y, Rng& rng) {
  constexpr std::size_t kWidth = 128;
  Discriminator d;
  d.w1 = Tensor({kWidth, d_x + d_y});
  d.b1 = Tensor({kWidth});
  d.w2 = Tensor({kWidth, kWidth});
  d.b2 = Tensor({kWidth});
  d.w3 = Tensor({1, kWidth});
  d.b3 = Tensor({1});
  const double s1 = 1.0 / std::sqrt(static_cast<double>(d_x + d_y));
  const double s2 = 1.0 / std::sqrt(static_cast<double>(kWidth));
  for (std::size_t i = 0; i < d.w1.size(); ++i) d.w1[i] = s1 * rng.gaussian();
  for (std::size_t i = 0; i < d.w2.size(); ++i) d.w2[i] = s2 * rng.gaussian();
  for (std::size_t i = 0; i < d.w3.size(); ++i) d.w3[i] = s2 * rng.gaussian();
  return d;
}

double Discriminator::forward(const Tensor& x, const Tensor& y) const {
  Tensor xf = x.rank() == 1 ? x : reshape(x, {x.size()});
  Tensor yf = y.rank() == 1 ? y : reshape(y, {y.size()});
  Tensor in = concat({&xf, &yf});
  auto leaky = [](Tensor t) {
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (t[i] <= 0.0) t[i] *= 0.2;
    }
    return t;
  };
  Tensor h1 = leaky(add(matvec(w1, in), b1));
  Tensor h2 = leaky(add(matvec(w2, h1), b2));
  return add(matvec(w3, h2), b3)[0];
}

std::vector<std::pair<std::string, Tensor*>> Discriminator::params() {
  return {{"disc.w1", &w1}, {"disc.b1", &b1}, {"disc.w2", &w2},
          {"disc.b2", &b2}, {"disc.w3", &w3}, {"disc.b3", &b3}};
}

std::vector<std::pair<std::string, const Tensor*>> Discriminator::params() const {
  std::vector<std::pair<std::string, const Tensor*>> out;
  for (auto& [name, ptr] : const_cast<Discriminator*>(this)->params()) {
    out.emplace_back(name, ptr);
  }
  return out;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  NamedArrayFile file;
  file.version = ckpt.version;
  file.config_text = ckpt.config_text;
  file.rng_state = ckpt.rng_state;
  auto put = [&](const std::string& name, const Tensor& t) { file.arrays.emplace_back(name, t); };

  put("meta.step", meta_scalar(static_cast<double>(ckpt.step)));
  put("meta.w_sd", meta_scalar(ckpt.w_sd));
  put("meta.rm_direction", meta_scalar(ckpt.rm_direction));

  const UnfoldedModel& m = ckpt.model;
  put("model.kind", meta_scalar(m.kind == UnfoldedModel::KernelKind::SGS ? 0.0 : 1.0));
  put("model.L", meta_scalar(static_cast<double>(m.L)));
  put("model.L0", meta_scalar(static_cast<double>(m.L0)));
  put("model.d_x", meta_scalar(static_cast<double>(m.d_x)));
  put("model.d_z", meta_scalar(static_cast<double>(m.d_z)));
  put("model.sched.beta_min", meta_scalar(m.sched.beta_min));
  put("model.sched.beta_max", meta_scalar(m.sched.beta_max));
  put("model.latino_init", meta_scalar(m.latino_backprojection_init ? 1.0 : 0.0));
  put("model.denoiser.kind",
      meta_scalar(m.denoiser.kind == Denoiser::Kind::AnalyticGaussian ? 0.0 : 1.0));
  for (const auto& [name, t] : m.params()) put(name, *t);
  if (m.kind == UnfoldedModel::KernelKind::LATINO &&
      m.denoiser.kind == Denoiser::Kind::AnalyticGaussian) {
    put("model.denoiser.mu0", m.denoiser.analytic.mu0);
    put("model.denoiser.c0", m.denoiser.analytic.c0);
  }
  for (const auto& [name, t] : ckpt.disc.params()) put(name, *t);

  auto put_opt = [&](const std::string& prefix, const AdamState& opt) {
    put(prefix + ".t", meta_scalar(static_cast<double>(opt.t)));
    for (const auto& [name, t] : opt.m) put(prefix + ".m." + name, t);
    for (const auto& [name, t] : opt.v) put(prefix + ".v." + name, t);
  };
  put_opt("opt.gen", ckpt.gen_opt);
  put_opt("opt.disc", ckpt.disc_opt);
  write_umc1(path, file);
}

Checkpoint load_checkpoint(const std::string& path) {
  NamedArrayFile file = read_umc1(path);
  Checkpoint ckpt;
  ckpt.version = file.version;
  ckpt.config_text = file.config_text;
  ckpt.rng_state = file.rng_state;
  ckpt.step = static_cast<std::int64_t>(file.find("meta.step").item());
  ckpt.w_sd = file.find("meta.w_sd").item();
  ckpt.rm_direction = file.find("meta.rm_direction").item();

  UnfoldedModel& m = ckpt.model;
  m.kind = file.find("model.kind").item() == 0.0 ? UnfoldedModel::KernelKind::SGS
                                                 : UnfoldedModel::KernelKind::LATINO;
  m.L = static_cast<int>(file.find("model.L").item());
  m.L0 = static_cast<int>(file.find("model.L0").item());
  m.d_x = static_cast<std::size_t>(file.find("model.d_x").item());
  m.d_z = static_cast<std::size_t>(file.find("model.d_z").item());
  m.sched.beta_min = file.find("model.sched.beta_min").item();
  m.sched.beta_max = file.find("model.sched.beta_max").item();
  m.latino_backprojection_init = file.find("model.latino_init").item() != 0.0;
  m.denoiser.kind = file.find("model.denoiser.kind").item() == 0.0
                        ? Denoiser::Kind::AnalyticGaussian
                        : Denoiser::Kind::SmallDense;
  m.log_gamma = file.find("model.log_gamma");
  if (m.kind == UnfoldedModel::KernelKind::SGS) {
    m.W = file.find("model.W");
    m.log_lambda = file.find("model.log_lambda");
    m.log_rho = file.find("model.log_rho");
  } else {
    m.t_raw = file.find("model.t_raw");
    if (m.denoiser.kind == Denoiser::Kind::SmallDense) {
      m.denoiser.dense.w1 = file.find("model.denoiser.w1");
      m.denoiser.dense.b1 = file.find("model.denoiser.b1");
      m.denoiser.dense.w2 = file.find("model.denoiser.w2");
      m.denoiser.dense.b2 = file.find("model.denoiser.b2");
    } else {
      m.denoiser.analytic.mu0 = file.find("model.denoiser.mu0");
      m.denoiser.analytic.c0 = file.find("model.denoiser.c0");
    }
  }

  ckpt.disc.w1 = file.find("disc.w1");
  ckpt.disc.b1 = file.find("disc.b1");
  ckpt.disc.w2 = file.find("disc.w2");
  ckpt.disc.b2 = file.find("disc.b2");
  ckpt.disc.w3 = file.find("disc.w3");
  ckpt.disc.b3 = file.find("disc.b3");

  auto load_opt = [&](const std::string& prefix, AdamState& opt,
                      const std::vector<std::pair<std::string, const Tensor*>>& params) {
    opt.t = static_cast<std::int64_t>(file.find(prefix + ".t").item());
    opt.m.clear();
    opt.v.clear();
    for (const auto& [name, t] : params) {
      (void)t;
      const Tensor* mt = file.find_optional(prefix + ".m." + name);
      const Tensor* vt = file.find_optional(prefix + ".v." + name);
      if (mt != nullptr && vt != nullptr) {
        opt.m.emplace_back(name, *mt);
        opt.v.emplace_back(name, *vt);
      }
    }
  };
  load_opt("opt.gen", ckpt.gen_opt, ckpt.model.params());
  load_opt("opt.disc", ckpt.disc_opt, ckpt.disc.params());
  return ckpt;
}

void save_observation(const std::string& path, const Observation& obs) {
  NamedArrayFile file;
  file.arrays.emplace_back("y", obs.y);
  const LinearOperator& op = obs.likelihood.op;
  std::string kind;
  switch (op.kind()) {
    case LinearOperator::Kind::Identity: kind = "identity"; break;
    case LinearOperator::Kind::Circulant2D:
      kind = "circulant";
      file.arrays.emplace_back("kernel", op.kernel());
      break;
    case LinearOperator::Kind::FourierMask:
      kind = "mask";
      file.arrays.emplace_back("mask", op.mask());
      break;
    case LinearOperator::Kind::Dense:
      kind = "dense";
      file.arrays.emplace_back("matrix", op.matrix());
      break;
  }
  file.arrays.emplace_back("meta.sigma", Tensor::scalar(obs.likelihood.sigma_y));
  file.arrays.emplace_back("meta.image_h", Tensor::scalar(static_cast<double>(op.image_h())));
  file.arrays.emplace_back("meta.image_w", Tensor::scalar(static_cast<double>(op.image_w())));
  file.arrays.emplace_back("meta.domain",
                           Tensor::scalar(static_cast<double>(op.domain_size())));
  file.config_text = "[observation]\noperator = " + kind + "\n";
  write_umc1(path, file);
}

Observation load_observation(const std::string& path) {
  NamedArrayFile file = read_umc1(path);
  const std::string& cfg = file.config_text;
  auto has = [&](const char* kind) { return cfg.find(std::string("= ") + kind) != std::string::npos; };
  const double sigma = file.find("meta.sigma").item();
  LinearOperator op = LinearOperator::identity(1);
  if (has("identity")) {
    op = LinearOperator::identity(static_cast<std::size_t>(file.find("meta.domain").item()));
  } else if (has("circulant")) {
    op = LinearOperator::circulant2d(
        file.find("kernel"), static_cast<std::size_t>(file.find("meta.image_h").item()),
        static_cast<std::size_t>(file.find("meta.image_w").item()));
  } else if (has("mask")) {
    op = LinearOperator::fourier_mask(file.find("mask"));
  } else if (has("dense")) {
    op = LinearOperator::dense(file.find("matrix"));
  } else {
    throw FormatError("load_observation: unknown operator kind in " + path);
  }
  return Observation{file.find("y"), GaussianLikelihood(op, sigma)};
}

}  // namespace umcmc
