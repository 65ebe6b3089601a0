#include "umcmc/linops.hpp"

#include <cmath>

#include "umcmc/fft.hpp"

namespace umcmc {

namespace {

Spectrum to_spectrum(const Tensor& interleaved) {
  Spectrum s(interleaved.size() / 2);
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = {interleaved[2 * i], interleaved[2 * i + 1]};
  }
  return s;
}

Tensor from_spectrum(const Spectrum& s, std::size_t h, std::size_t w) {
  Tensor t({h, w, 2});
  for (std::size_t i = 0; i < s.size(); ++i) {
    t[2 * i] = s[i].real();
    t[2 * i + 1] = s[i].imag();
  }
  return t;
}

}  // namespace

LinearOperator LinearOperator::identity(std::size_t d) {
  LinearOperator op;
  op.kind_ = Kind::Identity;
  op.d_ = d;
  op.gram_spectrum_ = Tensor({d}, 1.0);
  return op;
}

LinearOperator LinearOperator::circulant2d(const Tensor& kernel, std::size_t image_h,
                                           std::size_t image_w) {
  if (kernel.rank() != 2) throw ShapeError("circulant2d: kernel must be rank-2");
  if (kernel.extent(0) > image_h || kernel.extent(1) > image_w) {
    throw ShapeError("circulant2d: kernel " + kernel.shape_str() + " exceeds image " +
                     std::to_string(image_h) + "x" + std::to_string(image_w));
  }
  LinearOperator op;
  op.kind_ = Kind::Circulant2D;
  op.h_ = image_h;
  op.w_ = image_w;
  op.kernel_ = kernel;

  // Embed the kernel so its center lands on index (0,0); a centered delta
  // kernel then acts as the identity.
  Tensor embedded({image_h, image_w});
  const std::size_t ch = (kernel.extent(0) - 1) / 2;
  const std::size_t cw = (kernel.extent(1) - 1) / 2;
  for (std::size_t i = 0; i < kernel.extent(0); ++i) {
    for (std::size_t j = 0; j < kernel.extent(1); ++j) {
      const std::size_t r = (i + image_h - ch) % image_h;
      const std::size_t c = (j + image_w - cw) % image_w;
      embedded.at(r, c) += kernel.at(i, j);
    }
  }
  Spectrum spec = fft2(embedded);
  op.kernel_spec_ = from_spectrum(spec, image_h, image_w);
  op.gram_spectrum_ = Tensor({image_h * image_w});
  for (std::size_t i = 0; i < spec.size(); ++i) op.gram_spectrum_[i] = std::norm(spec[i]);
  return op;
}

LinearOperator LinearOperator::fourier_mask(const Tensor& mask) {
  if (mask.rank() != 3 || mask.extent(2) != 2) {
    throw ShapeError("fourier_mask: mask must be (H,W,2), got " + mask.shape_str());
  }
  if (!mask.all_finite()) throw NumericError("fourier_mask: non-finite entries");
  LinearOperator op;
  op.kind_ = Kind::FourierMask;
  op.h_ = mask.extent(0);
  op.w_ = mask.extent(1);
  op.mask_ = mask;
  op.gram_spectrum_ = Tensor({op.h_ * op.w_});
  for (std::size_t i = 0; i < op.gram_spectrum_.size(); ++i) {
    op.gram_spectrum_[i] = mask[2 * i] * mask[2 * i] + mask[2 * i + 1] * mask[2 * i + 1];
  }
  return op;
}

LinearOperator LinearOperator::dense(const Tensor& matrix) {
  if (matrix.rank() != 2) throw ShapeError("dense: matrix must be rank-2");
  LinearOperator op;
  op.kind_ = Kind::Dense;
  op.matrix_ = matrix;
  return op;
}

std::size_t LinearOperator::domain_size() const {
  switch (kind_) {
    case Kind::Identity: return d_;
    case Kind::Circulant2D:
    case Kind::FourierMask: return h_ * w_;
    case Kind::Dense: return matrix_.extent(1);
  }
  return 0;
}

std::vector<std::size_t> LinearOperator::domain_shape() const {
  switch (kind_) {
    case Kind::Identity: return {d_};
    case Kind::Circulant2D:
    case Kind::FourierMask: return {h_, w_};
    case Kind::Dense: return {matrix_.extent(1)};
  }
  return {};
}

std::vector<std::size_t> LinearOperator::range_shape() const {
  switch (kind_) {
    case Kind::Identity: return {d_};
    case Kind::Circulant2D: return {h_, w_};
    case Kind::FourierMask: return {h_, w_, 2};
    case Kind::Dense: return {matrix_.extent(0)};
  }
  return {};
}

Tensor LinearOperator::apply(const Tensor& x) const {
  switch (kind_) {
    case Kind::Identity: {
      if (x.size() != d_) {
        throw ShapeError("identity apply: size " + x.shape_str() + " != " +
                         std::to_string(d_));
      }
      return x;
    }
    case Kind::Circulant2D: {
      if (x.rank() != 2 || x.extent(0) != h_ || x.extent(1) != w_) {
        throw ShapeError("circulant apply: image shape mismatch " + x.shape_str());
      }
      Spectrum xs = fft2(x);
      Spectrum ks = to_spectrum(kernel_spec_);
      for (std::size_t i = 0; i < xs.size(); ++i) xs[i] *= ks[i];
      return ifft2_real(xs, h_, w_);
    }
    case Kind::FourierMask: {
      if (x.rank() != 2 || x.extent(0) != h_ || x.extent(1) != w_) {
        throw ShapeError("mask apply: image shape mismatch " + x.shape_str());
      }
      Spectrum xs = fft2(x);
      Spectrum ms = to_spectrum(mask_);
      const double unit = 1.0 / std::sqrt(static_cast<double>(h_ * w_));
      for (std::size_t i = 0; i < xs.size(); ++i) xs[i] *= ms[i] * unit;
      return from_spectrum(xs, h_, w_);
    }
    case Kind::Dense: {
      if (x.size() != matrix_.extent(1)) {
        throw ShapeError("dense apply: shape mismatch " + x.shape_str() + " vs " +
                         matrix_.shape_str());
      }
      return matvec(matrix_, x.rank() == 1 ? x : reshape(x, {x.size()}));
    }
  }
  throw Error("apply: bad operator kind");
}

Tensor LinearOperator::adjoint(const Tensor& u) const {
  switch (kind_) {
    case Kind::Identity: {
      if (u.size() != d_) {
        throw ShapeError("identity adjoint: size " + u.shape_str() + " != " +
                         std::to_string(d_));
      }
      return u;
    }
    case Kind::Circulant2D: {
      if (u.rank() != 2 || u.extent(0) != h_ || u.extent(1) != w_) {
        throw ShapeError("circulant adjoint: image shape mismatch " + u.shape_str());
      }
      Spectrum us = fft2(u);
      Spectrum ks = to_spectrum(kernel_spec_);
      for (std::size_t i = 0; i < us.size(); ++i) us[i] *= std::conj(ks[i]);
      return ifft2_real(us, h_, w_);
    }
    case Kind::FourierMask: {
      if (u.rank() != 3 || u.extent(0) != h_ || u.extent(1) != w_ || u.extent(2) != 2) {
        throw ShapeError("mask adjoint: expects (H,W,2), got " + u.shape_str());
      }
      Spectrum us = to_spectrum(u);
      Spectrum ms = to_spectrum(mask_);
      for (std::size_t i = 0; i < us.size(); ++i) us[i] *= std::conj(ms[i]);
      Spectrum out = fft2(us, h_, w_, /*inverse=*/true);
      const double unit = std::sqrt(static_cast<double>(h_ * w_));
      Tensor t({h_, w_});
      for (std::size_t i = 0; i < out.size(); ++i) t[i] = out[i].real() * unit;
      return t;
    }
    case Kind::Dense: {
      if (u.size() != matrix_.extent(0)) {
        throw ShapeError("dense adjoint: shape mismatch " + u.shape_str() + " vs " +
                         matrix_.shape_str());
      }
      return matvec_t(matrix_, u.rank() == 1 ? u : reshape(u, {u.size()}));
    }
  }
  throw Error("adjoint: bad operator kind");
}

double LinearOperator::lipschitz() const {
  switch (kind_) {
    case Kind::Identity: return 1.0;
    case Kind::Circulant2D:
    case Kind::FourierMask: {
      double m = 0.0;
      for (std::size_t i = 0; i < gram_spectrum_.size(); ++i) {
        m = std::max(m, gram_spectrum_[i]);
      }
      return std::sqrt(m);
    }
    case Kind::Dense: {
      // Power iteration on A^T A.
      const std::size_t n = matrix_.extent(1);
      Rng rng = Rng::keyed(0x11B5C0DE, matrix_.extent(0), n);
      Tensor v = rng.gaussian_tensor({n});
      double nv = norm2(v);
      for (std::size_t i = 0; i < v.size(); ++i) v[i] /= nv;
      double lambda = 0.0;
      for (int it = 0; it < 100; ++it) {
        Tensor w = matvec_t(matrix_, matvec(matrix_, v));
        const double nw = norm2(w);
        if (nw == 0.0) return 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) w[i] /= nw;
        const double next = dot(w, matvec_t(matrix_, matvec(matrix_, w)));
        v = std::move(w);
        if (std::abs(next - lambda) <= 1e-10 * std::max(1.0, std::abs(next))) {
          lambda = next;
          break;
        }
        lambda = next;
      }
      return std::sqrt(std::max(lambda, 0.0));
    }
  }
  return 0.0;
}

const Tensor& LinearOperator::gram_spectrum() const {
  if (kind_ == Kind::Dense) {
    throw UnsupportedError("gram_spectrum: dense operators are not Fourier-diagonalizable");
  }
  return gram_spectrum_;
}

GaussianLikelihood::GaussianLikelihood(LinearOperator operator_in, double sigma_y_in)
    : op(std::move(operator_in)), sigma_y(sigma_y_in) {
  if (!(sigma_y > 0.0)) throw NumericError("GaussianLikelihood: sigma_y must be positive");
}

Tensor spectral_filter(const LinearOperator& op, const Tensor& x,
                       const std::function<double(double)>& f) {
  const Tensor& a2 = op.gram_spectrum();
  if (op.kind() == LinearOperator::Kind::Identity) {
    Tensor out = x;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= f(a2[i]);
    return out;
  }
  const std::size_t h = op.image_h();
  const std::size_t w = op.image_w();
  if (x.rank() != 2 || x.extent(0) != h || x.extent(1) != w) {
    throw ShapeError("spectral_filter: image shape mismatch " + x.shape_str());
  }
  Spectrum xs = fft2(x);
  for (std::size_t i = 0; i < xs.size(); ++i) xs[i] *= f(a2[i]);
  return ifft2_real(xs, h, w);
}

Tensor cg_solve_shifted_gram(const LinearOperator& op, double q, const Tensor& rhs) {
  const std::size_t d = rhs.size();
  auto system = [&](const Tensor& x) {
    Tensor r = op.adjoint(op.apply(x));
    for (std::size_t i = 0; i < d; ++i) r[i] = x[i] + q * r[i];
    return r;
  };
  Tensor x = Tensor::zeros_like(rhs);
  Tensor r = rhs;
  Tensor p = r;
  double rr = dot(r, r);
  const double target = 1e-10 * std::max(norm2(rhs), 1e-300);
  const std::size_t max_iters = 10 * d;
  for (std::size_t it = 0; it < max_iters && std::sqrt(rr) > target; ++it) {
    Tensor ap = system(p);
    const double alpha = rr / dot(p, ap);
    add_scaled_in_place(x, alpha, p);
    add_scaled_in_place(r, -alpha, ap);
    const double rr_next = dot(r, r);
    const double beta = rr_next / rr;
    rr = rr_next;
    for (std::size_t i = 0; i < d; ++i) p[i] = r[i] + beta * p[i];
  }
  if (std::sqrt(rr) > target) {
    throw NumericError("cg_solve_shifted_gram: no convergence, residual norm " +
                       std::to_string(std::sqrt(rr)));
  }
  return x;
}

Tensor prox_gaussian_nll(const GaussianLikelihood& lik, const Tensor& y, double gamma,
                         const Tensor& v) {
  if (!(gamma > 0.0)) throw NumericError("prox_gaussian_nll: gamma must be positive");
  const double q = gamma / (lik.sigma_y * lik.sigma_y);
  Tensor w = v;
  add_scaled_in_place(w, q, lik.op.adjoint(y));
  if (lik.op.fourier_diagonalizable()) {
    return spectral_filter(lik.op, w, [q](double a2) { return 1.0 / (1.0 + q * a2); });
  }
  Tensor flat = w.rank() == 1 ? w : reshape(w, {w.size()});
  return cg_solve_shifted_gram(lik.op, q, flat);
}

Tensor sample_gaussian_conditional_with_noise(const GaussianLikelihood& lik,
                                              const Tensor& y, double rho,
                                              const Tensor& m, const Tensor& zeta) {
  if (!(rho > 0.0)) throw NumericError("sample_gaussian_conditional: rho must be positive");
  if (!lik.op.fourier_diagonalizable()) {
    throw UnsupportedError(
        "sample_gaussian_conditional: operator is not Fourier-diagonalizable");
  }
  require_same_shape("sample_gaussian_conditional noise", m, zeta);
  const double inv_s2 = 1.0 / (lik.sigma_y * lik.sigma_y);
  const double c = 1.0 / (rho * rho);
  Tensor mean = prox_gaussian_nll(lik, y, rho * rho, m);
  Tensor colored = spectral_filter(
      lik.op, zeta, [&](double a2) { return 1.0 / std::sqrt(a2 * inv_s2 + c); });
  add_in_place(mean, colored);
  return mean;
}

Tensor sample_gaussian_conditional(const GaussianLikelihood& lik, const Tensor& y,
                                   double rho, const Tensor& m, Rng& rng) {
  return sample_gaussian_conditional_with_noise(lik, y, rho, m,
                                                rng.gaussian_tensor(m.shape()));
}

Var prox_gaussian_nll_node(Tape& tape, const GaussianLikelihood& lik, const Tensor& y,
                           Var gamma, Var v) {
  const double gamma_v = tape.scalar_value(gamma);
  const Tensor& v_val = tape.value(v);
  Tensor x = prox_gaussian_nll(lik, y, gamma_v, v_val);
  const double s2 = lik.sigma_y * lik.sigma_y;
  Tensor aty = lik.op.adjoint(y);
  LinearOperator op = lik.op;
  Var out = tape.custom(
      x, {gamma, v},
      [op, s2, gamma_v, aty, x](const Tensor& g) -> std::vector<Tensor> {
        const double q = gamma_v / s2;
        Tensor gt;
        if (op.fourier_diagonalizable()) {
          gt = spectral_filter(op, g, [q](double a2) { return 1.0 / (1.0 + q * a2); });
        } else {
          gt = cg_solve_shifted_gram(op, q, g);
        }
        // dx/dgamma = (I + q A^T A)^-1 (A^T y - A^T A x) / sigma^2
        Tensor residual = aty;
        Tensor xs = x.same_shape(residual) ? x : reshape(x, residual.shape());
        add_scaled_in_place(residual, -1.0, op.adjoint(op.apply(xs)));
        Tensor gflat = gt.same_shape(residual) ? gt : reshape(gt, residual.shape());
        const double ggamma = dot(gflat, residual) / s2;
        return {Tensor::scalar(ggamma), std::move(gt)};
      });
  return out;
}

Var sample_gaussian_conditional_node(Tape& tape, const GaussianLikelihood& lik,
                                     const Tensor& y, Var rho, Var m, const Tensor& zeta) {
  const double rho_v = tape.scalar_value(rho);
  const Tensor& m_val = tape.value(m);
  Tensor x = sample_gaussian_conditional_with_noise(lik, y, rho_v, m_val, zeta);
  const double s2 = lik.sigma_y * lik.sigma_y;
  LinearOperator op = lik.op;
  Tensor mean = prox_gaussian_nll(lik, y, rho_v * rho_v, m_val);
  Tensor m_copy = m_val;
  Var out = tape.custom(
      x, {rho, m},
      [op, s2, rho_v, mean, m_copy, zeta](const Tensor& g) -> std::vector<Tensor> {
        const double c = 1.0 / (rho_v * rho_v);
        auto b_of = [&](double a2) { return a2 / s2 + c; };
        Tensor gm = spectral_filter(op, g, [&](double a2) { return c / b_of(a2); });
        // d x / d c, then chain with dc/drho = -2 / rho^3.
        Tensor diff = sub(m_copy, mean);
        Tensor dmean = spectral_filter(op, diff, [&](double a2) { return 1.0 / b_of(a2); });
        Tensor dnoise = spectral_filter(op, zeta, [&](double a2) {
          return 0.5 / (b_of(a2) * std::sqrt(b_of(a2)));
        });
        add_scaled_in_place(dmean, -1.0, dnoise);
        const double grho = dot(g, dmean) * (-2.0 / (rho_v * rho_v * rho_v));
        return {Tensor::scalar(grho), std::move(gm)};
      });
  return out;
}

}  // namespace umcmc
