#pragma once

#include <functional>
#include <vector>

#include "umcmc/rng.hpp"
#include "umcmc/tape.hpp"
#include "umcmc/tensor.hpp"

namespace umcmc {

/// Linear forward model A with adjoint and spectral structure. Circulant2D
/// and FourierMask use periodic 2D FFTs; FourierMask measurements are complex,
/// stored interleaved as an (H,W,2) real tensor. The mask transform is the
/// unitary DFT, so the operator norm of a {0,1} mask is 1.
class LinearOperator {
 public:
  enum class Kind { Identity, Circulant2D, FourierMask, Dense };

  static LinearOperator identity(std::size_t d);
  /// Periodic convolution with `kernel` (h,w) on (H,W) images, kernel centered.
  static LinearOperator circulant2d(const Tensor& kernel, std::size_t image_h,
                                    std::size_t image_w);
  /// mask: (H,W,2) interleaved complex entries applied after the unitary FFT.
  static LinearOperator fourier_mask(const Tensor& mask);
  static LinearOperator dense(const Tensor& matrix);  // (d_y, d_x)

  Kind kind() const { return kind_; }
  std::size_t domain_size() const;
  std::vector<std::size_t> domain_shape() const;
  std::vector<std::size_t> range_shape() const;
  bool fourier_diagonalizable() const { return kind_ != Kind::Dense; }

  Tensor apply(const Tensor& x) const;
  Tensor adjoint(const Tensor& u) const;
  /// Largest singular value: max |k_hat| (circulant), max |m| (mask),
  /// power iteration with 100 iterations / tol 1e-10 (dense).
  double lipschitz() const;

  /// Eigenvalues of A^T A in the Fourier basis, flattened (identity: ones).
  const Tensor& gram_spectrum() const;

  std::size_t image_h() const { return h_; }
  std::size_t image_w() const { return w_; }
  const Tensor& kernel() const { return kernel_; }
  const Tensor& mask() const { return mask_; }
  const Tensor& matrix() const { return matrix_; }

 private:
  LinearOperator() = default;

  Kind kind_ = Kind::Identity;
  std::size_t h_ = 0, w_ = 0;   // image extents (circulant/mask)
  std::size_t d_ = 0;           // identity dimension
  Tensor kernel_;               // circulant: original kernel
  Tensor mask_;                 // mask: (H,W,2)
  Tensor matrix_;               // dense
  Tensor kernel_spec_;          // circulant: fft of embedded kernel, (H,W,2)
  Tensor gram_spectrum_;        // |A|^2 per Fourier mode, flattened
};

struct GaussianLikelihood {
  GaussianLikelihood(LinearOperator operator_in, double sigma_y_in);
  LinearOperator op;
  double sigma_y;
};

/// argmin_x ||Ax-y||^2/(2 sigma^2) + ||x-v||^2/(2 gamma), i.e. the solution of
/// (I + (gamma/sigma^2) A^T A) x = v + (gamma/sigma^2) A^T y. Closed-form
/// Fourier division for diagonalizable operators, CG (tol 1e-10, max 10 d
/// iterations) for dense.
Tensor prox_gaussian_nll(const GaussianLikelihood& lik, const Tensor& y, double gamma,
                         const Tensor& v);

/// Exact draw from N(prox mean, (sigma^-2 A^T A + rho^-2 I)^-1); the square
/// root acts as an elementwise inverse-sqrt in the Fourier eigenbasis.
/// Diagonalizable operators only.
Tensor sample_gaussian_conditional(const GaussianLikelihood& lik, const Tensor& y,
                                   double rho, const Tensor& m, Rng& rng);
/// Same draw with the white noise supplied by the caller.
Tensor sample_gaussian_conditional_with_noise(const GaussianLikelihood& lik,
                                              const Tensor& y, double rho,
                                              const Tensor& m, const Tensor& zeta);

/// Tape wrappers: differentiable in (gamma, v) and (rho, m) respectively,
/// with the noise recorded as a constant.
Var prox_gaussian_nll_node(Tape& tape, const GaussianLikelihood& lik, const Tensor& y,
                           Var gamma, Var v);
Var sample_gaussian_conditional_node(Tape& tape, const GaussianLikelihood& lik,
                                     const Tensor& y, Var rho, Var m, const Tensor& zeta);

/// F^H diag(f(a2_k)) F x for diagonalizable operators (a2 = gram spectrum).
Tensor spectral_filter(const LinearOperator& op, const Tensor& x,
                       const std::function<double(double)>& f);

/// CG for (I + q A^T A) x = rhs; throws NumericError with the residual norm on
/// non-convergence.
Tensor cg_solve_shifted_gram(const LinearOperator& op, double q, const Tensor& rhs);

}  // namespace umcmc
