#pragma once

#include <complex>
#include <vector>

#include "umcmc/tensor.hpp"

namespace umcmc {

using Spectrum = std::vector<std::complex<double>>;

/// Unnormalized forward 2D DFT of a real (H,W) tensor.
Spectrum fft2(const Tensor& x);
/// Forward/inverse 2D DFT of a complex field; inverse includes the 1/(HW) factor.
Spectrum fft2(const Spectrum& in, std::size_t h, std::size_t w, bool inverse);
/// Inverse 2D DFT (with 1/(HW)), real part as an (H,W) tensor.
Tensor ifft2_real(const Spectrum& spec, std::size_t h, std::size_t w);

}  // namespace umcmc
