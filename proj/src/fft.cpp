#include "umcmc/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>

namespace umcmc {

namespace {

// FFTW plan creation is not thread-safe; executing distinct plans is. Plans
// are cached per (H, W, direction) with FFTW_UNALIGNED so they can run on any
// caller-provided buffers via fftw_execute_dft.
std::mutex& plan_mutex() {
  static std::mutex m;
  return m;
}

fftw_plan cached_plan(std::size_t h, std::size_t w, int sign) {
  static std::map<std::tuple<std::size_t, std::size_t, int>, fftw_plan> cache;
  std::lock_guard<std::mutex> lock(plan_mutex());
  auto key = std::make_tuple(h, w, sign);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  std::vector<std::complex<double>> scratch(h * w);
  fftw_plan plan = fftw_plan_dft_2d(
      static_cast<int>(h), static_cast<int>(w),
      reinterpret_cast<fftw_complex*>(scratch.data()),
      reinterpret_cast<fftw_complex*>(scratch.data()), sign,
      FFTW_ESTIMATE | FFTW_UNALIGNED);
  cache.emplace(key, plan);
  return plan;
}

void execute(std::size_t h, std::size_t w, int sign, Spectrum& buf) {
  fftw_plan plan = cached_plan(h, w, sign);
  fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(buf.data()),
                   reinterpret_cast<fftw_complex*>(buf.data()));
}

}  // namespace

Spectrum fft2(const Tensor& x) {
  if (x.rank() != 2) throw ShapeError("fft2: expects rank-2 tensor, got " + x.shape_str());
  const std::size_t h = x.extent(0);
  const std::size_t w = x.extent(1);
  Spectrum buf(h * w);
  for (std::size_t i = 0; i < h * w; ++i) buf[i] = {x[i], 0.0};
  execute(h, w, FFTW_FORWARD, buf);
  return buf;
}

Spectrum fft2(const Spectrum& in, std::size_t h, std::size_t w, bool inverse) {
  if (in.size() != h * w) throw ShapeError("fft2: spectrum size mismatch");
  Spectrum buf = in;
  execute(h, w, inverse ? FFTW_BACKWARD : FFTW_FORWARD, buf);
  if (inverse) {
    const double inv = 1.0 / static_cast<double>(h * w);
    for (auto& c : buf) c *= inv;
  }
  return buf;
}

Tensor ifft2_real(const Spectrum& spec, std::size_t h, std::size_t w) {
  Spectrum buf = fft2(spec, h, w, /*inverse=*/true);
  Tensor out({h, w});
  for (std::size_t i = 0; i < h * w; ++i) out[i] = buf[i].real();
  return out;
}

}  // namespace umcmc
