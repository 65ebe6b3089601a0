#pragma once

#include <array>
#include <cstdint>

#include "umcmc/tensor.hpp"

namespace umcmc {

/// Counter-based deterministic generator (splitmix64 core). Streams derived
/// by keyed() are independent of evaluation order, so chains in a batch can
/// draw noise concurrently and still reproduce bitwise.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  /// Independent stream for (seed, stream, role), e.g. (chain seed, layer, noise role).
  static Rng keyed(std::uint64_t seed, std::uint64_t stream, std::uint64_t role);

  std::uint64_t next_u64();
  /// Uniform on [0,1).
  double uniform();
  /// Standard normal (Box-Muller, no cached second value).
  double gaussian();
  /// Uniform integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t n);

  Tensor gaussian_tensor(const std::vector<std::size_t>& shape);
  Tensor uniform_tensor(const std::vector<std::size_t>& shape, double lo, double hi);

  std::array<std::uint8_t, 16> save_state() const;
  void restore_state(const std::array<std::uint8_t, 16>& bytes);

 private:
  std::uint64_t state_ = 0;
  std::uint64_t draws_ = 0;
};

/// Role tags for chain noise streams.
enum class NoiseRole : std::uint64_t {
  kLatentStep = 0,   // SGS z-update innovation
  kConditional = 1,  // SGS x-update / exact conditional draw
  kForwardSde = 2,   // LATINO forward diffusion noise
};

}  // namespace umcmc
