#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "umcmc/kernels.hpp"
#include "umcmc/tensor.hpp"

namespace umcmc {

/// "UMC1" container: format version, count-prefixed named arrays (u16 name
/// length + UTF-8 name, u8 rank, u64 extents, row-major f64 little-endian),
/// a length-prefixed UTF-8 config blob, then 16 bytes of rng state.
/// Round-trips bitwise.
struct NamedArrayFile {
  std::uint32_t version = 1;
  std::vector<std::pair<std::string, Tensor>> arrays;
  std::string config_text;
  std::array<std::uint8_t, 16> rng_state{};

  const Tensor& find(const std::string& name) const;
  const Tensor* find_optional(const std::string& name) const;
};

void write_umc1(const std::string& path, const NamedArrayFile& file);
NamedArrayFile read_umc1(const std::string& path);

/// Adam first/second moments per named parameter plus the step counter.
struct AdamState {
  double beta1 = 0.5;
  double beta2 = 0.9;
  double eps = 1e-8;
  std::int64_t t = 0;
  std::vector<std::pair<std::string, Tensor>> m;
  std::vector<std::pair<std::string, Tensor>> v;

  void update(const std::vector<std::pair<std::string, Tensor*>>& params,
              const std::vector<std::pair<std::string, Tensor>>& grads, double lr);
};

/// Discriminator: (x, y) -> scalar critic value, two hidden dense layers of
/// width 128 with leaky slope 0.2 on the concatenated inputs.
struct Discriminator {
  Tensor w1, b1, w2, b2, w3, b3;
  static Discriminator init(std::size_t d_x, std::size_t d_y, Rng& rng);
  double forward(const Tensor& x, const Tensor& y) const;
  std::vector<std::pair<std::string, Tensor*>> params();
  std::vector<std::pair<std::string, const Tensor*>> params() const;
};

struct Checkpoint {
  std::uint32_t version = 1;
  UnfoldedModel model;
  Discriminator disc;
  std::string config_text;
  std::int64_t step = 0;
  double w_sd = 0.0;
  double rm_direction = 1.0;
  AdamState gen_opt, disc_opt;
  std::array<std::uint8_t, 16> rng_state{};
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

/// Observation files reuse the same container.
void save_observation(const std::string& path, const Observation& obs);
Observation load_observation(const std::string& path);

}  // namespace umcmc
