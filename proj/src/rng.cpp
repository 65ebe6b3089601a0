#include "umcmc/rng.hpp"

#include <cmath>
#include <cstring>
#include <numbers>

namespace umcmc {

namespace {

std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ULL;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBULL;
  z ^= z >> 31;
  return z;
}

}  // namespace

Rng Rng::keyed(std::uint64_t seed, std::uint64_t stream, std::uint64_t role) {
  std::uint64_t s = mix64(seed + 0x9E3779B97F4A7C15ULL);
  s = mix64(s ^ (0xA24BAED4963EE407ULL * (stream + 1)));
  s = mix64(s ^ (0x9FB21C651E98DF25ULL * (role + 1)));
  return Rng(s);
}

std::uint64_t Rng::next_u64() {
  ++draws_;
  state_ += 0x9E3779B97F4A7C15ULL;
  return mix64(state_);
}

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::gaussian() {
  // u1 in (0,1], u2 in [0,1); two fresh draws per call keeps the state flat.
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t Rng::uniform_index(std::uint64_t n) {
  return n == 0 ? 0 : next_u64() % n;
}

Tensor Rng::gaussian_tensor(const std::vector<std::size_t>& shape) {
  Tensor t(shape);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = gaussian();
  return t;
}

Tensor Rng::uniform_tensor(const std::vector<std::size_t>& shape, double lo, double hi) {
  Tensor t(shape);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = lo + (hi - lo) * uniform();
  return t;
}

std::array<std::uint8_t, 16> Rng::save_state() const {
  std::array<std::uint8_t, 16> bytes{};
  std::uint64_t words[2] = {state_, draws_};
  std::memcpy(bytes.data(), words, 16);
  return bytes;
}

void Rng::restore_state(const std::array<std::uint8_t, 16>& bytes) {
  std::uint64_t words[2];
  std::memcpy(words, bytes.data(), 16);
  state_ = words[0];
  draws_ = words[1];
}

}  // namespace umcmc
