#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "umcmc/kernels.hpp"
#include "umcmc/linops.hpp"
#include "umcmc/rng.hpp"
#include "umcmc/tensor.hpp"

namespace umcmc {

/// Image collection with per-item operator seeds and split tags.
struct Dataset {
  std::vector<Tensor> images;             // shared shape, range [0,1]
  std::vector<std::uint64_t> operator_seeds;
  double noise_sigma = 0.0;
  std::vector<int> split;                 // 0 train, 1 val, 2 test
};

/// Loads IDX u8 image tensors (magic 0x00000803, big-endian extents), scales
/// to [0,1] and applies symmetric zero padding.
Dataset load_idx_images(const std::string& path, int pad);

/// Test/helper writer for the same format; values are clamped to [0,1].
void write_idx_u8(const std::string& path, const std::vector<Tensor>& images);

/// Random motion-blur kernel: two independent Matern-3/2 GP paths rasterized
/// with bilinear splatting, centered and normalized to unit sum.
Tensor sample_motion_blur_kernel(int size, double length_scale, double gp_std, Rng& rng);

struct MaskTrackParams {
  int disk_radius = 2;         // always-included low-frequency disk
  int points_per_track = 256;  // samples along each elliptical arc
};

/// Binary Hermitian-symmetric Fourier mask as an (H,W,2) interleaved tensor.
Tensor sample_fourier_mask(std::size_t h, std::size_t w, int n_tracks,
                           const MaskTrackParams& params, Rng& rng);

/// y = A x + noise; real N(0, sigma^2 I), or circular complex with total
/// variance sigma^2 per measurement for FourierMask operators.
Observation make_observation(const Tensor& x, const LinearOperator& op, double sigma,
                             Rng& rng);

/// Latent-Laplace toy prior: x | z ~ N(Sig(W z), rho^2 I) with the smoothed
/// Laplace latent density exp(-sum huber_lambda(z_i)) that the split-Gibbs
/// z-update targets.
struct LatentLaplaceToySpec {
  Tensor W;       // (d, d_z)
  double lambda = 1.0;
  double rho = 0.5;
  double z_lo = -8.0, z_hi = 8.0;
  int z_points = 96;
};

/// Isotropic Gaussian mixture prior with a closed-form linear-Gaussian posterior.
struct GaussianMixturePrior {
  std::vector<double> weights;
  std::vector<Tensor> means;     // (d) each
  std::vector<double> variances; // isotropic
};

struct ToyProblem {
  int d = 2;
  std::variant<LatentLaplaceToySpec, GaussianMixturePrior> prior;
  LinearOperator op = LinearOperator::identity(2);
  double sigma = 0.5;
  double grid_lo = -4.0, grid_hi = 4.0;
  int grid_points = 200;
};

struct GaussianMixture {
  std::vector<double> weights;
  std::vector<Tensor> means;
  std::vector<Tensor> covs;  // (d,d)
  Tensor sample(Rng& rng) const;
  Tensor mean() const;
};

/// Gridded density (d <= 2) with an inverse-CDF sampler.
struct GridDensity {
  int d = 1;
  std::vector<double> axis;  // shared per-dimension grid
  Tensor density;            // (n) or (n,n), trapezoid-normalized
  Tensor sample(Rng& rng) const;
  Tensor mean() const;
};

/// Posterior oracle: closed-form mixture when available, else grid quadrature.
struct PosteriorOracle {
  bool is_mixture = false;
  GaussianMixture mixture;
  GridDensity grid;
  Tensor sample(Rng& rng) const { return is_mixture ? mixture.sample(rng) : grid.sample(rng); }
  Tensor mean() const { return is_mixture ? mixture.mean() : grid.mean(); }
};

/// Normalized posterior on the grid (or the exact mixture); errors when a 2x
/// grid refinement moves the posterior mean by more than 1e-6.
PosteriorOracle toy_posterior_quadrature(const ToyProblem& problem, const Tensor& y);

/// Training items for the toy problems: x from the prior, y = A x + noise.
struct TrainItem {
  Tensor x;
  Observation obs;
};
std::vector<TrainItem> make_toy_items(const ToyProblem& problem, int n, std::uint64_t seed);

}  // namespace umcmc
