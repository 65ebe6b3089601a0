#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "umcmc/rng.hpp"
#include "umcmc/tensor.hpp"

namespace umcmc {

/// Empirical sample set; `paired_obs`, when nonempty, aligns an observation
/// with each point so joint (x,y) metrics concatenate the two.
struct SampleSet {
  std::vector<Tensor> points;
  std::vector<Tensor> paired_obs;

  void validate() const;
};

struct GaussianSummary {
  Tensor mean;  // (d)
  Tensor cov;   // (d,d) symmetric PSD
};

/// Sample mean/covariance; ridge is added to the covariance diagonal.
GaussianSummary fit_gaussian(const std::vector<Tensor>& points, double ridge = 0.0);

/// 10 log10(peak^2 / MSE); +inf sentinel when MSE is zero.
double psnr(const Tensor& x, const Tensor& xhat, double peak);

/// Mean local SSIM with a uniform window; C1=(0.01 peak)^2, C2=(0.03 peak)^2.
double ssim(const Tensor& x, const Tensor& xhat, int window = 7, double peak = 1.0);

/// Mean over random unit directions of the 1D W2 distance between projected
/// samples (sorted order statistics, equal weights). Sets must have equal
/// cardinality; paired observations are concatenated when both sets carry them.
double sliced_wasserstein(const SampleSet& s1, const SampleSet& s2, int n_proj, Rng& rng);

/// SW between two disjoint same-law sets of size n, repeated; (mean, std).
std::pair<double, double> sw_bias_baseline(const std::function<Tensor(Rng&)>& sampler,
                                           int n, int n_proj, int repetitions, Rng& rng);

/// ||mu1-mu2||^2 + tr(C1 + C2 - 2 (C1^1/2 C2 C1^1/2)^1/2); matrix roots by
/// symmetric eigendecomposition with negative eigenvalues clipped at zero.
double frechet_gaussian(const GaussianSummary& g1, const GaussianSummary& g2);

/// PCA projection encoder fitted on training data.
struct PcaEncoder {
  Tensor mean;   // (d)
  Tensor basis;  // (k, d) orthonormal rows
  Tensor encode(const Tensor& x) const;
  static PcaEncoder fit(const std::vector<Tensor>& images, int k);
};

using Encoder = std::function<Tensor(const Tensor&)>;

/// For each y, Frechet distance between Gaussian fits of the encoded sample
/// sets; averaged over y. Sets smaller than the latent dimension get a
/// 1e-6 I covariance ridge.
double latent_w2(const Encoder& encoder,
                 const std::vector<std::vector<Tensor>>& posterior_samples_per_y,
                 const std::vector<std::vector<Tensor>>& reference_samples_per_y);

/// Unbiased U-statistic estimate of squared MMD with a Gaussian kernel.
double mmd_rbf(const SampleSet& s1, const SampleSet& s2, double bandwidth);
double median_pairwise_distance(const SampleSet& s1, const SampleSet& s2);

/// Top-k eigenpairs of the sample covariance via the Gram matrix of centered
/// samples. Returns (eigenvalues (k), eigenvectors (k,d)).
std::pair<Tensor, Tensor> posterior_pca(const SampleSet& samples, int k);

/// Pearson correlation of block-mean downsampled maps.
double residual_correlation(const Tensor& std_map, const Tensor& residual_map, int block);

}  // namespace umcmc
