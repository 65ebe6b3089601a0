#include "umcmc/metrics.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

#include "umcmc/parallel.hpp"

namespace umcmc {

namespace {

Eigen::MatrixXd to_eigen(const Tensor& t) {
  if (t.rank() != 2) throw ShapeError("to_eigen: rank-2 tensor required");
  Eigen::MatrixXd m(t.extent(0), t.extent(1));
  for (std::size_t i = 0; i < t.extent(0); ++i)
    for (std::size_t j = 0; j < t.extent(1); ++j) m(i, j) = t.at(i, j);
  return m;
}

Tensor from_eigen(const Eigen::MatrixXd& m) {
  Tensor t({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())});
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      t.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = m(i, j);
  return t;
}

/// Symmetric PSD square root; eigenvalues below zero are clipped. Throws when
/// the matrix is non-PSD beyond tolerance.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m, const char* who) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  if (es.info() != Eigen::Success) throw NumericError(std::string(who) + ": eig failed");
  Eigen::VectorXd ev = es.eigenvalues();
  const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev[i] < -1e-10 * scale) {
      throw NumericError(std::string(who) + ": matrix not PSD (eigenvalue " +
                         std::to_string(ev[i]) + ")");
    }
    ev[i] = std::sqrt(std::max(ev[i], 0.0));
  }
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

Tensor flat(const Tensor& t) { return t.rank() == 1 ? t : reshape(t, {t.size()}); }

std::vector<Tensor> joint_points(const SampleSet& s, bool use_pairs) {
  std::vector<Tensor> out;
  out.reserve(s.points.size());
  for (std::size_t i = 0; i < s.points.size(); ++i) {
    Tensor p = flat(s.points[i]);
    if (use_pairs) {
      Tensor o = flat(s.paired_obs[i]);
      out.push_back(concat({&p, &o}));
    } else {
      out.push_back(std::move(p));
    }
  }
  return out;
}

}  // namespace

void SampleSet::validate() const {
  if (points.empty()) throw ShapeError("SampleSet: empty");
  for (const Tensor& p : points) require_same_shape("SampleSet", points.front(), p);
  if (!paired_obs.empty() && paired_obs.size() != points.size()) {
    throw ShapeError("SampleSet: paired observations misaligned");
  }
}

GaussianSummary fit_gaussian(const std::vector<Tensor>& points, double ridge) {
  if (points.empty()) throw ShapeError("fit_gaussian: empty sample set");
  const std::size_t d = points.front().size();
  GaussianSummary g;
  g.mean = Tensor({d});
  for (const Tensor& p : points) add_in_place(g.mean, flat(p));
  g.mean = scale(1.0 / static_cast<double>(points.size()), g.mean);
  g.cov = Tensor({d, d});
  for (const Tensor& p : points) {
    Tensor c = sub(flat(p), g.mean);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) g.cov.at(i, j) += c[i] * c[j];
  }
  const double denom = points.size() > 1 ? static_cast<double>(points.size() - 1) : 1.0;
  g.cov = scale(1.0 / denom, g.cov);
  for (std::size_t i = 0; i < d; ++i) g.cov.at(i, i) += ridge;
  return g;
}

double psnr(const Tensor& x, const Tensor& xhat, double peak) {
  require_same_shape("psnr", x, xhat);
  if (!(peak > 0.0)) throw NumericError("psnr: peak must be positive");
  double mse = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - xhat[i];
    mse += d * d;
  }
  mse /= static_cast<double>(x.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

double ssim(const Tensor& x, const Tensor& xhat, int window, double peak) {
  require_same_shape("ssim", x, xhat);
  if (x.rank() != 2) throw ShapeError("ssim: 2D images required, got " + x.shape_str());
  const int h = static_cast<int>(x.extent(0));
  const int w = static_cast<int>(x.extent(1));
  if (h < window || w < window) {
    throw ShapeError("ssim: image " + x.shape_str() + " smaller than window " +
                     std::to_string(window));
  }
  const double c1 = (0.01 * peak) * (0.01 * peak);
  const double c2 = (0.03 * peak) * (0.03 * peak);
  const double n = static_cast<double>(window * window);
  double total = 0.0;
  int count = 0;
  for (int i = 0; i + window <= h; ++i) {
    for (int j = 0; j + window <= w; ++j) {
      double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
      for (int a = 0; a < window; ++a) {
        for (int b = 0; b < window; ++b) {
          const double u = x.at(static_cast<std::size_t>(i + a), static_cast<std::size_t>(j + b));
          const double v =
              xhat.at(static_cast<std::size_t>(i + a), static_cast<std::size_t>(j + b));
          sx += u;
          sy += v;
          sxx += u * u;
          syy += v * v;
          sxy += u * v;
        }
      }
      const double mx = sx / n;
      const double my = sy / n;
      const double vx = sxx / n - mx * mx;
      const double vy = syy / n - my * my;
      const double cxy = sxy / n - mx * my;
      total += ((2 * mx * my + c1) * (2 * cxy + c2)) /
               ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

double sliced_wasserstein(const SampleSet& s1, const SampleSet& s2, int n_proj, Rng& rng) {
  s1.validate();
  s2.validate();
  if (s1.points.size() != s2.points.size()) {
    throw ShapeError("sliced_wasserstein: cardinality mismatch " +
                     std::to_string(s1.points.size()) + " vs " +
                     std::to_string(s2.points.size()));
  }
  const bool use_pairs = !s1.paired_obs.empty() && !s2.paired_obs.empty();
  std::vector<Tensor> a = joint_points(s1, use_pairs);
  std::vector<Tensor> b = joint_points(s2, use_pairs);
  require_same_shape("sliced_wasserstein", a.front(), b.front());
  const std::size_t d = a.front().size();
  const std::size_t n = a.size();

  // Draw all directions up front so the result is independent of the
  // parallel schedule; projections are summed in index order.
  std::vector<Tensor> dirs(static_cast<std::size_t>(n_proj));
  for (auto& dir : dirs) {
    dir = rng.gaussian_tensor({d});
    double nn = norm2(dir);
    while (nn == 0.0) {
      dir = rng.gaussian_tensor({d});
      nn = norm2(dir);
    }
    dir = scale(1.0 / nn, dir);
  }
  std::vector<double> w2(static_cast<std::size_t>(n_proj));
  parallel_for(static_cast<std::size_t>(n_proj), [&](std::size_t p) {
    std::vector<double> pa(n), pb(n);
    for (std::size_t i = 0; i < n; ++i) {
      pa[i] = dot(dirs[p], a[i]);
      pb[i] = dot(dirs[p], b[i]);
    }
    std::sort(pa.begin(), pa.end());
    std::sort(pb.begin(), pb.end());
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double diff = pa[i] - pb[i];
      s += diff * diff;
    }
    w2[p] = std::sqrt(s / static_cast<double>(n));
  });
  double total = 0.0;
  for (double v : w2) total += v;
  return total / static_cast<double>(n_proj);
}

std::pair<double, double> sw_bias_baseline(const std::function<Tensor(Rng&)>& sampler,
                                           int n, int n_proj, int repetitions, Rng& rng) {
  if (n < 2) throw NumericError("sw_bias_baseline: n must be >= 2");
  std::vector<double> values;
  for (int r = 0; r < repetitions; ++r) {
    SampleSet a, b;
    for (int i = 0; i < n; ++i) a.points.push_back(sampler(rng));
    for (int i = 0; i < n; ++i) b.points.push_back(sampler(rng));
    values.push_back(sliced_wasserstein(a, b, n_proj, rng));
  }
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var = values.size() > 1 ? var / static_cast<double>(values.size() - 1) : 0.0;
  return {mean, std::sqrt(var)};
}

double frechet_gaussian(const GaussianSummary& g1, const GaussianSummary& g2) {
  if (g1.mean.size() != g2.mean.size()) {
    throw ShapeError("frechet_gaussian: dimension mismatch " + g1.mean.shape_str() + " vs " +
                     g2.mean.shape_str());
  }
  Eigen::MatrixXd c1 = to_eigen(g1.cov);
  Eigen::MatrixXd c2 = to_eigen(g2.cov);
  Eigen::MatrixXd root1 = psd_sqrt(c1, "frechet_gaussian");
  Eigen::MatrixXd inner = psd_sqrt(root1 * c2 * root1, "frechet_gaussian");
  double mean_term = 0.0;
  for (std::size_t i = 0; i < g1.mean.size(); ++i) {
    const double d = g1.mean[i] - g2.mean[i];
    mean_term += d * d;
  }
  return mean_term + c1.trace() + c2.trace() - 2.0 * inner.trace();
}

Tensor PcaEncoder::encode(const Tensor& x) const {
  Tensor c = sub(flat(x), mean);
  return matvec(basis, c);
}

PcaEncoder PcaEncoder::fit(const std::vector<Tensor>& images, int k) {
  SampleSet s;
  s.points = images;
  auto [eigenvalues, eigenvectors] = posterior_pca(s, k);
  (void)eigenvalues;
  PcaEncoder enc;
  enc.mean = Tensor({flat(images.front()).size()});
  for (const Tensor& im : images) add_in_place(enc.mean, flat(im));
  enc.mean = scale(1.0 / static_cast<double>(images.size()), enc.mean);
  enc.basis = eigenvectors;
  return enc;
}

double latent_w2(const Encoder& encoder,
                 const std::vector<std::vector<Tensor>>& posterior_samples_per_y,
                 const std::vector<std::vector<Tensor>>& reference_samples_per_y) {
  if (posterior_samples_per_y.size() != reference_samples_per_y.size() ||
      posterior_samples_per_y.empty()) {
    throw ShapeError("latent_w2: per-y sets misaligned or empty");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < posterior_samples_per_y.size(); ++i) {
    if (posterior_samples_per_y[i].empty() || reference_samples_per_y[i].empty()) {
      throw ShapeError("latent_w2: empty per-y sample set");
    }
    std::vector<Tensor> enc_p, enc_r;
    for (const Tensor& t : posterior_samples_per_y[i]) enc_p.push_back(encoder(t));
    for (const Tensor& t : reference_samples_per_y[i]) enc_r.push_back(encoder(t));
    const std::size_t d = enc_p.front().size();
    const double ridge_p = enc_p.size() <= d ? 1e-6 : 0.0;
    const double ridge_r = enc_r.size() <= d ? 1e-6 : 0.0;
    total += frechet_gaussian(fit_gaussian(enc_p, ridge_p), fit_gaussian(enc_r, ridge_r));
  }
  return total / static_cast<double>(posterior_samples_per_y.size());
}

double mmd_rbf(const SampleSet& s1, const SampleSet& s2, double bandwidth) {
  s1.validate();
  s2.validate();
  if (!(bandwidth > 0.0)) throw NumericError("mmd_rbf: bandwidth must be positive");
  if (s1.points.size() < 2 || s2.points.size() < 2) {
    throw ShapeError("mmd_rbf: sets must have at least 2 points");
  }
  const double g = 1.0 / (2.0 * bandwidth * bandwidth);
  auto kernel = [&](const Tensor& a, const Tensor& b) {
    double d2 = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double d = a[i] - b[i];
      d2 += d * d;
    }
    return std::exp(-g * d2);
  };
  const auto& a = s1.points;
  const auto& b = s2.points;
  const double m = static_cast<double>(a.size());
  const double n = static_cast<double>(b.size());
  double kaa = 0.0, kbb = 0.0, kab = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a.size(); ++j)
      if (i != j) kaa += kernel(a[i], a[j]);
  for (std::size_t i = 0; i < b.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j)
      if (i != j) kbb += kernel(b[i], b[j]);
  for (const Tensor& x : a)
    for (const Tensor& y : b) kab += kernel(x, y);
  return kaa / (m * (m - 1)) + kbb / (n * (n - 1)) - 2.0 * kab / (m * n);
}

double median_pairwise_distance(const SampleSet& s1, const SampleSet& s2) {
  std::vector<double> dists;
  std::vector<const Tensor*> all;
  for (const Tensor& t : s1.points) all.push_back(&t);
  for (const Tensor& t : s2.points) all.push_back(&t);
  for (std::size_t i = 0; i < all.size(); ++i)
    for (std::size_t j = i + 1; j < all.size(); ++j) dists.push_back(norm2(sub(*all[i], *all[j])));
  if (dists.empty()) return 1.0;
  std::nth_element(dists.begin(), dists.begin() + dists.size() / 2, dists.end());
  const double med = dists[dists.size() / 2];
  return med > 0.0 ? med : 1.0;
}

std::pair<Tensor, Tensor> posterior_pca(const SampleSet& samples, int k) {
  samples.validate();
  const std::size_t n = samples.points.size();
  const std::size_t d = samples.points.front().size();
  if (k < 1 || static_cast<std::size_t>(k) > std::min(n - 1, d)) {
    throw ShapeError("posterior_pca: k=" + std::to_string(k) + " exceeds min(n-1,d)");
  }
  Tensor mean({d});
  for (const Tensor& p : samples.points) add_in_place(mean, flat(p));
  mean = scale(1.0 / static_cast<double>(n), mean);

  Eigen::MatrixXd centered(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    Tensor c = sub(flat(samples.points[i]), mean);
    for (std::size_t j = 0; j < d; ++j) centered(static_cast<Eigen::Index>(i),
                                                 static_cast<Eigen::Index>(j)) = c[j];
  }
  Eigen::MatrixXd gram = centered * centered.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
  if (es.info() != Eigen::Success) throw NumericError("posterior_pca: eig failed");

  Tensor eigenvalues({static_cast<std::size_t>(k)});
  Tensor eigenvectors({static_cast<std::size_t>(k), d});
  for (int c = 0; c < k; ++c) {
    const Eigen::Index idx = static_cast<Eigen::Index>(n) - 1 - c;
    const double lam = std::max(es.eigenvalues()[idx], 0.0);
    eigenvalues[static_cast<std::size_t>(c)] = lam / static_cast<double>(n - 1);
    Eigen::VectorXd dir = centered.transpose() * es.eigenvectors().col(idx);
    const double nn = dir.norm();
    if (nn > 0.0) dir /= nn;
    for (std::size_t j = 0; j < d; ++j) {
      eigenvectors.at(static_cast<std::size_t>(c), j) = dir[static_cast<Eigen::Index>(j)];
    }
  }
  return {std::move(eigenvalues), std::move(eigenvectors)};
}

double residual_correlation(const Tensor& std_map, const Tensor& residual_map, int block) {
  require_same_shape("residual_correlation", std_map, residual_map);
  if (std_map.rank() != 2) throw ShapeError("residual_correlation: 2D maps required");
  if (block < 1 || std_map.extent(0) % static_cast<std::size_t>(block) != 0 ||
      std_map.extent(1) % static_cast<std::size_t>(block) != 0) {
    throw ShapeError("residual_correlation: block " + std::to_string(block) +
                     " does not divide extents " + std_map.shape_str());
  }
  const std::size_t bh = std_map.extent(0) / static_cast<std::size_t>(block);
  const std::size_t bw = std_map.extent(1) / static_cast<std::size_t>(block);
  auto downsample = [&](const Tensor& m) {
    Tensor out({bh, bw});
    for (std::size_t i = 0; i < bh; ++i) {
      for (std::size_t j = 0; j < bw; ++j) {
        double s = 0.0;
        for (int a = 0; a < block; ++a)
          for (int b = 0; b < block; ++b)
            s += m.at(i * block + static_cast<std::size_t>(a),
                      j * block + static_cast<std::size_t>(b));
        out.at(i, j) = s / static_cast<double>(block * block);
      }
    }
    return out;
  };
  Tensor a = downsample(std_map);
  Tensor b = downsample(residual_map);
  const double ma = mean_value(a);
  const double mb = mean_value(b);
  double va = 0.0, vb = 0.0, cab = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    va += (a[i] - ma) * (a[i] - ma);
    vb += (b[i] - mb) * (b[i] - mb);
    cab += (a[i] - ma) * (b[i] - mb);
  }
  if (va == 0.0 || vb == 0.0) {
    throw NumericError("residual_correlation: undefined correlation for constant map");
  }
  return cab / std::sqrt(va * vb);
}

}  // namespace umcmc
