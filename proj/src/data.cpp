#include "umcmc/data.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "umcmc/parallel.hpp"

namespace umcmc {

namespace {

std::uint32_t read_be32(std::istream& in, const char* what) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) {
    throw FormatError(std::string("IDX: truncated file reading ") + what);
  }
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
         (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

void write_be32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<char*>(b), 4);
}

double huber(double u, double lambda) {
  const double a = std::abs(u);
  return a <= lambda ? u * u / (2.0 * lambda) : a - lambda / 2.0;
}

std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> v(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    v[static_cast<std::size_t>(i)] =
        lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  return v;
}

/// Inverse-CDF draw from a piecewise-linear density on a uniform grid.
double sample_piecewise_linear(const std::vector<double>& axis,
                               const std::vector<double>& f, double u) {
  const std::size_t n = axis.size();
  const double dx = axis[1] - axis[0];
  std::vector<double> seg(n - 1);
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    seg[i] = 0.5 * (f[i] + f[i + 1]) * dx;
    total += seg[i];
  }
  double target = u * total;
  std::size_t k = 0;
  while (k + 1 < seg.size() && target > seg[k]) {
    target -= seg[k];
    ++k;
  }
  const double f0 = f[k];
  const double f1 = f[k + 1];
  const double df = f1 - f0;
  double t;
  if (std::abs(df) < 1e-14 * std::max(1.0, f0)) {
    t = f0 > 0.0 ? target / (f0 * dx) : 0.5;
  } else {
    // solve dx (f0 t + df t^2 / 2) = target
    const double disc = f0 * f0 + 2.0 * df * target / dx;
    t = (-f0 + std::sqrt(std::max(disc, 0.0))) / df;
  }
  t = std::min(std::max(t, 0.0), 1.0);
  return axis[k] + t * dx;
}

double trapz_weight(std::size_t i, std::size_t n) { return (i == 0 || i + 1 == n) ? 0.5 : 1.0; }

Tensor operator_matrix(const LinearOperator& op) {
  const std::size_t dx = op.domain_size();
  Tensor e(op.domain_shape());
  Tensor first = op.apply(e);  // zero input to size the range
  const std::size_t dy = first.size();
  Tensor m({dy, dx});
  for (std::size_t j = 0; j < dx; ++j) {
    Tensor basis(op.domain_shape());
    basis[j] = 1.0;
    Tensor col = op.apply(basis);
    for (std::size_t i = 0; i < dy; ++i) m.at(i, j) = col[i];
  }
  return m;
}

GaussianMixture gm_posterior(const GaussianMixturePrior& prior, const LinearOperator& op,
                             double sigma, const Tensor& y) {
  const std::size_t d = prior.means.front().size();
  Tensor amat = operator_matrix(op);
  Eigen::MatrixXd a(amat.extent(0), amat.extent(1));
  for (std::size_t i = 0; i < amat.extent(0); ++i)
    for (std::size_t j = 0; j < amat.extent(1); ++j)
      a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = amat.at(i, j);
  Eigen::VectorXd yv(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) yv[static_cast<Eigen::Index>(i)] = y[i];

  const double s2 = sigma * sigma;
  const Eigen::MatrixXd ata = a.transpose() * a;
  const Eigen::MatrixXd aat = a * a.transpose();

  GaussianMixture post;
  std::vector<double> logw;
  for (std::size_t j = 0; j < prior.weights.size(); ++j) {
    const double c = prior.variances[j];
    Eigen::VectorXd mu(d);
    for (std::size_t i = 0; i < d; ++i) mu[static_cast<Eigen::Index>(i)] = prior.means[j][i];

    Eigen::MatrixXd prec = ata / s2 + Eigen::MatrixXd::Identity(d, d) / c;
    Eigen::LLT<Eigen::MatrixXd> llt(prec);
    Eigen::MatrixXd cov = llt.solve(Eigen::MatrixXd::Identity(d, d));
    Eigen::VectorXd mean = llt.solve(a.transpose() * yv / s2 + mu / c);

    Eigen::MatrixXd evid =
        s2 * Eigen::MatrixXd::Identity(aat.rows(), aat.cols()) + c * aat;
    Eigen::LLT<Eigen::MatrixXd> ell(evid);
    Eigen::VectorXd r = yv - a * mu;
    double logdet = 0.0;
    for (Eigen::Index i = 0; i < ell.matrixL().rows(); ++i) {
      logdet += 2.0 * std::log(ell.matrixL()(i, i));
    }
    logw.push_back(std::log(prior.weights[j]) - 0.5 * (logdet + r.dot(ell.solve(r))));

    Tensor mt({d});
    Tensor ct({d, d});
    for (std::size_t i = 0; i < d; ++i) {
      mt[i] = mean[static_cast<Eigen::Index>(i)];
      for (std::size_t k = 0; k < d; ++k)
        ct.at(i, k) = cov(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
    }
    post.means.push_back(std::move(mt));
    post.covs.push_back(std::move(ct));
  }
  const double lmax = *std::max_element(logw.begin(), logw.end());
  double total = 0.0;
  for (double lw : logw) total += std::exp(lw - lmax);
  for (double lw : logw) post.weights.push_back(std::exp(lw - lmax) / total);
  return post;
}

GridDensity laplace_grid_posterior(const LatentLaplaceToySpec& spec,
                                   const LinearOperator& op, double sigma, const Tensor& y,
                                   double lo, double hi, int n) {
  const std::size_t d = spec.W.extent(0);
  const std::size_t dz = spec.W.extent(1);
  if (d > 2 || dz > 2) {
    throw UnsupportedError("toy_posterior_quadrature: latent-Laplace grid supports d <= 2");
  }
  GridDensity grid;
  grid.d = static_cast<int>(d);
  grid.axis = linspace(lo, hi, n);
  const std::size_t un = static_cast<std::size_t>(n);
  const double rho2 = spec.rho * spec.rho;

  std::vector<double> zaxis = linspace(spec.z_lo, spec.z_hi, spec.z_points);
  const std::size_t zn = zaxis.size();
  const std::size_t z_total = dz == 2 ? zn * zn : zn;

  // Prior p(x) accumulated over the latent grid; fixed chunking keeps the
  // reduction order independent of the thread budget.
  const std::size_t n_chunks = 64;
  std::vector<Tensor> partial(n_chunks,
                              d == 2 ? Tensor({un, un}) : Tensor({un}));
  parallel_for(n_chunks, [&](std::size_t chunk) {
    Tensor& acc = partial[chunk];
    std::vector<double> g1(un), g2(un);
    for (std::size_t zi = chunk; zi < z_total; zi += n_chunks) {
      Tensor z({dz});
      double w = 1.0;
      if (dz == 2) {
        const std::size_t i = zi / zn;
        const std::size_t j = zi % zn;
        z[0] = zaxis[i];
        z[1] = zaxis[j];
        w = trapz_weight(i, zn) * trapz_weight(j, zn) *
            std::exp(-huber(z[0], spec.lambda) - huber(z[1], spec.lambda));
      } else {
        z[0] = zaxis[zi];
        w = trapz_weight(zi, zn) * std::exp(-huber(z[0], spec.lambda));
      }
      Tensor m = matvec(spec.W, z);
      for (std::size_t i = 0; i < m.size(); ++i) m[i] = 1.0 / (1.0 + std::exp(-m[i]));
      for (std::size_t a = 0; a < un; ++a) {
        const double d1 = grid.axis[a] - m[0];
        g1[a] = std::exp(-d1 * d1 / (2.0 * rho2));
      }
      if (d == 2) {
        for (std::size_t b = 0; b < un; ++b) {
          const double d2 = grid.axis[b] - m[1];
          g2[b] = std::exp(-d2 * d2 / (2.0 * rho2));
        }
        for (std::size_t a = 0; a < un; ++a) {
          const double wa = w * g1[a];
          double* row = acc.data() + a * un;
          for (std::size_t b = 0; b < un; ++b) row[b] += wa * g2[b];
        }
      } else {
        for (std::size_t a = 0; a < un; ++a) acc[a] += w * g1[a];
      }
    }
  });
  Tensor prior_density = partial[0];
  for (std::size_t c = 1; c < n_chunks; ++c) add_in_place(prior_density, partial[c]);

  // Multiply by the likelihood and normalize by the trapezoid rule.
  const double s2 = sigma * sigma;
  Tensor density = prior_density;
  double norm = 0.0;
  const double dx = grid.axis[1] - grid.axis[0];
  if (d == 2) {
    for (std::size_t a = 0; a < un; ++a) {
      for (std::size_t b = 0; b < un; ++b) {
        Tensor x({2});
        x[0] = grid.axis[a];
        x[1] = grid.axis[b];
        Tensor r = sub(op.apply(x), y.rank() == 1 ? y : reshape(y, {y.size()}));
        density.at(a, b) *= std::exp(-dot(r, r) / (2.0 * s2));
        norm += trapz_weight(a, un) * trapz_weight(b, un) * density.at(a, b);
      }
    }
    norm *= dx * dx;
  } else {
    for (std::size_t a = 0; a < un; ++a) {
      Tensor x({1});
      x[0] = grid.axis[a];
      Tensor r = sub(op.apply(x), y);
      density[a] *= std::exp(-dot(r, r) / (2.0 * s2));
      norm += trapz_weight(a, un) * density[a];
    }
    norm *= dx;
  }
  if (!(norm > 0.0)) throw NumericError("toy_posterior_quadrature: vanishing normalization");
  grid.density = scale(1.0 / norm, density);
  return grid;
}

}  // namespace

Dataset load_idx_images(const std::string& path, int pad) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("IDX: cannot open " + path);
  const std::uint32_t magic = read_be32(in, "magic");
  if (magic != 0x00000803u) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "IDX: bad magic 0x%08x", magic);
    throw FormatError(buf);
  }
  const std::uint32_t count = read_be32(in, "count");
  const std::uint32_t rows = read_be32(in, "rows");
  const std::uint32_t cols = read_be32(in, "cols");
  Dataset ds;
  std::vector<unsigned char> buf(static_cast<std::size_t>(rows) * cols);
  for (std::uint32_t i = 0; i < count; ++i) {
    if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()))) {
      throw FormatError("IDX: truncated image data at item " + std::to_string(i));
    }
    const std::size_t h = rows + 2 * static_cast<std::size_t>(pad);
    const std::size_t w = cols + 2 * static_cast<std::size_t>(pad);
    Tensor img({h, w});
    for (std::uint32_t r = 0; r < rows; ++r) {
      for (std::uint32_t c = 0; c < cols; ++c) {
        img.at(r + static_cast<std::size_t>(pad), c + static_cast<std::size_t>(pad)) =
            static_cast<double>(buf[r * cols + c]) / 255.0;
      }
    }
    ds.images.push_back(std::move(img));
  }
  ds.split.assign(ds.images.size(), 0);
  return ds;
}

void write_idx_u8(const std::string& path, const std::vector<Tensor>& images) {
  if (images.empty()) throw FormatError("write_idx_u8: no images");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("write_idx_u8: cannot open " + path);
  write_be32(out, 0x00000803u);
  write_be32(out, static_cast<std::uint32_t>(images.size()));
  write_be32(out, static_cast<std::uint32_t>(images.front().extent(0)));
  write_be32(out, static_cast<std::uint32_t>(images.front().extent(1)));
  for (const Tensor& img : images) {
    require_same_shape("write_idx_u8", images.front(), img);
    for (std::size_t i = 0; i < img.size(); ++i) {
      const double v = std::min(std::max(img[i], 0.0), 1.0);
      const unsigned char b = static_cast<unsigned char>(std::lround(v * 255.0));
      out.write(reinterpret_cast<const char*>(&b), 1);
    }
  }
}

Tensor sample_motion_blur_kernel(int size, double length_scale, double gp_std, Rng& rng) {
  if (size < 1 || size % 2 == 0) {
    throw NumericError("sample_motion_blur_kernel: size must be odd, got " +
                       std::to_string(size));
  }
  if (!(length_scale > 0.0) || !(gp_std > 0.0)) {
    throw NumericError("sample_motion_blur_kernel: positive length_scale and gp_std required");
  }
  constexpr int kPoints = 256;
  static thread_local std::vector<std::pair<std::pair<double, double>, Eigen::MatrixXd>>
      chol_cache;
  Eigen::MatrixXd* lptr = nullptr;
  for (auto& entry : chol_cache) {
    if (entry.first == std::make_pair(length_scale, gp_std)) lptr = &entry.second;
  }
  if (lptr == nullptr) {
    // Matern-3/2 covariance on 256 time points over [0,1].
    Eigen::MatrixXd cov(kPoints, kPoints);
    const double s2 = gp_std * gp_std;
    for (int i = 0; i < kPoints; ++i) {
      for (int j = 0; j < kPoints; ++j) {
        const double r = std::abs(i - j) / static_cast<double>(kPoints - 1);
        const double a = std::sqrt(3.0) * r / length_scale;
        cov(i, j) = s2 * (1.0 + a) * std::exp(-a);
      }
      cov(i, i) += 1e-10;
    }
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) {
      throw NumericError("sample_motion_blur_kernel: covariance factorization failed");
    }
    chol_cache.emplace_back(std::make_pair(length_scale, gp_std),
                            Eigen::MatrixXd(llt.matrixL()));
    lptr = &chol_cache.back().second;
  }
  const Eigen::MatrixXd& l = *lptr;

  Eigen::VectorXd g1(kPoints), g2(kPoints);
  for (int i = 0; i < kPoints; ++i) g1[i] = rng.gaussian();
  for (int i = 0; i < kPoints; ++i) g2[i] = rng.gaussian();
  Eigen::VectorXd pu = l * g1;
  Eigen::VectorXd pv = l * g2;
  pu.array() -= pu.mean();
  pv.array() -= pv.mean();

  Tensor kernel({static_cast<std::size_t>(size), static_cast<std::size_t>(size)});
  const double center = static_cast<double>(size - 1) / 2.0;
  const double span = static_cast<double>(size);
  const double weight = 1.0 / static_cast<double>(kPoints);
  for (int p = 0; p < kPoints; ++p) {
    double r = center + pu[p] * span;
    double c = center + pv[p] * span;
    r = std::min(std::max(r, 0.0), static_cast<double>(size - 1));
    c = std::min(std::max(c, 0.0), static_cast<double>(size - 1));
    const int r0 = static_cast<int>(r);
    const int c0 = static_cast<int>(c);
    const int r1 = std::min(r0 + 1, size - 1);
    const int c1 = std::min(c0 + 1, size - 1);
    const double fr = r - r0;
    const double fc = c - c0;
    kernel.at(static_cast<std::size_t>(r0), static_cast<std::size_t>(c0)) +=
        weight * (1 - fr) * (1 - fc);
    kernel.at(static_cast<std::size_t>(r0), static_cast<std::size_t>(c1)) +=
        weight * (1 - fr) * fc;
    kernel.at(static_cast<std::size_t>(r1), static_cast<std::size_t>(c0)) +=
        weight * fr * (1 - fc);
    kernel.at(static_cast<std::size_t>(r1), static_cast<std::size_t>(c1)) +=
        weight * fr * fc;
  }
  const double total = sum(kernel);
  return scale(1.0 / total, kernel);
}

Tensor sample_fourier_mask(std::size_t h, std::size_t w, int n_tracks,
                           const MaskTrackParams& params, Rng& rng) {
  if (n_tracks < 1) throw NumericError("sample_fourier_mask: n_tracks must be >= 1");
  Tensor mask({h, w, 2});
  auto set = [&](long long u, long long v) {
    const std::size_t iu = static_cast<std::size_t>(((u % (long long)h) + (long long)h) % (long long)h);
    const std::size_t iv = static_cast<std::size_t>(((v % (long long)w) + (long long)w) % (long long)w);
    mask[(iu * w + iv) * 2] = 1.0;
    const std::size_t cu = (h - iu) % h;
    const std::size_t cv = (w - iv) % w;
    mask[(cu * w + cv) * 2] = 1.0;
  };

  for (long long u = -params.disk_radius; u <= params.disk_radius; ++u) {
    for (long long v = -params.disk_radius; v <= params.disk_radius; ++v) {
      if (u * u + v * v <= (long long)params.disk_radius * params.disk_radius) set(u, v);
    }
  }

  // Each track draws from its own keyed stream so masks grow monotonically
  // with n_tracks for the same incoming rng state.
  const std::uint64_t base = rng.next_u64();
  for (int k = 0; k < n_tracks; ++k) {
    Rng tr = Rng::keyed(base, static_cast<std::uint64_t>(k), 7);
    const double ru = (0.10 + 0.35 * tr.uniform()) * static_cast<double>(h) / 2.0;
    const double rv = (0.10 + 0.35 * tr.uniform()) * static_cast<double>(w) / 2.0;
    const double tilt = std::numbers::pi * tr.uniform();
    const double theta0 = 2.0 * std::numbers::pi * tr.uniform();
    const double arc = std::numbers::pi * (0.5 + 0.5 * tr.uniform());
    const double ct = std::cos(tilt);
    const double st = std::sin(tilt);
    for (int p = 0; p < params.points_per_track; ++p) {
      const double th =
          theta0 + arc * static_cast<double>(p) / static_cast<double>(params.points_per_track - 1);
      const double eu = ru * std::cos(th);
      const double ev = rv * std::sin(th);
      set(std::llround(eu * ct - ev * st), std::llround(eu * st + ev * ct));
    }
  }
  return mask;
}

Observation make_observation(const Tensor& x, const LinearOperator& op, double sigma,
                             Rng& rng) {
  if (!(sigma > 0.0)) throw NumericError("make_observation: sigma must be positive");
  Tensor y = op.apply(x);
  const bool complex_noise = op.kind() == LinearOperator::Kind::FourierMask;
  const double component_std = complex_noise ? sigma / std::sqrt(2.0) : sigma;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += component_std * rng.gaussian();
  return Observation{std::move(y), GaussianLikelihood(op, sigma)};
}

Tensor GaussianMixture::sample(Rng& rng) const {
  const double u = rng.uniform();
  double acc = 0.0;
  std::size_t j = 0;
  for (; j + 1 < weights.size(); ++j) {
    acc += weights[j];
    if (u < acc) break;
  }
  const std::size_t d = means[j].size();
  Eigen::MatrixXd cov(d, d);
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = 0; b < d; ++b)
      cov(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = covs[j].at(a, b);
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  Eigen::VectorXd g(d);
  for (std::size_t i = 0; i < d; ++i) g[static_cast<Eigen::Index>(i)] = rng.gaussian();
  Eigen::VectorXd v = llt.matrixL() * g;
  Tensor out = means[j];
  for (std::size_t i = 0; i < d; ++i) out[i] += v[static_cast<Eigen::Index>(i)];
  return out;
}

Tensor GaussianMixture::mean() const {
  Tensor m = Tensor::zeros_like(means.front());
  for (std::size_t j = 0; j < weights.size(); ++j) add_scaled_in_place(m, weights[j], means[j]);
  return m;
}

Tensor GridDensity::sample(Rng& rng) const {
  const std::size_t n = axis.size();
  if (d == 1) {
    std::vector<double> f(density.vec());
    Tensor out({1});
    out[0] = sample_piecewise_linear(axis, f, rng.uniform());
    return out;
  }
  // Marginal over the first axis, then the interpolated conditional row.
  std::vector<double> marg(n, 0.0);
  const double dx = axis[1] - axis[0];
  for (std::size_t a = 0; a < n; ++a) {
    double s = 0.0;
    for (std::size_t b = 0; b < n; ++b) s += trapz_weight(b, n) * density.at(a, b);
    marg[a] = s * dx;
  }
  const double x1 = sample_piecewise_linear(axis, marg, rng.uniform());
  std::size_t k = std::min(
      static_cast<std::size_t>(std::max((x1 - axis[0]) / dx, 0.0)), n - 2);
  const double t = std::min(std::max((x1 - axis[k]) / dx, 0.0), 1.0);
  std::vector<double> row(n);
  for (std::size_t b = 0; b < n; ++b) {
    row[b] = (1.0 - t) * density.at(k, b) + t * density.at(k + 1, b);
  }
  Tensor out({2});
  out[0] = x1;
  out[1] = sample_piecewise_linear(axis, row, rng.uniform());
  return out;
}

Tensor GridDensity::mean() const {
  const std::size_t n = axis.size();
  const double dx = axis[1] - axis[0];
  if (d == 1) {
    double m = 0.0, norm = 0.0;
    for (std::size_t a = 0; a < n; ++a) {
      const double w = trapz_weight(a, n) * density[a];
      m += w * axis[a];
      norm += w;
    }
    Tensor out({1});
    out[0] = m / norm;
    return out;
  }
  double m1 = 0.0, m2 = 0.0, norm = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      const double w = trapz_weight(a, n) * trapz_weight(b, n) * density.at(a, b);
      m1 += w * axis[a];
      m2 += w * axis[b];
      norm += w;
    }
  }
  (void)dx;
  Tensor out({2});
  out[0] = m1 / norm;
  out[1] = m2 / norm;
  return out;
}

PosteriorOracle toy_posterior_quadrature(const ToyProblem& problem, const Tensor& y) {
  if (problem.d > 4) throw UnsupportedError("toy_posterior_quadrature: d must be <= 4");
  PosteriorOracle oracle;
  if (std::holds_alternative<GaussianMixturePrior>(problem.prior)) {
    oracle.is_mixture = true;
    oracle.mixture = gm_posterior(std::get<GaussianMixturePrior>(problem.prior), problem.op,
                                  problem.sigma, y);
    return oracle;
  }
  const auto& spec = std::get<LatentLaplaceToySpec>(problem.prior);
  GridDensity base = laplace_grid_posterior(spec, problem.op, problem.sigma, y,
                                            problem.grid_lo, problem.grid_hi,
                                            problem.grid_points);
  GridDensity fine = laplace_grid_posterior(spec, problem.op, problem.sigma, y,
                                            problem.grid_lo, problem.grid_hi,
                                            2 * problem.grid_points);
  Tensor drift = sub(base.mean(), fine.mean());
  if (max_abs(drift) > 1e-6) {
    throw NumericError("toy_posterior_quadrature: grid too coarse, mean drift " +
                       std::to_string(max_abs(drift)));
  }
  oracle.grid = std::move(fine);
  return oracle;
}

std::vector<TrainItem> make_toy_items(const ToyProblem& problem, int n, std::uint64_t seed) {
  std::vector<TrainItem> items;
  items.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Rng rng = Rng::keyed(seed, static_cast<std::uint64_t>(i), 11);
    Tensor x;
    if (std::holds_alternative<GaussianMixturePrior>(problem.prior)) {
      const auto& gm = std::get<GaussianMixturePrior>(problem.prior);
      GaussianMixture prior;
      prior.weights = gm.weights;
      prior.means = gm.means;
      for (std::size_t j = 0; j < gm.weights.size(); ++j) {
        const std::size_t d = gm.means[j].size();
        Tensor cov({d, d});
        for (std::size_t a = 0; a < d; ++a) cov.at(a, a) = gm.variances[j];
        prior.covs.push_back(std::move(cov));
      }
      x = prior.sample(rng);
    } else {
      const auto& spec = std::get<LatentLaplaceToySpec>(problem.prior);
      const std::size_t dz = spec.W.extent(1);
      std::vector<double> zaxis = linspace(spec.z_lo, spec.z_hi, 4096);
      std::vector<double> zdens(zaxis.size());
      for (std::size_t a = 0; a < zaxis.size(); ++a) {
        zdens[a] = std::exp(-huber(zaxis[a], spec.lambda));
      }
      Tensor z({dz});
      for (std::size_t a = 0; a < dz; ++a) {
        z[a] = sample_piecewise_linear(zaxis, zdens, rng.uniform());
      }
      Tensor m = matvec(spec.W, z);
      x = Tensor({m.size()});
      for (std::size_t a = 0; a < m.size(); ++a) {
        x[a] = 1.0 / (1.0 + std::exp(-m[a])) + spec.rho * rng.gaussian();
      }
    }
    items.push_back(TrainItem{x, make_observation(x, problem.op, problem.sigma, rng)});
  }
  return items;
}

}  // namespace umcmc
