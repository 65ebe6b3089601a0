#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "umcmc/data.hpp"
#include "umcmc/tensor.hpp"

namespace umcmc {

struct OracleCheck {
  std::string name;
  double value = 0.0;      // measured error / statistic
  double tolerance = 0.0;  // pass when value <= tolerance
  bool pass = false;
};

struct OracleReport {
  std::string suite;
  std::vector<OracleCheck> checks;
  bool all_pass() const;
};

std::vector<std::string> oracle_suite_names();

/// Runs one of the named suites (autodiff, conditional, quadrature, metrics).
/// `corrupt_gradient` is a test hook that injects a wrong vector-Jacobian
/// product so the autodiff suite must fail.
OracleReport run_oracle_suite(const std::string& suite, std::uint64_t seed,
                              bool corrupt_gradient = false);

/// Max finite-difference error over `count` random composite functions drawn
/// over the full primitive set (including the linear-operator solve/sample
/// wrappers), evaluated away from non-smooth points.
double autodiff_composite_max_error(int count, std::uint64_t seed, bool corrupt_gradient);

/// Independent 1D W2 oracle: integrates the squared quantile difference by
/// merging the two empirical CDFs (no shared code with the sort-based path).
double w2_1d_cdf_oracle(std::vector<double> a, std::vector<double> b);

/// Grid quadrature of p(y|x) * prior(x) for arbitrary densities (test oracle).
GridDensity grid_posterior_from_density(const std::function<double(const Tensor&)>& prior,
                                        const LinearOperator& op, double sigma,
                                        const Tensor& y, double lo, double hi, int n, int d);

}  // namespace umcmc
