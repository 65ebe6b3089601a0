#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "umcmc/errors.hpp"

namespace umcmc {

/// Dense multi-dimensional array of 64-bit reals, row-major.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);

  /// Construct from external data; rejects NaN/Inf entries.
  static Tensor from_data(std::vector<std::size_t> shape, std::vector<double> data);
  static Tensor scalar(double v);
  static Tensor zeros_like(const Tensor& t);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t extent(std::size_t axis) const { return shape_.at(axis); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  /// Rank-2 access (row, col).
  double& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  double at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }

  /// Value of a size-1 tensor.
  double item() const;

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
  bool all_finite() const;
  std::string shape_str() const;

  const std::vector<double>& vec() const { return data_; }

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

std::size_t shape_product(const std::vector<std::size_t>& shape);

// Elementwise and linear-algebra helpers. Shape mismatches throw ShapeError
// naming the operation and both shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(double c, const Tensor& a);
void add_in_place(Tensor& a, const Tensor& b);
void add_scaled_in_place(Tensor& a, double c, const Tensor& b);

double dot(const Tensor& a, const Tensor& b);
double norm2(const Tensor& a);        // Euclidean norm
double norm1(const Tensor& a);        // sum of absolute values
double sum(const Tensor& a);
double mean_value(const Tensor& a);
double max_abs(const Tensor& a);

/// matrix (m,n) times vector (n) -> (m)
Tensor matvec(const Tensor& m, const Tensor& x);
/// matrix (m,n)^T times vector (m) -> (n)
Tensor matvec_t(const Tensor& m, const Tensor& u);
/// (m,k) x (k,n) -> (m,n)
Tensor matmul(const Tensor& a, const Tensor& b);
/// outer product u (m) v (n) -> (m,n)
Tensor outer(const Tensor& u, const Tensor& v);

Tensor reshape(const Tensor& a, std::vector<std::size_t> shape);
Tensor concat(const std::vector<const Tensor*>& parts);

void require_same_shape(const char* op, const Tensor& a, const Tensor& b);

}  // namespace umcmc
