#include "umcmc/tensor.hpp"

#include <cmath>
#include <sstream>

namespace umcmc {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

Tensor::Tensor(std::vector<std::size_t> shape, double fill) : shape_(std::move(shape)) {
  for (std::size_t e : shape_) {
    if (e == 0) throw ShapeError("Tensor: zero extent in shape");
  }
  data_.assign(shape_product(shape_), fill);
}

Tensor Tensor::from_data(std::vector<std::size_t> shape, std::vector<double> data) {
  if (shape_product(shape) != data.size()) {
    std::ostringstream os;
    os << "Tensor::from_data: shape product " << shape_product(shape)
       << " != data length " << data.size();
    throw ShapeError(os.str());
  }
  for (double v : data) {
    if (!std::isfinite(v)) throw NumericError("Tensor::from_data: non-finite entry");
  }
  Tensor t;
  t.shape_ = std::move(shape);
  t.data_ = std::move(data);
  return t;
}

Tensor Tensor::scalar(double v) {
  Tensor t({1});
  t[0] = v;
  return t;
}

Tensor Tensor::zeros_like(const Tensor& t) { return Tensor(t.shape()); }

double Tensor::item() const {
  if (size() != 1) throw ShapeError("Tensor::item: size " + std::to_string(size()) + " != 1");
  return data_[0];
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i) os << ",";
    os << shape_[i];
  }
  os << ")";
  return os.str();
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " +
                     b.shape_str());
  }
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  Tensor r = a;
  for (std::size_t i = 0; i < r.size(); ++i) r[i] += b[i];
  return r;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  Tensor r = a;
  for (std::size_t i = 0; i < r.size(); ++i) r[i] -= b[i];
  return r;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  Tensor r = a;
  for (std::size_t i = 0; i < r.size(); ++i) r[i] *= b[i];
  return r;
}

Tensor scale(double c, const Tensor& a) {
  Tensor r = a;
  for (std::size_t i = 0; i < r.size(); ++i) r[i] *= c;
  return r;
}

void add_in_place(Tensor& a, const Tensor& b) {
  require_same_shape("add_in_place", a, b);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

void add_scaled_in_place(Tensor& a, double c, const Tensor& b) {
  require_same_shape("add_scaled_in_place", a, b);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += c * b[i];
}

double dot(const Tensor& a, const Tensor& b) {
  require_same_shape("dot", a, b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(const Tensor& a) { return std::sqrt(dot(a, a)); }

double norm1(const Tensor& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i]);
  return s;
}

double sum(const Tensor& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i];
  return s;
}

double mean_value(const Tensor& a) { return sum(a) / static_cast<double>(a.size()); }

double max_abs(const Tensor& a) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i]));
  return m;
}

Tensor matvec(const Tensor& m, const Tensor& x) {
  if (m.rank() != 2 || x.rank() != 1 || m.extent(1) != x.size()) {
    throw ShapeError("matvec: incompatible shapes " + m.shape_str() + " vs " + x.shape_str());
  }
  Tensor r({m.extent(0)});
  for (std::size_t i = 0; i < m.extent(0); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < m.extent(1); ++j) s += m.at(i, j) * x[j];
    r[i] = s;
  }
  return r;
}

Tensor matvec_t(const Tensor& m, const Tensor& u) {
  if (m.rank() != 2 || u.rank() != 1 || m.extent(0) != u.size()) {
    throw ShapeError("matvec_t: incompatible shapes " + m.shape_str() + " vs " + u.shape_str());
  }
  Tensor r({m.extent(1)});
  for (std::size_t i = 0; i < m.extent(0); ++i) {
    for (std::size_t j = 0; j < m.extent(1); ++j) r[j] += m.at(i, j) * u[i];
  }
  return r;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.extent(1) != b.extent(0)) {
    throw ShapeError("matmul: incompatible shapes " + a.shape_str() + " vs " + b.shape_str());
  }
  Tensor r({a.extent(0), b.extent(1)});
  for (std::size_t i = 0; i < a.extent(0); ++i) {
    for (std::size_t k = 0; k < a.extent(1); ++k) {
      const double aik = a.at(i, k);
      for (std::size_t j = 0; j < b.extent(1); ++j) r.at(i, j) += aik * b.at(k, j);
    }
  }
  return r;
}

Tensor outer(const Tensor& u, const Tensor& v) {
  if (u.rank() != 1 || v.rank() != 1) {
    throw ShapeError("outer: expects vectors, got " + u.shape_str() + " and " + v.shape_str());
  }
  Tensor r({u.size(), v.size()});
  for (std::size_t i = 0; i < u.size(); ++i) {
    for (std::size_t j = 0; j < v.size(); ++j) r.at(i, j) = u[i] * v[j];
  }
  return r;
}

Tensor reshape(const Tensor& a, std::vector<std::size_t> shape) {
  if (shape_product(shape) != a.size()) {
    throw ShapeError("reshape: size mismatch " + a.shape_str());
  }
  Tensor r(std::move(shape));
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i];
  return r;
}

Tensor concat(const std::vector<const Tensor*>& parts) {
  std::size_t total = 0;
  for (const Tensor* p : parts) total += p->size();
  if (total == 0) throw ShapeError("concat: empty input");
  Tensor r({total});
  std::size_t off = 0;
  for (const Tensor* p : parts) {
    for (std::size_t i = 0; i < p->size(); ++i) r[off + i] = (*p)[i];
    off += p->size();
  }
  return r;
}

}  // namespace umcmc
