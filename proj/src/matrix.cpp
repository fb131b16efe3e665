#include "cheatt/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace cheatt {

namespace {

std::string shape_str(const DenseMatrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void require_same_shape(const DenseMatrix& a, const DenseMatrix& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
  }
}

}  // namespace

DenseMatrix::DenseMatrix(int rows, int cols, double fill)
    : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, fill) {
  if (rows < 0 || cols < 0) throw ShapeError("DenseMatrix: negative dimension");
}

DenseMatrix::DenseMatrix(int rows, int cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != static_cast<std::size_t>(rows) * cols) {
    throw ShapeError("DenseMatrix: data length " + std::to_string(data_.size()) +
                     " does not match " + std::to_string(rows) + "x" + std::to_string(cols));
  }
}

DenseMatrix::DenseMatrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = static_cast<int>(rows.size());
  cols_ = rows_ > 0 ? static_cast<int>(rows.begin()->size()) : 0;
  data_.reserve(static_cast<std::size_t>(rows_) * cols_);
  for (const auto& r : rows) {
    if (static_cast<int>(r.size()) != cols_) throw ShapeError("DenseMatrix: ragged initializer");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

bool DenseMatrix::all_finite() const {
  for (double x : data_) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

DenseMatrix DenseMatrix::identity(int n) {
  DenseMatrix m(n, n);
  for (int i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

DenseMatrix operator+(const DenseMatrix& a, const DenseMatrix& b) {
  require_same_shape(a, b, "operator+");
  DenseMatrix c(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) c.flat()[i] = a.flat()[i] + b.flat()[i];
  return c;
}

DenseMatrix operator-(const DenseMatrix& a, const DenseMatrix& b) {
  require_same_shape(a, b, "operator-");
  DenseMatrix c(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) c.flat()[i] = a.flat()[i] - b.flat()[i];
  return c;
}

DenseMatrix operator*(double s, const DenseMatrix& m) {
  DenseMatrix c(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.size(); ++i) c.flat()[i] = s * m.flat()[i];
  return c;
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: " + shape_str(a) + " x " + shape_str(b));
  }
  DenseMatrix c(a.rows(), b.cols());
  const int n = a.rows(), k = a.cols(), m = b.cols();
  for (int i = 0; i < n; ++i) {
    double* crow = c.row(i);
    const double* arow = a.row(i);
    for (int p = 0; p < k; ++p) {
      const double aip = arow[p];
      const double* brow = b.row(p);
      for (int j = 0; j < m; ++j) crow[j] += aip * brow[j];
    }
  }
  return c;
}

DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.cols()) {
    throw ShapeError("matmul_nt: " + shape_str(a) + " x " + shape_str(b) + "^T");
  }
  DenseMatrix c(a.rows(), b.rows());
  const int k = a.cols();
  for (int i = 0; i < a.rows(); ++i) {
    const double* arow = a.row(i);
    double* crow = c.row(i);
    for (int j = 0; j < b.rows(); ++j) {
      const double* brow = b.row(j);
      double acc = 0.0;
      for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
      crow[j] = acc;
    }
  }
  return c;
}

DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows()) {
    throw ShapeError("matmul_tn: " + shape_str(a) + "^T x " + shape_str(b));
  }
  DenseMatrix c(a.cols(), b.cols());
  for (int p = 0; p < a.rows(); ++p) {
    const double* arow = a.row(p);
    const double* brow = b.row(p);
    for (int i = 0; i < a.cols(); ++i) {
      const double aip = arow[i];
      double* crow = c.row(i);
      for (int j = 0; j < b.cols(); ++j) crow[j] += aip * brow[j];
    }
  }
  return c;
}

DenseMatrix transpose(const DenseMatrix& m) {
  DenseMatrix t(m.cols(), m.rows());
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j) t(j, i) = m(i, j);
  }
  return t;
}

DenseMatrix lincomb(double c1, const DenseMatrix& x, double c2, const DenseMatrix& y) {
  require_same_shape(x, y, "lincomb");
  DenseMatrix c(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) c.flat()[i] = c1 * x.flat()[i] + c2 * y.flat()[i];
  return c;
}

DenseMatrix lincomb(double c1, const DenseMatrix& x, double c2, const DenseMatrix& y, double c3,
                    const DenseMatrix& z) {
  require_same_shape(x, y, "lincomb");
  require_same_shape(x, z, "lincomb");
  DenseMatrix c(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) {
    c.flat()[i] = c1 * x.flat()[i] + c2 * y.flat()[i] + c3 * z.flat()[i];
  }
  return c;
}

void axpy(double c, const DenseMatrix& x, DenseMatrix& y) {
  require_same_shape(x, y, "axpy");
  for (std::size_t i = 0; i < x.size(); ++i) y.flat()[i] += c * x.flat()[i];
}

DenseMatrix softmax_rows(const DenseMatrix& m, double scale) {
  if (!(scale > 0.0)) throw ParameterError("softmax_rows: scale must be positive");
  DenseMatrix out(m.rows(), m.cols());
  const double inv = 1.0 / scale;
  for (int i = 0; i < m.rows(); ++i) {
    const double* src = m.row(i);
    double* dst = out.row(i);
    double mx = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < m.cols(); ++j) mx = std::max(mx, src[j] * inv);
    double sum = 0.0;
    for (int j = 0; j < m.cols(); ++j) {
      dst[j] = std::exp(src[j] * inv - mx);
      sum += dst[j];
    }
    const double norm = 1.0 / sum;
    for (int j = 0; j < m.cols(); ++j) dst[j] *= norm;
  }
  return out;
}

double frobenius_norm(const DenseMatrix& m) {
  double acc = 0.0;
  for (double x : m.flat()) acc += x * x;
  return std::sqrt(acc);
}

double frobenius_distance(const DenseMatrix& a, const DenseMatrix& b) {
  require_same_shape(a, b, "frobenius_distance");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.flat()[i] - b.flat()[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

double dot(const DenseMatrix& a, const DenseMatrix& b) {
  require_same_shape(a, b, "dot");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a.flat()[i] * b.flat()[i];
  return acc;
}

double max_abs(const DenseMatrix& m) {
  double mx = 0.0;
  for (double x : m.flat()) mx = std::max(mx, std::fabs(x));
  return mx;
}

double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b) {
  require_same_shape(a, b, "max_abs_diff");
  double mx = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    mx = std::max(mx, std::fabs(a.flat()[i] - b.flat()[i]));
  }
  return mx;
}

std::vector<double> row_sums(const DenseMatrix& m) {
  std::vector<double> s(m.rows(), 0.0);
  for (int i = 0; i < m.rows(); ++i) {
    const double* r = m.row(i);
    for (int j = 0; j < m.cols(); ++j) s[i] += r[j];
  }
  return s;
}

std::vector<double> col_sums(const DenseMatrix& m) {
  std::vector<double> s(m.cols(), 0.0);
  for (int i = 0; i < m.rows(); ++i) {
    const double* r = m.row(i);
    for (int j = 0; j < m.cols(); ++j) s[j] += r[j];
  }
  return s;
}

double min_entry(const DenseMatrix& m) {
  double mn = std::numeric_limits<double>::infinity();
  for (double x : m.flat()) mn = std::min(mn, x);
  return mn;
}

}  // namespace cheatt
