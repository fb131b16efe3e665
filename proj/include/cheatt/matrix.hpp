#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

#include "cheatt/errors.hpp"

namespace cheatt {

// Dense row-major matrix of 64-bit reals. The single value carrier for
// queries, keys, values, attention maps and feature blocks.
class DenseMatrix {
public:
  DenseMatrix() = default;
  DenseMatrix(int rows, int cols, double fill = 0.0);
  DenseMatrix(int rows, int cols, std::vector<double> data);
  DenseMatrix(std::initializer_list<std::initializer_list<double>> rows);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(int i, int j) { return data_[static_cast<std::size_t>(i) * cols_ + j]; }
  double operator()(int i, int j) const { return data_[static_cast<std::size_t>(i) * cols_ + j]; }

  double* row(int i) { return data_.data() + static_cast<std::size_t>(i) * cols_; }
  const double* row(int i) const { return data_.data() + static_cast<std::size_t>(i) * cols_; }

  std::span<const double> flat() const { return data_; }
  std::span<double> flat() { return data_; }

  bool same_shape(const DenseMatrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }
  bool all_finite() const;

  static DenseMatrix identity(int n);

private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

DenseMatrix operator+(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix operator-(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix operator*(double s, const DenseMatrix& m);

// c = a * b
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
// c = a * b^T (avoids materializing the transpose)
DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b);
// c = a^T * b
DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b);

DenseMatrix transpose(const DenseMatrix& m);

// c1*x + c2*y, elementwise. Both filter recurrences and their tape
// counterparts go through this so the arithmetic is bit-identical.
DenseMatrix lincomb(double c1, const DenseMatrix& x, double c2, const DenseMatrix& y);
// c1*x + c2*y + c3*z
DenseMatrix lincomb(double c1, const DenseMatrix& x, double c2, const DenseMatrix& y, double c3,
                    const DenseMatrix& z);

// y += c*x
void axpy(double c, const DenseMatrix& x, DenseMatrix& y);

// Row-wise softmax of m/scale, stabilized by row-max subtraction.
// Every output row sums to 1 within 1e-12. Entries are strictly positive
// as long as the within-row logit spread stays below ~700*scale (the
// exp underflow threshold); beyond that, underflowed entries are exact
// zeros and the Markov-condition check will report them as such.
DenseMatrix softmax_rows(const DenseMatrix& m, double scale);

double frobenius_norm(const DenseMatrix& m);
double frobenius_distance(const DenseMatrix& a, const DenseMatrix& b);

// Frobenius inner product sum_ij a_ij * b_ij
double dot(const DenseMatrix& a, const DenseMatrix& b);

double max_abs(const DenseMatrix& m);
double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b);

std::vector<double> row_sums(const DenseMatrix& m);
std::vector<double> col_sums(const DenseMatrix& m);
double min_entry(const DenseMatrix& m);

}  // namespace cheatt
