#include "cheatt/polyfilter.hpp"

#include <cmath>
#include <cstdio>
#include <iostream>
#include <sstream>

namespace cheatt {

BasisKind BasisKind::jacobi(double a, double b) {
  if (!(a > -1.0) || !(b > -1.0)) {
    throw ParameterError("BasisKind::jacobi: parameters must be > -1");
  }
  BasisKind k;
  k.family = BasisFamily::Jacobi;
  k.jacobi_a = a;
  k.jacobi_b = b;
  return k;
}

std::string to_string(const BasisKind& basis) {
  switch (basis.family) {
    case BasisFamily::Power: return "power";
    case BasisFamily::Chebyshev: return "chebyshev";
    case BasisFamily::Legendre: return "legendre";
    case BasisFamily::Jacobi: {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "jacobi:%g,%g", basis.jacobi_a, basis.jacobi_b);
      return buf;
    }
  }
  return "chebyshev";
}

BasisKind basis_kind_from_string(const std::string& name) {
  if (name == "power") return BasisKind::power();
  if (name == "chebyshev") return BasisKind::chebyshev();
  if (name == "legendre") return BasisKind::legendre();
  if (name == "jacobi") return BasisKind::jacobi(1.0, 1.0);
  if (name.rfind("jacobi:", 0) == 0) {
    std::istringstream in(name.substr(7));
    double a = 0.0, b = 0.0;
    char comma = 0;
    if (in >> a >> comma >> b && comma == ',') return BasisKind::jacobi(a, b);
    throw ConfigError("basis_kind_from_string: expected jacobi:a,b in '" + name + "'");
  }
  throw ConfigError("basis_kind_from_string: unknown basis '" + name + "'");
}

namespace {

// Monic Jacobi recurrence x pi_k = pi_{k+1} + A_k pi_k + B_k pi_{k-1}:
// classic coefficient formulas, with B_1 in the cancelled form so the
// (1 + a + b) = 0 parameter line stays finite.
double jacobi_ak(double a, double b, int k) {
  if (k == 0) return (b - a) / (a + b + 2.0);
  const double s = 2.0 * k + a + b;
  return (b * b - a * a) / (s * (s + 2.0));
}

double jacobi_bk(double a, double b, int k) {
  if (k == 1) {
    const double s = 2.0 + a + b;
    return 4.0 * (1.0 + a) * (1.0 + b) / (s * s * (s + 1.0));
  }
  const double s = 2.0 * k + a + b;
  return 4.0 * k * (k + a) * (k + b) * (k + a + b) / (s * s * (s + 1.0) * (s - 1.0));
}

}  // namespace

BasisStep basis_step(const BasisKind& basis, int k) {
  if (k < 1) throw ParameterError("basis_step: k must be >= 1");
  switch (basis.family) {
    case BasisFamily::Power:
      return {1.0, 0.0, 0.0};
    case BasisFamily::Chebyshev:
      if (k == 1) return {1.0, 0.0, 0.0};
      return {2.0, 0.0, -1.0};
    case BasisFamily::Legendre:
      if (k == 1) return {1.0, 0.0, 0.0};
      return {(2.0 * k - 1.0) / k, 0.0, -(k - 1.0) / k};
    case BasisFamily::Jacobi: {
      const double a = basis.jacobi_a, b = basis.jacobi_b;
      if (k == 1) return {1.0, -jacobi_ak(a, b, 0), 0.0};
      return {1.0, -jacobi_ak(a, b, k - 1), -jacobi_bk(a, b, k - 1)};
    }
  }
  throw ParameterError("basis_step: unknown basis family");
}

PolyFilter PolyFilter::with_default_coeffs(BasisKind basis, int order) {
  PolyFilter f;
  f.basis = basis;
  f.order = order;
  f.coeffs = default_filter_coefficients(order);
  return f;
}

void PolyFilter::validate() const {
  if (order < 0) throw ParameterError("PolyFilter: order must be nonnegative");
  if (static_cast<int>(coeffs.size()) != order + 1) {
    throw ParameterError("PolyFilter: need order+1 coefficients, got " +
                         std::to_string(coeffs.size()));
  }
  for (double c : coeffs) {
    if (!std::isfinite(c)) throw ParameterError("PolyFilter: non-finite coefficient");
  }
  if (basis.family == BasisFamily::Jacobi &&
      (!(basis.jacobi_a > -1.0) || !(basis.jacobi_b > -1.0))) {
    throw ParameterError("PolyFilter: Jacobi parameters must be > -1");
  }
}

std::vector<double> default_filter_coefficients(int order) {
  if (order < 0) throw ParameterError("default_filter_coefficients: order must be nonnegative");
  std::vector<double> c(order + 1);
  c[0] = 0.5;
  if (order >= 1) c[1] = 1.0;
  for (int k = 2; k <= order; ++k) c[k] = std::ldexp(1.0, -k);
  return c;
}

std::vector<DenseMatrix> basis_term_apply(const AttentionMap& a, const DenseMatrix& v,
                                          const BasisKind& basis, int order) {
  if (order < 0) throw ParameterError("basis_term_apply: order must be nonnegative");
  if (a.matrix.cols() != v.rows()) {
    throw ShapeError("basis_term_apply: value block must have n rows");
  }
  std::vector<DenseMatrix> terms;
  terms.reserve(order + 1);
  terms.push_back(v);  // P_0 = I
  for (int k = 1; k <= order; ++k) {
    const BasisStep s = basis_step(basis, k);
    DenseMatrix av = matmul(a.matrix, terms[k - 1]);
    if (k == 1) {
      if (s.on_id == 0.0 && s.on_a == 1.0) {
        terms.push_back(std::move(av));
      } else {
        terms.push_back(lincomb(s.on_a, av, s.on_id, terms[0]));
      }
    } else {
      terms.push_back(lincomb(s.on_a, av, s.on_id, terms[k - 1], s.on_prev, terms[k - 2]));
    }
  }
  return terms;
}

DenseMatrix apply_filter(const AttentionMap& a, const DenseMatrix& v, const PolyFilter& f) {
  f.validate();
  if (a.matrix.cols() != v.rows()) {
    throw ShapeError("apply_filter: value block must have n rows");
  }
  // The recurrences assume rho(A) <= 1. For a nonnegative matrix the max
  // row sum bounds the spectral radius, so the expensive power-iteration
  // estimate only runs when that cheap certificate fails.
  double max_abs_row_sum = 0.0;
  for (int i = 0; i < a.matrix.rows(); ++i) {
    double s = 0.0;
    const double* row = a.matrix.row(i);
    for (int j = 0; j < a.matrix.cols(); ++j) s += std::fabs(row[j]);
    max_abs_row_sum = std::max(max_abs_row_sum, s);
  }
  if (max_abs_row_sum > 1.0 + 1e-8 &&
      estimate_spectral_radius(a.matrix) > 1.0 + 1e-8) {
    throw ContractError("apply_filter: spectral radius exceeds 1 + 1e-8");
  }

  const std::vector<DenseMatrix> terms = basis_term_apply(a, v, f.basis, f.order);
  DenseMatrix acc = f.coeffs[0] * terms[0];
  for (int k = 1; k <= f.order; ++k) axpy(f.coeffs[k], terms[k], acc);
  return acc;
}

int truncation_order(const AttentionMap& a, const DenseMatrix& v, double bound, int k_max) {
  if (!(bound > 0.0)) throw ParameterError("truncation_order: bound must be positive");
  if (k_max < 1) throw ParameterError("truncation_order: k_max must be positive");
  if (a.matrix.cols() != v.rows()) {
    throw ShapeError("truncation_order: value block must have n rows");
  }
  DenseMatrix prev = v;
  for (int j = 0; j <= k_max; ++j) {
    DenseMatrix next = matmul(a.matrix, prev);
    if (frobenius_distance(next, prev) <= bound) return j;
    prev = std::move(next);
  }
  return k_max;
}

std::vector<double> spectral_response(const PolyFilter& f, const std::vector<double>& lambda_grid) {
  f.validate();
  static bool warned = false;
  std::vector<double> out;
  out.reserve(lambda_grid.size());
  for (double lam : lambda_grid) {
    if (!warned && std::fabs(lam) > 1.0 + 1e-12) {
      std::cerr << "spectral_response: grid point " << lam
                << " outside [-1,1]; evaluating anyway\n";
      warned = true;
    }
    double p_prev = 0.0;  // P_{k-2}
    double p_cur = 1.0;   // P_{k-1}, starting from P_0 = 1
    double g = f.coeffs[0];
    for (int k = 1; k <= f.order; ++k) {
      const BasisStep s = basis_step(f.basis, k);
      const double p_next = s.on_a * (lam * p_cur) + s.on_id * p_cur + s.on_prev * p_prev;
      g += f.coeffs[k] * p_next;
      p_prev = p_cur;
      p_cur = p_next;
    }
    out.push_back(g);
  }
  return out;
}

std::vector<double> coefficient_decay_profile(const std::vector<double>& coeffs) {
  std::vector<double> out;
  out.reserve(coeffs.size());
  for (double c : coeffs) out.push_back(std::fabs(c));
  return out;
}

std::vector<double> coefficient_decay_profile(const PolyFilter& f) {
  return coefficient_decay_profile(f.coeffs);
}

}  // namespace cheatt
