#include "cheatt/eigen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace cheatt {

namespace {

double offdiag_mass(const DenseMatrix& a) {
  double acc = 0.0;
  for (int i = 0; i < a.rows(); ++i) {
    for (int j = 0; j < a.cols(); ++j) {
      if (i != j) acc += a(i, j) * a(i, j);
    }
  }
  return std::sqrt(acc);
}

// tan of the rotation angle that annihilates the (p,q) element, from the
// usual theta = (aqq - app) / (2 apq) parametrization.
double rotation_t(double theta) {
  if (std::fabs(theta) > 1e100) return 1.0 / (2.0 * theta);
  const double t = 1.0 / (std::fabs(theta) + std::sqrt(1.0 + theta * theta));
  return theta < 0.0 ? -t : t;
}

template <typename Swapper>
void sort_descending(std::vector<double>& vals, Swapper swap_cols) {
  const int n = static_cast<int>(vals.size());
  for (int i = 0; i < n; ++i) {
    int best = i;
    for (int j = i + 1; j < n; ++j) {
      if (vals[j] > vals[best]) best = j;
    }
    if (best != i) {
      std::swap(vals[i], vals[best]);
      swap_cols(i, best);
    }
  }
}

}  // namespace

EigenDecomposition sym_eigen(const DenseMatrix& s, double tol, int max_sweeps) {
  if (s.rows() != s.cols()) throw ContractError("sym_eigen: matrix must be square");
  if (!(tol > 0.0)) throw ParameterError("sym_eigen: tol must be positive");
  const int n = s.rows();
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (std::fabs(s(i, j) - s(j, i)) > 1e-10) {
        throw ContractError("sym_eigen: input not symmetric at (" + std::to_string(i) + "," +
                            std::to_string(j) + ")");
      }
    }
  }

  DenseMatrix a = s;
  DenseMatrix u = DenseMatrix::identity(n);

  bool converged = false;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    if (offdiag_mass(a) <= tol) {
      converged = true;
      break;
    }
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = rotation_t(theta);
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double sn = t * c;

        const double h = t * apq;
        a(p, p) -= h;
        a(q, q) += h;
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (int k = 0; k < n; ++k) {
          if (k == p || k == q) continue;
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - sn * akq;
          a(p, k) = a(k, p);
          a(k, q) = sn * akp + c * akq;
          a(q, k) = a(k, q);
        }
        for (int k = 0; k < n; ++k) {
          const double ukp = u(k, p);
          const double ukq = u(k, q);
          u(k, p) = c * ukp - sn * ukq;
          u(k, q) = sn * ukp + c * ukq;
        }
      }
    }
  }
  if (!converged && offdiag_mass(a) > tol) {
    throw ConvergenceError("sym_eigen: no convergence after " + std::to_string(max_sweeps) +
                           " sweeps");
  }

  EigenDecomposition dec;
  dec.eigenvalues.resize(n);
  for (int i = 0; i < n; ++i) dec.eigenvalues[i] = a(i, i);
  dec.eigenvectors = std::move(u);
  DenseMatrix& vec = dec.eigenvectors;
  sort_descending(dec.eigenvalues, [&](int i, int j) {
    for (int k = 0; k < n; ++k) std::swap(vec(k, i), vec(k, j));
  });
  return dec;
}

SvdResult svd(const DenseMatrix& m, double tol, int max_sweeps) {
  if (!(tol > 0.0)) throw ParameterError("svd: tol must be positive");
  if (m.rows() < m.cols()) {
    SvdResult flipped = svd(transpose(m), tol, max_sweeps);
    SvdResult out;
    out.sigma = std::move(flipped.sigma);
    out.u = transpose(flipped.vt);
    out.vt = transpose(flipped.u);
    return out;
  }

  const int r = m.rows(), c = m.cols();
  DenseMatrix w = m;
  DenseMatrix v = DenseMatrix::identity(c);

  // Pair threshold tied to the requested reconstruction tolerance but
  // never looser than near machine precision.
  const double pair_tol = std::min(tol, 1e-13);

  bool converged = false;
  for (int sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
    converged = true;
    for (int p = 0; p < c - 1; ++p) {
      for (int q = p + 1; q < c; ++q) {
        double app = 0.0, aqq = 0.0, apq = 0.0;
        for (int k = 0; k < r; ++k) {
          app += w(k, p) * w(k, p);
          aqq += w(k, q) * w(k, q);
          apq += w(k, p) * w(k, q);
        }
        if (std::fabs(apq) <= pair_tol * std::sqrt(app * aqq)) continue;
        converged = false;
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = rotation_t(theta);
        const double cs = 1.0 / std::sqrt(1.0 + t * t);
        const double sn = t * cs;
        for (int k = 0; k < r; ++k) {
          const double wp = w(k, p);
          const double wq = w(k, q);
          w(k, p) = cs * wp - sn * wq;
          w(k, q) = sn * wp + cs * wq;
        }
        for (int k = 0; k < c; ++k) {
          const double vp = v(k, p);
          const double vq = v(k, q);
          v(k, p) = cs * vp - sn * vq;
          v(k, q) = sn * vp + cs * vq;
        }
      }
    }
  }
  if (!converged) {
    throw ConvergenceError("svd: no convergence after " + std::to_string(max_sweeps) + " sweeps");
  }

  SvdResult out;
  out.sigma.resize(c);
  out.u = DenseMatrix(r, c);
  for (int j = 0; j < c; ++j) {
    double norm = 0.0;
    for (int k = 0; k < r; ++k) norm += w(k, j) * w(k, j);
    norm = std::sqrt(norm);
    out.sigma[j] = norm;
    if (norm > 0.0) {
      for (int k = 0; k < r; ++k) out.u(k, j) = w(k, j) / norm;
    }
  }
  sort_descending(out.sigma, [&](int i, int j) {
    for (int k = 0; k < r; ++k) std::swap(out.u(k, i), out.u(k, j));
    for (int k = 0; k < c; ++k) std::swap(v(k, i), v(k, j));
  });
  out.vt = transpose(v);
  return out;
}

}  // namespace cheatt
