#pragma once

#include <string>
#include <vector>

#include "cheatt/attention.hpp"
#include "cheatt/matrix.hpp"

namespace cheatt {

enum class BasisFamily { Power, Chebyshev, Legendre, Jacobi };

// Polynomial basis selector. Jacobi carries its (a, b) parameters; the other
// families ignore them. All four are normalized so that P1(A) = A, which is
// what makes plain attention a special case of the filter (Jacobi needs
// a == b for that; the default (1, 1) qualifies).
struct BasisKind {
  BasisFamily family = BasisFamily::Chebyshev;
  double jacobi_a = 1.0;
  double jacobi_b = 1.0;

  static BasisKind power() { return {BasisFamily::Power}; }
  static BasisKind chebyshev() { return {BasisFamily::Chebyshev}; }
  static BasisKind legendre() { return {BasisFamily::Legendre}; }
  static BasisKind jacobi(double a, double b);
};

std::string to_string(const BasisKind& basis);
// Accepts "power", "chebyshev", "legendre", "jacobi" or "jacobi:a,b".
BasisKind basis_kind_from_string(const std::string& name);

// One step of the three-term recurrence, valid for k >= 1:
//   P_k = on_a * (A @ P_{k-1}) + on_id * P_{k-1} + on_prev * P_{k-2}
// (on_prev is always 0 at k = 1). The same coefficients drive the block
// recurrence, the scalar spectral response, and the tape backward pass.
struct BasisStep {
  double on_a = 0.0;
  double on_id = 0.0;
  double on_prev = 0.0;
};
BasisStep basis_step(const BasisKind& basis, int k);

// Polynomial filter over an attention map: H(A)V = sum_k alpha_k P_k(A) V.
// Coefficients are learnable and sign-unconstrained.
struct PolyFilter {
  BasisKind basis;
  int order = 5;                // highest polynomial degree j
  std::vector<double> coeffs;   // alpha_0 .. alpha_j

  static PolyFilter with_default_coeffs(BasisKind basis, int order);
  void validate() const;        // throws ParameterError on bad shape/values
};

// Untrained initialization: alpha_0 = 0.5, alpha_1 = 1.0, alpha_k = 2^-k for
// k >= 2, so the initial filter acts like attention plus a halved identity
// skip with a fast-decaying tail.
std::vector<double> default_filter_coefficients(int order);

// [P_0(A)V, ..., P_order(A)V], each n x d, computed by running the basis
// recurrence directly on the value block so no n x n polynomial of A is ever
// formed. Cost O(order * n^2 * d).
std::vector<DenseMatrix> basis_term_apply(const AttentionMap& a, const DenseMatrix& v,
                                          const BasisKind& basis, int order);

// sum_k coeffs[k] * P_k(A) V. Guards against non-contractive inputs: if the
// cheap row-sum bound on the spectral radius fails, a power-iteration
// estimate must stay within 1 + 1e-8 or the call throws ContractError.
DenseMatrix apply_filter(const AttentionMap& a, const DenseMatrix& v, const PolyFilter& f);

// Smallest j <= k_max with ||A^{j+1}V - A^j V||_F <= bound; k_max when the
// tail never dips below the bound.
int truncation_order(const AttentionMap& a, const DenseMatrix& v, double bound, int k_max);

// g(lambda) = sum_k alpha_k P_k(lambda) on each grid point, sharing the step
// coefficients with the block recurrence. Points outside [-1, 1] are still
// evaluated but trigger a one-line stderr warning, once per process
// (Chebyshev in particular blows up out there, and symmetrized attention
// spectra routinely poke just past 1).
std::vector<double> spectral_response(const PolyFilter& f, const std::vector<double>& lambda_grid);

std::vector<double> coefficient_decay_profile(const std::vector<double>& coeffs);
std::vector<double> coefficient_decay_profile(const PolyFilter& f);

}  // namespace cheatt
