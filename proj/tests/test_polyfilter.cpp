#include <cmath>
#include <vector>

#include "doctest.h"

#include "cheatt/eigen.hpp"
#include "cheatt/errors.hpp"
#include "cheatt/polyfilter.hpp"
#include "test_util.hpp"

using namespace cheatt;

namespace {

const std::vector<BasisKind> kAllBases = {BasisKind::power(), BasisKind::chebyshev(),
                                          BasisKind::legendre(), BasisKind::jacobi(1.0, 1.0)};

// Filter that selects the single basis polynomial P_k.
PolyFilter unit_filter(const BasisKind& basis, int k) {
  PolyFilter f;
  f.basis = basis;
  f.order = k;
  f.coeffs.assign(k + 1, 0.0);
  f.coeffs[k] = 1.0;
  return f;
}

double response_at(const BasisKind& basis, int k, double x) {
  return spectral_response(unit_filter(basis, k), {x})[0];
}

}  // namespace

TEST_SUITE("polyfilter") {

TEST_CASE("basis_step coefficients match the hand-derived recurrences") {
  // Chebyshev: T_1 = A, T_k = 2 A T_{k-1} - T_{k-2}
  BasisStep s = basis_step(BasisKind::chebyshev(), 1);
  CHECK(s.on_a == 1.0);
  CHECK(s.on_id == 0.0);
  CHECK(s.on_prev == 0.0);
  s = basis_step(BasisKind::chebyshev(), 3);
  CHECK(s.on_a == 2.0);
  CHECK(s.on_id == 0.0);
  CHECK(s.on_prev == -1.0);
  // Power: P_k = A P_{k-1}
  s = basis_step(BasisKind::power(), 4);
  CHECK(s.on_a == 1.0);
  CHECK(s.on_id == 0.0);
  CHECK(s.on_prev == 0.0);
  // Legendre: k L_k = (2k-1) A L_{k-1} - (k-1) L_{k-2}
  s = basis_step(BasisKind::legendre(), 2);
  CHECK(s.on_a == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(s.on_prev == doctest::Approx(-0.5).epsilon(1e-15));
  s = basis_step(BasisKind::legendre(), 3);
  CHECK(s.on_a == doctest::Approx(5.0 / 3.0).epsilon(1e-15));
  CHECK(s.on_prev == doctest::Approx(-2.0 / 3.0).epsilon(1e-15));
  // Monic Jacobi (1,1): pi_2 = x pi_1 - 1/5, pi_3 = x pi_2 - (8/35) pi_1
  s = basis_step(BasisKind::jacobi(1.0, 1.0), 2);
  CHECK(s.on_a == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(s.on_id == doctest::Approx(0.0));
  CHECK(s.on_prev == doctest::Approx(-0.2).epsilon(1e-14));
  s = basis_step(BasisKind::jacobi(1.0, 1.0), 3);
  CHECK(s.on_prev == doctest::Approx(-8.0 / 35.0).epsilon(1e-14));
  CHECK_THROWS_AS(basis_step(BasisKind::chebyshev(), 0), ParameterError);
}

TEST_CASE("scalar responses match explicit textbook polynomials") {
  const std::vector<double> xs = {-1.0, -0.63, -0.2, 0.0, 0.17, 0.5, 0.99, 1.0};
  for (double x : xs) {
    // Chebyshev T_2..T_4
    CHECK(response_at(BasisKind::chebyshev(), 2, x) ==
          doctest::Approx(2 * x * x - 1).epsilon(1e-14));
    CHECK(response_at(BasisKind::chebyshev(), 3, x) ==
          doctest::Approx(4 * x * x * x - 3 * x).epsilon(1e-14));
    CHECK(response_at(BasisKind::chebyshev(), 4, x) ==
          doctest::Approx(8 * std::pow(x, 4) - 8 * x * x + 1).epsilon(1e-14));
    // Legendre P_2..P_4
    CHECK(response_at(BasisKind::legendre(), 2, x) ==
          doctest::Approx((3 * x * x - 1) / 2).epsilon(1e-14));
    CHECK(response_at(BasisKind::legendre(), 3, x) ==
          doctest::Approx((5 * x * x * x - 3 * x) / 2).epsilon(1e-14));
    CHECK(response_at(BasisKind::legendre(), 4, x) ==
          doctest::Approx((35 * std::pow(x, 4) - 30 * x * x + 3) / 8).epsilon(1e-14));
    // Monic Jacobi (1,1): x^2 - 1/5 and x^3 - (3/7) x
    CHECK(response_at(BasisKind::jacobi(1.0, 1.0), 2, x) ==
          doctest::Approx(x * x - 0.2).epsilon(1e-14));
    CHECK(response_at(BasisKind::jacobi(1.0, 1.0), 3, x) ==
          doctest::Approx(x * x * x - 3.0 * x / 7.0).epsilon(1e-14));
    // Monic Jacobi (-1/2,-1/2) is monic Chebyshev: x^2 - 1/2
    CHECK(response_at(BasisKind::jacobi(-0.5, -0.5), 2, x) ==
          doctest::Approx(x * x - 0.5).epsilon(1e-14));
    // Power
    CHECK(response_at(BasisKind::power(), 3, x) == doctest::Approx(x * x * x).epsilon(1e-14));
  }
}

TEST_CASE("every basis is normalized so P_0 = 1 and P_1(A) = A") {
  for (const BasisKind& basis : kAllBases) {
    CHECK(response_at(basis, 0, 0.37) == 1.0);
    for (double x : {-0.8, 0.1, 0.9}) {
      CHECK(response_at(basis, 1, x) == doctest::Approx(x).epsilon(1e-15));
    }
  }
}

TEST_CASE("chebyshev trig identity T_k(cos t) = cos(k t) up to k = 32") {
  for (int k = 0; k <= 32; ++k) {
    const PolyFilter f = unit_filter(BasisKind::chebyshev(), k);
    for (int i = 0; i <= 40; ++i) {
      const double theta = 3.14159265358979323846 * i / 40.0;
      const double got = spectral_response(f, {std::cos(theta)})[0];
      CHECK(std::fabs(got - std::cos(k * theta)) <= 1e-10);
    }
  }
}

TEST_CASE("basis_term_apply agrees with the monomial-expansion oracle") {
  Rng rng(31);
  const int order = 6;
  for (const BasisKind& basis : kAllBases) {
    const DenseMatrix s = testutil::sinkhorn_symmetric(rng, 5);
    const AttentionMap a(s);
    const DenseMatrix v = testutil::random_matrix(rng, 5, 3);
    const std::vector<DenseMatrix> terms = basis_term_apply(a, v, basis, order);
    REQUIRE(terms.size() == order + 1);
    CHECK(max_abs_diff(terms[0], v) == 0.0);
    CHECK(max_abs_diff(terms[1], matmul(s, v)) == 0.0);
    const auto polys = testutil::monomial_basis(basis, order);
    for (int k = 0; k <= order; ++k) {
      const DenseMatrix oracle = testutil::apply_monomial(polys[k], s, v);
      CHECK(max_abs_diff(terms[k], oracle) < 1e-11);
    }
  }
}

TEST_CASE("apply_filter matches the eigendecomposition oracle on all bases") {
  Rng rng(32);
  for (int trial = 0; trial < 5; ++trial) {
    const DenseMatrix s = testutil::sinkhorn_symmetric(rng, 5);
    const EigenDecomposition e = sym_eigen(s);
    const DenseMatrix v = testutil::random_matrix(rng, 5, 4);
    for (const BasisKind& basis : kAllBases) {
      for (int order : {1, 3, 8}) {
        PolyFilter f = PolyFilter::with_default_coeffs(basis, order);
        const DenseMatrix got = apply_filter(AttentionMap(s), v, f);
        // H(A) V = U g(Lambda) U^T V
        const std::vector<double> g = spectral_response(f, e.eigenvalues);
        DenseMatrix glam(5, 5);
        for (int i = 0; i < 5; ++i) glam(i, i) = g[i];
        const DenseMatrix oracle =
            matmul(e.eigenvectors, matmul(glam, matmul_tn(e.eigenvectors, v)));
        CHECK(frobenius_distance(got, oracle) <= 1e-10 * std::max(1.0, frobenius_norm(oracle)));
      }
    }
  }
}

TEST_CASE("apply_filter with coefficients (0,1,0,...) is exactly A V") {
  Rng rng(33);
  const AttentionMap a = testutil::random_attention(rng, 7, 5);
  const DenseMatrix v = testutil::random_matrix(rng, 7, 5);
  for (const BasisKind& basis : kAllBases) {
    PolyFilter f;
    f.basis = basis;
    f.order = 5;
    f.coeffs = {0.0, 1.0, 0.0, 0.0, 0.0, 0.0};
    CHECK(max_abs_diff(apply_filter(a, v, f), matmul(a.matrix, v)) == 0.0);
  }
}

TEST_CASE("apply_filter rejects non-contractive maps") {
  DenseMatrix grow = DenseMatrix::identity(4);
  for (double& v : grow.flat()) v *= 1.5;
  const DenseMatrix v = DenseMatrix(4, 2, 1.0);
  const PolyFilter f = PolyFilter::with_default_coeffs(BasisKind::chebyshev(), 3);
  CHECK_THROWS_AS(apply_filter(AttentionMap(grow), v, f), ContractError);
  // row sums above 1 but spectral radius below: accepted
  DenseMatrix ok{{0.5, 0.52}, {0.01, 0.5}};  // rho ~ 0.57
  CHECK_NOTHROW(apply_filter(AttentionMap(ok), DenseMatrix(2, 2, 1.0), f));
}

TEST_CASE("filter validation catches bad configurations") {
  PolyFilter f = PolyFilter::with_default_coeffs(BasisKind::chebyshev(), 4);
  CHECK_NOTHROW(f.validate());
  f.coeffs.pop_back();
  CHECK_THROWS_AS(f.validate(), ParameterError);
  f = PolyFilter::with_default_coeffs(BasisKind::chebyshev(), 4);
  f.coeffs[2] = std::nan("");
  CHECK_THROWS_AS(f.validate(), ParameterError);
  f = PolyFilter::with_default_coeffs(BasisKind::chebyshev(), 4);
  f.order = -1;
  CHECK_THROWS_AS(f.validate(), ParameterError);
  CHECK_THROWS_AS(BasisKind::jacobi(-1.0, 0.0), ParameterError);
  CHECK_THROWS_AS(BasisKind::jacobi(0.0, -1.5), ParameterError);
}

TEST_CASE("default coefficients: 0.5, 1.0, then 2^-k") {
  const std::vector<double> c = default_filter_coefficients(5);
  REQUIRE(c.size() == 6);
  CHECK(c[0] == 0.5);
  CHECK(c[1] == 1.0);
  CHECK(c[2] == 0.25);
  CHECK(c[3] == 0.125);
  CHECK(c[4] == 0.0625);
  CHECK(c[5] == 0.03125);
}

TEST_CASE("coefficient_decay_profile takes magnitudes") {
  CHECK(coefficient_decay_profile({1.0, -0.5, 0.25}) == std::vector<double>{1.0, 0.5, 0.25});
  const PolyFilter f = PolyFilter::with_default_coeffs(BasisKind::legendre(), 2);
  CHECK(coefficient_decay_profile(f) == std::vector<double>{0.5, 1.0, 0.25});
}

TEST_CASE("basis kind string round trips") {
  for (const BasisKind& basis : kAllBases) {
    const BasisKind back = basis_kind_from_string(to_string(basis));
    CHECK(back.family == basis.family);
    CHECK(back.jacobi_a == basis.jacobi_a);
    CHECK(back.jacobi_b == basis.jacobi_b);
  }
  const BasisKind j = basis_kind_from_string("jacobi:0.5,0.5");
  CHECK(j.family == BasisFamily::Jacobi);
  CHECK(j.jacobi_a == 0.5);
  CHECK_THROWS_AS(basis_kind_from_string("hermite"), ConfigError);
}

TEST_CASE("truncation_order finds where the power tail dips under the bound") {
  const DenseMatrix s = testutil::spectrum_stochastic({0.5, 0.1, 0.02});
  Rng rng(34);
  const DenseMatrix v = testutil::random_matrix(rng, 4, 2);
  const AttentionMap a(s);
  const int j = truncation_order(a, v, 1e-6, 100);
  CHECK(j > 3);
  CHECK(j < 60);
  // the returned order satisfies the bound, the previous one does not
  const std::vector<double> curve = power_convergence_curve(a, v, j + 1);
  CHECK(curve[j] <= 1e-6);       // delta_{j+1} in 1-based curve indexing
  CHECK(curve[j - 1] > 1e-6);
  CHECK(truncation_order(a, v, 1e-300, 7) == 7);  // never reached -> k_max
}

}  // TEST_SUITE
