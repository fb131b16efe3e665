#include "cheatt/attention.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cheatt/rng.hpp"

namespace cheatt {

namespace {

constexpr double kPositivityFloor = 1e-300;
constexpr double kStochasticTol = 1e-10;

double l1_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += std::fabs(a[i] - b[i]);
  return acc;
}

// pi' = (1-eps) M^T pi + eps/N on raw vectors.
std::vector<double> damped_transition(const DenseMatrix& m, const std::vector<double>& pi,
                                      double eps) {
  const int n = m.rows();
  std::vector<double> next(n, eps / n);
  for (int w = 0; w < n; ++w) {
    const double pw = (1.0 - eps) * pi[w];
    const double* row = m.row(w);
    for (int v = 0; v < n; ++v) next[v] += pw * row[v];
  }
  return next;
}

// Stationary distribution of a row-stochastic matrix (undamped), used to
// deflate the leading eigenvalue before estimating |lambda_2|.
std::vector<double> stationary_distribution(const DenseMatrix& m) {
  const int n = m.rows();
  std::vector<double> pi(n, 1.0 / n);
  for (int it = 0; it < 20000; ++it) {
    std::vector<double> next(n, 0.0);
    for (int w = 0; w < n; ++w) {
      const double pw = pi[w];
      const double* row = m.row(w);
      for (int v = 0; v < n; ++v) next[v] += pw * row[v];
    }
    double total = 0.0;
    for (double x : next) total += std::fabs(x);
    if (total > 0.0) {
      for (double& x : next) x /= total;
    }
    const double diff = l1_diff(next, pi);
    pi = std::move(next);
    if (diff <= 1e-14) break;
  }
  return pi;
}

// |lambda_2| of a row-stochastic matrix: power iteration on the deflated
// operator B = A - 1 pi^T, whose spectrum is {0} plus the subdominant
// eigenvalues of A. The growth rate of |B^k x| converges to |lambda_2|
// even when the subdominant pair is complex.
double second_eigenvalue_magnitude(const DenseMatrix& m) {
  const int n = m.rows();
  if (n == 1) return 0.0;
  const std::vector<double> pi = stationary_distribution(m);

  Rng rng(0x9e3779b97f4a7c15ULL);  // fixed stream: the estimate is deterministic
  std::vector<double> x(n);
  for (double& xi : x) xi = rng.normal();

  auto apply_deflated = [&](const std::vector<double>& in) {
    std::vector<double> out(n, 0.0);
    double weighted = 0.0;
    for (int j = 0; j < n; ++j) weighted += pi[j] * in[j];
    for (int i = 0; i < n; ++i) {
      const double* row = m.row(i);
      double acc = 0.0;
      for (int j = 0; j < n; ++j) acc += row[j] * in[j];
      out[i] = acc - weighted;
    }
    return out;
  };

  auto norm2 = [](const std::vector<double>& v) {
    double acc = 0.0;
    for (double x : v) acc += x * x;
    return std::sqrt(acc);
  };

  // Warm up, then average the growth over a window of steps.
  const int warmup = 50, window = 50;
  double nrm = norm2(x);
  if (nrm == 0.0) return 0.0;
  for (double& xi : x) xi /= nrm;
  for (int it = 0; it < warmup; ++it) {
    x = apply_deflated(x);
    nrm = norm2(x);
    if (nrm < 1e-280) return 0.0;  // deflated operator is (numerically) nilpotent
    for (double& xi : x) xi /= nrm;
  }
  double log_growth = 0.0;
  int counted = 0;
  for (int it = 0; it < window; ++it) {
    x = apply_deflated(x);
    nrm = norm2(x);
    if (nrm < 1e-280) return 0.0;
    log_growth += std::log(nrm);
    ++counted;
    for (double& xi : x) xi /= nrm;
  }
  return std::min(1.0, std::exp(log_growth / counted));
}

}  // namespace

AttentionMap::AttentionMap(DenseMatrix m) : matrix(std::move(m)), n(matrix.rows()) {}

AttentionMap AttentionMap::checked(DenseMatrix m) {
  if (m.rows() != m.cols()) throw ContractError("AttentionMap: matrix must be square");
  for (double s : row_sums(m)) {
    if (std::fabs(s - 1.0) > kStochasticTol) {
      throw ContractError("AttentionMap: row sums deviate from 1 by more than 1e-10");
    }
  }
  if (!(min_entry(m) > 0.0)) {
    throw ContractError("AttentionMap: entries must be strictly positive");
  }
  return AttentionMap(std::move(m));
}

AttentionMap compute_attention(const DenseMatrix& q, const DenseMatrix& k, int d) {
  if (d <= 0) throw ParameterError("compute_attention: d must be positive");
  if (q.cols() != d || k.cols() != d || q.rows() != k.rows()) {
    throw ShapeError("compute_attention: q and k must both be n x d");
  }
  DenseMatrix logits = matmul_nt(q, k);
  return AttentionMap::checked(softmax_rows(logits, std::sqrt(static_cast<double>(d))));
}

MarkovReport verify_markov_conditions(const DenseMatrix& candidate, double eps) {
  if (candidate.rows() != candidate.cols()) {
    throw ShapeError("verify_markov_conditions: matrix must be square");
  }
  if (!(eps > 0.0)) throw ParameterError("verify_markov_conditions: eps must be positive");
  MarkovReport report;
  report.min_entry = min_entry(candidate);
  report.is_stochastic = true;
  for (double s : row_sums(candidate)) {
    if (std::fabs(s - 1.0) > eps) {
      report.is_stochastic = false;
      break;
    }
  }
  const bool positive = report.min_entry > kPositivityFloor;
  report.is_irreducible = positive;
  report.is_aperiodic = positive;
  report.spectral_gap_estimate = 1.0 - second_eigenvalue_magnitude(candidate);
  report.spectral_gap_estimate = std::clamp(report.spectral_gap_estimate, 0.0, 1.0);
  return report;
}

MarkovReport verify_markov_conditions(const AttentionMap& a, double eps) {
  return verify_markov_conditions(a.matrix, eps);
}

PageRankState pagerank_uniform_start(int n) {
  if (n <= 0) throw ParameterError("pagerank_uniform_start: n must be positive");
  PageRankState st;
  st.scores.assign(n, 1.0 / n);
  return st;
}

PageRankState pagerank_step(const DenseMatrix& m, const PageRankState& pi, double eps) {
  if (!(eps > 0.0) || !(eps < 1.0)) throw ParameterError("pagerank_step: eps must be in (0,1)");
  if (m.rows() != m.cols() || m.rows() != static_cast<int>(pi.scores.size())) {
    throw ShapeError("pagerank_step: matrix/vector size mismatch");
  }
  PageRankState next;
  next.scores = damped_transition(m, pi.scores, eps);
  next.iteration = pi.iteration + 1;
  next.err = l1_diff(next.scores, pi.scores);
  return next;
}

std::vector<double> pagerank_fixed_point(const DenseMatrix& m, double eps) {
  if (!(eps > 0.0) || !(eps < 1.0)) {
    throw ParameterError("pagerank_fixed_point: eps must be in (0,1)");
  }
  const int n = m.rows();
  std::vector<double> pi(n, 1.0 / n);
  for (int it = 0; it < 100000; ++it) {
    std::vector<double> next = damped_transition(m, pi, eps);
    const double diff = l1_diff(next, pi);
    pi = std::move(next);
    if (diff <= 1e-14) break;
  }
  return pi;
}

std::vector<double> pagerank_error_curve(const DenseMatrix& m, double eps, int t_max) {
  const std::vector<double> star = pagerank_fixed_point(m, eps);
  std::vector<double> pi(m.rows(), 1.0 / m.rows());
  std::vector<double> curve;
  curve.reserve(t_max + 1);
  curve.push_back(l1_diff(pi, star));
  for (int t = 1; t <= t_max; ++t) {
    pi = damped_transition(m, pi, eps);
    curve.push_back(l1_diff(pi, star));
  }
  return curve;
}

std::vector<double> power_convergence_curve(const AttentionMap& a, const DenseMatrix& v,
                                            int k_max) {
  if (a.matrix.cols() != v.rows()) {
    throw ShapeError("power_convergence_curve: v must have n rows");
  }
  std::vector<double> curve;
  curve.reserve(k_max);
  DenseMatrix block = v;
  for (int k = 1; k <= k_max; ++k) {
    DenseMatrix next = matmul(a.matrix, block);
    curve.push_back(frobenius_distance(next, block));
    block = std::move(next);
  }
  return curve;
}

double late_stage_decay_rate(const std::vector<double>& curve) {
  // Use ratios past the initial transient, ignoring values already at the
  // floating-point floor where ratios turn into noise.
  constexpr double kFloor = 1e-12;
  constexpr int kSkip = 5;
  double log_sum = 0.0;
  int counted = 0;
  for (std::size_t k = 1; k < curve.size(); ++k) {
    if (static_cast<int>(k) < kSkip) continue;
    if (curve[k - 1] <= kFloor || curve[k] <= kFloor) continue;
    log_sum += std::log(curve[k] / curve[k - 1]);
    ++counted;
    if (counted >= 40) break;
  }
  if (counted == 0) return 0.0;
  return std::exp(log_sum / counted);
}

double estimate_spectral_radius(const DenseMatrix& m, int iterations) {
  if (m.rows() != m.cols()) throw ShapeError("estimate_spectral_radius: matrix must be square");
  const int n = m.rows();
  std::vector<double> x(n, 1.0 / std::sqrt(static_cast<double>(n)));
  double estimate = 0.0;
  for (int it = 0; it < iterations; ++it) {
    std::vector<double> next(n, 0.0);
    for (int i = 0; i < n; ++i) {
      const double* row = m.row(i);
      double acc = 0.0;
      for (int j = 0; j < n; ++j) acc += row[j] * x[j];
      next[i] = acc;
    }
    double nrm = 0.0;
    for (double v : next) nrm += v * v;
    nrm = std::sqrt(nrm);
    if (nrm == 0.0) return 0.0;
    estimate = nrm;
    for (double& v : next) v /= nrm;
    x = std::move(next);
  }
  return estimate;
}

}  // namespace cheatt
