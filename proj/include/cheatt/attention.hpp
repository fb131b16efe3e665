#pragma once

#include <vector>

#include "cheatt/matrix.hpp"

namespace cheatt {

// Row-stochastic attention map over n tokens. Maps produced by
// compute_attention satisfy: every row sums to 1 within 1e-10 and every
// entry is strictly positive. The raw constructor does not validate, so
// diagnostics can wrap degenerate matrices (e.g. the identity) and report
// on them; use checked() when the invariants must hold.
struct AttentionMap {
  DenseMatrix matrix;
  int n = 0;

  AttentionMap() = default;
  explicit AttentionMap(DenseMatrix m);

  // Throws ContractError unless the map is square, row-stochastic within
  // 1e-10 and strictly positive.
  static AttentionMap checked(DenseMatrix m);
};

// Outcome of checking the three Markov-chain conditions on a candidate
// transition matrix. Strict entrywise positivity is a sufficient
// certificate for both irreducibility (complete connectivity) and
// aperiodicity (every state has a self-loop); entries at or below 1e-300
// are treated as zeros so underflow does not masquerade as connectivity.
struct MarkovReport {
  bool is_stochastic = false;
  double min_entry = 0.0;
  bool is_irreducible = false;
  bool is_aperiodic = false;
  double spectral_gap_estimate = 0.0;  // 1 - |lambda_2|
};

struct PageRankState {
  std::vector<double> scores;  // sums to 1
  int iteration = 0;
  // L1 distance to the previous iterate; the true error curve against the
  // fixed point is produced by pagerank_error_curve.
  double err = 0.0;
};

// softmax(q k^T / sqrt(d)). q and k must both be n x d.
AttentionMap compute_attention(const DenseMatrix& q, const DenseMatrix& k, int d);

MarkovReport verify_markov_conditions(const DenseMatrix& candidate, double eps);
MarkovReport verify_markov_conditions(const AttentionMap& a, double eps);

PageRankState pagerank_uniform_start(int n);

// One damped power-iteration step: pi' = (1-eps) M^T pi + eps/N.
// M is row-stochastic (row w holds the transition probabilities out of w).
PageRankState pagerank_step(const DenseMatrix& m, const PageRankState& pi, double eps);

// Fixed point of the damped iteration, iterated from the uniform vector
// until successive iterates differ by at most 1e-14 in L1.
std::vector<double> pagerank_fixed_point(const DenseMatrix& m, double eps);

// Err(t) = sum_v |pi_v^(t) - pi_v^*| for t = 0..t_max, starting uniform.
std::vector<double> pagerank_error_curve(const DenseMatrix& m, double eps, int t_max);

// delta_k = |A^k V - A^(k-1) V|_F for k = 1..k_max, computed by iterated
// left-multiplication on the n x d block (A^k is never materialized).
std::vector<double> power_convergence_curve(const AttentionMap& a, const DenseMatrix& v,
                                            int k_max);

// Geometric late-stage decay rate of a convergence curve: the mean ratio
// delta_k/delta_{k-1} over the tail where the curve is still well above
// the floating-point floor. Returns 0 if no usable window exists.
double late_stage_decay_rate(const std::vector<double>& curve);

// Perron-root estimate of a nonnegative square matrix by power iteration.
double estimate_spectral_radius(const DenseMatrix& m, int iterations = 60);

}  // namespace cheatt
