#pragma once

#include <vector>

#include "json.hpp"

#include "cheatt/attention.hpp"
#include "cheatt/eigen.hpp"
#include "cheatt/model.hpp"

namespace cheatt {

// Mean cosine similarity over all unordered token pairs. Zero-norm rows are
// excluded; their count lands in *zero_rows when given. Fewer than two
// usable rows -> MetricError.
double token_cosine_similarity(const DenseMatrix& x, int* zero_rows = nullptr);

// Singular values divided by the largest, descending, starting at 1.
// Zero matrix -> MetricError.
std::vector<double> normalized_singular_values(const DenseMatrix& x);

// Eigenvalues of the symmetrized map (A + A^T)/2, descending. The
// symmetrization keeps the spectrum real; for a row-stochastic A every
// eigenvalue is at most the Perron bound (1 + max column sum)/2.
std::vector<double> attention_spectrum(const AttentionMap& a);

// ||X - mean row|| / ||X||: share of feature energy off the token-uniform
// component. 0 for the zero matrix; rises toward 1 the more tokens differ.
double high_frequency_ratio(const DenseMatrix& x);

struct LayerDiagnostics {
  int layer = 0;  // 0 = embedding, 1..depth = encoder blocks
  double mean_cosine = 0.0;
  int zero_rows = 0;                          // summed over the batch
  std::vector<double> normalized_singulars;   // entrywise batch average
  double high_freq_ratio = 0.0;               // batch average
  // Blocks with attention only (layer >= 1):
  std::vector<double> attention_eigs;         // averaged over batch and heads
  std::vector<double> response_at_eigs;       // filter response on those
  std::vector<double> response_grid;          // filter response on lambda_grid
};

struct OversmoothingReport {
  std::vector<double> lambda_grid;            // shared response grid
  std::vector<LayerDiagnostics> layers;
  std::vector<double> convergence_curve;      // delta_k of a representative map
};

// Runs the encoder over the sample batch and aggregates the per-layer
// metrics for layers [layer_lo, layer_hi] (layer_hi < 0 means depth). The
// per-layer filter response uses the layer's trained coefficients, or the
// degree-1 identity response g(lambda) = lambda for plain attention. The
// convergence curve comes from the first sample's first attention map and
// value block.
OversmoothingReport layer_report(const ModelConfig& cfg, const ParamStore& params,
                                 const std::vector<EncodedRow>& sample, int layer_lo = 0,
                                 int layer_hi = -1);

nlohmann::json report_to_json(const OversmoothingReport& report);
OversmoothingReport report_from_json(const nlohmann::json& j);
// Flat rows "layer,metric,index,value"; batch-level series use layer -1.
std::string report_to_csv(const OversmoothingReport& report);

}  // namespace cheatt
