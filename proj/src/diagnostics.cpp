#include "cheatt/diagnostics.hpp"

#include <cmath>
#include <sstream>

#include "cheatt/polyfilter.hpp"

namespace cheatt {

double token_cosine_similarity(const DenseMatrix& x, int* zero_rows) {
  const int n = x.rows();
  if (n < 2) throw MetricError("token_cosine_similarity: need at least 2 rows");
  std::vector<double> norms(n);
  std::vector<int> usable;
  for (int i = 0; i < n; ++i) {
    double ss = 0.0;
    const double* row = x.row(i);
    for (int j = 0; j < x.cols(); ++j) ss += row[j] * row[j];
    norms[i] = std::sqrt(ss);
    if (norms[i] > 0.0) usable.push_back(i);
  }
  if (zero_rows) *zero_rows = n - static_cast<int>(usable.size());
  if (usable.size() < 2) {
    throw MetricError("token_cosine_similarity: fewer than 2 nonzero rows");
  }
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < usable.size(); ++a) {
    for (std::size_t b = a + 1; b < usable.size(); ++b) {
      const int i = usable[a], j = usable[b];
      double dp = 0.0;
      const double* ri = x.row(i);
      const double* rj = x.row(j);
      for (int c = 0; c < x.cols(); ++c) dp += ri[c] * rj[c];
      sum += dp / (norms[i] * norms[j]);
      ++pairs;
    }
  }
  return sum / pairs;
}

std::vector<double> normalized_singular_values(const DenseMatrix& x) {
  const SvdResult s = svd(x);
  if (s.sigma.empty() || s.sigma[0] <= 0.0) {
    throw MetricError("normalized_singular_values: zero matrix");
  }
  std::vector<double> out(s.sigma.size());
  for (std::size_t i = 0; i < s.sigma.size(); ++i) out[i] = s.sigma[i] / s.sigma[0];
  return out;
}

std::vector<double> attention_spectrum(const AttentionMap& a) {
  const DenseMatrix sym = 0.5 * (a.matrix + transpose(a.matrix));
  return sym_eigen(sym).eigenvalues;
}

double high_frequency_ratio(const DenseMatrix& x) {
  const double total = frobenius_norm(x);
  if (total == 0.0) return 0.0;
  const int n = x.rows(), d = x.cols();
  std::vector<double> mean(d, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) mean[j] += x(i, j);
  }
  for (double& m : mean) m /= n;
  double off = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) {
      const double dev = x(i, j) - mean[j];
      off += dev * dev;
    }
  }
  return std::sqrt(off) / total;
}

namespace {

PolyFilter layer_filter(const ModelConfig& cfg, const ParamStore& params, int block) {
  PolyFilter f;
  if (cfg.attention_kind == AttentionKind::CheAtt) {
    f.basis = cfg.basis;
    f.order = cfg.poly_order;
    const DenseMatrix& alpha =
        params.at("layer" + std::to_string(block) + ".cheatt.alpha");
    f.coeffs.assign(alpha.flat().begin(), alpha.flat().end());
  } else {
    f.basis = BasisKind::chebyshev();
    f.order = 1;
    f.coeffs = {0.0, 1.0};  // plain attention response g(lambda) = lambda
  }
  return f;
}

void average_into(std::vector<double>& acc, const std::vector<double>& sample) {
  if (acc.empty()) acc.assign(sample.size(), 0.0);
  if (acc.size() != sample.size()) {
    throw ContractError("layer_report: inconsistent profile lengths across the batch");
  }
  for (std::size_t i = 0; i < sample.size(); ++i) acc[i] += sample[i];
}

}  // namespace

OversmoothingReport layer_report(const ModelConfig& cfg, const ParamStore& params,
                                 const std::vector<EncodedRow>& sample, int layer_lo,
                                 int layer_hi) {
  cfg.validate();
  if (sample.empty()) throw DataError("layer_report: empty sample batch");
  if (layer_hi < 0) layer_hi = cfg.depth;
  if (layer_lo < 0 || layer_lo > layer_hi || layer_hi > cfg.depth) {
    throw ParameterError("layer_report: layer range out of bounds");
  }

  OversmoothingReport report;
  for (double lam = -1.0; lam <= 1.0 + 1e-12; lam += 0.05) {
    report.lambda_grid.push_back(std::round(lam * 100.0) / 100.0);
  }
  const int n_layers = layer_hi - layer_lo + 1;
  report.layers.assign(n_layers, LayerDiagnostics{});
  std::vector<std::vector<double>> eig_acc(n_layers);
  int eig_samples = 0;

  for (std::size_t s = 0; s < sample.size(); ++s) {
    Tape tape;
    const TapeParams tp = make_leaves(tape, params);
    EncoderActivations acts;
    forward_features(tape, cfg, tp, sample[s], &acts);

    for (int L = layer_lo; L <= layer_hi; ++L) {
      LayerDiagnostics& ld = report.layers[L - layer_lo];
      ld.layer = L;
      const DenseMatrix& x = tape.value(acts.features[L]);
      int zero_rows = 0;
      ld.mean_cosine += token_cosine_similarity(x, &zero_rows);
      ld.zero_rows += zero_rows;
      average_into(ld.normalized_singulars, normalized_singular_values(x));
      ld.high_freq_ratio += high_frequency_ratio(x);
      if (L >= 1) {
        for (NodeId a_id : acts.attention[L - 1]) {
          average_into(eig_acc[L - layer_lo],
                       attention_spectrum(AttentionMap(tape.value(a_id))));
        }
      }
    }

    if (s == 0 && cfg.depth >= 1 && layer_lo <= 1) {
      // Representative convergence curve: first block, first head, with that
      // head's value projection of the embedding.
      const DenseMatrix a = tape.value(acts.attention[0][0]);
      const DenseMatrix v =
          matmul(tape.value(acts.features[0]), params.at("layer0.head0.wv"));
      report.convergence_curve = power_convergence_curve(AttentionMap(a), v, 50);
    }
    ++eig_samples;
  }

  const double inv_batch = 1.0 / static_cast<double>(sample.size());
  for (int L = layer_lo; L <= layer_hi; ++L) {
    LayerDiagnostics& ld = report.layers[L - layer_lo];
    ld.mean_cosine *= inv_batch;
    ld.high_freq_ratio *= inv_batch;
    for (double& v : ld.normalized_singulars) v *= inv_batch;
    if (L >= 1) {
      std::vector<double>& eigs = eig_acc[L - layer_lo];
      const double inv = 1.0 / (static_cast<double>(eig_samples) * cfg.n_heads);
      for (double& v : eigs) v *= inv;
      ld.attention_eigs = std::move(eigs);
      const PolyFilter f = layer_filter(cfg, params, L - 1);
      ld.response_at_eigs = spectral_response(f, ld.attention_eigs);
      ld.response_grid = spectral_response(f, report.lambda_grid);
    }
  }
  return report;
}

nlohmann::json report_to_json(const OversmoothingReport& report) {
  nlohmann::json j;
  j["lambda_grid"] = report.lambda_grid;
  j["convergence_curve"] = report.convergence_curve;
  nlohmann::json layers = nlohmann::json::array();
  for (const LayerDiagnostics& ld : report.layers) {
    nlohmann::json lj;
    lj["layer"] = ld.layer;
    lj["mean_cosine"] = ld.mean_cosine;
    lj["zero_rows"] = ld.zero_rows;
    lj["normalized_singulars"] = ld.normalized_singulars;
    lj["high_freq_ratio"] = ld.high_freq_ratio;
    lj["attention_eigs"] = ld.attention_eigs;
    lj["response_at_eigs"] = ld.response_at_eigs;
    lj["response_grid"] = ld.response_grid;
    layers.push_back(std::move(lj));
  }
  j["layers"] = std::move(layers);
  return j;
}

OversmoothingReport report_from_json(const nlohmann::json& j) {
  OversmoothingReport report;
  report.lambda_grid = j.at("lambda_grid").get<std::vector<double>>();
  report.convergence_curve = j.at("convergence_curve").get<std::vector<double>>();
  for (const nlohmann::json& lj : j.at("layers")) {
    LayerDiagnostics ld;
    ld.layer = lj.at("layer").get<int>();
    ld.mean_cosine = lj.at("mean_cosine").get<double>();
    ld.zero_rows = lj.at("zero_rows").get<int>();
    ld.normalized_singulars = lj.at("normalized_singulars").get<std::vector<double>>();
    ld.high_freq_ratio = lj.at("high_freq_ratio").get<double>();
    ld.attention_eigs = lj.at("attention_eigs").get<std::vector<double>>();
    ld.response_at_eigs = lj.at("response_at_eigs").get<std::vector<double>>();
    ld.response_grid = lj.at("response_grid").get<std::vector<double>>();
    report.layers.push_back(std::move(ld));
  }
  return report;
}

std::string report_to_csv(const OversmoothingReport& report) {
  std::ostringstream out;
  out.precision(17);
  out << "layer,metric,index,value\n";
  auto series = [&out](int layer, const char* metric, const std::vector<double>& values) {
    for (std::size_t i = 0; i < values.size(); ++i) {
      out << layer << ',' << metric << ',' << i << ',' << values[i] << '\n';
    }
  };
  series(-1, "lambda_grid", report.lambda_grid);
  series(-1, "convergence_delta", report.convergence_curve);
  for (const LayerDiagnostics& ld : report.layers) {
    out << ld.layer << ",mean_cosine,0," << ld.mean_cosine << '\n';
    out << ld.layer << ",zero_rows,0," << ld.zero_rows << '\n';
    out << ld.layer << ",high_freq_ratio,0," << ld.high_freq_ratio << '\n';
    series(ld.layer, "normalized_singular", ld.normalized_singulars);
    series(ld.layer, "attention_eig", ld.attention_eigs);
    series(ld.layer, "response_at_eig", ld.response_at_eigs);
    series(ld.layer, "response_grid", ld.response_grid);
  }
  return out.str();
}

}  // namespace cheatt
