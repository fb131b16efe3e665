#include "cheatt/gradcheck.hpp"

#include <cmath>

namespace cheatt {

namespace {

constexpr double kMagnitudeFloor = 1e-8;
constexpr double kLambdaCe = 0.7;

EncodedRow make_probe_row(const ModelConfig& cfg, Rng& rng) {
  EncodedRow row;
  row.values.assign(cfg.n_tokens, 0.0);
  row.codes.assign(cfg.n_tokens, 0);
  for (int t = 0; t < cfg.n_tokens; ++t) {
    if (cfg.columns[t].kind == ColumnKind::Continuous) {
      row.values[t] = rng.normal();
    } else {
      row.codes[t] = static_cast<int>(rng.below(cfg.columns[t].vocab.size()));
    }
  }
  return row;
}

// Supervised loss on the clean row plus masked reconstruction of it, one
// tape. Everything downstream differentiates or perturbs exactly this.
double combined_loss(Tape& tape, const ModelConfig& cfg, const TapeParams& tp,
                     const EncodedRow& row, const std::vector<bool>& mask, double label,
                     NodeId* loss_node) {
  const NodeId sup_features = forward_features(tape, cfg, tp, row);
  const NodeId logits = head_forward(tape, cfg, tp, sup_features);
  const NodeId sup = loss_supervised(tape, cfg, logits, label);
  const EncodedRow masked = apply_mask(cfg, row, mask);
  const NodeId pre_features = forward_features(tape, cfg, tp, masked);
  const NodeId pre = loss_masked_pretrain(tape, cfg, tp, pre_features, row, mask, kLambdaCe);
  const NodeId total = tape.add(sup, pre);
  if (loss_node) *loss_node = total;
  return tape.value(total)(0, 0);
}

}  // namespace

ModelConfig make_gradcheck_config(int n_tokens, int embed_dim, int depth, int n_heads,
                                  int poly_order, BasisKind basis, std::uint64_t seed) {
  ModelConfig cfg;
  cfg.n_tokens = n_tokens;
  cfg.embed_dim = embed_dim;
  cfg.depth = depth;
  cfg.n_heads = n_heads;
  cfg.basis = basis;
  cfg.poly_order = poly_order;
  cfg.attention_kind = AttentionKind::CheAtt;
  cfg.ffn_hidden = 2 * embed_dim;
  cfg.head_hidden = embed_dim;
  cfg.seed = seed;
  cfg.task = TaskKind::Binary;
  cfg.n_outputs = 2;
  for (int t = 0; t < n_tokens; ++t) {
    ColumnMeta meta;
    meta.name = "t" + std::to_string(t);
    if (t % 2 == 0) {
      meta.kind = ColumnKind::Continuous;
    } else {
      meta.kind = ColumnKind::Categorical;
      meta.vocab = {"a", "b", "c"};
    }
    cfg.columns.push_back(std::move(meta));
  }
  cfg.validate();
  return cfg;
}

GradCheckResult gradient_check(const ModelConfig& cfg, double h, double tol) {
  if (!(h > 0.0)) throw ParameterError("gradient_check: step h must be positive");
  ParamStore params = init_params(cfg);
  Rng rng(cfg.seed + 1);
  const EncodedRow row = make_probe_row(cfg, rng);
  const std::vector<bool> mask(cfg.n_tokens, true);
  const double label = 1.0;

  std::map<std::string, DenseMatrix> analytic;
  {
    Tape tape;
    const TapeParams tp = make_leaves(tape, params);
    NodeId loss;
    combined_loss(tape, cfg, tp, row, mask, label, &loss);
    tape.backward(loss);
    accumulate_grads(tape, tp, 1.0, analytic);
  }

  auto loss_at = [&]() {
    Tape tape;
    const TapeParams tp = make_leaves(tape, params);
    return combined_loss(tape, cfg, tp, row, mask, label, nullptr);
  };

  GradCheckResult result;
  result.tolerance = tol;
  for (auto& [name, value] : params.values()) {
    GradCheckResult::ParamResult pr;
    pr.name = name;
    const DenseMatrix* ga = nullptr;
    const auto it = analytic.find(name);
    if (it != analytic.end()) ga = &it->second;
    auto vs = value.flat();
    for (std::size_t i = 0; i < vs.size(); ++i) {
      const double saved = vs[i];
      vs[i] = saved + h;
      const double up = loss_at();
      vs[i] = saved - h;
      const double down = loss_at();
      vs[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic_v = ga ? ga->flat()[i] : 0.0;
      if (std::fabs(numeric) < kMagnitudeFloor && std::fabs(analytic_v) < kMagnitudeFloor) {
        ++pr.entries_skipped;
        continue;
      }
      const double rel = std::fabs(analytic_v - numeric) /
                         std::max(std::fabs(analytic_v), std::fabs(numeric));
      pr.max_rel_err = std::max(pr.max_rel_err, rel);
      ++pr.entries_checked;
    }
    result.max_rel_err = std::max(result.max_rel_err, pr.max_rel_err);
    result.params.push_back(std::move(pr));
  }
  result.passed = result.max_rel_err <= tol;
  return result;
}

}  // namespace cheatt
