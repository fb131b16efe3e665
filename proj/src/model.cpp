#include "cheatt/model.hpp"

#include <cmath>
#include <utility>

namespace cheatt {

std::string to_string(AttentionKind kind) {
  return kind == AttentionKind::Vanilla ? "vanilla" : "cheatt";
}

AttentionKind attention_kind_from_string(const std::string& name) {
  if (name == "vanilla") return AttentionKind::Vanilla;
  if (name == "cheatt") return AttentionKind::CheAtt;
  throw ConfigError("unknown attention kind '" + name + "'");
}

void ModelConfig::validate() const {
  if (n_tokens <= 0) throw ConfigError("ModelConfig: n_tokens must be positive");
  if (embed_dim <= 0) throw ConfigError("ModelConfig: embed_dim must be positive");
  if (depth < 0) throw ConfigError("ModelConfig: depth must be nonnegative");
  if (n_heads <= 0 || embed_dim % n_heads != 0) {
    throw ConfigError("ModelConfig: n_heads must divide embed_dim");
  }
  if (poly_order < 0) throw ConfigError("ModelConfig: poly_order must be nonnegative");
  if (ffn_hidden <= 0) throw ConfigError("ModelConfig: ffn_hidden must be positive");
  if (head_hidden <= 0) throw ConfigError("ModelConfig: head_hidden must be positive");
  if (n_outputs <= 0) throw ConfigError("ModelConfig: n_outputs must be positive");
  if (task != TaskKind::Regression && n_outputs < 2) {
    throw ConfigError("ModelConfig: classification needs at least 2 outputs");
  }
  if (task == TaskKind::Regression && n_outputs != 1) {
    throw ConfigError("ModelConfig: regression needs exactly 1 output");
  }
  if (static_cast<int>(columns.size()) != n_tokens) {
    throw ConfigError("ModelConfig: column metadata count must equal n_tokens");
  }
}

void ModelConfig::bind_dataset(const TableDataset& d) {
  n_tokens = d.n_tokens();
  columns = d.columns;
  task = d.task;
  n_outputs = task == TaskKind::Regression ? 1 : d.n_classes;
}

DenseMatrix& ParamStore::at(const std::string& name) {
  auto it = values_.find(name);
  if (it == values_.end()) throw ConfigError("unknown parameter '" + name + "'");
  return it->second;
}

const DenseMatrix& ParamStore::at(const std::string& name) const {
  auto it = values_.find(name);
  if (it == values_.end()) throw ConfigError("unknown parameter '" + name + "'");
  return it->second;
}

void ParamStore::insert(const std::string& name, DenseMatrix value) {
  if (!values_.emplace(name, std::move(value)).second) {
    throw ConfigError("duplicate parameter '" + name + "'");
  }
}

int unk_code(const ColumnMeta& meta) { return static_cast<int>(meta.vocab.size()); }
int mask_code(const ColumnMeta& meta) { return static_cast<int>(meta.vocab.size()) + 1; }

namespace {

std::string layer_key(int l, const std::string& suffix) {
  return "layer" + std::to_string(l) + "." + suffix;
}

std::string col_key(const std::string& group, int i, const std::string& suffix) {
  return group + ".col" + std::to_string(i) + "." + suffix;
}

DenseMatrix uniform_init(Rng& rng, int rows, int cols, double bound) {
  DenseMatrix m(rows, cols);
  for (double& v : m.flat()) v = rng.uniform(-bound, bound);
  return m;
}

}  // namespace

ParamStore init_params(const ModelConfig& cfg) {
  cfg.validate();
  ParamStore params;
  Rng rng(cfg.seed);
  const int d = cfg.embed_dim;
  const double bound = 1.0 / std::sqrt(static_cast<double>(d));

  for (int i = 0; i < cfg.n_tokens; ++i) {
    const ColumnMeta& meta = cfg.columns[i];
    if (meta.kind == ColumnKind::Categorical) {
      const int rows = static_cast<int>(meta.vocab.size()) + 2;  // + unk + mask
      params.insert(col_key("embed", i, "table"), uniform_init(rng, rows, d, bound));
    } else {
      params.insert(col_key("embed", i, "w"), uniform_init(rng, 1, d, bound));
      params.insert(col_key("embed", i, "b"), DenseMatrix(1, d));
    }
  }

  const int dh = cfg.head_dim();
  for (int l = 0; l < cfg.depth; ++l) {
    for (int h = 0; h < cfg.n_heads; ++h) {
      const std::string head = "head" + std::to_string(h);
      params.insert(layer_key(l, head + ".wq"), uniform_init(rng, d, dh, bound));
      params.insert(layer_key(l, head + ".wk"), uniform_init(rng, d, dh, bound));
      params.insert(layer_key(l, head + ".wv"), uniform_init(rng, d, dh, bound));
    }
    params.insert(layer_key(l, "attn.wo"), uniform_init(rng, d, d, bound));
    params.insert(layer_key(l, "attn.bo"), DenseMatrix(1, d));
    if (cfg.attention_kind == AttentionKind::CheAtt) {
      DenseMatrix alpha(1, cfg.poly_order + 1);
      const std::vector<double> init = default_filter_coefficients(cfg.poly_order);
      for (int k = 0; k <= cfg.poly_order; ++k) alpha(0, k) = init[k];
      params.insert(layer_key(l, "cheatt.alpha"), std::move(alpha));
    }
    params.insert(layer_key(l, "ln1.gamma"), DenseMatrix(1, d, 1.0));
    params.insert(layer_key(l, "ln1.beta"), DenseMatrix(1, d));
    params.insert(layer_key(l, "ffn.w1"), uniform_init(rng, d, cfg.ffn_hidden, bound));
    params.insert(layer_key(l, "ffn.b1"), DenseMatrix(1, cfg.ffn_hidden));
    params.insert(layer_key(l, "ffn.w2"), uniform_init(rng, cfg.ffn_hidden, d, bound));
    params.insert(layer_key(l, "ffn.b2"), DenseMatrix(1, d));
    params.insert(layer_key(l, "ln2.gamma"), DenseMatrix(1, d, 1.0));
    params.insert(layer_key(l, "ln2.beta"), DenseMatrix(1, d));
  }

  for (int i = 0; i < cfg.n_tokens; ++i) {
    const ColumnMeta& meta = cfg.columns[i];
    const int out = meta.kind == ColumnKind::Categorical
                        ? static_cast<int>(meta.vocab.size())
                        : 1;
    params.insert(col_key("recon", i, "w"), uniform_init(rng, d, out, bound));
    params.insert(col_key("recon", i, "b"), DenseMatrix(1, out));
  }

  params.insert("head.w1", uniform_init(rng, d, cfg.head_hidden, bound));
  params.insert("head.b1", DenseMatrix(1, cfg.head_hidden));
  params.insert("head.w2", uniform_init(rng, cfg.head_hidden, cfg.n_outputs, bound));
  params.insert("head.b2", DenseMatrix(1, cfg.n_outputs));
  return params;
}

NodeId TapeParams::at(const std::string& name) const {
  auto it = ids.find(name);
  if (it == ids.end()) throw ConfigError("no tape leaf for parameter '" + name + "'");
  return it->second;
}

TapeParams make_leaves(Tape& tape, const ParamStore& params) {
  TapeParams tp;
  for (const auto& [name, value] : params.values()) {
    tp.ids.emplace(name, tape.leaf(value));
  }
  return tp;
}

NodeId embed_columns(Tape& tape, const ModelConfig& cfg, const TapeParams& tp,
                     const EncodedRow& row) {
  if (static_cast<int>(row.values.size()) != cfg.n_tokens ||
      static_cast<int>(row.codes.size()) != cfg.n_tokens) {
    throw ShapeError("embed_columns: row has wrong column count");
  }
  std::vector<NodeId> tokens;
  tokens.reserve(cfg.n_tokens);
  for (int i = 0; i < cfg.n_tokens; ++i) {
    const ColumnMeta& meta = cfg.columns[i];
    if (meta.kind == ColumnKind::Categorical) {
      const int code = row.codes[i];
      if (code < 0 || code > mask_code(meta)) {
        throw DataError("embed_columns: category code " + std::to_string(code) +
                        " out of range for column '" + meta.name + "'");
      }
      tokens.push_back(tape.slice_rows(tp.at(col_key("embed", i, "table")), code, code + 1));
    } else {
      const NodeId scaled = tape.scale(row.values[i], tp.at(col_key("embed", i, "w")));
      tokens.push_back(tape.add(scaled, tp.at(col_key("embed", i, "b"))));
    }
  }
  return tape.concat_rows(tokens);
}

EncoderActivations encoder_forward(Tape& tape, const ModelConfig& cfg, const TapeParams& tp,
                                   NodeId x0) {
  cfg.validate();
  const DenseMatrix& x0v = tape.value(x0);
  if (x0v.rows() != cfg.n_tokens || x0v.cols() != cfg.embed_dim) {
    throw ShapeError("encoder_forward: input must be n_tokens x embed_dim");
  }
  EncoderActivations acts;
  acts.features.push_back(x0);
  const double scale = std::sqrt(static_cast<double>(cfg.head_dim()));
  for (int l = 0; l < cfg.depth; ++l) {
    const NodeId x = acts.features.back();
    std::vector<NodeId> head_outs, head_maps;
    for (int h = 0; h < cfg.n_heads; ++h) {
      const std::string head = "head" + std::to_string(h);
      const NodeId q = tape.matmul(x, tp.at(layer_key(l, head + ".wq")));
      const NodeId k = tape.matmul(x, tp.at(layer_key(l, head + ".wk")));
      const NodeId v = tape.matmul(x, tp.at(layer_key(l, head + ".wv")));
      const NodeId a = tape.softmax_rows(tape.matmul_nt(q, k), scale);
      head_maps.push_back(a);
      if (cfg.attention_kind == AttentionKind::Vanilla) {
        head_outs.push_back(tape.matmul(a, v));
      } else {
        head_outs.push_back(tape.poly_filter(a, v, tp.at(layer_key(l, "cheatt.alpha")),
                                             cfg.basis));
      }
    }
    acts.attention.push_back(std::move(head_maps));
    const NodeId merged = cfg.n_heads == 1 ? head_outs[0] : tape.concat_cols(head_outs);
    const NodeId attn = tape.add_rowvec(tape.matmul(merged, tp.at(layer_key(l, "attn.wo"))),
                                        tp.at(layer_key(l, "attn.bo")));
    const NodeId x1 = tape.layer_norm(tape.add(x, attn), tp.at(layer_key(l, "ln1.gamma")),
                                      tp.at(layer_key(l, "ln1.beta")));
    const NodeId hidden = tape.gelu(tape.add_rowvec(
        tape.matmul(x1, tp.at(layer_key(l, "ffn.w1"))), tp.at(layer_key(l, "ffn.b1"))));
    const NodeId ffn = tape.add_rowvec(tape.matmul(hidden, tp.at(layer_key(l, "ffn.w2"))),
                                       tp.at(layer_key(l, "ffn.b2")));
    const NodeId out = tape.layer_norm(tape.add(x1, ffn), tp.at(layer_key(l, "ln2.gamma")),
                                       tp.at(layer_key(l, "ln2.beta")));
    acts.features.push_back(out);
  }
  return acts;
}

NodeId forward_features(Tape& tape, const ModelConfig& cfg, const TapeParams& tp,
                        const EncodedRow& row, EncoderActivations* acts) {
  const NodeId x0 = embed_columns(tape, cfg, tp, row);
  EncoderActivations a = encoder_forward(tape, cfg, tp, x0);
  const NodeId out = a.features.back();
  if (acts) *acts = std::move(a);
  return out;
}

NodeId head_forward(Tape& tape, const ModelConfig& cfg, const TapeParams& tp, NodeId features) {
  const NodeId pooled = tape.mean_rows(features);
  const NodeId hidden = tape.gelu(
      tape.add_rowvec(tape.matmul(pooled, tp.at("head.w1")), tp.at("head.b1")));
  return tape.add_rowvec(tape.matmul(hidden, tp.at("head.w2")), tp.at("head.b2"));
}

NodeId loss_supervised(Tape& tape, const ModelConfig& cfg, NodeId logits, double label) {
  if (cfg.task == TaskKind::Regression) {
    return tape.mse(logits, DenseMatrix(1, 1, label));
  }
  const double rounded = std::nearbyint(label);
  if (std::fabs(label - rounded) > 1e-9 || rounded < 0.0 ||
      rounded >= static_cast<double>(cfg.n_outputs)) {
    throw DataError("loss_supervised: class label " + std::to_string(label) + " out of range");
  }
  return tape.softmax_cross_entropy(logits, {static_cast<int>(rounded)});
}

NodeId loss_masked_pretrain(Tape& tape, const ModelConfig& cfg, const TapeParams& tp,
                            NodeId features, const EncodedRow& original,
                            const std::vector<bool>& mask, double lambda_ce) {
  if (lambda_ce < 0.0) throw ParameterError("loss_masked_pretrain: lambda_ce must be >= 0");
  if (static_cast<int>(mask.size()) != cfg.n_tokens) {
    throw ShapeError("loss_masked_pretrain: mask size must equal n_tokens");
  }
  std::vector<NodeId> ce_terms, sq_terms;
  for (int t = 0; t < cfg.n_tokens; ++t) {
    if (!mask[t]) continue;
    const ColumnMeta& meta = cfg.columns[t];
    const NodeId token = tape.slice_rows(features, t, t + 1);
    if (meta.kind == ColumnKind::Categorical) {
      const int target = original.codes[t];
      // unknown categories cannot be reconstruction targets
      if (target >= static_cast<int>(meta.vocab.size())) continue;
      const NodeId logits = tape.add_rowvec(tape.matmul(token, tp.at(col_key("recon", t, "w"))),
                                            tp.at(col_key("recon", t, "b")));
      ce_terms.push_back(tape.softmax_cross_entropy(logits, {target}));
    } else {
      const NodeId pred = tape.add_rowvec(tape.matmul(token, tp.at(col_key("recon", t, "w"))),
                                          tp.at(col_key("recon", t, "b")));
      sq_terms.push_back(tape.mse(pred, DenseMatrix(1, 1, original.values[t])));
    }
  }
  auto mean_of = [&tape](const std::vector<NodeId>& terms) {
    NodeId sum = terms[0];
    for (std::size_t i = 1; i < terms.size(); ++i) sum = tape.add(sum, terms[i]);
    return tape.scale(1.0 / terms.size(), sum);
  };
  if (ce_terms.empty() && sq_terms.empty()) return tape.leaf(DenseMatrix(1, 1, 0.0));
  if (ce_terms.empty()) return mean_of(sq_terms);
  const NodeId ce = tape.scale(lambda_ce, mean_of(ce_terms));
  if (sq_terms.empty()) return ce;
  return tape.add(ce, mean_of(sq_terms));
}

std::vector<bool> sample_mask(Rng& rng, int n_tokens, double p) {
  if (p < 0.0 || p > 1.0) throw ParameterError("sample_mask: p must be in [0,1]");
  std::vector<bool> mask(n_tokens);
  for (int i = 0; i < n_tokens; ++i) mask[i] = rng.bernoulli(p);
  return mask;
}

EncodedRow apply_mask(const ModelConfig& cfg, const EncodedRow& row,
                      const std::vector<bool>& mask) {
  EncodedRow out = row;
  for (int t = 0; t < cfg.n_tokens; ++t) {
    if (!mask[t]) continue;
    if (cfg.columns[t].kind == ColumnKind::Categorical) {
      out.codes[t] = mask_code(cfg.columns[t]);
    } else {
      out.values[t] = 0.0;
    }
  }
  return out;
}

std::vector<double> predict_scores(const ModelConfig& cfg, const ParamStore& params,
                                   const EncodedRow& row) {
  Tape tape;
  const TapeParams tp = make_leaves(tape, params);
  const NodeId features = forward_features(tape, cfg, tp, row);
  const NodeId logits = head_forward(tape, cfg, tp, features);
  const DenseMatrix& z = tape.value(logits);
  if (cfg.task == TaskKind::Regression) return {z(0, 0)};
  const DenseMatrix probs = cheatt::softmax_rows(z, 1.0);
  std::vector<double> out(cfg.n_outputs);
  for (int c = 0; c < cfg.n_outputs; ++c) out[c] = probs(0, c);
  return out;
}

void accumulate_grads(const Tape& tape, const TapeParams& tp, double scale,
                      std::map<std::string, DenseMatrix>& into) {
  for (const auto& [name, id] : tp.ids) {
    const DenseMatrix& g = tape.grad(id);
    if (g.empty()) continue;
    auto it = into.find(name);
    if (it == into.end()) {
      DenseMatrix scaled = scale * g;
      into.emplace(name, std::move(scaled));
    } else {
      axpy(scale, g, it->second);
    }
  }
}

void adam_step(ParamStore& params, const std::map<std::string, DenseMatrix>& grads,
               AdamState& state, const AdamOptions& opts) {
  ++state.t;
  const double bc1 = 1.0 - std::pow(opts.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(opts.beta2, static_cast<double>(state.t));
  for (auto& [name, g] : grads) {
    DenseMatrix& p = params.at(name);
    if (!p.same_shape(g)) throw ShapeError("adam_step: gradient shape mismatch for " + name);
    auto mit = state.m.find(name);
    if (mit == state.m.end()) {
      mit = state.m.emplace(name, DenseMatrix(g.rows(), g.cols())).first;
      state.v.emplace(name, DenseMatrix(g.rows(), g.cols()));
    }
    DenseMatrix& m = mit->second;
    DenseMatrix& v = state.v.at(name);
    auto ps = p.flat();
    auto gs = g.flat();
    auto ms = m.flat();
    auto vs = v.flat();
    const bool decay = opts.weight_decay != 0.0 &&
                       name.find(".cheatt.alpha") == std::string::npos;
    for (std::size_t i = 0; i < ps.size(); ++i) {
      ms[i] = opts.beta1 * ms[i] + (1.0 - opts.beta1) * gs[i];
      vs[i] = opts.beta2 * vs[i] + (1.0 - opts.beta2) * gs[i] * gs[i];
      const double mhat = ms[i] / bc1;
      const double vhat = vs[i] / bc2;
      const double previous = ps[i];
      ps[i] -= opts.lr * mhat / (std::sqrt(vhat) + opts.eps);
      // decoupled decay on the pre-step value, per the AdamW update rule
      if (decay) ps[i] -= opts.lr * opts.weight_decay * previous;
    }
  }
}

}  // namespace cheatt
