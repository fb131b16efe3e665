#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cheatt/dataset.hpp"
#include "cheatt/polyfilter.hpp"
#include "cheatt/rng.hpp"
#include "cheatt/tape.hpp"

namespace cheatt {

enum class AttentionKind { Vanilla, CheAtt };

std::string to_string(AttentionKind kind);
AttentionKind attention_kind_from_string(const std::string& name);

// Architecture plus the frozen dataset-facing metadata (column kinds,
// vocabularies, standardization) so a checkpoint is self-contained.
struct ModelConfig {
  int n_tokens = 0;
  int embed_dim = 32;
  int depth = 4;
  int n_heads = 4;
  BasisKind basis;
  int poly_order = 5;
  AttentionKind attention_kind = AttentionKind::CheAtt;
  int ffn_hidden = 64;
  int head_hidden = 32;
  std::uint64_t seed = 7;
  TaskKind task = TaskKind::Binary;
  int n_outputs = 2;  // class count, or 1 for regression
  std::vector<ColumnMeta> columns;

  int head_dim() const { return embed_dim / n_heads; }
  void validate() const;
  // Adopts token count, column metadata, task and output width from a
  // dataset; architecture fields are untouched.
  void bind_dataset(const TableDataset& d);
};

// Named parameter tensors, ordered by name so optimizer sweeps and
// checkpoints are deterministic.
class ParamStore {
public:
  DenseMatrix& at(const std::string& name);
  const DenseMatrix& at(const std::string& name) const;
  void insert(const std::string& name, DenseMatrix value);
  bool contains(const std::string& name) const { return values_.count(name) != 0; }

  std::map<std::string, DenseMatrix>& values() { return values_; }
  const std::map<std::string, DenseMatrix>& values() const { return values_; }

private:
  std::map<std::string, DenseMatrix> values_;
};

// Fresh parameters from the config seed: projection weights uniform on
// (-1/sqrt(d), 1/sqrt(d)), biases and norm shifts zero, norm scales one,
// filter coefficients at the default initialization. Embedding tables get
// two extra rows per categorical column (unknown and mask tokens).
ParamStore init_params(const ModelConfig& cfg);

// Reserved embedding rows appended after the real vocabulary.
int unk_code(const ColumnMeta& meta);
int mask_code(const ColumnMeta& meta);

// Per-example tape leaves, one per parameter.
struct TapeParams {
  std::map<std::string, NodeId> ids;
  NodeId at(const std::string& name) const;
};
TapeParams make_leaves(Tape& tape, const ParamStore& params);

struct EncoderActivations {
  std::vector<NodeId> features;                // X(0) .. X(depth)
  std::vector<std::vector<NodeId>> attention;  // [layer][head] attention maps
};

// One token per table column: categorical -> embedding-table row lookup,
// continuous value c -> c*w + b.
NodeId embed_columns(Tape& tape, const ModelConfig& cfg, const TapeParams& tp,
                     const EncodedRow& row);

// Post-norm transformer blocks: per-head attention (plain AV or the
// polynomial filter with the layer's shared coefficients), head concat +
// output projection, residual + layer norm, GELU feed-forward, residual +
// layer norm.
EncoderActivations encoder_forward(Tape& tape, const ModelConfig& cfg, const TapeParams& tp,
                                   NodeId x0);

// embed_columns + encoder_forward; returns the final feature map node.
NodeId forward_features(Tape& tape, const ModelConfig& cfg, const TapeParams& tp,
                        const EncodedRow& row, EncoderActivations* acts = nullptr);

// Two-layer GELU MLP over mean-pooled tokens -> 1 x n_outputs logits.
NodeId head_forward(Tape& tape, const ModelConfig& cfg, const TapeParams& tp, NodeId features);

// Classification: softmax cross-entropy against the integer label.
// Regression: squared error. Label range violations raise DataError.
NodeId loss_supervised(Tape& tape, const ModelConfig& cfg, NodeId logits, double label);

// lambda_ce * mean CE over masked categorical tokens (reconstructed from the
// token's final features) + mean squared error over masked continuous
// tokens. No masked positions -> constant 0.
NodeId loss_masked_pretrain(Tape& tape, const ModelConfig& cfg, const TapeParams& tp,
                            NodeId features, const EncodedRow& original,
                            const std::vector<bool>& mask, double lambda_ce);

std::vector<bool> sample_mask(Rng& rng, int n_tokens, double p);
// Masked continuous values -> 0 (the standardized mean), masked categorical
// -> the reserved mask token.
EncodedRow apply_mask(const ModelConfig& cfg, const EncodedRow& row,
                      const std::vector<bool>& mask);

// Forward-only scoring: per-class probabilities, or {prediction} for
// regression.
std::vector<double> predict_scores(const ModelConfig& cfg, const ParamStore& params,
                                   const EncodedRow& row);

// Sums tape gradients for every parameter leaf into `into`, scaled (used to
// average over a batch).
void accumulate_grads(const Tape& tape, const TapeParams& tp, double scale,
                      std::map<std::string, DenseMatrix>& into);

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // decoupled; filter coefficients are exempt
};

struct AdamState {
  std::map<std::string, DenseMatrix> m, v;
  long long t = 0;
};

void adam_step(ParamStore& params, const std::map<std::string, DenseMatrix>& grads,
               AdamState& state, const AdamOptions& opts);

}  // namespace cheatt
