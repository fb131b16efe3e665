#pragma once

#include <functional>
#include <vector>

#include "cheatt/matrix.hpp"
#include "cheatt/polyfilter.hpp"

namespace cheatt {

using NodeId = int;

// Reverse-mode tape over DenseMatrix values. Every op appends a node whose
// closure knows how to push the node's gradient back into its inputs, so
// node ids are topologically ordered by construction and backward() is a
// single reverse sweep. A tape is built, differentiated and discarded per
// training example; parameters enter as leaves each time.
//
// The tape is single-threaded and non-movable: op closures capture `this`.
class Tape {
public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  NodeId leaf(DenseMatrix value);

  const DenseMatrix& value(NodeId id) const;
  // Gradient accumulated by the last backward(); empty if the node was not
  // on any path to the loss.
  const DenseMatrix& grad(NodeId id) const;
  std::size_t size() const { return nodes_.size(); }

  NodeId matmul(NodeId a, NodeId b);
  NodeId matmul_nt(NodeId a, NodeId b);   // a @ b^T
  NodeId add(NodeId a, NodeId b);
  NodeId add_rowvec(NodeId x, NodeId b);  // broadcast 1 x d row over x's rows
  NodeId scale(double c, NodeId x);
  NodeId softmax_rows(NodeId logits, double scale);
  NodeId layer_norm(NodeId x, NodeId gamma, NodeId beta);
  NodeId gelu(NodeId x);

  NodeId slice_rows(NodeId x, int r0, int r1);  // rows [r0, r1)
  NodeId slice_cols(NodeId x, int c0, int c1);  // cols [c0, c1)
  NodeId concat_rows(const std::vector<NodeId>& parts);
  NodeId concat_cols(const std::vector<NodeId>& parts);
  NodeId mean_rows(NodeId x);  // 1 x d column means

  // Polynomial attention filter sum_k coeffs[0][k] * P_k(A) V; forward goes
  // through the same basis_term_apply/accumulation path as apply_filter, and
  // the backward walks the three-term recurrence in reverse.
  NodeId poly_filter(NodeId a, NodeId v, NodeId coeffs, const BasisKind& basis);

  // Mean over rows of softmax cross-entropy against integer labels.
  NodeId softmax_cross_entropy(NodeId logits, std::vector<int> labels);
  // Mean squared error against a constant target, averaged over all entries.
  NodeId mse(NodeId pred, DenseMatrix target);
  NodeId sum_all(NodeId x);
  NodeId sum_squares(NodeId x);

  // Seeds d(loss)/d(loss) = 1 and runs the reverse sweep. The loss node must
  // be 1 x 1. Clears any gradients from a previous backward() first.
  void backward(NodeId loss);

private:
  struct Node {
    DenseMatrix value;
    DenseMatrix grad;
    std::function<void()> back;  // empty for leaves
  };

  NodeId push(DenseMatrix value, std::function<void()> back = {});
  void add_grad(NodeId id, const DenseMatrix& g);
  void check_id(NodeId id) const;

  std::vector<Node> nodes_;
};

}  // namespace cheatt
