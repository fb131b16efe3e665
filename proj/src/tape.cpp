#include "cheatt/tape.hpp"

#include <cmath>
#include <string>
#include <utility>

namespace cheatt {

namespace {
constexpr double kLayerNormEps = 1e-5;
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;
}  // namespace

NodeId Tape::push(DenseMatrix value, std::function<void()> back) {
  nodes_.push_back(Node{std::move(value), DenseMatrix(), std::move(back)});
  return static_cast<NodeId>(nodes_.size()) - 1;
}

void Tape::check_id(NodeId id) const {
  if (id < 0 || id >= static_cast<NodeId>(nodes_.size())) {
    throw ContractError("Tape: node id " + std::to_string(id) + " out of range");
  }
}

NodeId Tape::leaf(DenseMatrix value) { return push(std::move(value)); }

const DenseMatrix& Tape::value(NodeId id) const {
  check_id(id);
  return nodes_[id].value;
}

const DenseMatrix& Tape::grad(NodeId id) const {
  check_id(id);
  return nodes_[id].grad;
}

void Tape::add_grad(NodeId id, const DenseMatrix& g) {
  DenseMatrix& acc = nodes_[id].grad;
  if (acc.empty()) {
    acc = g;
  } else {
    axpy(1.0, g, acc);
  }
}

NodeId Tape::matmul(NodeId a, NodeId b) {
  check_id(a);
  check_id(b);
  DenseMatrix c = cheatt::matmul(nodes_[a].value, nodes_[b].value);
  NodeId out = push(std::move(c));
  nodes_[out].back = [this, a, b, out] {
    const DenseMatrix& g = nodes_[out].grad;
    add_grad(a, cheatt::matmul_nt(g, nodes_[b].value));
    add_grad(b, cheatt::matmul_tn(nodes_[a].value, g));
  };
  return out;
}

NodeId Tape::matmul_nt(NodeId a, NodeId b) {
  check_id(a);
  check_id(b);
  DenseMatrix c = cheatt::matmul_nt(nodes_[a].value, nodes_[b].value);
  NodeId out = push(std::move(c));
  nodes_[out].back = [this, a, b, out] {
    const DenseMatrix& g = nodes_[out].grad;
    add_grad(a, cheatt::matmul(g, nodes_[b].value));
    add_grad(b, cheatt::matmul_tn(g, nodes_[a].value));
  };
  return out;
}

NodeId Tape::add(NodeId a, NodeId b) {
  check_id(a);
  check_id(b);
  NodeId out = push(nodes_[a].value + nodes_[b].value);
  nodes_[out].back = [this, a, b, out] {
    add_grad(a, nodes_[out].grad);
    add_grad(b, nodes_[out].grad);
  };
  return out;
}

NodeId Tape::add_rowvec(NodeId x, NodeId b) {
  check_id(x);
  check_id(b);
  const DenseMatrix& xv = nodes_[x].value;
  const DenseMatrix& bv = nodes_[b].value;
  if (bv.rows() != 1 || bv.cols() != xv.cols()) {
    throw ShapeError("Tape::add_rowvec: bias must be 1 x cols(x)");
  }
  DenseMatrix y = xv;
  for (int i = 0; i < y.rows(); ++i) {
    double* row = y.row(i);
    for (int j = 0; j < y.cols(); ++j) row[j] += bv(0, j);
  }
  NodeId out = push(std::move(y));
  nodes_[out].back = [this, x, b, out] {
    const DenseMatrix& g = nodes_[out].grad;
    add_grad(x, g);
    DenseMatrix gb(1, g.cols());
    for (int i = 0; i < g.rows(); ++i) {
      const double* row = g.row(i);
      for (int j = 0; j < g.cols(); ++j) gb(0, j) += row[j];
    }
    add_grad(b, gb);
  };
  return out;
}

NodeId Tape::scale(double c, NodeId x) {
  check_id(x);
  NodeId out = push(c * nodes_[x].value);
  nodes_[out].back = [this, c, x, out] { add_grad(x, c * nodes_[out].grad); };
  return out;
}

NodeId Tape::softmax_rows(NodeId logits, double scale) {
  check_id(logits);
  DenseMatrix y = cheatt::softmax_rows(nodes_[logits].value, scale);
  NodeId out = push(std::move(y));
  nodes_[out].back = [this, logits, scale, out] {
    const DenseMatrix& y = nodes_[out].value;
    const DenseMatrix& g = nodes_[out].grad;
    DenseMatrix gz(y.rows(), y.cols());
    const double inv = 1.0 / scale;
    for (int i = 0; i < y.rows(); ++i) {
      const double* yr = y.row(i);
      const double* gr = g.row(i);
      double gy = 0.0;
      for (int j = 0; j < y.cols(); ++j) gy += gr[j] * yr[j];
      double* outr = gz.row(i);
      for (int j = 0; j < y.cols(); ++j) outr[j] = inv * yr[j] * (gr[j] - gy);
    }
    add_grad(logits, gz);
  };
  return out;
}

NodeId Tape::layer_norm(NodeId x, NodeId gamma, NodeId beta) {
  check_id(x);
  check_id(gamma);
  check_id(beta);
  const DenseMatrix& xv = nodes_[x].value;
  const DenseMatrix& gv = nodes_[gamma].value;
  const DenseMatrix& bv = nodes_[beta].value;
  const int n = xv.rows(), d = xv.cols();
  if (gv.rows() != 1 || gv.cols() != d || bv.rows() != 1 || bv.cols() != d) {
    throw ShapeError("Tape::layer_norm: gamma/beta must be 1 x cols(x)");
  }
  // Save the normalized rows and per-row 1/std for the backward closure.
  DenseMatrix xhat(n, d);
  std::vector<double> inv_std(n);
  DenseMatrix y(n, d);
  for (int i = 0; i < n; ++i) {
    const double* xr = xv.row(i);
    double mu = 0.0;
    for (int j = 0; j < d; ++j) mu += xr[j];
    mu /= d;
    double var = 0.0;
    for (int j = 0; j < d; ++j) var += (xr[j] - mu) * (xr[j] - mu);
    var /= d;
    const double is = 1.0 / std::sqrt(var + kLayerNormEps);
    inv_std[i] = is;
    for (int j = 0; j < d; ++j) {
      xhat(i, j) = (xr[j] - mu) * is;
      y(i, j) = gv(0, j) * xhat(i, j) + bv(0, j);
    }
  }
  NodeId out = push(std::move(y));
  nodes_[out].back = [this, x, gamma, beta, out, xhat = std::move(xhat),
                      inv_std = std::move(inv_std)] {
    const DenseMatrix& g = nodes_[out].grad;
    const DenseMatrix& gv = nodes_[gamma].value;
    const int n = g.rows(), d = g.cols();
    DenseMatrix gx(n, d), ggamma(1, d), gbeta(1, d);
    for (int i = 0; i < n; ++i) {
      const double* gr = g.row(i);
      double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
      for (int j = 0; j < d; ++j) {
        const double dxhat = gr[j] * gv(0, j);
        sum_dxhat += dxhat;
        sum_dxhat_xhat += dxhat * xhat(i, j);
        ggamma(0, j) += gr[j] * xhat(i, j);
        gbeta(0, j) += gr[j];
      }
      const double m1 = sum_dxhat / d, m2 = sum_dxhat_xhat / d;
      for (int j = 0; j < d; ++j) {
        const double dxhat = gr[j] * gv(0, j);
        gx(i, j) = inv_std[i] * (dxhat - m1 - xhat(i, j) * m2);
      }
    }
    add_grad(x, gx);
    add_grad(gamma, ggamma);
    add_grad(beta, gbeta);
  };
  return out;
}

NodeId Tape::gelu(NodeId x) {
  check_id(x);
  const DenseMatrix& xv = nodes_[x].value;
  DenseMatrix y = xv;
  for (double& v : y.flat()) v = 0.5 * v * (1.0 + std::erf(v * kInvSqrt2));
  NodeId out = push(std::move(y));
  nodes_[out].back = [this, x, out] {
    const DenseMatrix& xv = nodes_[x].value;
    const DenseMatrix& g = nodes_[out].grad;
    DenseMatrix gx(xv.rows(), xv.cols());
    auto xs = xv.flat();
    auto gs = g.flat();
    auto os = gx.flat();
    for (std::size_t k = 0; k < xs.size(); ++k) {
      const double v = xs[k];
      const double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
      const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
      os[k] = gs[k] * (cdf + v * pdf);
    }
    add_grad(x, gx);
  };
  return out;
}

NodeId Tape::slice_rows(NodeId x, int r0, int r1) {
  check_id(x);
  const DenseMatrix& xv = nodes_[x].value;
  if (r0 < 0 || r1 > xv.rows() || r0 >= r1) throw ShapeError("Tape::slice_rows: bad row range");
  DenseMatrix y(r1 - r0, xv.cols());
  for (int i = r0; i < r1; ++i) {
    for (int j = 0; j < xv.cols(); ++j) y(i - r0, j) = xv(i, j);
  }
  NodeId out = push(std::move(y));
  nodes_[out].back = [this, x, r0, out] {
    const DenseMatrix& g = nodes_[out].grad;
    DenseMatrix gx(nodes_[x].value.rows(), nodes_[x].value.cols());
    for (int i = 0; i < g.rows(); ++i) {
      for (int j = 0; j < g.cols(); ++j) gx(i + r0, j) = g(i, j);
    }
    add_grad(x, gx);
  };
  return out;
}

NodeId Tape::slice_cols(NodeId x, int c0, int c1) {
  check_id(x);
  const DenseMatrix& xv = nodes_[x].value;
  if (c0 < 0 || c1 > xv.cols() || c0 >= c1) throw ShapeError("Tape::slice_cols: bad col range");
  DenseMatrix y(xv.rows(), c1 - c0);
  for (int i = 0; i < xv.rows(); ++i) {
    for (int j = c0; j < c1; ++j) y(i, j - c0) = xv(i, j);
  }
  NodeId out = push(std::move(y));
  nodes_[out].back = [this, x, c0, out] {
    const DenseMatrix& g = nodes_[out].grad;
    DenseMatrix gx(nodes_[x].value.rows(), nodes_[x].value.cols());
    for (int i = 0; i < g.rows(); ++i) {
      for (int j = 0; j < g.cols(); ++j) gx(i, j + c0) = g(i, j);
    }
    add_grad(x, gx);
  };
  return out;
}

NodeId Tape::concat_rows(const std::vector<NodeId>& parts) {
  if (parts.empty()) throw ShapeError("Tape::concat_rows: no parts");
  int rows = 0;
  const int cols = nodes_[parts[0]].value.cols();
  for (NodeId p : parts) {
    check_id(p);
    if (nodes_[p].value.cols() != cols) throw ShapeError("Tape::concat_rows: column mismatch");
    rows += nodes_[p].value.rows();
  }
  DenseMatrix y(rows, cols);
  int at = 0;
  for (NodeId p : parts) {
    const DenseMatrix& v = nodes_[p].value;
    for (int i = 0; i < v.rows(); ++i) {
      for (int j = 0; j < cols; ++j) y(at + i, j) = v(i, j);
    }
    at += v.rows();
  }
  NodeId out = push(std::move(y));
  nodes_[out].back = [this, parts, out] {
    const DenseMatrix& g = nodes_[out].grad;
    int at = 0;
    for (NodeId p : parts) {
      const int r = nodes_[p].value.rows();
      DenseMatrix gp(r, g.cols());
      for (int i = 0; i < r; ++i) {
        for (int j = 0; j < g.cols(); ++j) gp(i, j) = g(at + i, j);
      }
      add_grad(p, gp);
      at += r;
    }
  };
  return out;
}

NodeId Tape::concat_cols(const std::vector<NodeId>& parts) {
  if (parts.empty()) throw ShapeError("Tape::concat_cols: no parts");
  const int rows = nodes_[parts[0]].value.rows();
  int cols = 0;
  for (NodeId p : parts) {
    check_id(p);
    if (nodes_[p].value.rows() != rows) throw ShapeError("Tape::concat_cols: row mismatch");
    cols += nodes_[p].value.cols();
  }
  DenseMatrix y(rows, cols);
  int at = 0;
  for (NodeId p : parts) {
    const DenseMatrix& v = nodes_[p].value;
    for (int i = 0; i < rows; ++i) {
      for (int j = 0; j < v.cols(); ++j) y(i, at + j) = v(i, j);
    }
    at += v.cols();
  }
  NodeId out = push(std::move(y));
  nodes_[out].back = [this, parts, out] {
    const DenseMatrix& g = nodes_[out].grad;
    int at = 0;
    for (NodeId p : parts) {
      const int c = nodes_[p].value.cols();
      DenseMatrix gp(g.rows(), c);
      for (int i = 0; i < g.rows(); ++i) {
        for (int j = 0; j < c; ++j) gp(i, j) = g(i, at + j);
      }
      add_grad(p, gp);
      at += c;
    }
  };
  return out;
}

NodeId Tape::mean_rows(NodeId x) {
  check_id(x);
  const DenseMatrix& xv = nodes_[x].value;
  const int n = xv.rows(), d = xv.cols();
  if (n == 0) throw ShapeError("Tape::mean_rows: empty matrix");
  DenseMatrix y(1, d);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) y(0, j) += xv(i, j);
  }
  for (int j = 0; j < d; ++j) y(0, j) /= n;
  NodeId out = push(std::move(y));
  nodes_[out].back = [this, x, n, out] {
    const DenseMatrix& g = nodes_[out].grad;
    DenseMatrix gx(n, g.cols());
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < g.cols(); ++j) gx(i, j) = g(0, j) / n;
    }
    add_grad(x, gx);
  };
  return out;
}

NodeId Tape::poly_filter(NodeId a, NodeId v, NodeId coeffs, const BasisKind& basis) {
  check_id(a);
  check_id(v);
  check_id(coeffs);
  const DenseMatrix& av = nodes_[a].value;
  const DenseMatrix& cv = nodes_[coeffs].value;
  if (cv.rows() != 1 || cv.cols() < 1) {
    throw ShapeError("Tape::poly_filter: coeffs must be 1 x (order+1)");
  }
  const int order = cv.cols() - 1;
  // Same forward path as apply_filter so that unit-alpha_1 coefficients
  // reproduce plain attention bit-for-bit.
  std::vector<DenseMatrix> terms = basis_term_apply(AttentionMap(av), nodes_[v].value, basis,
                                                    order);
  DenseMatrix acc = cv(0, 0) * terms[0];
  for (int k = 1; k <= order; ++k) axpy(cv(0, k), terms[k], acc);
  NodeId out = push(std::move(acc));
  nodes_[out].back = [this, a, v, coeffs, basis, out, terms = std::move(terms)] {
    const DenseMatrix& g = nodes_[out].grad;
    const DenseMatrix& av = nodes_[a].value;
    const DenseMatrix& cv = nodes_[coeffs].value;
    const int order = cv.cols() - 1;

    DenseMatrix gcoef(1, order + 1);
    for (int k = 0; k <= order; ++k) gcoef(0, k) = dot(g, terms[k]);
    add_grad(coeffs, gcoef);

    // Adjoints of the recurrence terms, seeded by the combination weights,
    // then swept from the highest degree down. Each step
    //   P_k = on_a * A P_{k-1} + on_id * P_{k-1} + on_prev * P_{k-2}
    // sends its adjoint G_k to A (on_a * G_k P_{k-1}^T), to P_{k-1}
    // (on_a * A^T G_k + on_id * G_k) and to P_{k-2} (on_prev * G_k).
    std::vector<DenseMatrix> adj(order + 1);
    for (int k = 0; k <= order; ++k) adj[k] = cv(0, k) * g;
    DenseMatrix ga(av.rows(), av.cols());
    for (int k = order; k >= 1; --k) {
      const BasisStep s = basis_step(basis, k);
      if (s.on_a != 0.0) {
        axpy(s.on_a, cheatt::matmul_nt(adj[k], terms[k - 1]), ga);
        axpy(s.on_a, cheatt::matmul_tn(av, adj[k]), adj[k - 1]);
      }
      if (s.on_id != 0.0) axpy(s.on_id, adj[k], adj[k - 1]);
      if (k >= 2 && s.on_prev != 0.0) axpy(s.on_prev, adj[k], adj[k - 2]);
    }
    add_grad(a, ga);
    add_grad(v, adj[0]);
  };
  return out;
}

NodeId Tape::softmax_cross_entropy(NodeId logits, std::vector<int> labels) {
  check_id(logits);
  const DenseMatrix& z = nodes_[logits].value;
  const int n = z.rows(), c = z.cols();
  if (static_cast<int>(labels.size()) != n) {
    throw ShapeError("Tape::softmax_cross_entropy: one label per row required");
  }
  for (int y : labels) {
    if (y < 0 || y >= c) throw DataError("Tape::softmax_cross_entropy: label out of range");
  }
  DenseMatrix probs = cheatt::softmax_rows(z, 1.0);
  double loss = 0.0;
  for (int i = 0; i < n; ++i) {
    // log prob via the stabilized logits to avoid log(0) on confident rows
    const double* zr = z.row(i);
    double zmax = zr[0];
    for (int j = 1; j < c; ++j) zmax = std::max(zmax, zr[j]);
    double lse = 0.0;
    for (int j = 0; j < c; ++j) lse += std::exp(zr[j] - zmax);
    loss += std::log(lse) + zmax - zr[labels[i]];
  }
  loss /= n;
  NodeId out = push(DenseMatrix(1, 1, loss));
  nodes_[out].back = [this, logits, out, labels = std::move(labels),
                      probs = std::move(probs)] {
    const double g = nodes_[out].grad(0, 0);
    const int n = probs.rows(), c = probs.cols();
    DenseMatrix gz = probs;
    for (int i = 0; i < n; ++i) gz(i, labels[i]) -= 1.0;
    for (double& v : gz.flat()) v *= g / n;
    add_grad(logits, gz);
  };
  return out;
}

NodeId Tape::mse(NodeId pred, DenseMatrix target) {
  check_id(pred);
  const DenseMatrix& p = nodes_[pred].value;
  if (!p.same_shape(target)) throw ShapeError("Tape::mse: shape mismatch");
  const double n = static_cast<double>(p.size());
  double loss = 0.0;
  auto ps = p.flat();
  auto ts = target.flat();
  for (std::size_t k = 0; k < ps.size(); ++k) {
    const double diff = ps[k] - ts[k];
    loss += diff * diff;
  }
  loss /= n;
  NodeId out = push(DenseMatrix(1, 1, loss));
  nodes_[out].back = [this, pred, out, target = std::move(target), n] {
    const double g = nodes_[out].grad(0, 0);
    const DenseMatrix& p = nodes_[pred].value;
    DenseMatrix gp = p - target;
    for (double& v : gp.flat()) v *= 2.0 * g / n;
    add_grad(pred, gp);
  };
  return out;
}

NodeId Tape::sum_all(NodeId x) {
  check_id(x);
  double s = 0.0;
  for (double v : nodes_[x].value.flat()) s += v;
  NodeId out = push(DenseMatrix(1, 1, s));
  nodes_[out].back = [this, x, out] {
    const double g = nodes_[out].grad(0, 0);
    const DenseMatrix& xv = nodes_[x].value;
    add_grad(x, DenseMatrix(xv.rows(), xv.cols(), g));
  };
  return out;
}

NodeId Tape::sum_squares(NodeId x) {
  check_id(x);
  double s = 0.0;
  for (double v : nodes_[x].value.flat()) s += v * v;
  NodeId out = push(DenseMatrix(1, 1, s));
  nodes_[out].back = [this, x, out] {
    const double g = nodes_[out].grad(0, 0);
    add_grad(x, (2.0 * g) * nodes_[x].value);
  };
  return out;
}

void Tape::backward(NodeId loss) {
  check_id(loss);
  const DenseMatrix& lv = nodes_[loss].value;
  if (lv.rows() != 1 || lv.cols() != 1) {
    throw ContractError("Tape::backward: loss must be a 1 x 1 scalar");
  }
  for (Node& n : nodes_) n.grad = DenseMatrix();
  nodes_[loss].grad = DenseMatrix(1, 1, 1.0);
  for (NodeId id = loss; id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.grad.empty() && n.back) n.back();
  }
}

}  // namespace cheatt
