#pragma once

#include <string>
#include <vector>

#include "cheatt/model.hpp"

namespace cheatt {

struct GradCheckResult {
  struct ParamResult {
    std::string name;
    double max_rel_err = 0.0;
    int entries_checked = 0;
    int entries_skipped = 0;  // both analytic and numeric below the floor
  };
  std::vector<ParamResult> params;
  double max_rel_err = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

// A small self-contained model for auditing: tokens alternate continuous and
// categorical (three-word vocabularies), binary task.
ModelConfig make_gradcheck_config(int n_tokens, int embed_dim, int depth, int n_heads,
                                  int poly_order, BasisKind basis, std::uint64_t seed);

// Audits every parameter entry of a fresh model against central finite
// differences of a combined loss (supervised on a fixed random row plus
// masked reconstruction with every token masked, so each parameter sits on
// some gradient path). Relative error uses max(|analytic|, |numeric|) as the
// scale; entries where both magnitudes are below 1e-8 are skipped.
GradCheckResult gradient_check(const ModelConfig& cfg, double h = 1e-5, double tol = 1e-4);

}  // namespace cheatt
