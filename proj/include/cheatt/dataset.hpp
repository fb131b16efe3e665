#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cheatt/errors.hpp"

namespace cheatt {

enum class ColumnKind { Continuous, Categorical };
enum class TaskKind { Binary, Multiclass, Regression };

std::string to_string(TaskKind task);
TaskKind task_from_string(const std::string& name);

// Per-column metadata frozen against the training split. Categorical columns
// carry their vocabulary (index = category code); continuous columns carry
// the standardization parameters applied to every split.
struct ColumnMeta {
  std::string name;
  ColumnKind kind = ColumnKind::Continuous;
  std::vector<std::string> vocab;  // categorical only
  double mean = 0.0;
  double stddev = 1.0;
  bool constant = false;  // train variance ~ 0; left unscaled

  int category_code(const std::string& token) const;  // vocab.size() = UNK
};

// One table row ready for the encoder: values[i] holds the standardized
// continuous value of column i, codes[i] the category code; only the slot
// matching the column kind is meaningful.
struct EncodedRow {
  std::vector<double> values;
  std::vector<int> codes;
};

struct TableDataset {
  std::vector<ColumnMeta> columns;  // feature columns, label excluded
  TaskKind task = TaskKind::Binary;
  int n_classes = 2;                      // classification only
  std::string label_name;
  std::vector<std::string> label_vocab;   // classification: class index -> token
  std::vector<EncodedRow> rows;
  std::vector<double> labels;             // class index or regression target

  // Original text cells (features + label, header order) so that saving
  // reproduces the file byte-for-byte and reloading is a fixed point.
  std::vector<std::string> header;
  int label_col = -1;
  std::vector<std::vector<std::string>> raw_cells;

  std::vector<int> train_idx, valid_idx, test_idx;

  int n_tokens() const { return static_cast<int>(columns.size()); }
  int n_rows() const { return static_cast<int>(rows.size()); }
};

struct CsvOptions {
  std::string label_column;        // empty: last column
  bool task_forced = false;        // otherwise inferred from the label column
  TaskKind task = TaskKind::Binary;
  int categorical_threshold = 20;  // distinct train values at or below -> categorical
  std::uint64_t split_seed = 7;
  double train_frac = 0.7;
  double valid_frac = 0.1;         // test gets the remainder
  std::string split_column;        // explicit split labels train/valid/test
};

// Header + comma-separated rows, no quoting. Column kinds are inferred
// (non-numeric, or at most `categorical_threshold` distinct train values,
// -> categorical), continuous columns are standardized against the train
// split, missing cells become the train mean / a reserved missing token,
// and rows are split 70/10/20 by seeded shuffle unless a split column names
// the assignment.
TableDataset load_csv(const std::string& path, const CsvOptions& opts = {});

// Writes header + raw cells back out; load_csv(save_csv(d)) == d.
void save_csv(const TableDataset& d, const std::string& path);

struct SyntheticSpec {
  int n_rows = 500;
  int n_continuous = 6;   // first three are the informative columns
  int n_categorical = 2;  // uniform distractor levels a..d
  TaskKind task = TaskKind::Binary;
  int n_classes = 3;      // multiclass only
  double noise = 0.5;
};

// Deterministic toy generator with a documented rule so oracle performance
// is computable:
//   binary:     label = [2 x0 - 1.5 x1 + x2 + noise * eta > 0]
//   multiclass: logits_c = w_c . (x0, x1, x2) + noise * eta_c, label = argmax
//   regression: y = 2 x0 - 1.5 x1 + x2 + 0.8 x0 x1 + noise * eta
// with x ~ N(0,1), eta ~ N(0,1) and fixed per-class weight rows w_c. The
// same seed also drives the split shuffle.
TableDataset generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed);

// Re-encode raw rows under previously frozen column metadata (checkpointed
// models bring their own); header names must cover every meta column.
std::vector<EncodedRow> encode_with_meta(const std::vector<std::string>& header,
                                         const std::vector<std::vector<std::string>>& raw_cells,
                                         const std::vector<ColumnMeta>& metas);

}  // namespace cheatt
