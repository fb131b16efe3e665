#include "cheatt/dataset.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "cheatt/rng.hpp"

namespace cheatt {

namespace {

const std::string kMissingToken = "__missing__";

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.push_back("");
  return cells;
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || errno == ERANGE) return false;
  out = v;
  return true;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

int find_column(const std::vector<std::string>& header, const std::string& name) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return static_cast<int>(i);
  }
  return -1;
}

void assign_splits(TableDataset& d, const CsvOptions& opts, int split_col) {
  const int n = static_cast<int>(d.raw_cells.size());
  if (split_col >= 0) {
    for (int r = 0; r < n; ++r) {
      std::string tag = d.raw_cells[r][split_col];
      std::transform(tag.begin(), tag.end(), tag.begin(),
                     [](unsigned char c) { return std::tolower(c); });
      if (tag == "train") {
        d.train_idx.push_back(r);
      } else if (tag == "valid" || tag == "validation" || tag == "val") {
        d.valid_idx.push_back(r);
      } else if (tag == "test") {
        d.test_idx.push_back(r);
      } else {
        throw DataError("split column holds '" + d.raw_cells[r][split_col] + "' at data row " +
                        std::to_string(r + 1) + "; expected train/valid/test");
      }
    }
    if (d.train_idx.empty()) throw DataError("split column assigns no training rows");
    return;
  }
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  Rng rng(opts.split_seed);
  rng.shuffle(order);
  int n_train = static_cast<int>(std::floor(opts.train_frac * n));
  int n_valid = static_cast<int>(std::floor(opts.valid_frac * n));
  if (n_train < 1) n_train = 1;
  if (n_train + n_valid > n) n_valid = n - n_train;
  d.train_idx.assign(order.begin(), order.begin() + n_train);
  d.valid_idx.assign(order.begin() + n_train, order.begin() + n_train + n_valid);
  d.test_idx.assign(order.begin() + n_train + n_valid, order.end());
}

// Column typing, vocabularies and standardization are all frozen against the
// train split, then applied to every row.
void build_columns(TableDataset& d, const CsvOptions& opts,
                   const std::vector<int>& feature_cols) {
  for (int col : feature_cols) {
    ColumnMeta meta;
    meta.name = d.header[col];

    bool numeric = true;
    for (const auto& row : d.raw_cells) {
      const std::string& cell = row[col];
      if (cell.empty()) continue;
      double unused;
      if (!parse_double(cell, unused)) {
        numeric = false;
        break;
      }
    }
    if (numeric) {
      std::set<std::string> distinct;
      for (int r : d.train_idx) {
        const std::string& cell = d.raw_cells[r][col];
        if (!cell.empty()) distinct.insert(cell);
      }
      meta.kind = static_cast<int>(distinct.size()) <= opts.categorical_threshold
                      ? ColumnKind::Categorical
                      : ColumnKind::Continuous;
    } else {
      meta.kind = ColumnKind::Categorical;
    }

    if (meta.kind == ColumnKind::Categorical) {
      std::set<std::string> vocab;
      for (int r : d.train_idx) {
        const std::string& cell = d.raw_cells[r][col];
        vocab.insert(cell.empty() ? kMissingToken : cell);
      }
      meta.vocab.assign(vocab.begin(), vocab.end());
    } else {
      double sum = 0.0;
      int count = 0;
      for (int r : d.train_idx) {
        const std::string& cell = d.raw_cells[r][col];
        if (cell.empty()) continue;
        double v;
        parse_double(cell, v);
        sum += v;
        ++count;
      }
      if (count == 0) throw DataError("column '" + meta.name + "' has no train values");
      meta.mean = sum / count;
      double ss = 0.0;
      for (int r : d.train_idx) {
        const std::string& cell = d.raw_cells[r][col];
        if (cell.empty()) continue;
        double v;
        parse_double(cell, v);
        ss += (v - meta.mean) * (v - meta.mean);
      }
      const double var = ss / count;
      if (var < 1e-12) {
        meta.constant = true;
        meta.stddev = 1.0;
      } else {
        meta.stddev = std::sqrt(var);
      }
    }
    d.columns.push_back(std::move(meta));
  }
}

void build_labels(TableDataset& d, const CsvOptions& opts) {
  std::vector<std::string> cells(d.raw_cells.size());
  for (std::size_t r = 0; r < d.raw_cells.size(); ++r) {
    cells[r] = d.raw_cells[r][d.label_col];
    if (cells[r].empty()) {
      throw DataError("missing label at data row " + std::to_string(r + 1));
    }
  }

  bool numeric = true;
  for (const auto& cell : cells) {
    double unused;
    if (!parse_double(cell, unused)) {
      numeric = false;
      break;
    }
  }
  std::set<std::string> distinct(cells.begin(), cells.end());

  TaskKind task;
  if (opts.task_forced) {
    task = opts.task;
  } else if (distinct.size() == 2) {
    task = TaskKind::Binary;
  } else if (numeric && static_cast<int>(distinct.size()) > opts.categorical_threshold) {
    task = TaskKind::Regression;
  } else {
    task = TaskKind::Multiclass;
  }
  d.task = task;

  if (task == TaskKind::Regression) {
    if (!numeric) throw DataError("regression label column contains non-numeric values");
    d.labels.resize(cells.size());
    for (std::size_t r = 0; r < cells.size(); ++r) parse_double(cells[r], d.labels[r]);
    d.n_classes = 0;
    return;
  }

  d.label_vocab.assign(distinct.begin(), distinct.end());
  d.n_classes = static_cast<int>(d.label_vocab.size());
  if (task == TaskKind::Binary && d.n_classes != 2) {
    throw DataError("binary task needs exactly 2 label values, found " +
                    std::to_string(d.n_classes));
  }
  if (d.n_classes < 2) throw DataError("classification needs at least 2 label values");
  d.labels.resize(cells.size());
  for (std::size_t r = 0; r < cells.size(); ++r) {
    const auto it = std::lower_bound(d.label_vocab.begin(), d.label_vocab.end(), cells[r]);
    d.labels[r] = static_cast<double>(it - d.label_vocab.begin());
  }
}

EncodedRow encode_cells(const std::vector<std::string>& cells,
                        const std::vector<int>& feature_cols,
                        const std::vector<ColumnMeta>& metas) {
  EncodedRow row;
  row.values.assign(metas.size(), 0.0);
  row.codes.assign(metas.size(), 0);
  for (std::size_t t = 0; t < metas.size(); ++t) {
    const ColumnMeta& meta = metas[t];
    const std::string& cell = cells[feature_cols[t]];
    if (meta.kind == ColumnKind::Continuous) {
      double v = meta.mean;  // missing -> train mean, i.e. standardized 0
      if (!cell.empty() && !parse_double(cell, v)) {
        throw DataError("non-numeric value '" + cell + "' in continuous column '" + meta.name +
                        "'");
      }
      row.values[t] = (v - meta.mean) / meta.stddev;
    } else {
      row.codes[t] = meta.category_code(cell.empty() ? kMissingToken : cell);
    }
  }
  return row;
}

// Shared tail of load_csv and generate_synthetic: split, type, standardize,
// encode, label.
TableDataset finalize_dataset(std::vector<std::string> header,
                              std::vector<std::vector<std::string>> raw_cells,
                              const CsvOptions& opts) {
  if (raw_cells.empty()) throw DataError("dataset has no rows");
  TableDataset d;
  d.header = std::move(header);
  d.raw_cells = std::move(raw_cells);

  if (opts.label_column.empty()) {
    d.label_col = static_cast<int>(d.header.size()) - 1;
  } else {
    d.label_col = find_column(d.header, opts.label_column);
    if (d.label_col < 0) throw ConfigError("label column '" + opts.label_column + "' not found");
  }
  d.label_name = d.header[d.label_col];

  int split_col = -1;
  if (!opts.split_column.empty()) {
    split_col = find_column(d.header, opts.split_column);
    if (split_col < 0) throw ConfigError("split column '" + opts.split_column + "' not found");
    if (split_col == d.label_col) throw ConfigError("split column equals label column");
  }

  std::vector<int> feature_cols;
  for (int c = 0; c < static_cast<int>(d.header.size()); ++c) {
    if (c != d.label_col && c != split_col) feature_cols.push_back(c);
  }
  if (feature_cols.empty()) throw DataError("dataset has no feature columns");

  assign_splits(d, opts, split_col);
  build_columns(d, opts, feature_cols);
  build_labels(d, opts);
  d.rows.reserve(d.raw_cells.size());
  for (const auto& cells : d.raw_cells) {
    d.rows.push_back(encode_cells(cells, feature_cols, d.columns));
  }
  return d;
}

}  // namespace

std::string to_string(TaskKind task) {
  switch (task) {
    case TaskKind::Binary: return "binary";
    case TaskKind::Multiclass: return "multiclass";
    case TaskKind::Regression: return "regression";
  }
  return "binary";
}

TaskKind task_from_string(const std::string& name) {
  if (name == "binary") return TaskKind::Binary;
  if (name == "multiclass") return TaskKind::Multiclass;
  if (name == "regression") return TaskKind::Regression;
  throw ConfigError("unknown task '" + name + "'");
}

int ColumnMeta::category_code(const std::string& token) const {
  const auto it = std::lower_bound(vocab.begin(), vocab.end(), token);
  if (it != vocab.end() && *it == token) return static_cast<int>(it - vocab.begin());
  return static_cast<int>(vocab.size());  // UNK
}

TableDataset load_csv(const std::string& path, const CsvOptions& opts) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw DataError("'" + path + "' is empty");
  std::vector<std::string> header = split_line(line);
  if (header.empty()) throw DataError("'" + path + "' has an empty header");

  std::vector<std::vector<std::string>> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::vector<std::string> cells = split_line(line);
    if (cells.size() != header.size()) {
      throw DataError("'" + path + "' line " + std::to_string(line_no) + ": expected " +
                      std::to_string(header.size()) + " fields, got " +
                      std::to_string(cells.size()));
    }
    rows.push_back(std::move(cells));
  }
  return finalize_dataset(std::move(header), std::move(rows), opts);
}

void save_csv(const TableDataset& d, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  auto write_row = [&out](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (cells[i].find(',') != std::string::npos) {
        throw DataError("save_csv: cell contains a comma: '" + cells[i] + "'");
      }
      if (i) out << ',';
      out << cells[i];
    }
    out << '\n';
  };
  write_row(d.header);
  for (const auto& row : d.raw_cells) write_row(row);
  if (!out) throw DataError("failed while writing '" + path + "'");
}

TableDataset generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
  if (spec.n_rows <= 0) throw DataError("synthetic spec: n_rows must be positive");
  if (spec.n_continuous < 3) {
    throw ConfigError("synthetic spec: need at least 3 continuous columns for the label rule");
  }
  if (spec.n_categorical < 0) throw ConfigError("synthetic spec: negative categorical count");
  if (spec.noise < 0.0) throw ConfigError("synthetic spec: negative noise weight");
  if (spec.task == TaskKind::Multiclass && spec.n_classes < 2) {
    throw ConfigError("synthetic spec: multiclass needs n_classes >= 2");
  }

  std::vector<std::string> header;
  for (int i = 0; i < spec.n_continuous; ++i) header.push_back("x" + std::to_string(i));
  for (int i = 0; i < spec.n_categorical; ++i) header.push_back("c" + std::to_string(i));
  header.push_back("target");

  const char* levels[4] = {"a", "b", "c", "d"};
  Rng rng(seed);
  std::vector<std::vector<std::string>> rows;
  rows.reserve(spec.n_rows);
  for (int r = 0; r < spec.n_rows; ++r) {
    std::vector<std::string> cells;
    cells.reserve(header.size());
    std::vector<double> x(spec.n_continuous);
    for (int i = 0; i < spec.n_continuous; ++i) {
      x[i] = rng.normal();
      cells.push_back(format_double(x[i]));
    }
    for (int i = 0; i < spec.n_categorical; ++i) {
      cells.push_back(levels[rng.below(4)]);
    }
    switch (spec.task) {
      case TaskKind::Binary: {
        const double logit = 2.0 * x[0] - 1.5 * x[1] + x[2] + spec.noise * rng.normal();
        cells.push_back(logit > 0.0 ? "1" : "0");
        break;
      }
      case TaskKind::Multiclass: {
        int best = 0;
        double best_score = -1e300;
        for (int c = 0; c < spec.n_classes; ++c) {
          const double theta = 2.0 * M_PI * c / spec.n_classes;
          const double score = 2.0 * (std::cos(theta) * x[0] + std::sin(theta) * x[1]) +
                               0.5 * x[2] + spec.noise * rng.normal();
          if (score > best_score) {
            best_score = score;
            best = c;
          }
        }
        cells.push_back(std::to_string(best));
        break;
      }
      case TaskKind::Regression: {
        const double y =
            2.0 * x[0] - 1.5 * x[1] + x[2] + 0.8 * x[0] * x[1] + spec.noise * rng.normal();
        cells.push_back(format_double(y));
        break;
      }
    }
    rows.push_back(std::move(cells));
  }

  CsvOptions opts;
  opts.split_seed = seed;
  opts.task_forced = true;
  opts.task = spec.task;
  return finalize_dataset(std::move(header), std::move(rows), opts);
}

std::vector<EncodedRow> encode_with_meta(const std::vector<std::string>& header,
                                         const std::vector<std::vector<std::string>>& raw_cells,
                                         const std::vector<ColumnMeta>& metas) {
  std::vector<int> cols;
  cols.reserve(metas.size());
  for (const ColumnMeta& meta : metas) {
    const int c = find_column(header, meta.name);
    if (c < 0) throw DataError("encode_with_meta: column '" + meta.name + "' not in header");
    cols.push_back(c);
  }
  std::vector<EncodedRow> rows;
  rows.reserve(raw_cells.size());
  for (const auto& cells : raw_cells) {
    if (cells.size() != header.size()) {
      throw DataError("encode_with_meta: ragged row with " + std::to_string(cells.size()) +
                      " fields");
    }
    rows.push_back(encode_cells(cells, cols, metas));
  }
  return rows;
}

}  // namespace cheatt
