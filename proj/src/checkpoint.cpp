#include "cheatt/checkpoint.hpp"

#include <fstream>

namespace cheatt {

using nlohmann::json;

namespace {

json column_to_json(const ColumnMeta& meta) {
  json j;
  j["name"] = meta.name;
  j["kind"] = meta.kind == ColumnKind::Categorical ? "categorical" : "continuous";
  if (meta.kind == ColumnKind::Categorical) {
    j["vocab"] = meta.vocab;
  } else {
    j["mean"] = meta.mean;
    j["stddev"] = meta.stddev;
    j["constant"] = meta.constant;
  }
  return j;
}

ColumnMeta column_from_json(const json& j) {
  ColumnMeta meta;
  meta.name = j.at("name").get<std::string>();
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "categorical") {
    meta.kind = ColumnKind::Categorical;
    meta.vocab = j.at("vocab").get<std::vector<std::string>>();
  } else if (kind == "continuous") {
    meta.kind = ColumnKind::Continuous;
    meta.mean = j.at("mean").get<double>();
    meta.stddev = j.at("stddev").get<double>();
    meta.constant = j.value("constant", false);
  } else {
    throw ConfigError("checkpoint: unknown column kind '" + kind + "'");
  }
  return meta;
}

}  // namespace

json config_to_json(const ModelConfig& cfg) {
  json j;
  j["n_tokens"] = cfg.n_tokens;
  j["embed_dim"] = cfg.embed_dim;
  j["depth"] = cfg.depth;
  j["n_heads"] = cfg.n_heads;
  j["basis"] = to_string(cfg.basis);
  j["poly_order"] = cfg.poly_order;
  j["attention_kind"] = to_string(cfg.attention_kind);
  j["ffn_hidden"] = cfg.ffn_hidden;
  j["head_hidden"] = cfg.head_hidden;
  j["seed"] = cfg.seed;
  j["task"] = to_string(cfg.task);
  j["n_outputs"] = cfg.n_outputs;
  json cols = json::array();
  for (const ColumnMeta& meta : cfg.columns) cols.push_back(column_to_json(meta));
  j["columns"] = std::move(cols);
  return j;
}

ModelConfig config_from_json(const json& j) {
  ModelConfig cfg;
  cfg.n_tokens = j.at("n_tokens").get<int>();
  cfg.embed_dim = j.at("embed_dim").get<int>();
  cfg.depth = j.at("depth").get<int>();
  cfg.n_heads = j.at("n_heads").get<int>();
  cfg.basis = basis_kind_from_string(j.at("basis").get<std::string>());
  cfg.poly_order = j.at("poly_order").get<int>();
  cfg.attention_kind = attention_kind_from_string(j.at("attention_kind").get<std::string>());
  cfg.ffn_hidden = j.at("ffn_hidden").get<int>();
  cfg.head_hidden = j.at("head_hidden").get<int>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.task = task_from_string(j.at("task").get<std::string>());
  cfg.n_outputs = j.at("n_outputs").get<int>();
  for (const json& cj : j.at("columns")) cfg.columns.push_back(column_from_json(cj));
  cfg.validate();
  return cfg;
}

json checkpoint_to_json(const ModelConfig& cfg, const ParamStore& params) {
  json j;
  j["format_version"] = 1;
  j["config"] = config_to_json(cfg);
  json p = json::object();
  for (const auto& [name, value] : params.values()) {
    json entry;
    entry["rows"] = value.rows();
    entry["cols"] = value.cols();
    entry["data"] = std::vector<double>(value.flat().begin(), value.flat().end());
    p[name] = std::move(entry);
  }
  j["params"] = std::move(p);
  return j;
}

std::pair<ModelConfig, ParamStore> checkpoint_from_json(const json& j) {
  const int version = j.at("format_version").get<int>();
  if (version != 1) {
    throw ConfigError("checkpoint: unsupported format_version " + std::to_string(version));
  }
  ModelConfig cfg = config_from_json(j.at("config"));
  ParamStore params;
  for (const auto& [name, entry] : j.at("params").items()) {
    const int rows = entry.at("rows").get<int>();
    const int cols = entry.at("cols").get<int>();
    std::vector<double> data = entry.at("data").get<std::vector<double>>();
    if (static_cast<int>(data.size()) != rows * cols) {
      throw ConfigError("checkpoint: parameter '" + name + "' has " +
                        std::to_string(data.size()) + " values for a " + std::to_string(rows) +
                        "x" + std::to_string(cols) + " shape");
    }
    params.insert(name, DenseMatrix(rows, cols, std::move(data)));
  }
  return {std::move(cfg), std::move(params)};
}

void save_checkpoint(const std::string& path, const ModelConfig& cfg, const ParamStore& params) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write checkpoint '" + path + "'");
  out << checkpoint_to_json(cfg, params).dump(2) << '\n';
  if (!out) throw DataError("failed while writing checkpoint '" + path + "'");
}

std::pair<ModelConfig, ParamStore> load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open checkpoint '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw DataError("checkpoint '" + path + "' is not valid: " + std::string(e.what()));
  }
  return checkpoint_from_json(j);
}

}  // namespace cheatt
