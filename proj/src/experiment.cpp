#include "cheatt/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <sstream>

#include "cheatt/checkpoint.hpp"
#include "cheatt/metrics.hpp"

namespace cheatt {

using nlohmann::json;

namespace {

double elapsed_seconds(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - since).count();
}

struct Trainer {
  const ExperimentConfig& ec;
  const TableDataset& data;
  ModelConfig cfg;
  ParamStore params;
  AdamState adam;
  AdamOptions adam_opts;
  Rng train_rng;

  Trainer(const ExperimentConfig& ec_, const TableDataset& data_)
      : ec(ec_), data(data_), cfg(ec_.model), train_rng(0) {
    cfg.bind_dataset(data);
    cfg.validate();
    params = init_params(cfg);
    adam_opts.lr = ec.lr;
    adam_opts.weight_decay = ec.weight_decay;
    // separate stream from parameter init
    train_rng = Rng(cfg.seed * 0x9e3779b97f4a7c15ULL + 0x2545f4914f6cdd1dULL);
  }

  double example_loss(Tape& tape, const TapeParams& tp, int row, bool pretrain, Rng& mask_rng,
                      bool with_grad) {
    NodeId loss;
    if (pretrain) {
      const std::vector<bool> mask = sample_mask(mask_rng, cfg.n_tokens, ec.mask_p);
      const EncodedRow masked = apply_mask(cfg, data.rows[row], mask);
      const NodeId features = forward_features(tape, cfg, tp, masked);
      loss = loss_masked_pretrain(tape, cfg, tp, features, data.rows[row], mask, ec.lambda_ce);
    } else {
      const NodeId features = forward_features(tape, cfg, tp, data.rows[row]);
      const NodeId logits = head_forward(tape, cfg, tp, features);
      loss = loss_supervised(tape, cfg, logits, data.labels[row]);
    }
    if (with_grad) tape.backward(loss);
    return tape.value(loss)(0, 0);
  }

  // One pass over the shuffled training split in minibatches; returns the
  // mean per-example loss.
  double train_epoch(bool pretrain) {
    std::vector<int> order = data.train_idx;
    train_rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t at = 0;
    while (at < order.size()) {
      const std::size_t end = std::min(at + static_cast<std::size_t>(ec.batch_size),
                                       order.size());
      std::map<std::string, DenseMatrix> grads;
      const double inv = 1.0 / static_cast<double>(end - at);
      for (std::size_t i = at; i < end; ++i) {
        Tape tape;
        const TapeParams tp = make_leaves(tape, params);
        loss_sum += example_loss(tape, tp, order[i], pretrain, train_rng, true);
        accumulate_grads(tape, tp, inv, grads);
      }
      adam_step(params, grads, adam, adam_opts);
      at = end;
    }
    return loss_sum / order.size();
  }

  double eval_loss(const std::vector<int>& rows, bool pretrain, std::uint64_t mask_seed) {
    if (rows.empty()) return 0.0;
    Rng mask_rng(mask_seed);
    double loss_sum = 0.0;
    for (int row : rows) {
      Tape tape;
      const TapeParams tp = make_leaves(tape, params);
      loss_sum += example_loss(tape, tp, row, pretrain, mask_rng, false);
    }
    return loss_sum / rows.size();
  }

  double test_metric(std::string& name) const {
    const std::vector<int>& rows = data.test_idx;
    if (rows.empty()) throw DataError("run_experiment: empty test split");
    if (cfg.task == TaskKind::Regression) {
      name = "r2";
      std::vector<double> preds, targets;
      preds.reserve(rows.size());
      for (int row : rows) {
        preds.push_back(predict_scores(cfg, params, data.rows[row])[0]);
        targets.push_back(data.labels[row]);
      }
      return r_squared(preds, targets);
    }
    name = "auroc";
    std::vector<int> labels;
    std::vector<std::vector<double>> class_scores(cfg.n_outputs);
    for (int row : rows) {
      const std::vector<double> probs = predict_scores(cfg, params, data.rows[row]);
      for (int c = 0; c < cfg.n_outputs; ++c) class_scores[c].push_back(probs[c]);
      labels.push_back(static_cast<int>(data.labels[row]));
    }
    if (cfg.task == TaskKind::Binary) {
      return auroc(class_scores[1], labels);
    }
    return auroc_macro(class_scores, labels);
  }
};

}  // namespace

void ExperimentConfig::validate() const {
  if (pretrain_epochs < 0) throw ConfigError("pretrain_epochs must be nonnegative");
  // 0 is allowed: evaluate an untrained model (chance-level baseline).
  if (finetune_epochs < 0) throw ConfigError("finetune_epochs must be nonnegative");
  if (batch_size <= 0) throw ConfigError("batch_size must be positive");
  if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (mask_p < 0.0 || mask_p > 1.0) throw ConfigError("mask_p must be in [0,1]");
  if (lambda_ce < 0.0) throw ConfigError("lambda_ce must be nonnegative");
  if (patience <= 0) throw ConfigError("patience must be positive");
  if (seeds.empty()) throw ConfigError("seed list must not be empty");
}

void run_experiment_into(const ExperimentConfig& ec, ExperimentResult& out,
                         TrainedModel* trained) {
  ec.validate();
  const auto t_start = std::chrono::steady_clock::now();
  const TableDataset data = ec.data_path.empty()
                                ? generate_synthetic(ec.synthetic, ec.data_seed)
                                : load_csv(ec.data_path, ec.csv);
  Trainer tr(ec, data);
  out.model_config = tr.cfg;

  for (int epoch = 0; epoch < ec.pretrain_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    EpochStat stat;
    stat.epoch = epoch;
    stat.train_loss = tr.train_epoch(true);
    stat.valid_loss =
        tr.eval_loss(data.valid_idx, true, tr.cfg.seed ^ (0x517cc1b727220a95ULL + epoch));
    stat.seconds = elapsed_seconds(t0);
    out.pretrain.push_back(stat);
  }

  double best_valid = std::numeric_limits<double>::infinity();
  ParamStore best_params;
  for (int epoch = 0; epoch < ec.finetune_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    EpochStat stat;
    stat.epoch = epoch;
    stat.train_loss = tr.train_epoch(false);
    stat.valid_loss = tr.eval_loss(data.valid_idx, false, 0);
    stat.seconds = elapsed_seconds(t0);
    out.finetune.push_back(stat);
    if (!data.valid_idx.empty()) {
      if (stat.valid_loss < best_valid - 1e-12) {
        best_valid = stat.valid_loss;
        best_params = tr.params;
        out.best_epoch = epoch;
      } else if (epoch - out.best_epoch >= ec.patience) {
        out.early_stopped = true;
        break;
      }
    }
  }
  if (out.best_epoch >= 0) tr.params = best_params;

  if (!out.finetune.empty()) {
    double epoch_seconds = 0.0;
    for (const EpochStat& s : out.finetune) epoch_seconds += s.seconds;
    out.train_seconds_per_epoch = epoch_seconds / out.finetune.size();
  }

  out.test_metric = tr.test_metric(out.metric_name);

  {
    const auto t0 = std::chrono::steady_clock::now();
    for (int row : data.test_idx) predict_scores(tr.cfg, tr.params, data.rows[row]);
    out.inference_seconds_per_1k = elapsed_seconds(t0) * 1000.0 / data.test_idx.size();
  }

  std::vector<EncodedRow> sample;
  for (std::size_t i = 0; i < data.test_idx.size() && i < 16; ++i) {
    sample.push_back(data.rows[data.test_idx[i]]);
  }
  out.report = layer_report(tr.cfg, tr.params, sample);

  if (trained) {
    trained->config = tr.cfg;
    trained->params = tr.params;
  }
  out.total_seconds = elapsed_seconds(t_start);
  out.finished = true;
}

ExperimentResult run_experiment(const ExperimentConfig& ec, TrainedModel* trained) {
  ExperimentResult out;
  run_experiment_into(ec, out, trained);
  return out;
}

ExperimentConfig experiment_config_from_json(const json& j) {
  ExperimentConfig ec;
  if (j.contains("data")) {
    const json& d = j.at("data");
    ec.data_path = d.value("path", std::string());
    if (d.contains("synthetic")) {
      const json& s = d.at("synthetic");
      ec.synthetic.n_rows = s.value("rows", ec.synthetic.n_rows);
      ec.synthetic.n_continuous = s.value("continuous", ec.synthetic.n_continuous);
      ec.synthetic.n_categorical = s.value("categorical", ec.synthetic.n_categorical);
      if (s.contains("task")) ec.synthetic.task = task_from_string(s.at("task"));
      ec.synthetic.n_classes = s.value("classes", ec.synthetic.n_classes);
      ec.synthetic.noise = s.value("noise", ec.synthetic.noise);
    }
    ec.data_seed = d.value("seed", ec.data_seed);
    ec.csv.label_column = d.value("label_column", ec.csv.label_column);
    ec.csv.split_column = d.value("split_column", ec.csv.split_column);
    if (d.contains("task")) {
      ec.csv.task_forced = true;
      ec.csv.task = task_from_string(d.at("task"));
    }
    ec.csv.categorical_threshold = d.value("categorical_threshold",
                                           ec.csv.categorical_threshold);
    ec.csv.split_seed = ec.data_seed;
  }
  if (j.contains("model")) {
    const json& m = j.at("model");
    ec.model.embed_dim = m.value("embed_dim", ec.model.embed_dim);
    ec.model.depth = m.value("depth", ec.model.depth);
    ec.model.n_heads = m.value("heads", ec.model.n_heads);
    if (m.contains("basis")) ec.model.basis = basis_kind_from_string(m.at("basis"));
    ec.model.poly_order = m.value("order", ec.model.poly_order);
    if (m.contains("attention")) {
      ec.model.attention_kind = attention_kind_from_string(m.at("attention"));
    }
    ec.model.ffn_hidden = m.value("ffn_hidden", ec.model.ffn_hidden);
    ec.model.head_hidden = m.value("head_hidden", ec.model.head_hidden);
    ec.model.seed = m.value("seed", ec.model.seed);
  }
  if (j.contains("train")) {
    const json& t = j.at("train");
    ec.pretrain_epochs = t.value("pretrain_epochs", ec.pretrain_epochs);
    ec.finetune_epochs = t.value("finetune_epochs", ec.finetune_epochs);
    ec.batch_size = t.value("batch", ec.batch_size);
    ec.lr = t.value("lr", ec.lr);
    ec.weight_decay = t.value("weight_decay", ec.weight_decay);
    ec.mask_p = t.value("mask_p", ec.mask_p);
    ec.lambda_ce = t.value("lambda_ce", ec.lambda_ce);
    ec.patience = t.value("patience", ec.patience);
  }
  if (j.contains("seeds")) ec.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  return ec;
}

json experiment_config_to_json(const ExperimentConfig& ec) {
  json j;
  json d;
  if (!ec.data_path.empty()) {
    d["path"] = ec.data_path;
    if (!ec.csv.label_column.empty()) d["label_column"] = ec.csv.label_column;
    if (!ec.csv.split_column.empty()) d["split_column"] = ec.csv.split_column;
    if (ec.csv.task_forced) d["task"] = to_string(ec.csv.task);
    d["categorical_threshold"] = ec.csv.categorical_threshold;
  } else {
    d["synthetic"] = {{"rows", ec.synthetic.n_rows},
                      {"continuous", ec.synthetic.n_continuous},
                      {"categorical", ec.synthetic.n_categorical},
                      {"task", to_string(ec.synthetic.task)},
                      {"classes", ec.synthetic.n_classes},
                      {"noise", ec.synthetic.noise}};
  }
  d["seed"] = ec.data_seed;
  j["data"] = std::move(d);
  j["model"] = {{"embed_dim", ec.model.embed_dim},
                {"depth", ec.model.depth},
                {"heads", ec.model.n_heads},
                {"basis", to_string(ec.model.basis)},
                {"order", ec.model.poly_order},
                {"attention", to_string(ec.model.attention_kind)},
                {"ffn_hidden", ec.model.ffn_hidden},
                {"head_hidden", ec.model.head_hidden},
                {"seed", ec.model.seed}};
  j["train"] = {{"pretrain_epochs", ec.pretrain_epochs},
                {"finetune_epochs", ec.finetune_epochs},
                {"batch", ec.batch_size},
                {"lr", ec.lr},
                {"weight_decay", ec.weight_decay},
                {"mask_p", ec.mask_p},
                {"lambda_ce", ec.lambda_ce},
                {"patience", ec.patience}};
  j["seeds"] = ec.seeds;
  return j;
}

json result_to_json(const ExperimentResult& r) {
  json j;
  j["finished"] = r.finished;
  j["metric_name"] = r.metric_name;
  j["test_metric"] = r.test_metric;
  j["best_epoch"] = r.best_epoch;
  j["early_stopped"] = r.early_stopped;
  j["train_seconds_per_epoch"] = r.train_seconds_per_epoch;
  j["inference_seconds_per_1k"] = r.inference_seconds_per_1k;
  j["total_seconds"] = r.total_seconds;
  auto epochs = [](const std::vector<EpochStat>& stats) {
    json arr = json::array();
    for (const EpochStat& s : stats) {
      arr.push_back({{"epoch", s.epoch},
                     {"train_loss", s.train_loss},
                     {"valid_loss", s.valid_loss},
                     {"seconds", s.seconds}});
    }
    return arr;
  };
  j["pretrain"] = epochs(r.pretrain);
  j["finetune"] = epochs(r.finetune);
  if (r.finished) {
    j["report"] = report_to_json(r.report);
    j["config"] = config_to_json(r.model_config);
  }
  return j;
}

SweepAxis sweep_axis_from_string(const std::string& name) {
  if (name == "order" || name == "order_k") return SweepAxis::OrderK;
  if (name == "basis") return SweepAxis::Basis;
  if (name == "attention" || name == "attention_kind") return SweepAxis::Attention;
  throw ConfigError("unknown sweep axis '" + name + "'");
}

std::string to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::OrderK: return "order_k";
    case SweepAxis::Basis: return "basis";
    case SweepAxis::Attention: return "attention_kind";
  }
  return "order_k";
}

SweepTable sweep(const ExperimentConfig& base, SweepAxis axis) {
  base.validate();
  SweepTable table;
  table.axis_name = to_string(axis);

  struct AxisValue {
    std::string label;
    std::function<void(ModelConfig&)> apply;
  };
  std::vector<AxisValue> values;
  switch (axis) {
    case SweepAxis::OrderK:
      for (int k : {2, 3, 5, 10}) {
        values.push_back({std::to_string(k), [k](ModelConfig& m) {
                            m.attention_kind = AttentionKind::CheAtt;
                            m.poly_order = k;
                          }});
      }
      break;
    case SweepAxis::Basis:
      for (const BasisKind& b : {BasisKind::power(), BasisKind::chebyshev(),
                                 BasisKind::legendre(), BasisKind::jacobi(1.0, 1.0)}) {
        values.push_back({to_string(b), [b](ModelConfig& m) {
                            m.attention_kind = AttentionKind::CheAtt;
                            m.basis = b;
                          }});
      }
      break;
    case SweepAxis::Attention:
      for (AttentionKind kind : {AttentionKind::Vanilla, AttentionKind::CheAtt}) {
        values.push_back({to_string(kind), [kind](ModelConfig& m) {
                            m.attention_kind = kind;
                          }});
      }
      break;
  }

  for (const AxisValue& value : values) {
    SweepCell cell;
    cell.axis_value = value.label;
    for (std::uint64_t seed : base.seeds) {
      ExperimentConfig ec = base;
      value.apply(ec.model);
      ec.model.seed = seed;
      try {
        const ExperimentResult r = run_experiment(ec);
        cell.metrics.push_back(r.test_metric);
        if (table.metric_name.empty()) table.metric_name = r.metric_name;
      } catch (const std::exception& e) {
        cell.errors.push_back(e.what());
      }
    }
    if (!cell.metrics.empty()) {
      double sum = 0.0;
      for (double m : cell.metrics) sum += m;
      cell.mean = sum / cell.metrics.size();
      if (cell.metrics.size() >= 2) {
        double ss = 0.0;
        for (double m : cell.metrics) ss += (m - cell.mean) * (m - cell.mean);
        cell.stddev = std::sqrt(ss / (cell.metrics.size() - 1));
      }
    }
    table.cells.push_back(std::move(cell));
  }
  return table;
}

std::string sweep_to_csv(const SweepTable& table) {
  std::ostringstream out;
  out.precision(17);
  out << "axis,value,metric,mean,std,n_runs,n_failures\n";
  for (const SweepCell& cell : table.cells) {
    out << table.axis_name << ',' << cell.axis_value << ',' << table.metric_name << ','
        << cell.mean << ',' << cell.stddev << ',' << cell.metrics.size() << ','
        << cell.errors.size() << '\n';
  }
  return out.str();
}

}  // namespace cheatt
