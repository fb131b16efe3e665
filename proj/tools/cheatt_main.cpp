// Command-line workbench: synthetic data generation, training, sweeps,
// oversmoothing diagnostics, convergence probes and the finite-difference
// gradient audit. Exit codes: 0 ok, 2 config/parameter, 3 data, 4 numeric
// contract/convergence/shape, 5 undefined metric, 1 anything else.
#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "cheatt/attention.hpp"
#include "cheatt/checkpoint.hpp"
#include "cheatt/dataset.hpp"
#include "cheatt/diagnostics.hpp"
#include "cheatt/errors.hpp"
#include "cheatt/experiment.hpp"
#include "cheatt/gradcheck.hpp"
#include "cheatt/model.hpp"

namespace {

using nlohmann::json;

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw cheatt::DataError("cannot open '" + path + "' for writing");
  out << content;
  if (!out) throw cheatt::DataError("short write to '" + path + "'");
}

json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw cheatt::DataError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw cheatt::DataError("'" + path + "': " + e.what());
  }
}

// Options shared by `train` and `sweep`. A JSON config file supplies the
// base; any flag the user actually passed wins over the file.
struct RunOpts {
  std::string config_path;

  std::string data_path;
  std::uint64_t data_seed = 7;
  std::string label_column, split_column, task;
  int categorical_threshold = 20;
  int rows = 500, continuous = 6, categorical = 2, classes = 3;
  double noise = 0.5;

  int embed_dim = 32, depth = 4, heads = 4, order = 5;
  std::string basis = "chebyshev", attention = "cheatt";
  int ffn_hidden = 64, head_hidden = 32;
  std::uint64_t model_seed = 7;

  int pretrain_epochs = 0, finetune_epochs = 200, batch = 32, patience = 20;
  double lr = 1e-3, weight_decay = 0.0, mask_p = 0.3, lambda_ce = 1.0;
  std::vector<std::uint64_t> seeds;
};

void add_experiment_options(CLI::App* sub, RunOpts& o) {
  sub->add_option("-c,--config", o.config_path, "JSON config file (flags override it)");

  sub->add_option("--data", o.data_path, "CSV to load; omit to generate synthetic data");
  sub->add_option("--data-seed", o.data_seed, "synthetic generation + split shuffle seed");
  sub->add_option("--label-column", o.label_column, "label column name (default: last)");
  sub->add_option("--split-column", o.split_column, "column with train/valid/test labels");
  sub->add_option("--task", o.task, "binary | multiclass | regression");
  sub->add_option("--categorical-threshold", o.categorical_threshold,
                  "max distinct train values for a numeric column to count as categorical");
  sub->add_option("--rows", o.rows, "synthetic row count");
  sub->add_option("--continuous", o.continuous, "synthetic continuous columns");
  sub->add_option("--categorical", o.categorical, "synthetic categorical columns");
  sub->add_option("--classes", o.classes, "synthetic class count (multiclass)");
  sub->add_option("--noise", o.noise, "synthetic label noise weight");

  sub->add_option("--embed-dim", o.embed_dim, "token embedding width");
  sub->add_option("--depth", o.depth, "encoder blocks");
  sub->add_option("--heads", o.heads, "attention heads per block");
  sub->add_option("--basis", o.basis, "power | chebyshev | legendre | jacobi[:a,b]");
  sub->add_option("--order", o.order, "polynomial filter order");
  sub->add_option("--attention", o.attention, "vanilla | cheatt");
  sub->add_option("--ffn-hidden", o.ffn_hidden, "feed-forward hidden width");
  sub->add_option("--head-hidden", o.head_hidden, "prediction head hidden width");
  sub->add_option("--model-seed", o.model_seed, "parameter init + training shuffle seed");

  sub->add_option("--pretrain-epochs", o.pretrain_epochs, "masked pretraining epochs");
  sub->add_option("--epochs", o.finetune_epochs, "supervised fine-tuning epoch budget");
  sub->add_option("--batch", o.batch, "minibatch size");
  sub->add_option("--lr", o.lr, "Adam learning rate");
  sub->add_option("--weight-decay", o.weight_decay, "decoupled weight decay");
  sub->add_option("--mask-p", o.mask_p, "pretraining mask probability");
  sub->add_option("--lambda-ce", o.lambda_ce, "categorical reconstruction loss weight");
  sub->add_option("--patience", o.patience, "early-stopping patience (validation loss)");
  sub->add_option("--seeds", o.seeds, "sweep seed list")->delimiter(',');
}

cheatt::ExperimentConfig build_experiment_config(const CLI::App* sub, const RunOpts& o) {
  cheatt::ExperimentConfig ec;
  if (!o.config_path.empty()) {
    ec = cheatt::experiment_config_from_json(read_json_file(o.config_path));
  }
  const auto set = [&](const std::string& flag) { return sub->count(flag) > 0; };

  if (set("--data")) ec.data_path = o.data_path;
  if (set("--data-seed")) {
    ec.data_seed = o.data_seed;
    ec.csv.split_seed = o.data_seed;
  }
  if (set("--label-column")) ec.csv.label_column = o.label_column;
  if (set("--split-column")) ec.csv.split_column = o.split_column;
  if (set("--task")) {
    const cheatt::TaskKind task = cheatt::task_from_string(o.task);
    ec.csv.task_forced = true;
    ec.csv.task = task;
    ec.synthetic.task = task;
  }
  if (set("--categorical-threshold")) ec.csv.categorical_threshold = o.categorical_threshold;
  if (set("--rows")) ec.synthetic.n_rows = o.rows;
  if (set("--continuous")) ec.synthetic.n_continuous = o.continuous;
  if (set("--categorical")) ec.synthetic.n_categorical = o.categorical;
  if (set("--classes")) ec.synthetic.n_classes = o.classes;
  if (set("--noise")) ec.synthetic.noise = o.noise;

  if (set("--embed-dim")) ec.model.embed_dim = o.embed_dim;
  if (set("--depth")) ec.model.depth = o.depth;
  if (set("--heads")) ec.model.n_heads = o.heads;
  if (set("--basis")) ec.model.basis = cheatt::basis_kind_from_string(o.basis);
  if (set("--order")) ec.model.poly_order = o.order;
  if (set("--attention")) ec.model.attention_kind = cheatt::attention_kind_from_string(o.attention);
  if (set("--ffn-hidden")) ec.model.ffn_hidden = o.ffn_hidden;
  if (set("--head-hidden")) ec.model.head_hidden = o.head_hidden;
  if (set("--model-seed")) ec.model.seed = o.model_seed;

  if (set("--pretrain-epochs")) ec.pretrain_epochs = o.pretrain_epochs;
  if (set("--epochs")) ec.finetune_epochs = o.finetune_epochs;
  if (set("--batch")) ec.batch_size = o.batch;
  if (set("--lr")) ec.lr = o.lr;
  if (set("--weight-decay")) ec.weight_decay = o.weight_decay;
  if (set("--mask-p")) ec.mask_p = o.mask_p;
  if (set("--lambda-ce")) ec.lambda_ce = o.lambda_ce;
  if (set("--patience")) ec.patience = o.patience;
  if (set("--seeds")) ec.seeds = o.seeds;
  return ec;
}

struct SynthOpts {
  std::string out;
  cheatt::SyntheticSpec spec;
  std::string task = "binary";
  std::uint64_t seed = 7;
};

void run_synth(const SynthOpts& o) {
  cheatt::SyntheticSpec spec = o.spec;
  spec.task = cheatt::task_from_string(o.task);
  const cheatt::TableDataset d = cheatt::generate_synthetic(spec, o.seed);
  cheatt::save_csv(d, o.out);
  std::cout << "wrote " << d.n_rows() << " rows x " << (d.n_tokens() + 1) << " columns ("
            << cheatt::to_string(d.task) << ") to " << o.out << "\n";
}

struct TrainOpts {
  RunOpts run;
  std::string out, checkpoint, report_json, report_csv;
};

void run_train(const CLI::App* sub, const TrainOpts& o) {
  const cheatt::ExperimentConfig ec = build_experiment_config(sub, o.run);
  cheatt::ExperimentResult result;
  cheatt::TrainedModel trained;
  try {
    cheatt::run_experiment_into(ec, result, &trained);
  } catch (const std::exception& e) {
    // Flush whatever epochs completed so the failure is inspectable.
    if (!o.out.empty()) {
      json j = cheatt::result_to_json(result);
      j["error"] = e.what();
      write_text_file(o.out, j.dump(2) + "\n");
    }
    throw;
  }
  std::cout << result.metric_name << " " << result.test_metric << " (best epoch "
            << result.best_epoch << (result.early_stopped ? ", early stop" : "") << ", "
            << result.total_seconds << " s total, " << result.train_seconds_per_epoch
            << " s/epoch)\n";
  if (!o.out.empty()) {
    write_text_file(o.out, cheatt::result_to_json(result).dump(2) + "\n");
    std::cout << "result -> " << o.out << "\n";
  }
  if (!o.checkpoint.empty()) {
    cheatt::save_checkpoint(o.checkpoint, trained.config, trained.params);
    std::cout << "checkpoint -> " << o.checkpoint << "\n";
  }
  if (!o.report_json.empty()) {
    write_text_file(o.report_json, cheatt::report_to_json(result.report).dump(2) + "\n");
    std::cout << "report -> " << o.report_json << "\n";
  }
  if (!o.report_csv.empty()) {
    write_text_file(o.report_csv, cheatt::report_to_csv(result.report));
    std::cout << "report -> " << o.report_csv << "\n";
  }
}

struct SweepOpts {
  RunOpts run;
  std::string axis;
  std::string out, out_json;
};

void run_sweep(const CLI::App* sub, const SweepOpts& o) {
  const cheatt::ExperimentConfig ec = build_experiment_config(sub, o.run);
  const cheatt::SweepTable table = cheatt::sweep(ec, cheatt::sweep_axis_from_string(o.axis));
  const std::string csv = cheatt::sweep_to_csv(table);
  if (o.out.empty()) {
    std::cout << csv;
  } else {
    write_text_file(o.out, csv);
    std::cout << "sweep -> " << o.out << "\n";
  }
  for (const cheatt::SweepCell& cell : table.cells) {
    std::cout << table.axis_name << "=" << cell.axis_value << ": " << table.metric_name << " "
              << cell.mean << " +- " << cell.stddev << " (" << cell.metrics.size() << " runs, "
              << cell.errors.size() << " failures)\n";
    for (const std::string& err : cell.errors) std::cout << "  failure: " << err << "\n";
  }
  if (!o.out_json.empty()) {
    json cells = json::array();
    for (const cheatt::SweepCell& cell : table.cells) {
      cells.push_back({{"value", cell.axis_value},
                       {"metrics", cell.metrics},
                       {"errors", cell.errors},
                       {"mean", cell.mean},
                       {"std", cell.stddev}});
    }
    const json j = {{"axis", table.axis_name}, {"metric", table.metric_name}, {"cells", cells}};
    write_text_file(o.out_json, j.dump(2) + "\n");
    std::cout << "sweep -> " << o.out_json << "\n";
  }
}

struct DiagnoseOpts {
  std::string checkpoint, data;
  int sample = 16;
  int layer_lo = 0, layer_hi = -1;
  std::string out, csv;
};

void run_diagnose(const DiagnoseOpts& o) {
  auto [cfg, params] = cheatt::load_checkpoint(o.checkpoint);
  const cheatt::TableDataset d = cheatt::load_csv(o.data);
  const std::vector<cheatt::EncodedRow> all =
      cheatt::encode_with_meta(d.header, d.raw_cells, cfg.columns);
  if (o.sample <= 0) throw cheatt::ParameterError("--sample must be positive");
  std::vector<cheatt::EncodedRow> sample(
      all.begin(), all.begin() + std::min<std::size_t>(all.size(), o.sample));
  const cheatt::OversmoothingReport report =
      cheatt::layer_report(cfg, params, sample, o.layer_lo, o.layer_hi);
  for (const cheatt::LayerDiagnostics& layer : report.layers) {
    std::cout << "layer " << layer.layer << ": mean cosine " << layer.mean_cosine
              << ", high-freq ratio " << layer.high_freq_ratio << "\n";
  }
  if (!o.out.empty()) {
    write_text_file(o.out, cheatt::report_to_json(report).dump(2) + "\n");
    std::cout << "report -> " << o.out << "\n";
  }
  if (!o.csv.empty()) {
    write_text_file(o.csv, cheatt::report_to_csv(report));
    std::cout << "report -> " << o.csv << "\n";
  }
}

struct ConvergenceOpts {
  std::string checkpoint, data;
  int row = 0, layer = 0, head = 0;
  double damping = 0.15;
  double stochastic_tol = 1e-10;
  int t_max = 50, k_max = 200;
  std::string out;
};

void run_convergence(const ConvergenceOpts& o) {
  auto [cfg, params] = cheatt::load_checkpoint(o.checkpoint);
  const cheatt::TableDataset d = cheatt::load_csv(o.data);
  const std::vector<cheatt::EncodedRow> rows =
      cheatt::encode_with_meta(d.header, d.raw_cells, cfg.columns);
  if (o.row < 0 || o.row >= static_cast<int>(rows.size())) {
    throw cheatt::ParameterError("--row out of range");
  }
  if (o.layer < 0 || o.layer >= cfg.depth) throw cheatt::ParameterError("--layer out of range");
  if (o.head < 0 || o.head >= cfg.n_heads) throw cheatt::ParameterError("--head out of range");

  cheatt::Tape tape;
  const cheatt::TapeParams tp = cheatt::make_leaves(tape, params);
  cheatt::EncoderActivations acts;
  cheatt::forward_features(tape, cfg, tp, rows[o.row], &acts);
  const cheatt::DenseMatrix a_mat = tape.value(acts.attention[o.layer][o.head]);
  const std::string head_key =
      "layer" + std::to_string(o.layer) + ".head" + std::to_string(o.head) + ".wv";
  const cheatt::DenseMatrix v =
      cheatt::matmul(tape.value(acts.features[o.layer]), params.at(head_key));

  const cheatt::MarkovReport markov = cheatt::verify_markov_conditions(a_mat, o.stochastic_tol);
  const cheatt::AttentionMap a(a_mat);
  const std::vector<double> curve = cheatt::power_convergence_curve(a, v, o.k_max);
  const double rate = cheatt::late_stage_decay_rate(curve);
  const std::vector<double> err_curve = cheatt::pagerank_error_curve(a_mat, o.damping, o.t_max);
  const std::vector<double> fixed_point = cheatt::pagerank_fixed_point(a_mat, o.damping);

  std::cout << "attention map " << a_mat.rows() << "x" << a_mat.cols() << " (layer " << o.layer
            << ", head " << o.head << ")\n"
            << "markov: stochastic=" << (markov.is_stochastic ? "yes" : "no")
            << " irreducible=" << (markov.is_irreducible ? "yes" : "no")
            << " aperiodic=" << (markov.is_aperiodic ? "yes" : "no")
            << " min_entry=" << markov.min_entry << " spectral_gap="
            << markov.spectral_gap_estimate << "\n"
            << "power iteration: delta_" << curve.size() << " = " << curve.back()
            << ", late-stage decay " << rate << " (1 - gap = "
            << 1.0 - markov.spectral_gap_estimate << ")\n"
            << "pagerank(eps=" << o.damping << "): Err(0)=" << err_curve.front() << " Err("
            << o.t_max << ")=" << err_curve.back() << "\n";

  if (!o.out.empty()) {
    const json j = {
        {"layer", o.layer},
        {"head", o.head},
        {"row", o.row},
        {"markov",
         {{"is_stochastic", markov.is_stochastic},
          {"min_entry", markov.min_entry},
          {"is_irreducible", markov.is_irreducible},
          {"is_aperiodic", markov.is_aperiodic},
          {"spectral_gap_estimate", markov.spectral_gap_estimate}}},
        {"power_convergence_curve", curve},
        {"late_stage_decay_rate", rate},
        {"pagerank", {{"eps", o.damping}, {"error_curve", err_curve}, {"fixed_point", fixed_point}}}};
    write_text_file(o.out, j.dump(2) + "\n");
    std::cout << "curves -> " << o.out << "\n";
  }
}

struct GradcheckOpts {
  int tokens = 6, embed_dim = 8, depth = 2, heads = 2, order = 3;
  std::string basis = "chebyshev";
  std::uint64_t seed = 7;
  double step = 1e-5, tol = 1e-4;
  std::string out;
  bool verbose = false;
};

int run_gradcheck(const GradcheckOpts& o) {
  const cheatt::ModelConfig cfg = cheatt::make_gradcheck_config(
      o.tokens, o.embed_dim, o.depth, o.heads, o.order,
      cheatt::basis_kind_from_string(o.basis), o.seed);
  const cheatt::GradCheckResult result = cheatt::gradient_check(cfg, o.step, o.tol);
  for (const auto& p : result.params) {
    if (o.verbose || p.max_rel_err > o.tol) {
      std::cout << p.name << ": max rel err " << p.max_rel_err << " (" << p.entries_checked
                << " checked, " << p.entries_skipped << " skipped)\n";
    }
  }
  std::cout << (result.passed ? "PASS" : "FAIL") << ": max relative error "
            << result.max_rel_err << " vs tolerance " << result.tolerance << "\n";
  if (!o.out.empty()) {
    json params = json::array();
    for (const auto& p : result.params) {
      params.push_back({{"name", p.name},
                        {"max_rel_err", p.max_rel_err},
                        {"entries_checked", p.entries_checked},
                        {"entries_skipped", p.entries_skipped}});
    }
    const json j = {{"passed", result.passed},
                    {"max_rel_err", result.max_rel_err},
                    {"tolerance", result.tolerance},
                    {"params", params}};
    write_text_file(o.out, j.dump(2) + "\n");
  }
  return result.passed ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Polynomial-filter attention workbench for tabular transformers"};
  app.require_subcommand(1);

  SynthOpts synth_opts;
  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic CSV dataset");
  synth->add_option("-o,--out", synth_opts.out, "output CSV path")->required();
  synth->add_option("--rows", synth_opts.spec.n_rows, "row count");
  synth->add_option("--continuous", synth_opts.spec.n_continuous, "continuous columns");
  synth->add_option("--categorical", synth_opts.spec.n_categorical, "categorical columns");
  synth->add_option("--task", synth_opts.task, "binary | multiclass | regression");
  synth->add_option("--classes", synth_opts.spec.n_classes, "class count (multiclass)");
  synth->add_option("--noise", synth_opts.spec.noise, "label noise weight");
  synth->add_option("--seed", synth_opts.seed, "generator seed");

  TrainOpts train_opts;
  CLI::App* train = app.add_subcommand("train", "train one model and report the test metric");
  add_experiment_options(train, train_opts.run);
  train->add_option("-o,--out", train_opts.out, "write the result record (JSON)");
  train->add_option("--checkpoint", train_opts.checkpoint, "write the trained model (JSON)");
  train->add_option("--report-json", train_opts.report_json, "write the layer report (JSON)");
  train->add_option("--report-csv", train_opts.report_csv, "write the layer report (CSV)");

  SweepOpts sweep_opts;
  CLI::App* sweep = app.add_subcommand("sweep", "run an axis sweep over the seed list");
  add_experiment_options(sweep, sweep_opts.run);
  sweep->add_option("--axis", sweep_opts.axis, "order | basis | attention")->required();
  sweep->add_option("-o,--out", sweep_opts.out, "write the sweep table (CSV)");
  sweep->add_option("--json", sweep_opts.out_json, "write the sweep table (JSON)");

  DiagnoseOpts diag_opts;
  CLI::App* diagnose = app.add_subcommand("diagnose", "layer-wise oversmoothing report");
  diagnose->add_option("--checkpoint", diag_opts.checkpoint, "model checkpoint")->required();
  diagnose->add_option("--data", diag_opts.data, "CSV with the checkpoint's columns")->required();
  diagnose->add_option("--sample", diag_opts.sample, "rows to aggregate over");
  diagnose->add_option("--layer-lo", diag_opts.layer_lo, "first layer to report");
  diagnose->add_option("--layer-hi", diag_opts.layer_hi, "last layer to report (-1 = depth)");
  diagnose->add_option("-o,--out", diag_opts.out, "write the report (JSON)");
  diagnose->add_option("--csv", diag_opts.csv, "write the report (CSV)");

  ConvergenceOpts conv_opts;
  CLI::App* convergence =
      app.add_subcommand("convergence", "attention-map power iteration + PageRank curves");
  convergence->add_option("--checkpoint", conv_opts.checkpoint, "model checkpoint")->required();
  convergence->add_option("--data", conv_opts.data, "CSV with the checkpoint's columns")
      ->required();
  convergence->add_option("--row", conv_opts.row, "data row to probe");
  convergence->add_option("--layer", conv_opts.layer, "encoder block");
  convergence->add_option("--head", conv_opts.head, "attention head");
  convergence->add_option("--damping", conv_opts.damping, "PageRank damping eps in (0,1)");
  convergence->add_option("--stochastic-tol", conv_opts.stochastic_tol,
                          "row-sum tolerance for the Markov check");
  convergence->add_option("--t-max", conv_opts.t_max, "PageRank error-curve length");
  convergence->add_option("--k-max", conv_opts.k_max, "power-iteration curve length");
  convergence->add_option("-o,--out", conv_opts.out, "write the curves (JSON)");

  GradcheckOpts grad_opts;
  CLI::App* gradcheck =
      app.add_subcommand("gradcheck", "finite-difference audit of the analytic gradients");
  gradcheck->add_option("--tokens", grad_opts.tokens, "token count");
  gradcheck->add_option("--embed-dim", grad_opts.embed_dim, "embedding width");
  gradcheck->add_option("--depth", grad_opts.depth, "encoder blocks");
  gradcheck->add_option("--heads", grad_opts.heads, "attention heads");
  gradcheck->add_option("--order", grad_opts.order, "polynomial filter order");
  gradcheck->add_option("--basis", grad_opts.basis, "polynomial basis");
  gradcheck->add_option("--seed", grad_opts.seed, "probe model seed");
  gradcheck->add_option("--step", grad_opts.step, "finite-difference step h");
  gradcheck->add_option("--tol", grad_opts.tol, "max relative error accepted");
  gradcheck->add_option("-o,--out", grad_opts.out, "write per-parameter results (JSON)");
  gradcheck->add_flag("-v,--verbose", grad_opts.verbose, "print every parameter");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (synth->parsed()) run_synth(synth_opts);
    if (train->parsed()) run_train(train, train_opts);
    if (sweep->parsed()) run_sweep(sweep, sweep_opts);
    if (diagnose->parsed()) run_diagnose(diag_opts);
    if (convergence->parsed()) run_convergence(conv_opts);
    if (gradcheck->parsed()) return run_gradcheck(grad_opts);
  } catch (const cheatt::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const cheatt::ParameterError& e) {
    std::cerr << "parameter error: " << e.what() << "\n";
    return 2;
  } catch (const cheatt::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const cheatt::ShapeError& e) {
    std::cerr << "shape error: " << e.what() << "\n";
    return 4;
  } catch (const cheatt::ContractError& e) {
    std::cerr << "contract error: " << e.what() << "\n";
    return 4;
  } catch (const cheatt::ConvergenceError& e) {
    std::cerr << "convergence error: " << e.what() << "\n";
    return 4;
  } catch (const cheatt::MetricError& e) {
    std::cerr << "metric error: " << e.what() << "\n";
    return 5;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
