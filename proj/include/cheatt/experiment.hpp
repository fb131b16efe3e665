#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "cheatt/dataset.hpp"
#include "cheatt/diagnostics.hpp"
#include "cheatt/model.hpp"

namespace cheatt {

struct ExperimentConfig {
  std::string data_path;  // CSV to load; empty -> generate synthetic data
  SyntheticSpec synthetic;
  std::uint64_t data_seed = 7;  // synthetic generation + split shuffle
  CsvOptions csv;
  ModelConfig model;  // dataset-facing fields are bound at run time
  int pretrain_epochs = 0;
  int finetune_epochs = 200;
  int batch_size = 32;
  double lr = 1e-3;
  double weight_decay = 0.0;
  double mask_p = 0.3;
  double lambda_ce = 1.0;
  int patience = 20;  // early-stopping window on validation loss
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};  // sweep repeats

  void validate() const;
};

ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
nlohmann::json experiment_config_to_json(const ExperimentConfig& cfg);

struct EpochStat {
  int epoch = 0;
  double train_loss = 0.0;
  double valid_loss = 0.0;
  double seconds = 0.0;
};

struct ExperimentResult {
  bool finished = false;
  std::string metric_name;  // "auroc" or "r2"
  double test_metric = 0.0;
  std::vector<EpochStat> pretrain;
  std::vector<EpochStat> finetune;
  int best_epoch = -1;
  bool early_stopped = false;
  double train_seconds_per_epoch = 0.0;  // mean over fine-tune epochs
  double inference_seconds_per_1k = 0.0;
  double total_seconds = 0.0;
  OversmoothingReport report;
  ModelConfig model_config;  // config after dataset binding
};

nlohmann::json result_to_json(const ExperimentResult& result);

struct TrainedModel {
  ModelConfig config;
  ParamStore params;
};

// Optional masked pretraining, then supervised fine-tuning with
// patience-based early stopping on the validation loss (best parameters are
// restored), then the test metric: AUROC for classification (macro
// one-vs-rest when multiclass), R^2 for regression. Fills `out`
// incrementally so a failure still leaves the completed epochs readable.
void run_experiment_into(const ExperimentConfig& cfg, ExperimentResult& out,
                         TrainedModel* trained = nullptr);
ExperimentResult run_experiment(const ExperimentConfig& cfg, TrainedModel* trained = nullptr);

enum class SweepAxis { OrderK, Basis, Attention };
SweepAxis sweep_axis_from_string(const std::string& name);
std::string to_string(SweepAxis axis);

struct SweepCell {
  std::string axis_value;
  std::vector<double> metrics;       // one per successful seed
  std::vector<std::string> errors;   // one per failed seed
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation
};

struct SweepTable {
  std::string axis_name;
  std::string metric_name;
  std::vector<SweepCell> cells;
};

// Runs the base config across the axis values (order 2/3/5/10, the four
// bases, or vanilla-vs-filter) x the config's seed list. Individual run
// failures are recorded in the cell and the sweep continues.
SweepTable sweep(const ExperimentConfig& base, SweepAxis axis);
std::string sweep_to_csv(const SweepTable& table);

}  // namespace cheatt
