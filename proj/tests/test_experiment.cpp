#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"

#include "cheatt/errors.hpp"
#include "cheatt/experiment.hpp"

using namespace cheatt;

namespace {

// Small enough that a full run takes well under a second.
ExperimentConfig tiny_config() {
  ExperimentConfig ec;
  ec.synthetic.n_rows = 120;
  ec.synthetic.n_continuous = 3;
  ec.synthetic.n_categorical = 1;
  ec.data_seed = 7;
  ec.model.embed_dim = 8;
  ec.model.depth = 1;
  ec.model.n_heads = 2;
  ec.model.poly_order = 2;
  ec.model.ffn_hidden = 8;
  ec.model.head_hidden = 8;
  ec.model.seed = 3;
  ec.finetune_epochs = 3;
  ec.batch_size = 16;
  ec.patience = 20;
  ec.seeds = {3};
  return ec;
}

}  // namespace

TEST_SUITE("experiment") {

TEST_CASE("identical configs reproduce bit for bit") {
  const ExperimentConfig ec = tiny_config();
  TrainedModel ma, mb;
  const ExperimentResult a = run_experiment(ec, &ma);
  const ExperimentResult b = run_experiment(ec, &mb);

  CHECK(a.finished);
  CHECK(a.metric_name == "auroc");
  CHECK(a.test_metric == b.test_metric);
  CHECK(a.best_epoch == b.best_epoch);
  REQUIRE(a.finetune.size() == b.finetune.size());
  for (std::size_t i = 0; i < a.finetune.size(); ++i) {
    CHECK(a.finetune[i].train_loss == b.finetune[i].train_loss);
    CHECK(a.finetune[i].valid_loss == b.finetune[i].valid_loss);
  }
  REQUIRE(ma.params.values().size() == mb.params.values().size());
  for (const auto& kv : ma.params.values()) {
    const auto lhs = kv.second.flat();
    const auto rhs = mb.params.at(kv.first).flat();
    REQUIRE(lhs.size() == rhs.size());
    CHECK(std::equal(lhs.begin(), lhs.end(), rhs.begin()));
  }

  // a different model seed must change the outcome
  ExperimentConfig other = ec;
  other.model.seed = 4;
  CHECK(run_experiment(other).test_metric != a.test_metric);
}

TEST_CASE("zero fine-tune epochs evaluates the untrained model") {
  ExperimentConfig ec = tiny_config();
  ec.finetune_epochs = 0;
  const ExperimentResult r = run_experiment(ec);
  CHECK(r.finished);
  CHECK(r.finetune.empty());
  CHECK(r.best_epoch == -1);
  CHECK_FALSE(r.early_stopped);
  CHECK(r.train_seconds_per_epoch == 0.0);
  // untrained features -> chance-level ranking, generously banded
  CHECK(r.test_metric >= 0.1);
  CHECK(r.test_metric <= 0.9);
  REQUIRE_FALSE(r.report.layers.empty());
}

TEST_CASE("masked pretraining epochs are recorded before fine-tuning") {
  ExperimentConfig ec = tiny_config();
  ec.pretrain_epochs = 2;
  ec.finetune_epochs = 1;
  const ExperimentResult r = run_experiment(ec);
  REQUIRE(r.pretrain.size() == 2);
  for (std::size_t i = 0; i < r.pretrain.size(); ++i) {
    CHECK(r.pretrain[i].epoch == static_cast<int>(i));
    CHECK(std::isfinite(r.pretrain[i].train_loss));
    CHECK(std::isfinite(r.pretrain[i].valid_loss));
  }
  REQUIRE(r.finetune.size() == 1);
  CHECK(r.finished);
}

TEST_CASE("a vanishing learning rate trips the patience stop") {
  ExperimentConfig ec = tiny_config();
  ec.finetune_epochs = 20;
  ec.lr = 1e-15;  // steps too small to beat the improvement threshold
  ec.patience = 2;
  const ExperimentResult r = run_experiment(ec);
  CHECK(r.early_stopped);
  CHECK(r.best_epoch == 0);
  CHECK(r.finetune.size() == 3);  // best epoch + patience window
  CHECK(r.finished);
}

TEST_CASE("regression data switches the test metric to r-squared") {
  ExperimentConfig ec = tiny_config();
  ec.synthetic.task = TaskKind::Regression;
  ec.finetune_epochs = 2;
  const ExperimentResult r = run_experiment(ec);
  CHECK(r.metric_name == "r2");
  CHECK(std::isfinite(r.test_metric));
  CHECK(r.test_metric <= 1.0);
}

TEST_CASE("config validation rejects broken training settings") {
  auto broken = [](void (*mutate)(ExperimentConfig&)) {
    ExperimentConfig ec = tiny_config();
    mutate(ec);
    CHECK_THROWS_AS(ec.validate(), ConfigError);
  };
  broken([](ExperimentConfig& ec) { ec.pretrain_epochs = -1; });
  broken([](ExperimentConfig& ec) { ec.finetune_epochs = -1; });
  broken([](ExperimentConfig& ec) { ec.batch_size = 0; });
  broken([](ExperimentConfig& ec) { ec.lr = 0.0; });
  broken([](ExperimentConfig& ec) { ec.mask_p = 1.5; });
  broken([](ExperimentConfig& ec) { ec.lambda_ce = -0.1; });
  broken([](ExperimentConfig& ec) { ec.patience = 0; });
  broken([](ExperimentConfig& ec) { ec.seeds.clear(); });
}

TEST_CASE("a run that dies mid-flight leaves the completed epochs behind") {
  // explicit folds with no test rows: training works, the test metric throws
  const std::string path = "/tmp/no_test_split.csv";
  {
    std::ofstream out(path);
    out << "x0,x1,x2,fold,target\n";
    for (int i = 0; i < 12; ++i) {
      const char* fold = i < 9 ? "train" : "valid";
      out << 0.1 * i << ',' << 0.3 * i - 1.0 << ',' << (i % 2 ? 0.7 : -0.4) << ','
          << fold << ',' << i % 2 << '\n';
    }
  }
  ExperimentConfig ec = tiny_config();
  ec.data_path = path;
  ec.csv.split_column = "fold";
  ec.csv.categorical_threshold = 0;
  ec.finetune_epochs = 2;

  ExperimentResult out;
  CHECK_THROWS_AS(run_experiment_into(ec, out), DataError);
  CHECK_FALSE(out.finished);
  CHECK(out.finetune.size() == 2);  // both epochs survived the failure
  std::remove(path.c_str());
}

TEST_CASE("attention sweep runs every kind for every seed") {
  ExperimentConfig base = tiny_config();
  base.finetune_epochs = 1;
  base.seeds = {3, 4};
  const SweepTable table = sweep(base, SweepAxis::Attention);
  CHECK(table.axis_name == "attention_kind");
  CHECK(table.metric_name == "auroc");
  REQUIRE(table.cells.size() == 2);
  CHECK(table.cells[0].axis_value == "vanilla");
  CHECK(table.cells[1].axis_value == "cheatt");
  for (const SweepCell& cell : table.cells) {
    REQUIRE(cell.metrics.size() == 2);  // one per seed
    CHECK(cell.errors.empty());
    const double mean = 0.5 * (cell.metrics[0] + cell.metrics[1]);
    CHECK(cell.mean == doctest::Approx(mean).epsilon(1e-15));
    const double ss = (cell.metrics[0] - mean) * (cell.metrics[0] - mean) +
                      (cell.metrics[1] - mean) * (cell.metrics[1] - mean);
    CHECK(cell.stddev == doctest::Approx(std::sqrt(ss)).epsilon(1e-12));
    for (double m : cell.metrics) {
      CHECK(m >= 0.0);
      CHECK(m <= 1.0);
    }
  }

  const std::string csv = sweep_to_csv(table);
  CHECK(csv.rfind("axis,value,metric,mean,std,n_runs,n_failures\n", 0) == 0);
  CHECK(csv.find("attention_kind,vanilla,auroc,") != std::string::npos);
  CHECK(csv.find("attention_kind,cheatt,auroc,") != std::string::npos);
}

TEST_CASE("per-run failures are captured without killing the sweep") {
  ExperimentConfig base = tiny_config();
  base.model.embed_dim = 7;  // indivisible by 2 heads: every run fails
  const SweepTable table = sweep(base, SweepAxis::OrderK);
  REQUIRE(table.cells.size() == 4);
  CHECK(table.cells[0].axis_value == "2");
  CHECK(table.cells[3].axis_value == "10");
  for (const SweepCell& cell : table.cells) {
    CHECK(cell.metrics.empty());
    CHECK(cell.errors.size() == base.seeds.size());
    CHECK(cell.mean == 0.0);
  }
}

TEST_CASE("experiment config json round trips") {
  ExperimentConfig ec;
  ec.synthetic.n_rows = 321;
  ec.synthetic.n_continuous = 5;
  ec.synthetic.n_categorical = 3;
  ec.synthetic.task = TaskKind::Multiclass;
  ec.synthetic.n_classes = 4;
  ec.synthetic.noise = 0.25;
  ec.data_seed = 99;
  ec.model.embed_dim = 16;
  ec.model.depth = 2;
  ec.model.n_heads = 4;
  ec.model.basis = BasisKind::jacobi(1.0, 1.0);
  ec.model.poly_order = 7;
  ec.model.attention_kind = AttentionKind::Vanilla;
  ec.model.ffn_hidden = 24;
  ec.model.head_hidden = 12;
  ec.model.seed = 11;
  ec.pretrain_epochs = 4;
  ec.finetune_epochs = 55;
  ec.batch_size = 8;
  ec.lr = 0.015;
  ec.weight_decay = 0.01;
  ec.mask_p = 0.4;
  ec.lambda_ce = 0.7;
  ec.patience = 9;
  ec.seeds = {8, 9, 10};

  const ExperimentConfig back =
      experiment_config_from_json(experiment_config_to_json(ec));
  CHECK(back.data_path.empty());
  CHECK(back.synthetic.n_rows == 321);
  CHECK(back.synthetic.n_continuous == 5);
  CHECK(back.synthetic.n_categorical == 3);
  CHECK(back.synthetic.task == TaskKind::Multiclass);
  CHECK(back.synthetic.n_classes == 4);
  CHECK(back.synthetic.noise == 0.25);
  CHECK(back.data_seed == 99);
  CHECK(back.model.embed_dim == 16);
  CHECK(back.model.depth == 2);
  CHECK(back.model.n_heads == 4);
  CHECK(to_string(back.model.basis) == "jacobi:1,1");
  CHECK(back.model.poly_order == 7);
  CHECK(back.model.attention_kind == AttentionKind::Vanilla);
  CHECK(back.model.ffn_hidden == 24);
  CHECK(back.model.head_hidden == 12);
  CHECK(back.model.seed == 11);
  CHECK(back.pretrain_epochs == 4);
  CHECK(back.finetune_epochs == 55);
  CHECK(back.batch_size == 8);
  CHECK(back.lr == 0.015);
  CHECK(back.weight_decay == 0.01);
  CHECK(back.mask_p == 0.4);
  CHECK(back.lambda_ce == 0.7);
  CHECK(back.patience == 9);
  CHECK(back.seeds == std::vector<std::uint64_t>{8, 9, 10});

  // file-backed variant carries the csv options instead
  ExperimentConfig file_cfg;
  file_cfg.data_path = "/data/table.csv";
  file_cfg.csv.label_column = "y";
  file_cfg.csv.split_column = "fold";
  file_cfg.csv.task_forced = true;
  file_cfg.csv.task = TaskKind::Regression;
  file_cfg.csv.categorical_threshold = 5;
  file_cfg.data_seed = 13;
  const ExperimentConfig fback =
      experiment_config_from_json(experiment_config_to_json(file_cfg));
  CHECK(fback.data_path == "/data/table.csv");
  CHECK(fback.csv.label_column == "y");
  CHECK(fback.csv.split_column == "fold");
  CHECK(fback.csv.task_forced);
  CHECK(fback.csv.task == TaskKind::Regression);
  CHECK(fback.csv.categorical_threshold == 5);
  CHECK(fback.csv.split_seed == 13);  // split shuffle follows the data seed
}

TEST_CASE("result json carries the run summary") {
  ExperimentConfig ec = tiny_config();
  ec.finetune_epochs = 1;
  const ExperimentResult r = run_experiment(ec);
  const nlohmann::json j = result_to_json(r);
  CHECK(j.at("finished").get<bool>());
  CHECK(j.at("metric_name").get<std::string>() == "auroc");
  CHECK(j.at("test_metric").get<double>() == r.test_metric);
  CHECK(j.at("best_epoch").get<int>() == r.best_epoch);
  CHECK(j.contains("early_stopped"));
  CHECK(j.contains("train_seconds_per_epoch"));
  CHECK(j.contains("inference_seconds_per_1k"));
  CHECK(j.contains("total_seconds"));
  REQUIRE(j.at("finetune").size() == 1);
  const nlohmann::json& e = j.at("finetune")[0];
  CHECK(e.at("epoch").get<int>() == 0);
  CHECK(e.at("train_loss").get<double>() == r.finetune[0].train_loss);
  CHECK(e.at("valid_loss").get<double>() == r.finetune[0].valid_loss);
  CHECK(j.contains("report"));
  CHECK(j.at("config").at("embed_dim").get<int>() == 8);
}

}  // TEST_SUITE
