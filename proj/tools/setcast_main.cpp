#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "setcast/analysis.hpp"
#include "setcast/synthgen.hpp"
#include "setcast/train.hpp"

namespace {

nlohmann::json load_json_file(const std::string& path) {
  if (path.empty()) return nlohmann::json::object();
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config file " + path);
  nlohmann::json j;
  in >> j;
  return j;
}

setcast::DataTable load_table(const std::string& dir, setcast::SynthDataset& ds) {
  ds = setcast::load_dataset(dir);
  return setcast::DataTable::build(ds);
}

void ensure_dir(const std::string& dir) {
  std::filesystem::create_directories(dir);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"social-exchange engagement forecasting toolkit"};
  app.require_subcommand(1);

  std::string config_path, data_dir, out_path, checkpoint_path;
  std::uint64_t seed = 0;

  auto* generate = app.add_subcommand("generate", "simulate a synthetic dataset");
  generate->add_option("--config", config_path, "scenario JSON (preset + overrides)");
  generate->add_option("--seed", seed, "simulation seed")->required();
  generate->add_option("--out", out_path, "output directory")->required();

  auto* train = app.add_subcommand("train", "train a model on a dataset");
  train->add_option("--data", data_dir, "dataset directory")->required();
  train->add_option("--config", config_path, "training config JSON");
  train->add_option("--seed", seed, "training seed")->required();
  train->add_option("--out", out_path, "checkpoint output path")->required();

  auto* evaluate = app.add_subcommand("evaluate", "evaluate a checkpoint on the test split");
  evaluate->add_option("--data", data_dir, "dataset directory")->required();
  evaluate->add_option("--checkpoint", checkpoint_path, "checkpoint path")->required();
  evaluate->add_option("--out", out_path, "output directory for eval.csv")->required();

  auto* ablate = app.add_subcommand("ablate", "train the full model and every ablation");
  ablate->add_option("--data", data_dir, "dataset directory")->required();
  ablate->add_option("--config", config_path, "training config JSON");
  ablate->add_option("--seed", seed, "training seed")->required();
  ablate->add_option("--out", out_path, "output directory for ablation.csv")->required();

  auto* analyze = app.add_subcommand("analyze", "dump memory and exchange-rate diagnostics");
  analyze->add_option("--data", data_dir, "dataset directory")->required();
  analyze->add_option("--checkpoint", checkpoint_path, "checkpoint path")->required();
  analyze->add_option("--out", out_path, "output directory for diagnostics CSVs")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;  // usage errors exit 1, --help exits 0
  }

  try {
    if (generate->parsed()) {
      setcast::Scenario sc = setcast::scenario_from_json(load_json_file(config_path));
      setcast::SynthDataset ds = setcast::simulate(sc, seed);
      ensure_dir(out_path);
      setcast::emit_dataset(ds, out_path);
      std::cout << "wrote " << ds.instances.size() << " records to " << out_path << "\n";
    } else if (train->parsed()) {
      setcast::SynthDataset ds;
      setcast::DataTable table = load_table(data_dir, ds);
      setcast::TrainConfig cfg = setcast::train_config_from_json(load_json_file(config_path));
      setcast::Trainer trainer(cfg, table, seed);
      trainer.calibrate();
      trainer.train();
      trainer.save(out_path);
      nlohmann::json summary;
      summary["epochs"] = trainer.epochs_done();
      summary["train_loss"] = trainer.last_train_loss();
      summary["val"] = trainer.evaluate_val().to_json();
      std::cout << summary.dump(2) << "\n";
    } else if (evaluate->parsed()) {
      setcast::SynthDataset ds;
      setcast::DataTable table = load_table(data_dir, ds);
      setcast::Trainer trainer = setcast::Trainer::load(checkpoint_path, table);
      setcast::EvalReport report = trainer.evaluate_test();
      ensure_dir(out_path);
      setcast::write_eval_csv(out_path + "/eval.csv", report, table.platforms);
      std::cout << report.to_json().dump(2) << "\n";
    } else if (ablate->parsed()) {
      setcast::SynthDataset ds;
      setcast::DataTable table = load_table(data_dir, ds);
      setcast::TrainConfig cfg = setcast::train_config_from_json(load_json_file(config_path));
      auto reports = setcast::run_ablations(
          cfg, table, seed,
          {setcast::Ablation::kNone, setcast::Ablation::kNoFilm, setcast::Ablation::kNoDis,
           setcast::Ablation::kNoBelief, setcast::Ablation::kNoMemory});
      ensure_dir(out_path);
      setcast::write_ablation_csv(out_path + "/ablation.csv", reports);
      for (const auto& [name, r] : reports)
        std::cout << name << ": test mape " << r.model_mape << "\n";
    } else if (analyze->parsed()) {
      setcast::SynthDataset ds;
      setcast::DataTable table = load_table(data_dir, ds);
      setcast::Trainer trainer = setcast::Trainer::load(checkpoint_path, table);
      setcast::EvalReport report = trainer.evaluate_test();
      ensure_dir(out_path);
      setcast::write_memory_weights_csv(out_path + "/memory_weights.csv",
                                        setcast::analyze_memory_weights(report));
      setcast::write_exchange_rates_csv(out_path + "/exchange_rates.csv",
                                        trainer.model().film(), trainer.store());
      std::cout << "wrote diagnostics to " << out_path << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
