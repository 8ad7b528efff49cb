#include <exception>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fedproto/config.hpp"
#include "fedproto/report.hpp"

namespace {

int cmd_run(const std::string& config_path, const std::string& out_override,
            int threads) {
  fedproto::ExperimentConfig config = fedproto::parse_config(config_path);
  fedproto::apply_env_overrides(config);
  const std::string out_dir =
      out_override.empty() ? config.output_dir : out_override;
  const auto artifacts = fedproto::run_experiment(config, out_dir, threads);
  std::cout << "completed " << artifacts.report.rounds.size() << " rounds ("
            << artifacts.scheme_label << "); best "
            << fedproto::checkpoint_metric_name(config.metric) << " = "
            << artifacts.report.checkpoint.best_value << " at round "
            << artifacts.report.checkpoint.best_round << "\n";
  std::cout << "artifacts written to " << out_dir << "\n";
  return 0;
}

int cmd_compare(const std::vector<std::string>& config_paths,
                const std::string& out_dir, int threads) {
  std::vector<fedproto::ExperimentConfig> configs;
  for (const auto& path : config_paths) {
    configs.push_back(fedproto::parse_config(path));
    fedproto::apply_env_overrides(configs.back());
  }
  std::filesystem::create_directories(out_dir);
  const std::string out_path =
      (std::filesystem::path(out_dir) / "comparison.csv").string();
  fedproto::compare_schemes(configs, out_path, threads);
  std::cout << "comparison written to " << out_path << "\n";
  return 0;
}

int cmd_validate(const std::string& config_path) {
  fedproto::ExperimentConfig config = fedproto::parse_config(config_path);
  fedproto::apply_env_overrides(config);
  config.validate();
  std::cout << "config ok: " << config_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated learning protocol simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out;
  int threads = 1;

  auto* run = app.add_subcommand("run", "Run one experiment");
  run->add_option("config", config_path, "experiment config file")->required();
  run->add_option("--out", out, "output directory (overrides config)");
  run->add_option("--threads", threads, "client training threads");

  std::vector<std::string> compare_paths;
  auto* compare =
      app.add_subcommand("compare", "Run several configs differing only in "
                                    "aggregation policy");
  compare->add_option("configs", compare_paths, "config files")
      ->required()
      ->expected(-2);
  compare->add_option("--out", out, "output directory")->required();
  compare->add_option("--threads", threads, "client training threads");

  std::string rounds_path;
  auto* export_plot =
      app.add_subcommand("export-plot", "Convert rounds.csv to long-format "
                                        "plot series");
  export_plot->add_option("rounds", rounds_path, "rounds.csv path")->required();
  export_plot->add_option("--out", out, "output file")->required();

  auto* validate = app.add_subcommand("validate", "Parse and validate a config");
  validate->add_option("config", config_path, "experiment config file")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_path, out, threads);
    if (compare->parsed()) return cmd_compare(compare_paths, out, threads);
    if (export_plot->parsed()) {
      fedproto::export_plot_data(rounds_path, out);
      std::cout << "plot data written to " << out << "\n";
      return 0;
    }
    if (validate->parsed()) return cmd_validate(config_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
