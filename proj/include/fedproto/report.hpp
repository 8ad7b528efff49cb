#pragma once

#include <string>
#include <vector>

#include "fedproto/config.hpp"
#include "fedproto/orchestrator.hpp"

namespace fedproto {

struct RunArtifacts {
  RunReport report;
  Summary summary;
  std::string scheme_label;
};

/// Builds the dataset and partition, runs the federation, and executes it
/// without touching the filesystem. run_experiment adds the disk artifacts.
RunArtifacts execute_experiment(const ExperimentConfig& config, int n_threads);

// Writes rounds.csv, summary.csv and checkpoint.bin into output_dir.
RunArtifacts run_experiment(const ExperimentConfig& config,
                            const std::string& output_dir, int n_threads = 1);

std::string rounds_csv(const RunReport& report, bool per_client);
std::string summary_csv(const std::string& scheme_label, const Summary& summary);

// ≥2 configs differing only in their aggregation policies; writes one summary
// row per config to output_path.
void compare_schemes(const std::vector<ExperimentConfig>& configs,
                     const std::string& output_path, int n_threads = 1);

// rounds.csv -> long-format (round, series, value) CSV with the loss and
// accuracy series.
void export_plot_data(const std::string& rounds_csv_path,
                      const std::string& output_path);

}  // namespace fedproto
