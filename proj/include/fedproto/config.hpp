#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedproto/local_train.hpp"
#include "fedproto/orchestrator.hpp"
#include "fedproto/task_model.hpp"

namespace fedproto {

enum class SourceKind { Synthetic, Csv };

struct DatasetSpec {
  SourceKind source = SourceKind::Synthetic;
  std::string path;
  std::size_t samples = 2000;
  std::size_t features = 10;
  int classes = 4;
  double separation = 2.0;
  bool operator==(const DatasetSpec&) const = default;
};

enum class ProfileKind { Uniform, Skewed, Custom };

struct PartitionSpec {
  SourceKind source = SourceKind::Synthetic;
  std::string path;
  std::size_t clients = 33;
  double concentration = 0.5;
  ProfileKind profile = ProfileKind::Skewed;
  std::vector<double> custom_profile;
  bool operator==(const PartitionSpec&) const = default;
};

struct ReportOptions {
  std::size_t last_k = 5;
  bool per_client = false;
  bool operator==(const ReportOptions&) const = default;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  ModelKind model = ModelKind::MultinomialLogistic;
  std::size_t hidden = 16;
  DatasetSpec dataset;
  PartitionSpec partition;
  std::string plan_name;  // empty => inline phases in `plan`
  FederationPlan plan;
  std::vector<std::string> mask_sample_weight_only;  // segment names
  ClientTrainConfig client_defaults;  // lr/epochs/seed come from the plan
  CheckpointMetric metric = CheckpointMetric::ValAccuracy;
  ReportOptions report;
  std::string output_dir = "out";

  void validate() const;
  bool operator==(const ExperimentConfig&) const = default;
};

// Flat "key = value" format with dotted section prefixes; '#' starts a
// comment. Unknown keys are errors.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config(const std::string& path);
std::string write_config(const ExperimentConfig& config);
void write_config_file(const std::string& path, const ExperimentConfig& config);

/// FEDPROTO_SEED, when set, overrides the config seed.
void apply_env_overrides(ExperimentConfig& config);

}  // namespace fedproto
