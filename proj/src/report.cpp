#include "fedproto/report.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "fedproto/checkpoint.hpp"
#include "fedproto/dataset.hpp"
#include "fedproto/plans.hpp"

namespace fedproto {

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<ClientDataset> build_partition(const ExperimentConfig& config,
                                           const Dataset& dataset) {
  if (config.partition.source == SourceKind::Csv) {
    return build_clients(dataset, load_partition_csv(config.partition.path),
                         config.seed);
  }
  std::vector<double> profile;
  switch (config.partition.profile) {
    case ProfileKind::Uniform:
      profile = uniform_profile(config.partition.clients);
      break;
    case ProfileKind::Skewed:
      profile = skewed_profile(config.partition.clients);
      break;
    case ProfileKind::Custom:
      profile = config.partition.custom_profile;
      break;
  }
  return partition_skewed(dataset, config.partition.clients,
                          config.partition.concentration, profile, config.seed);
}

SegmentPolicyMask build_mask(const ExperimentConfig& config,
                             const Layout& layout) {
  SegmentPolicyMask mask = SegmentPolicyMask::all_robust(layout);
  for (const auto& name : config.mask_sample_weight_only) {
    bool found = false;
    for (std::size_t s = 0; s < layout.size(); ++s) {
      if (layout[s].name == name) {
        mask.per_segment[s] = SegmentPolicy::SampleWeightOnly;
        found = true;
      }
    }
    if (!found) {
      throw std::invalid_argument("mask names unknown segment '" + name + "'");
    }
  }
  return mask;
}

std::string scheme_label_of(const FederationPlan& plan) {
  std::string label;
  std::set<std::string> seen;
  for (const auto& phase : plan.phases) {
    const std::string name = scheme_name(phase.aggregation.scheme);
    if (seen.insert(name).second) {
      if (!label.empty()) label += "+";
      label += name;
    }
  }
  return label;
}

// Configs are comparable for `compare` when they agree on everything except
// the per-phase aggregation policies.
std::string policy_blind_text(const ExperimentConfig& config) {
  ExperimentConfig copy = config;
  copy.plan_name.clear();
  for (auto& phase : copy.plan.phases) phase.aggregation = AggregationPolicy{};
  return write_config(copy);
}

}  // namespace

RunArtifacts execute_experiment(const ExperimentConfig& config, int n_threads) {
  config.validate();

  Dataset dataset = config.dataset.source == SourceKind::Csv
                        ? load_dataset_csv(config.dataset.path)
                        : make_synthetic_dataset(
                              config.dataset.samples, config.dataset.features,
                              config.dataset.classes, config.dataset.separation,
                              config.seed);
  const std::vector<ClientDataset> clients = build_partition(config, dataset);

  TaskModel model;
  model.kind = config.model;
  model.input_dim = dataset.n_features;
  model.n_classes = dataset.n_classes;
  model.hidden = config.model == ModelKind::OneHiddenLayerNet ? config.hidden : 0;

  RunOptions options;
  options.client = config.client_defaults;
  options.mask = build_mask(config, model.layout());
  options.checkpoint_metric = config.metric;
  options.n_threads = n_threads;

  RunArtifacts artifacts;
  artifacts.report = run_federation(config.plan, clients, model, options);
  artifacts.summary = summarize(artifacts.report, config.report.last_k);
  artifacts.scheme_label = scheme_label_of(config.plan);
  return artifacts;
}

std::string rounds_csv(const RunReport& report, bool per_client) {
  std::stringstream os;
  os << "round,aggregator,agg_loss,agg_acc,lambda_c,lambda_s,sim_minutes,"
        "cum_minutes";
  if (per_client && !report.rounds.empty()) {
    for (const auto& cm : report.rounds.front().client_metrics) {
      const std::string id = std::to_string(cm.client_id);
      os << ",c" << id << "_loss,c" << id << "_acc,c" << id << "_pre,c" << id
         << "_post";
    }
  }
  os << "\n";
  for (const auto& log : report.rounds) {
    os << log.round << "," << log.aggregator << "," << fmt(log.agg_val_loss)
       << "," << fmt(log.agg_val_acc) << "," << fmt(log.lambda_c) << ","
       << fmt(log.lambda_s) << "," << fmt(log.round_minutes) << ","
       << fmt(log.cum_minutes);
    if (per_client) {
      for (const auto& cm : log.client_metrics) {
        os << "," << fmt(cm.val_loss) << "," << fmt(cm.val_accuracy) << ","
           << (cm.participated && !cm.failed ? fmt(cm.pre_loss) : "")
           << ","
           << (cm.participated && !cm.failed ? fmt(cm.post_loss) : "");
      }
    }
    os << "\n";
  }
  return os.str();
}

std::string summary_csv(const std::string& scheme_label,
                        const Summary& summary) {
  std::stringstream os;
  os << "scheme,best_acc,avg_acc_last_k,best_loss,avg_loss_last_k\n";
  os << scheme_label << "," << fmt(summary.best_acc) << ","
     << fmt(summary.avg_acc_last_k) << "," << fmt(summary.best_loss) << ","
     << fmt(summary.avg_loss_last_k) << "\n";
  return os.str();
}

RunArtifacts run_experiment(const ExperimentConfig& config,
                            const std::string& output_dir, int n_threads) {
  std::filesystem::create_directories(output_dir);
  RunArtifacts artifacts = execute_experiment(config, n_threads);

  const auto dir = std::filesystem::path(output_dir);
  {
    std::ofstream os(dir / "rounds.csv", std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write rounds.csv");
    os << rounds_csv(artifacts.report, config.report.per_client);
    if (!os) throw std::runtime_error("rounds.csv write failed");
  }
  {
    std::ofstream os(dir / "summary.csv", std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write summary.csv");
    os << summary_csv(artifacts.scheme_label, artifacts.summary);
    if (!os) throw std::runtime_error("summary.csv write failed");
  }
  {
    CheckpointFile file;
    file.params = artifacts.report.checkpoint.has_best
                      ? artifacts.report.checkpoint.best_params
                      : artifacts.report.final_params;
    file.extra.push_back(
        {"m", {artifacts.report.final_opt_state.m.values().begin(),
               artifacts.report.final_opt_state.m.values().end()}});
    file.extra.push_back(
        {"v", {artifacts.report.final_opt_state.v.values().begin(),
               artifacts.report.final_opt_state.v.values().end()}});
    file.extra.push_back(
        {"step",
         {static_cast<double>(artifacts.report.final_opt_state.step)}});
    write_checkpoint((dir / "checkpoint.bin").string(), file);
  }
  return artifacts;
}

void compare_schemes(const std::vector<ExperimentConfig>& configs,
                     const std::string& output_path, int n_threads) {
  if (configs.size() < 2) {
    throw std::invalid_argument("compare_schemes: need at least 2 configs");
  }
  const std::string reference = policy_blind_text(configs.front());
  for (const auto& config : configs) {
    if (policy_blind_text(config) != reference) {
      throw std::invalid_argument(
          "compare_schemes: configs differ in more than the aggregation policy");
    }
  }
  std::stringstream os;
  os << "scheme,best_acc,avg_acc_last_k,best_loss,avg_loss_last_k\n";
  for (const auto& config : configs) {
    RunArtifacts artifacts = execute_experiment(config, n_threads);
    os << artifacts.scheme_label << "," << fmt(artifacts.summary.best_acc)
       << "," << fmt(artifacts.summary.avg_acc_last_k) << ","
       << fmt(artifacts.summary.best_loss) << ","
       << fmt(artifacts.summary.avg_loss_last_k) << "\n";
  }
  std::ofstream out(output_path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + output_path);
  out << os.str();
}

void export_plot_data(const std::string& rounds_csv_path,
                      const std::string& output_path) {
  std::ifstream is(rounds_csv_path);
  if (!is) throw std::runtime_error("cannot open " + rounds_csv_path);
  std::string line;
  if (!std::getline(is, line) || line.rfind("round,aggregator,agg_loss,agg_acc", 0) != 0) {
    throw std::runtime_error("unexpected rounds.csv header in " +
                             rounds_csv_path);
  }
  std::stringstream os;
  os << "round,series,value\n";
  std::size_t n_rows = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string round, aggregator, loss, acc;
    if (!std::getline(ss, round, ',') || !std::getline(ss, aggregator, ',') ||
        !std::getline(ss, loss, ',') || !std::getline(ss, acc, ',')) {
      throw std::runtime_error("malformed rounds.csv row: " + line);
    }
    os << round << ",loss," << loss << "\n";
    os << round << ",accuracy," << acc << "\n";
    ++n_rows;
  }
  if (n_rows == 0) {
    throw std::runtime_error("rounds.csv has no data rows: " + rounds_csv_path);
  }
  std::ofstream out(output_path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + output_path);
  out << os.str();
}

}  // namespace fedproto
