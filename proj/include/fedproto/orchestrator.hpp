#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fedproto/aggregation.hpp"
#include "fedproto/dataset.hpp"
#include "fedproto/local_train.hpp"
#include "fedproto/param_vector.hpp"
#include "fedproto/server_opt.hpp"
#include "fedproto/task_model.hpp"

namespace fedproto {

struct LrScheduleEntry {
  int from_round = 1;
  double lr = 0.0;
  bool operator==(const LrScheduleEntry&) const = default;
};

double lr_for_round(const std::vector<LrScheduleEntry>& schedule, int round);

enum class SelectionKind { All, RandomFair };

struct SelectionStrategy {
  SelectionKind kind = SelectionKind::All;
  std::size_t k = 0;  // RandomFair only
  bool operator==(const SelectionStrategy&) const = default;
};

// `all` returns every id; `random_fair(k)` rotates a seeded-shuffled queue so
// every client appears at least once per ceil(C/k) rounds.
std::vector<int> select_clients(const SelectionStrategy& strategy, int round,
                                const std::vector<int>& all_client_ids,
                                std::uint64_t seed);

struct PhaseSpec {
  int start_round = 1;
  int end_round = 1;
  AggregationPolicy aggregation;
  ServerOptConfig server;
  std::vector<LrScheduleEntry> client_lr;
  int epochs_per_round = 1;
  SelectionStrategy selection;
  bool operator==(const PhaseSpec&) const = default;
};

struct CostModel {
  std::vector<double> train_cost = {0.0};  // per client, or one value for all
  double validation_cost = 0.0;
  double communication_cost = 0.0;

  double train_cost_for(int client_id) const;
  bool operator==(const CostModel&) const = default;
};

struct FederationPlan {
  std::vector<PhaseSpec> phases;
  int max_rounds = 1;
  double time_budget = 10080.0;  // sim-minutes; default one week
  CostModel cost;
  std::uint64_t seed = 0;
  bool reset_opt_state_on_phase = false;

  void validate() const;
  const PhaseSpec& phase_for(int round) const;
  bool operator==(const FederationPlan&) const = default;
};

struct SimClock {
  double cumulative = 0.0;
  double budget = 10080.0;
};

struct RoundCosts {
  double communication = 0.0;
  std::vector<double> train_selected;
  double validation = 0.0;
};

double round_cost(const RoundCosts& costs);
// Advances by comm + slowest selected trainer + validation; returns true once
// cumulative >= budget.
bool advance_clock(SimClock& clock, const RoundCosts& costs);

struct ClientRoundMetrics {
  int client_id = 0;
  double val_loss = 0.0;      // on the round's broadcast model
  double val_accuracy = 0.0;  // on the round's broadcast model
  double pre_loss = 0.0;      // participants only
  double post_loss = 0.0;     // participants only
  bool participated = false;
  bool failed = false;
};

struct RoundLog {
  int round = 0;
  std::vector<int> participants;
  std::vector<ClientRoundMetrics> client_metrics;
  double agg_val_loss = 0.0;  // of the post-step global model
  double agg_val_acc = 0.0;
  double lambda_c = 0.0;
  double lambda_s = 0.0;
  std::string aggregator;
  double round_minutes = 0.0;
  double cum_minutes = 0.0;
};

enum class CheckpointMetric { ValAccuracy, ValLoss };

std::string checkpoint_metric_name(CheckpointMetric metric);
CheckpointMetric checkpoint_metric_from_name(const std::string& name);

struct CheckpointStore {
  CheckpointMetric key = CheckpointMetric::ValAccuracy;
  bool has_best = false;
  ParamVector best_params;
  double best_value = 0.0;
  int best_round = 0;

  // Strict improvement required; ties keep the earlier round.
  bool update(int round, const ParamVector& params, double metric_value);
};

struct RunReport {
  std::vector<RoundLog> rounds;
  CheckpointStore checkpoint;
  ParamVector final_params;
  ServerOptState final_opt_state;
};

struct RunOptions {
  ClientTrainConfig client;  // lr/epochs/seed overwritten per phase and plan
  SegmentPolicyMask mask;    // empty => all segments robust-aggregated
  CheckpointMetric checkpoint_metric = CheckpointMetric::ValAccuracy;
  int n_threads = 1;
};

RunReport run_federation(const FederationPlan& plan,
                         const std::vector<ClientDataset>& clients,
                         const TaskModel& model, const RunOptions& options);

struct Summary {
  double best_acc = 0.0;
  double avg_acc_last_k = 0.0;
  double best_loss = 0.0;
  double avg_loss_last_k = 0.0;
};

Summary summarize(const RunReport& report, std::size_t last_k);

}  // namespace fedproto
