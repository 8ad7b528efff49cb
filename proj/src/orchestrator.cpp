#include "fedproto/orchestrator.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "fedproto/rng.hpp"

namespace fedproto {

double lr_for_round(const std::vector<LrScheduleEntry>& schedule, int round) {
  if (schedule.empty()) {
    throw std::invalid_argument("lr_for_round: empty schedule");
  }
  if (round < schedule.front().from_round) {
    throw std::invalid_argument("lr_for_round: round precedes first entry");
  }
  double lr = schedule.front().lr;
  for (const auto& entry : schedule) {
    if (entry.from_round <= round) lr = entry.lr;
  }
  return lr;
}

std::vector<int> select_clients(const SelectionStrategy& strategy, int round,
                                const std::vector<int>& all_client_ids,
                                std::uint64_t seed) {
  if (all_client_ids.empty()) {
    throw std::invalid_argument("select_clients: empty client set");
  }
  std::vector<int> ids = all_client_ids;
  std::sort(ids.begin(), ids.end());
  if (strategy.kind == SelectionKind::All) return ids;

  const std::size_t c = ids.size();
  const std::size_t k = strategy.k;
  if (k == 0 || k > c) {
    throw std::invalid_argument("select_clients: k must be in [1, #clients]");
  }
  if (k == c) return ids;

  const std::size_t epoch_len = (c + k - 1) / k;
  const std::size_t epoch = static_cast<std::size_t>(round - 1) / epoch_len;
  Rng rng(derive_seed(seed, 0x73656c /* "sel" */, epoch));
  std::shuffle(ids.begin(), ids.end(), rng);
  const std::size_t pos = (static_cast<std::size_t>(round - 1) % epoch_len) * k;
  std::vector<int> selected;
  selected.reserve(k);
  for (std::size_t i = 0; i < k; ++i) selected.push_back(ids[(pos + i) % c]);
  std::sort(selected.begin(), selected.end());
  selected.erase(std::unique(selected.begin(), selected.end()),
                 selected.end());
  return selected;
}

double CostModel::train_cost_for(int client_id) const {
  if (train_cost.empty()) return 0.0;
  if (train_cost.size() == 1) return train_cost[0];
  const std::size_t idx = static_cast<std::size_t>(client_id - 1);
  if (idx >= train_cost.size()) {
    throw std::invalid_argument("CostModel: no train cost for client " +
                                std::to_string(client_id));
  }
  return train_cost[idx];
}

void FederationPlan::validate() const {
  if (phases.empty()) {
    throw std::invalid_argument("FederationPlan: no phases");
  }
  if (!(time_budget > 0.0)) {
    throw std::invalid_argument("FederationPlan: budget must be > 0");
  }
  int expected_start = 1;
  for (const auto& phase : phases) {
    if (phase.start_round != expected_start || phase.end_round < phase.start_round) {
      throw std::invalid_argument(
          "FederationPlan: phases must be contiguous from round 1");
    }
    expected_start = phase.end_round + 1;
    phase.aggregation.validate();
    phase.server.validate();
    if (phase.client_lr.empty() ||
        phase.client_lr.front().from_round > phase.start_round) {
      throw std::invalid_argument(
          "FederationPlan: client LR schedule must cover the phase start");
    }
    for (std::size_t i = 1; i < phase.client_lr.size(); ++i) {
      if (phase.client_lr[i].from_round <= phase.client_lr[i - 1].from_round) {
        throw std::invalid_argument(
            "FederationPlan: schedule entries must be strictly increasing");
      }
    }
    if (phase.epochs_per_round < 1) {
      throw std::invalid_argument("FederationPlan: epochs_per_round >= 1");
    }
  }
  if (max_rounds != phases.back().end_round) {
    throw std::invalid_argument(
        "FederationPlan: max_rounds must equal the final phase end");
  }
  for (double tc : cost.train_cost) {
    if (tc < 0.0) throw std::invalid_argument("FederationPlan: negative cost");
  }
  if (cost.validation_cost < 0.0 || cost.communication_cost < 0.0) {
    throw std::invalid_argument("FederationPlan: negative cost");
  }
}

const PhaseSpec& FederationPlan::phase_for(int round) const {
  for (const auto& phase : phases) {
    if (round >= phase.start_round && round <= phase.end_round) return phase;
  }
  throw std::out_of_range("FederationPlan: round outside plan");
}

double round_cost(const RoundCosts& costs) {
  double slowest = 0.0;
  for (double tc : costs.train_selected) slowest = std::max(slowest, tc);
  return costs.communication + slowest + costs.validation;
}

bool advance_clock(SimClock& clock, const RoundCosts& costs) {
  clock.cumulative += round_cost(costs);
  return clock.cumulative >= clock.budget;
}

std::string checkpoint_metric_name(CheckpointMetric metric) {
  return metric == CheckpointMetric::ValAccuracy ? "val_accuracy" : "val_loss";
}

CheckpointMetric checkpoint_metric_from_name(const std::string& name) {
  if (name == "val_accuracy") return CheckpointMetric::ValAccuracy;
  if (name == "val_loss") return CheckpointMetric::ValLoss;
  throw std::invalid_argument("unknown checkpoint metric: " + name);
}

bool CheckpointStore::update(int round, const ParamVector& params,
                             double metric_value) {
  if (!std::isfinite(metric_value)) {
    throw std::invalid_argument("CheckpointStore: non-finite metric");
  }
  const bool better =
      !has_best || (key == CheckpointMetric::ValAccuracy
                        ? metric_value > best_value
                        : metric_value < best_value);
  if (better) {
    has_best = true;
    best_params = params;
    best_value = metric_value;
    best_round = round;
  }
  return better;
}

namespace {

struct TrainOutcome {
  bool failed = false;
  ClientUpdate update;
};

// Client training is embarrassingly parallel; seeds are derived per client so
// the result is identical at any thread count.
std::vector<TrainOutcome> train_selected(
    const TaskModel& model, const ParamVector& broadcast,
    const std::vector<const ClientDataset*>& selected,
    const ClientTrainConfig& config, int round, int n_threads) {
  std::vector<TrainOutcome> outcomes(selected.size());
  std::exception_ptr error;
  std::mutex error_mutex;
  auto work = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t i = begin; i < selected.size(); i += stride) {
      try {
        outcomes[i].update =
            local_train(model, broadcast, *selected[i], config, round);
      } catch (const ClientFailure&) {
        outcomes[i].failed = true;
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::max(1, n_threads);
  if (threads == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back(work, t, threads);
    }
    for (auto& th : pool) th.join();
  }
  if (error) std::rethrow_exception(error);
  return outcomes;
}

struct GlobalEval {
  std::vector<EvalResult> per_client;  // indexed like `clients`
  double agg_loss = 0.0;
  double agg_acc = 0.0;
};

GlobalEval evaluate_all(const TaskModel& model, const ParamVector& params,
                        const std::vector<ClientDataset>& clients) {
  GlobalEval eval;
  eval.per_client.reserve(clients.size());
  double total = 0.0;
  for (const auto& client : clients) {
    EvalResult r = evaluate(model, params, client.val);
    const double w = static_cast<double>(client.val.size());
    eval.agg_loss += w * r.loss;
    eval.agg_acc += w * r.accuracy;
    total += w;
    eval.per_client.push_back(r);
  }
  eval.agg_loss /= total;
  eval.agg_acc /= total;
  return eval;
}

}  // namespace

RunReport run_federation(const FederationPlan& plan,
                         const std::vector<ClientDataset>& clients,
                         const TaskModel& model, const RunOptions& options) {
  plan.validate();
  if (clients.empty()) {
    throw std::invalid_argument("run_federation: no clients");
  }

  // Clients are indexed in ascending id order throughout.
  std::vector<const ClientDataset*> by_id(clients.size());
  for (std::size_t i = 0; i < clients.size(); ++i) by_id[i] = &clients[i];
  std::sort(by_id.begin(), by_id.end(), [](const auto* a, const auto* b) {
    return a->client_id < b->client_id;
  });
  std::vector<ClientDataset> ordered;
  ordered.reserve(clients.size());
  for (const auto* c : by_id) ordered.push_back(*c);
  std::vector<int> all_ids;
  for (const auto& c : ordered) all_ids.push_back(c.client_id);

  ParamVector global = model.init_params(plan.seed);
  SegmentPolicyMask mask = options.mask.per_segment.empty()
                               ? SegmentPolicyMask::all_robust(global.layout())
                               : options.mask;
  mask.check_covers(global.layout());

  ServerOptState opt_state = ServerOptState::fresh(global.layout());
  LossHistory history;
  SimClock clock{0.0, plan.time_budget};

  RunReport report;
  report.checkpoint.key = options.checkpoint_metric;

  GlobalEval broadcast_eval = evaluate_all(model, global, ordered);
  const PhaseSpec* prev_phase = nullptr;

  for (int round = 1; round <= plan.max_rounds; ++round) {
    const PhaseSpec& phase = plan.phase_for(round);
    if (prev_phase != nullptr && prev_phase != &phase &&
        plan.reset_opt_state_on_phase) {
      opt_state = ServerOptState::fresh(global.layout());
    }
    prev_phase = &phase;

    const double lambda_c = lr_for_round(phase.client_lr, round);
    const std::vector<int> selected_ids =
        select_clients(phase.selection, round, all_ids, plan.seed);

    // A round that would blow the budget is never started.
    RoundCosts costs;
    costs.communication = plan.cost.communication_cost;
    costs.validation = plan.cost.validation_cost;
    for (int id : selected_ids) {
      costs.train_selected.push_back(plan.cost.train_cost_for(id));
    }
    if (clock.cumulative + round_cost(costs) > clock.budget) break;

    std::vector<const ClientDataset*> selected;
    for (const auto& client : ordered) {
      if (std::binary_search(selected_ids.begin(), selected_ids.end(),
                             client.client_id)) {
        selected.push_back(&client);
      }
    }

    ClientTrainConfig train_config = options.client;
    train_config.lr = lambda_c;
    train_config.epochs_per_round = phase.epochs_per_round;
    train_config.run_seed = plan.seed;
    const auto outcomes = train_selected(model, global, selected, train_config,
                                         round, options.n_threads);

    std::vector<ClientUpdate> updates;
    for (const auto& outcome : outcomes) {
      if (!outcome.failed) updates.push_back(outcome.update);
    }
    if (updates.empty()) {
      throw std::runtime_error("run_federation: every selected client failed");
    }

    const ParamVector aggregate_params =
        aggregate(phase.aggregation, updates, history, mask);
    ServerStepResult stepped =
        server_step(phase.server, opt_state, global, aggregate_params);
    global = std::move(stepped.params);
    opt_state = std::move(stepped.state);
    for (const auto& update : updates) {
      history[update.client_id] = update.post_loss;
    }

    GlobalEval post_eval = evaluate_all(model, global, ordered);
    const double metric = options.checkpoint_metric == CheckpointMetric::ValAccuracy
                              ? post_eval.agg_acc
                              : post_eval.agg_loss;
    report.checkpoint.update(round, global, metric);

    const bool exhausted = advance_clock(clock, costs);

    RoundLog log;
    log.round = round;
    log.participants = selected_ids;
    log.lambda_c = lambda_c;
    log.lambda_s = phase.server.lr;
    log.aggregator = scheme_name(phase.aggregation.scheme);
    log.agg_val_loss = post_eval.agg_loss;
    log.agg_val_acc = post_eval.agg_acc;
    log.round_minutes = round_cost(costs);
    log.cum_minutes = clock.cumulative;
    for (std::size_t i = 0; i < ordered.size(); ++i) {
      ClientRoundMetrics cm;
      cm.client_id = ordered[i].client_id;
      cm.val_loss = broadcast_eval.per_client[i].loss;
      cm.val_accuracy = broadcast_eval.per_client[i].accuracy;
      log.client_metrics.push_back(cm);
    }
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
      auto it = std::find_if(log.client_metrics.begin(),
                             log.client_metrics.end(), [&](const auto& cm) {
                               return cm.client_id == selected[i]->client_id;
                             });
      it->participated = true;
      it->failed = outcomes[i].failed;
      if (!outcomes[i].failed) {
        it->pre_loss = outcomes[i].update.pre_loss;
        it->post_loss = outcomes[i].update.post_loss;
      }
    }
    report.rounds.push_back(std::move(log));

    broadcast_eval = std::move(post_eval);
    if (exhausted) break;
  }

  report.final_params = global;
  report.final_opt_state = opt_state;
  return report;
}

Summary summarize(const RunReport& report, std::size_t last_k) {
  if (report.rounds.size() < last_k || last_k == 0) {
    throw std::invalid_argument("summarize: report shorter than last_k");
  }
  Summary s;
  s.best_acc = report.rounds[0].agg_val_acc;
  s.best_loss = report.rounds[0].agg_val_loss;
  for (const auto& log : report.rounds) {
    s.best_acc = std::max(s.best_acc, log.agg_val_acc);
    s.best_loss = std::min(s.best_loss, log.agg_val_loss);
  }
  const std::size_t start = report.rounds.size() - last_k;
  for (std::size_t i = start; i < report.rounds.size(); ++i) {
    s.avg_acc_last_k += report.rounds[i].agg_val_acc;
    s.avg_loss_last_k += report.rounds[i].agg_val_loss;
  }
  s.avg_acc_last_k /= static_cast<double>(last_k);
  s.avg_loss_last_k /= static_cast<double>(last_k);
  return s;
}

}  // namespace fedproto
