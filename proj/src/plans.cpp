#include "fedproto/plans.hpp"

#include <stdexcept>

namespace fedproto {

namespace {

ServerOptConfig adam_server(double lr) {
  ServerOptConfig config;
  config.kind = ServerOptKind::AdamVariant;
  config.lr = lr;
  config.beta1 = 0.9;
  config.beta2 = 0.99;
  config.tau = 0.001;
  return config;
}

PhaseSpec single_phase(int start, int end, Scheme scheme,
                       ServerOptConfig server,
                       std::vector<LrScheduleEntry> client_lr) {
  PhaseSpec phase;
  phase.start_round = start;
  phase.end_round = end;
  phase.aggregation.scheme = scheme;
  phase.server = server;
  phase.client_lr = std::move(client_lr);
  phase.epochs_per_round = 1;
  phase.selection = {SelectionKind::All, 0};
  return phase;
}

}  // namespace

std::vector<std::string> builtin_plan_names() {
  return {"optalgo-a", "optalgo-b", "optalgo-c", "rolepro-submission"};
}

FederationPlan builtin_plan(const std::string& name) {
  FederationPlan plan;
  if (name == "optalgo-a") {
    ServerOptConfig sgd;
    sgd.kind = ServerOptKind::Sgd;
    sgd.lr = 1.0;
    plan.phases = {single_phase(1, 13, Scheme::FedAvg, sgd,
                                {{1, 5e-5}, {8, 5e-6}})};
    plan.max_rounds = 13;
  } else if (name == "optalgo-b") {
    ServerOptConfig momentum;
    momentum.kind = ServerOptKind::Momentum;
    momentum.lr = 0.1;
    momentum.beta = 0.9;
    plan.phases = {single_phase(1, 13, Scheme::FedAvg, momentum,
                                {{1, 5e-4}, {8, 5e-5}})};
    plan.max_rounds = 13;
  } else if (name == "optalgo-c") {
    plan.phases = {
        single_phase(1, 13, Scheme::FedAvg, adam_server(0.001), {{1, 5e-4}})};
    plan.max_rounds = 13;
  } else if (name == "rolepro-submission") {
    PhaseSpec warmup =
        single_phase(1, 3, Scheme::FedAvg, adam_server(0.003), {{1, 5e-4}});
    PhaseSpec finetune =
        single_phase(4, 16, Scheme::RegAgg, adam_server(0.002), {{4, 5e-5}});
    plan.phases = {warmup, finetune};
    plan.max_rounds = 16;
  } else {
    throw std::invalid_argument("unknown built-in plan: " + name);
  }
  return plan;
}

}  // namespace fedproto
