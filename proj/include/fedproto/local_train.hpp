#pragma once

#include <cstdint>
#include <stdexcept>

#include "fedproto/aggregation.hpp"
#include "fedproto/dataset.hpp"
#include "fedproto/task_model.hpp"

namespace fedproto {

struct ClientTrainConfig {
  int epochs_per_round = 1;
  double lr = 5e-4;  // lambda_c
  std::size_t batch_size = 32;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double tau = 0.001;
  std::uint64_t run_seed = 0;

  void validate() const;
  bool operator==(const ClientTrainConfig&) const = default;
};

/// Raised when a client's training produces non-finite values; the
/// orchestrator drops the client for the round instead of crashing.
struct ClientFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Runs epochs_per_round passes of mini-batch Adam over the client's train
// split; Adam state starts fresh each round. The mini-batch order is a seeded
// shuffle derived from (run_seed, client_id, round).
ClientUpdate local_train(const TaskModel& model, const ParamVector& broadcast,
                         const ClientDataset& client,
                         const ClientTrainConfig& config, int round);

}  // namespace fedproto
