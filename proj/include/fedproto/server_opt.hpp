#pragma once

#include <cstdint>
#include <string>

#include "fedproto/param_vector.hpp"

namespace fedproto {

enum class ServerOptKind { Sgd, Momentum, AdamVariant, AdamStandard };

std::string server_opt_name(ServerOptKind kind);
ServerOptKind server_opt_from_name(const std::string& name);

struct ServerOptConfig {
  ServerOptKind kind = ServerOptKind::Sgd;
  double lr = 1.0;      // lambda_s
  double beta = 0.9;    // momentum
  double beta1 = 0.9;   // Adam first moment
  double beta2 = 0.99;  // Adam second moment
  double tau = 0.001;   // Adam denominator offset

  void validate() const;
  bool operator==(const ServerOptConfig&) const = default;
};

/// Moment accumulators carried across rounds. Fresh state is all zeros.
struct ServerOptState {
  ParamVector m;
  ParamVector v;
  std::int64_t step = 0;

  static ServerOptState fresh(const Layout& layout);
  bool operator==(const ServerOptState&) const = default;
};

struct ServerStepResult {
  ParamVector params;
  ServerOptState state;
};

// Treats delta = w_current - w_aggregate as the server's pseudo-gradient and
// applies one optimizer step. Pure function: state in, state out.
ServerStepResult server_step(const ServerOptConfig& config,
                             const ServerOptState& state,
                             const ParamVector& w_current,
                             const ParamVector& w_aggregate);

}  // namespace fedproto
