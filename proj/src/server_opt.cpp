#include "fedproto/server_opt.hpp"

#include <cmath>
#include <stdexcept>

namespace fedproto {

std::string server_opt_name(ServerOptKind kind) {
  switch (kind) {
    case ServerOptKind::Sgd: return "sgd";
    case ServerOptKind::Momentum: return "momentum";
    case ServerOptKind::AdamVariant: return "adam";
    case ServerOptKind::AdamStandard: return "adam_std";
  }
  throw std::logic_error("unknown server optimizer kind");
}

ServerOptKind server_opt_from_name(const std::string& name) {
  if (name == "sgd") return ServerOptKind::Sgd;
  if (name == "momentum") return ServerOptKind::Momentum;
  if (name == "adam") return ServerOptKind::AdamVariant;
  if (name == "adam_std") return ServerOptKind::AdamStandard;
  throw std::invalid_argument("unknown server optimizer: " + name);
}

void ServerOptConfig::validate() const {
  if (!(lr > 0.0)) {
    throw std::invalid_argument("ServerOptConfig: lr must be > 0");
  }
  if (!(beta >= 0.0 && beta < 1.0)) {
    throw std::invalid_argument("ServerOptConfig: beta must be in [0,1)");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw std::invalid_argument("ServerOptConfig: beta1/beta2 must be in [0,1)");
  }
  if (!(tau > 0.0)) {
    throw std::invalid_argument("ServerOptConfig: tau must be > 0");
  }
}

ServerOptState ServerOptState::fresh(const Layout& layout) {
  return ServerOptState{ParamVector::zeros(layout), ParamVector::zeros(layout),
                        0};
}

ServerStepResult server_step(const ServerOptConfig& config,
                             const ServerOptState& state,
                             const ParamVector& w_current,
                             const ParamVector& w_aggregate) {
  config.validate();
  if (!w_current.layout_compatible(w_aggregate)) {
    throw std::invalid_argument("server_step: layout mismatch");
  }
  ServerOptState st = state;
  if (st.m.empty()) st = ServerOptState::fresh(w_current.layout());
  if (!st.m.layout_compatible(w_current) ||
      !st.v.layout_compatible(w_current)) {
    throw std::invalid_argument("server_step: state layout mismatch");
  }

  const std::size_t n = w_current.size();
  std::vector<double> delta(n);
  for (std::size_t j = 0; j < n; ++j) delta[j] = w_current[j] - w_aggregate[j];

  std::vector<double> w_next(n);
  std::vector<double> m_next(st.m.values().begin(), st.m.values().end());
  std::vector<double> v_next(st.v.values().begin(), st.v.values().end());
  const std::int64_t step = st.step + 1;

  switch (config.kind) {
    case ServerOptKind::Sgd:
      if (config.lr == 1.0) {
        // Adopt the aggregate bit-exactly; w - (w - aggregate) can round.
        for (std::size_t j = 0; j < n; ++j) w_next[j] = w_aggregate[j];
      } else {
        for (std::size_t j = 0; j < n; ++j) {
          w_next[j] = w_current[j] - config.lr * delta[j];
        }
      }
      break;
    case ServerOptKind::Momentum:
      for (std::size_t j = 0; j < n; ++j) {
        m_next[j] = config.beta * m_next[j] + delta[j];
        w_next[j] = w_current[j] - config.lr * m_next[j];
      }
      break;
    case ServerOptKind::AdamVariant:
      // No bias correction; tau sits outside the square root.
      for (std::size_t j = 0; j < n; ++j) {
        m_next[j] = config.beta1 * m_next[j] + (1.0 - config.beta1) * delta[j];
        v_next[j] =
            config.beta2 * v_next[j] + (1.0 - config.beta2) * delta[j] * delta[j];
        w_next[j] =
            w_current[j] - config.lr * m_next[j] / (std::sqrt(v_next[j]) + config.tau);
      }
      break;
    case ServerOptKind::AdamStandard: {
      const double m_corr = 1.0 - std::pow(config.beta1, static_cast<double>(step));
      const double v_corr = 1.0 - std::pow(config.beta2, static_cast<double>(step));
      for (std::size_t j = 0; j < n; ++j) {
        m_next[j] = config.beta1 * m_next[j] + (1.0 - config.beta1) * delta[j];
        v_next[j] =
            config.beta2 * v_next[j] + (1.0 - config.beta2) * delta[j] * delta[j];
        const double m_hat = m_next[j] / m_corr;
        const double v_hat = v_next[j] / v_corr;
        w_next[j] = w_current[j] - config.lr * m_hat / (std::sqrt(v_hat) + config.tau);
      }
      break;
    }
  }

  ServerStepResult result;
  result.params = ParamVector(w_current.layout(), std::move(w_next));
  result.state.m = ParamVector(w_current.layout(), std::move(m_next));
  result.state.v = ParamVector(w_current.layout(), std::move(v_next));
  result.state.step = step;
  return result;
}

}  // namespace fedproto
