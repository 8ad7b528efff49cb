#include "fedproto/aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace fedproto {

namespace {

constexpr double kRatioClampLo = 1e-6;
constexpr double kRatioClampHi = 1e6;

double clamp_ratio(double r) {
  return std::clamp(r, kRatioClampLo, kRatioClampHi);
}

// All schemes operate on updates sorted by ascending client_id so that
// reduction order, and therefore bit patterns, do not depend on arrival order.
std::vector<const ClientUpdate*> sorted_by_id(
    std::span<const ClientUpdate> updates) {
  if (updates.empty()) {
    throw std::invalid_argument("aggregation: empty update list");
  }
  std::vector<const ClientUpdate*> out;
  out.reserve(updates.size());
  for (const auto& u : updates) {
    u.validate();
    out.push_back(&u);
  }
  std::sort(out.begin(), out.end(), [](const auto* a, const auto* b) {
    return a->client_id < b->client_id;
  });
  for (std::size_t i = 1; i < out.size(); ++i) {
    if (out[i]->client_id == out[i - 1]->client_id) {
      throw std::invalid_argument("aggregation: duplicate client_id in round");
    }
    if (!out[i]->params.layout_compatible(out[0]->params)) {
      throw std::invalid_argument("aggregation: layout mismatch");
    }
  }
  return out;
}

std::vector<ParamVector> params_of(
    const std::vector<const ClientUpdate*>& updates) {
  std::vector<ParamVector> out;
  out.reserve(updates.size());
  for (const auto* u : updates) out.push_back(u->params);
  return out;
}

std::vector<double> sample_weights_of(
    const std::vector<const ClientUpdate*>& updates) {
  double total = 0.0;
  for (const auto* u : updates) total += static_cast<double>(u->n_samples);
  std::vector<double> out;
  out.reserve(updates.size());
  for (const auto* u : updates) {
    out.push_back(static_cast<double>(u->n_samples) / total);
  }
  return out;
}

double cross_round_ratio(const ClientUpdate& u, const LossHistory* history,
                         bool fallback) {
  if (u.post_loss <= 0.0) {
    throw std::invalid_argument("aggregation: post_loss must be positive");
  }
  if (history != nullptr) {
    auto it = history->find(u.client_id);
    if (it != history->end()) return clamp_ratio(it->second / u.post_loss);
  }
  if (!fallback) {
    throw std::invalid_argument(
        "aggregation: missing loss history for client and fallback disabled");
  }
  return 1.0;
}

double current_round_ratio(const ClientUpdate& u) {
  if (u.post_loss <= 0.0) {
    throw std::invalid_argument("aggregation: post_loss must be positive");
  }
  return clamp_ratio(u.pre_loss / u.post_loss);
}

std::vector<double> loss_ratios(const std::vector<const ClientUpdate*>& updates,
                                RatioSource source, const LossHistory* history,
                                bool fallback) {
  std::vector<double> out;
  out.reserve(updates.size());
  for (const auto* u : updates) {
    out.push_back(source == RatioSource::CrossRound
                      ? cross_round_ratio(*u, history, fallback)
                      : current_round_ratio(*u));
  }
  return out;
}

// alpha-blend of sample weights and normalized loss ratios, shared by
// CostWAgg and RoundCWAgg.
ParamVector blend_sample_and_ratio(
    const std::vector<const ClientUpdate*>& updates,
    const std::vector<double>& ratios, double alpha) {
  const auto nu = sample_weights_of(updates);
  const double ratio_total =
      std::accumulate(ratios.begin(), ratios.end(), 0.0);
  std::vector<double> weights(updates.size());
  for (std::size_t c = 0; c < updates.size(); ++c) {
    weights[c] = alpha * nu[c] + (1.0 - alpha) * ratios[c] / ratio_total;
  }
  return weighted_sum(params_of(updates), weights);
}

}  // namespace

void ClientUpdate::validate() const {
  if (n_samples < 1) {
    throw std::invalid_argument("ClientUpdate: n_samples must be >= 1");
  }
  if (!std::isfinite(pre_loss) || pre_loss < 0.0 || !std::isfinite(post_loss) ||
      post_loss < 0.0) {
    throw std::invalid_argument(
        "ClientUpdate: losses must be finite and non-negative");
  }
}

std::string scheme_name(Scheme scheme) {
  switch (scheme) {
    case Scheme::FedAvg: return "fedavg";
    case Scheme::CostWAgg: return "costwagg";
    case Scheme::RoundCWAgg: return "roundcwagg";
    case Scheme::SimAgg: return "simagg";
    case Scheme::RegAgg: return "regagg";
    case Scheme::RegMedAgg: return "regmedagg";
    case Scheme::RegCostAgg: return "regcostagg";
    case Scheme::TrimmedMean: return "trimmedmean";
    case Scheme::TopKRegCost: return "topkregcost";
  }
  throw std::logic_error("unknown scheme");
}

Scheme scheme_from_name(const std::string& name) {
  static const std::map<std::string, Scheme> table = {
      {"fedavg", Scheme::FedAvg},         {"costwagg", Scheme::CostWAgg},
      {"roundcwagg", Scheme::RoundCWAgg}, {"simagg", Scheme::SimAgg},
      {"regagg", Scheme::RegAgg},         {"regmedagg", Scheme::RegMedAgg},
      {"regcostagg", Scheme::RegCostAgg}, {"trimmedmean", Scheme::TrimmedMean},
      {"topkregcost", Scheme::TopKRegCost}};
  auto it = table.find(name);
  if (it == table.end()) {
    throw std::invalid_argument("unknown aggregation scheme: " + name);
  }
  return it->second;
}

void AggregationPolicy::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw std::invalid_argument("AggregationPolicy: alpha must be in [0,1]");
  }
  if (!(epsilon > 0.0)) {
    throw std::invalid_argument("AggregationPolicy: epsilon must be > 0");
  }
  if (!(trim_fraction >= 0.0 && trim_fraction < 0.5)) {
    throw std::invalid_argument(
        "AggregationPolicy: trim_fraction must be in [0,0.5)");
  }
  if (!(keep_fraction > 0.0 && keep_fraction <= 1.0)) {
    throw std::invalid_argument(
        "AggregationPolicy: keep_fraction must be in (0,1]");
  }
}

std::vector<double> sample_weights(std::span<const ClientUpdate> updates) {
  return sample_weights_of(sorted_by_id(updates));
}

ParamVector aggregate_fedavg(std::span<const ClientUpdate> updates) {
  const auto sorted = sorted_by_id(updates);
  return weighted_sum(params_of(sorted), sample_weights_of(sorted));
}

ParamVector aggregate_costwagg(std::span<const ClientUpdate> updates,
                               const LossHistory& history, double alpha,
                               bool round_one_fallback) {
  const auto sorted = sorted_by_id(updates);
  const auto ratios = loss_ratios(sorted, RatioSource::CrossRound, &history,
                                  round_one_fallback);
  return blend_sample_and_ratio(sorted, ratios, alpha);
}

ParamVector aggregate_roundcwagg(std::span<const ClientUpdate> updates,
                                 double alpha) {
  const auto sorted = sorted_by_id(updates);
  const auto ratios =
      loss_ratios(sorted, RatioSource::CurrentRound, nullptr, true);
  return blend_sample_and_ratio(sorted, ratios, alpha);
}

ParamVector aggregate_reg(std::span<const ClientUpdate> updates,
                          CenterKind center, CombineKind combine,
                          double epsilon) {
  if (!(epsilon > 0.0)) {
    throw std::invalid_argument("aggregate_reg: epsilon must be > 0");
  }
  const auto sorted = sorted_by_id(updates);
  const auto params = params_of(sorted);
  const auto nu = sample_weights_of(sorted);
  const ParamVector center_vec = center == CenterKind::Mean
                                     ? coordinate_mean(params)
                                     : coordinate_median(params);
  const std::size_t n = sorted.size();
  std::vector<double> out(params[0].size());
  std::vector<double> inv(n);
  for (std::size_t j = 0; j < out.size(); ++j) {
    double inv_total = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      inv[c] = 1.0 / (std::abs(params[c][j] - center_vec[j]) + epsilon);
      inv_total += inv[c];
    }
    double num = 0.0;
    double den = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      const double u = inv[c] / inv_total;
      const double combined =
          combine == CombineKind::Multiplicative ? u * nu[c] : u + nu[c];
      num += combined * params[c][j];
      den += combined;
    }
    out[j] = num / den;
  }
  return ParamVector(params[0].layout(), std::move(out));
}

ParamVector aggregate_regcost(std::span<const ClientUpdate> updates,
                              RatioSource source, const LossHistory* history,
                              bool round_one_fallback) {
  const auto sorted = sorted_by_id(updates);
  const auto ratios = loss_ratios(sorted, source, history, round_one_fallback);
  const auto nu = sample_weights_of(sorted);
  std::vector<double> weights(sorted.size());
  double total = 0.0;
  for (std::size_t c = 0; c < sorted.size(); ++c) {
    weights[c] = ratios[c] * nu[c];
    total += weights[c];
  }
  if (total <= 0.0) {
    throw std::invalid_argument("aggregate_regcost: degenerate weights");
  }
  for (double& w : weights) w /= total;
  return weighted_sum(params_of(sorted), weights);
}

ParamVector aggregate_trimmed_mean(std::span<const ClientUpdate> updates,
                                   double trim_fraction) {
  if (!(trim_fraction >= 0.0 && trim_fraction < 0.5)) {
    throw std::invalid_argument(
        "aggregate_trimmed_mean: trim_fraction must be in [0,0.5)");
  }
  const auto sorted = sorted_by_id(updates);
  const auto params = params_of(sorted);
  const std::size_t n = sorted.size();
  // Nudge before floor so fractions like 0.3*10 don't land on 2.999...
  const std::size_t k = static_cast<std::size_t>(
      trim_fraction * static_cast<double>(n) + 1e-9);
  if (k >= n) {
    throw std::invalid_argument("aggregate_trimmed_mean: trim removes all");
  }
  const ParamVector median = coordinate_median(params);
  const std::size_t survivors = n - k;
  std::vector<double> out(params[0].size());
  std::vector<std::size_t> order(n);
  for (std::size_t j = 0; j < out.size(); ++j) {
    std::iota(order.begin(), order.end(), 0);
    // Farthest from the median trimmed first; ties drop the larger client_id.
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const double da = std::abs(params[a][j] - median[j]);
      const double db = std::abs(params[b][j] - median[j]);
      if (da != db) return da < db;
      return sorted[a]->client_id < sorted[b]->client_id;
    });
    double sum = 0.0;
    for (std::size_t i = 0; i < survivors; ++i) sum += params[order[i]][j];
    out[j] = sum / static_cast<double>(survivors);
  }
  return ParamVector(params[0].layout(), std::move(out));
}

ParamVector aggregate_topk_regcost(std::span<const ClientUpdate> updates,
                                   double keep_fraction, RatioSource source,
                                   const LossHistory* history,
                                   bool round_one_fallback) {
  if (!(keep_fraction > 0.0 && keep_fraction <= 1.0)) {
    throw std::invalid_argument(
        "aggregate_topk_regcost: keep_fraction must be in (0,1]");
  }
  const auto sorted = sorted_by_id(updates);
  const auto ratios = loss_ratios(sorted, source, history, round_one_fallback);
  const auto nu = sample_weights_of(sorted);
  const std::size_t n = sorted.size();
  const std::size_t k = std::max<std::size_t>(
      1, static_cast<std::size_t>(keep_fraction * static_cast<double>(n) +
                                  1e-9));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  // Largest score kept; ties keep the smaller client_id.
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double sa = nu[a] * ratios[a];
    const double sb = nu[b] * ratios[b];
    if (sa != sb) return sa > sb;
    return sorted[a]->client_id < sorted[b]->client_id;
  });
  std::vector<std::size_t> kept(order.begin(),
                                order.begin() + static_cast<std::ptrdiff_t>(k));
  std::sort(kept.begin(), kept.end());  // back to client-id order
  std::vector<ParamVector> chosen;
  chosen.reserve(k);
  for (std::size_t i : kept) chosen.push_back(sorted[i]->params);
  return coordinate_mean(chosen);
}

ParamVector aggregate(const AggregationPolicy& policy,
                      std::span<const ClientUpdate> updates,
                      const LossHistory& history,
                      const SegmentPolicyMask& mask) {
  policy.validate();
  const auto sorted = sorted_by_id(updates);
  const Layout& layout = sorted[0]->params.layout();
  mask.check_covers(layout);

  const ParamVector fedavg = aggregate_fedavg(updates);
  bool any_robust = false;
  for (auto p : mask.per_segment) {
    if (p == SegmentPolicy::RobustAggregated) any_robust = true;
  }
  if (!any_robust || policy.scheme == Scheme::FedAvg) return fedavg;

  ParamVector robust;
  switch (policy.scheme) {
    case Scheme::FedAvg:
      robust = fedavg;
      break;
    case Scheme::CostWAgg:
      robust = aggregate_costwagg(updates, history, policy.alpha,
                                  policy.round_one_fallback);
      break;
    case Scheme::RoundCWAgg:
      robust = aggregate_roundcwagg(updates, policy.alpha);
      break;
    case Scheme::SimAgg:
      robust = aggregate_reg(updates, CenterKind::Mean, CombineKind::Additive,
                             policy.epsilon);
      break;
    case Scheme::RegAgg:
      robust = aggregate_reg(updates, CenterKind::Mean,
                             CombineKind::Multiplicative, policy.epsilon);
      break;
    case Scheme::RegMedAgg:
      robust = aggregate_reg(updates, CenterKind::Median,
                             CombineKind::Multiplicative, policy.epsilon);
      break;
    case Scheme::RegCostAgg:
      robust = aggregate_regcost(updates, policy.regcost_ratio, &history,
                                 policy.round_one_fallback);
      break;
    case Scheme::TrimmedMean:
      robust = aggregate_trimmed_mean(updates, policy.trim_fraction);
      break;
    case Scheme::TopKRegCost:
      robust = aggregate_topk_regcost(updates, policy.keep_fraction,
                                      policy.topk_ratio, &history,
                                      policy.round_one_fallback);
      break;
  }

  std::vector<double> out(robust.values().begin(), robust.values().end());
  std::size_t offset = 0;
  for (std::size_t s = 0; s < layout.size(); ++s) {
    if (mask.per_segment[s] == SegmentPolicy::SampleWeightOnly) {
      for (std::size_t j = 0; j < layout[s].length; ++j) {
        out[offset + j] = fedavg[offset + j];
      }
    }
    offset += layout[s].length;
  }
  return ParamVector(layout, std::move(out));
}

}  // namespace fedproto
