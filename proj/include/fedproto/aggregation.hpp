#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "fedproto/param_vector.hpp"

namespace fedproto {

/// One client's contribution to a round: post-training parameters plus the
/// sample count and validation losses the loss-weighted schemes need.
struct ClientUpdate {
  int client_id = 0;
  ParamVector params;
  std::size_t n_samples = 0;
  double pre_loss = 0.0;   // validation loss at the broadcast model
  double post_loss = 0.0;  // validation loss after local training

  void validate() const;
};

/// client_id -> post-training validation loss of the client's most recent
/// participating round.
using LossHistory = std::map<int, double>;

enum class Scheme {
  FedAvg,
  CostWAgg,
  RoundCWAgg,
  SimAgg,
  RegAgg,
  RegMedAgg,
  RegCostAgg,
  TrimmedMean,
  TopKRegCost,
};

enum class RatioSource { CrossRound, CurrentRound };

std::string scheme_name(Scheme scheme);
Scheme scheme_from_name(const std::string& name);

struct AggregationPolicy {
  Scheme scheme = Scheme::FedAvg;
  double alpha = 0.5;          // CostWAgg / RoundCWAgg blend
  double epsilon = 1e-5;       // Reg* family regularizer
  double trim_fraction = 0.2;  // TrimmedMean
  double keep_fraction = 0.8;  // TopKRegCost
  RatioSource regcost_ratio = RatioSource::CurrentRound;
  RatioSource topk_ratio = RatioSource::CrossRound;
  bool round_one_fallback = true;  // missing history entry => r_c = 1

  void validate() const;
  bool operator==(const AggregationPolicy&) const = default;
};

enum class CenterKind { Mean, Median };
enum class CombineKind { Multiplicative, Additive };

std::vector<double> sample_weights(std::span<const ClientUpdate> updates);

ParamVector aggregate_fedavg(std::span<const ClientUpdate> updates);
ParamVector aggregate_costwagg(std::span<const ClientUpdate> updates,
                               const LossHistory& history, double alpha,
                               bool round_one_fallback = true);
ParamVector aggregate_roundcwagg(std::span<const ClientUpdate> updates,
                                 double alpha);
ParamVector aggregate_reg(std::span<const ClientUpdate> updates,
                          CenterKind center, CombineKind combine,
                          double epsilon);
ParamVector aggregate_regcost(std::span<const ClientUpdate> updates,
                              RatioSource source = RatioSource::CurrentRound,
                              const LossHistory* history = nullptr,
                              bool round_one_fallback = true);
ParamVector aggregate_trimmed_mean(std::span<const ClientUpdate> updates,
                                   double trim_fraction);
ParamVector aggregate_topk_regcost(std::span<const ClientUpdate> updates,
                                   double keep_fraction,
                                   RatioSource source = RatioSource::CrossRound,
                                   const LossHistory* history = nullptr,
                                   bool round_one_fallback = true);

/// Dispatcher: robust-aggregated segments use the policy's scheme,
/// sample-weight-only segments fall back to FedAvg.
ParamVector aggregate(const AggregationPolicy& policy,
                      std::span<const ClientUpdate> updates,
                      const LossHistory& history,
                      const SegmentPolicyMask& mask);

}  // namespace fedproto
