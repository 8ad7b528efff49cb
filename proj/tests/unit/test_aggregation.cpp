#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "fedproto/aggregation.hpp"
#include "naive_reference.hpp"
#include "random_updates.hpp"

using namespace fedproto;

namespace {

ClientUpdate make_update(int id, std::vector<double> values,
                         std::size_t n_samples = 1, double pre = 1.0,
                         double post = 1.0) {
  ClientUpdate u;
  u.client_id = id;
  const std::size_t dim = values.size();
  u.params = ParamVector({{"w", dim}}, std::move(values));
  u.n_samples = n_samples;
  u.pre_loss = pre;
  u.post_loss = post;
  return u;
}

void check_close(const ParamVector& got, const std::vector<double>& want,
                 double tol = 1e-12) {
  REQUIRE(got.size() == want.size());
  for (std::size_t j = 0; j < want.size(); ++j) {
    CHECK(std::abs(got[j] - want[j]) <= tol);
  }
}

}  // namespace

TEST_CASE("sample_weights") {
  std::vector<ClientUpdate> two{make_update(1, {0.0}, 1),
                                make_update(2, {0.0}, 3)};
  auto w = sample_weights(two);
  CHECK(w[0] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(w[1] == doctest::Approx(0.75).epsilon(1e-12));

  std::vector<ClientUpdate> four;
  for (int i = 1; i <= 4; ++i) four.push_back(make_update(i, {0.0}, 5));
  for (double v : sample_weights(four)) {
    CHECK(v == doctest::Approx(0.25).epsilon(1e-12));
  }

  std::vector<ClientUpdate> single{make_update(1, {0.0}, 7)};
  CHECK(sample_weights(single)[0] == 1.0);

  CHECK_THROWS_AS(sample_weights(std::vector<ClientUpdate>{}),
                  std::invalid_argument);
}

TEST_CASE("aggregate_fedavg") {
  std::vector<ClientUpdate> updates{make_update(1, {2.0}, 1),
                                    make_update(2, {6.0}, 3)};
  check_close(aggregate_fedavg(updates), {5.0});

  std::vector<ClientUpdate> identical{make_update(1, {1.5, -2.0}, 10),
                                      make_update(2, {1.5, -2.0}, 90)};
  check_close(aggregate_fedavg(identical), {1.5, -2.0});

  std::vector<ClientUpdate> single{make_update(3, {7.0}, 4)};
  CHECK(aggregate_fedavg(single) == single[0].params);
}

TEST_CASE("duplicate client ids rejected") {
  std::vector<ClientUpdate> dup{make_update(1, {1.0}), make_update(1, {2.0})};
  CHECK_THROWS_AS(aggregate_fedavg(dup), std::invalid_argument);
}

TEST_CASE("aggregate_costwagg") {
  LossHistory history{{1, 1.0}, {2, 3.0}};
  // alpha=1 collapses to FedAvg
  std::vector<ClientUpdate> updates{make_update(1, {2.0}, 1, 1.0, 1.0),
                                    make_update(2, {6.0}, 3, 1.0, 1.0)};
  check_close(aggregate_costwagg(updates, history, 1.0),
              {aggregate_fedavg(updates)[0]});

  // alpha=0, r=[1,3]: weights 0.25/0.75 -> 3.0
  LossHistory ratio_hist{{1, 1.0}, {2, 3.0}};
  std::vector<ClientUpdate> pair{make_update(1, {0.0}, 1, 1.0, 1.0),
                                 make_update(2, {4.0}, 1, 1.0, 1.0)};
  check_close(aggregate_costwagg(pair, ratio_hist, 0.0), {3.0});

  // symmetric case
  LossHistory unit{{1, 1.0}, {2, 1.0}};
  check_close(aggregate_costwagg(pair, unit, 0.5), {2.0});
}

TEST_CASE("costwagg round-1 fallback and errors") {
  std::vector<ClientUpdate> updates{make_update(1, {0.0}, 1, 1.0, 1.0),
                                    make_update(2, {4.0}, 1, 1.0, 1.0)};
  LossHistory empty;
  // fallback: all r=1 -> plain sample weighting
  check_close(aggregate_costwagg(updates, empty, 0.0), {2.0});
  CHECK_THROWS_AS(aggregate_costwagg(updates, empty, 0.0, false),
                  std::invalid_argument);

  std::vector<ClientUpdate> zero_loss{make_update(1, {0.0}, 1, 1.0, 0.0)};
  LossHistory h{{1, 1.0}};
  CHECK_THROWS_AS(aggregate_costwagg(zero_loss, h, 0.5), std::invalid_argument);
}

TEST_CASE("aggregate_roundcwagg") {
  std::vector<ClientUpdate> updates{make_update(1, {0.0}, 1, 2.0, 1.0),
                                    make_update(2, {1.0}, 1, 1.0, 1.0)};
  // alpha=1 -> FedAvg regardless of ratios
  check_close(aggregate_roundcwagg(updates, 1.0),
              {aggregate_fedavg(updates)[0]});

  // uniform ratios, alpha=0 -> unweighted mean
  std::vector<ClientUpdate> uniform{make_update(1, {0.0}, 1, 1.5, 1.5),
                                    make_update(2, {4.0}, 3, 2.0, 2.0)};
  check_close(aggregate_roundcwagg(uniform, 0.0), {2.0});

  // spec hand example: alpha=0.1, r=[2,1] -> weights [0.65, 0.35] -> 0.35
  check_close(aggregate_roundcwagg(updates, 0.1), {0.35});
}

TEST_CASE("aggregate_reg") {
  // identical vectors return the vector
  std::vector<ClientUpdate> identical{make_update(1, {2.5, -1.0}),
                                      make_update(2, {2.5, -1.0}),
                                      make_update(3, {2.5, -1.0})};
  check_close(
      aggregate_reg(identical, CenterKind::Mean, CombineKind::Multiplicative,
                    1e-5),
      {2.5, -1.0}, 1e-12);

  // symmetric two-client case
  std::vector<ClientUpdate> sym{make_update(1, {1.0}), make_update(2, {3.0})};
  check_close(aggregate_reg(sym, CenterKind::Mean, CombineKind::Multiplicative,
                            1e-5),
              {2.0}, 1e-12);

  // middle client at the mean dominates
  std::vector<ClientUpdate> three{make_update(1, {0.0}), make_update(2, {2.0}),
                                  make_update(3, {4.0})};
  const ParamVector reg =
      aggregate_reg(three, CenterKind::Mean, CombineKind::Multiplicative, 1e-5);
  CHECK(std::abs(reg[0] - 2.0) <= 1e-4);

  CHECK_THROWS_AS(aggregate_reg(std::vector<ClientUpdate>{}, CenterKind::Mean,
                                CombineKind::Multiplicative, 1e-5),
                  std::invalid_argument);
}

TEST_CASE("reg pull-to-consensus: client at the center gets the largest u") {
  // equal n, one client exactly on the mean
  std::vector<ClientUpdate> updates{make_update(1, {0.0}), make_update(2, {2.0}),
                                    make_update(3, {4.0})};
  // The aggregate must land closer to the central client than either extreme.
  const ParamVector out =
      aggregate_reg(updates, CenterKind::Mean, CombineKind::Multiplicative, 1e-5);
  CHECK(std::abs(out[0] - 2.0) < std::abs(out[0] - 0.0));
  CHECK(std::abs(out[0] - 2.0) < std::abs(out[0] - 4.0));
}

TEST_CASE("aggregate_regcost") {
  // uniform ratios -> FedAvg
  std::vector<ClientUpdate> uniform{make_update(1, {1.0}, 1, 2.0, 2.0),
                                    make_update(2, {5.0}, 3, 2.0, 2.0)};
  check_close(aggregate_regcost(uniform), {aggregate_fedavg(uniform)[0]});

  // n=[1,1], r=[1,3] -> 3.0
  std::vector<ClientUpdate> pair{make_update(1, {0.0}, 1, 1.0, 1.0),
                                 make_update(2, {4.0}, 1, 3.0, 1.0)};
  check_close(aggregate_regcost(pair), {3.0});

  std::vector<ClientUpdate> single{make_update(1, {9.0}, 5, 2.0, 1.0)};
  CHECK(aggregate_regcost(single) == single[0].params);

  // cross-round source pulls ratios from history
  LossHistory history{{1, 1.0}, {2, 3.0}};
  std::vector<ClientUpdate> cross{make_update(1, {0.0}, 1, 1.0, 1.0),
                                  make_update(2, {4.0}, 1, 1.0, 1.0)};
  check_close(aggregate_regcost(cross, RatioSource::CrossRound, &history),
              {3.0});
}

TEST_CASE("aggregate_trimmed_mean") {
  std::vector<ClientUpdate> five{make_update(1, {0.0}), make_update(2, {1.0}),
                                 make_update(3, {2.0}), make_update(4, {3.0}),
                                 make_update(5, {100.0})};
  // trim=0 -> plain mean
  check_close(aggregate_trimmed_mean(five, 0.0), {21.2});
  // trim=0.2 -> k=1, outlier 100 dropped -> mean(0,1,2,3) = 1.5
  check_close(aggregate_trimmed_mean(five, 0.2), {1.5});

  std::vector<ClientUpdate> identical{make_update(1, {7.0}), make_update(2, {7.0}),
                                      make_update(3, {7.0})};
  check_close(aggregate_trimmed_mean(identical, 0.3), {7.0});

  CHECK_THROWS_AS(aggregate_trimmed_mean(five, 0.5), std::invalid_argument);
}

TEST_CASE("aggregate_topk_regcost") {
  // keep=1 -> unweighted mean over all clients
  std::vector<ClientUpdate> updates{make_update(1, {0.0}, 1, 1.0, 1.0),
                                    make_update(2, {4.0}, 1, 1.0, 1.0)};
  check_close(aggregate_topk_regcost(updates, 1.0), {2.0});

  // spec hand example: n=[10,10,80], r=[1,2,1] -> keep clients 3 and 2
  LossHistory history{{1, 1.0}, {2, 2.0}, {3, 1.0}};
  std::vector<ClientUpdate> three{make_update(1, {1.0}, 10, 1.0, 1.0),
                                  make_update(2, {2.0}, 10, 1.0, 1.0),
                                  make_update(3, {6.0}, 80, 1.0, 1.0)};
  check_close(aggregate_topk_regcost(three, 0.8, RatioSource::CrossRound,
                                     &history),
              {4.0});

  std::vector<ClientUpdate> single{make_update(1, {5.0}, 3, 1.0, 1.0)};
  CHECK(aggregate_topk_regcost(single, 0.5) == single[0].params);
}

TEST_CASE("dispatcher honors the segment mask") {
  const Layout layout{{"a", 1}, {"b", 1}};
  auto two_segment = [&](int id, double a, double b, std::size_t n) {
    ClientUpdate u;
    u.client_id = id;
    u.params = ParamVector(layout, {a, b});
    u.n_samples = n;
    u.pre_loss = 1.0;
    u.post_loss = 1.0;
    return u;
  };
  std::vector<ClientUpdate> updates{
      two_segment(1, 0.0, 0.0, 1), two_segment(2, 1.0, 1.0, 1),
      two_segment(3, 2.0, 2.0, 1), two_segment(4, 3.0, 3.0, 1),
      two_segment(5, 100.0, 100.0, 6)};
  LossHistory history;

  AggregationPolicy trimmed;
  trimmed.scheme = Scheme::TrimmedMean;
  trimmed.trim_fraction = 0.2;

  // segment a robust (trimmed), segment b sample-weight-only (fedavg)
  SegmentPolicyMask mixed{{SegmentPolicy::RobustAggregated,
                           SegmentPolicy::SampleWeightOnly}};
  const ParamVector out = aggregate(trimmed, updates, history, mixed);
  CHECK(out[0] == doctest::Approx(aggregate_trimmed_mean(updates, 0.2)[0])
                      .epsilon(1e-12));
  CHECK(out[1] == doctest::Approx(aggregate_fedavg(updates)[1]).epsilon(1e-12));

  // mask all sample-weight-only overrides the scheme entirely
  SegmentPolicyMask all_sample{{SegmentPolicy::SampleWeightOnly,
                                SegmentPolicy::SampleWeightOnly}};
  CHECK(aggregate(trimmed, updates, history, all_sample) ==
        aggregate_fedavg(updates));

  // FedAvg policy matches aggregate_fedavg under any mask
  AggregationPolicy fedavg_policy;
  CHECK(aggregate(fedavg_policy, updates, history, mixed) ==
        aggregate_fedavg(updates));
}

TEST_CASE("property: naive-reference equivalence on random instances") {
  std::mt19937_64 rng(101);
  for (int trial = 0; trial < 60; ++trial) {
    auto instance = testsupport::random_round(rng);
    const auto values = testsupport::value_matrix(instance.updates);
    const auto n = testsupport::sample_counts(instance.updates);

    std::vector<double> cross_ratios;
    std::vector<double> current_ratios;
    for (const auto& u : instance.updates) {
      cross_ratios.push_back(instance.history.at(u.client_id) / u.post_loss);
      current_ratios.push_back(u.pre_loss / u.post_loss);
    }

    auto check = [&](const ParamVector& got, const std::vector<double>& want) {
      for (std::size_t j = 0; j < want.size(); ++j) {
        CHECK(std::abs(got[j] - want[j]) <= 1e-10);
      }
    };

    check(aggregate_costwagg(instance.updates, instance.history, 0.3),
          naive::costwagg(values, n, cross_ratios, 0.3));
    check(aggregate_roundcwagg(instance.updates, 0.1),
          naive::costwagg(values, n, current_ratios, 0.1));
    check(aggregate_reg(instance.updates, CenterKind::Mean,
                        CombineKind::Multiplicative, 1e-5),
          naive::reg(values, n, false, false, 1e-5));
    check(aggregate_reg(instance.updates, CenterKind::Mean,
                        CombineKind::Additive, 1e-5),
          naive::reg(values, n, false, true, 1e-5));
    check(aggregate_reg(instance.updates, CenterKind::Median,
                        CombineKind::Multiplicative, 1e-5),
          naive::reg(values, n, true, false, 1e-5));
    check(aggregate_regcost(instance.updates),
          naive::regcost(values, n, current_ratios));
    check(aggregate_trimmed_mean(instance.updates, 0.2),
          naive::trimmed_mean(values, 0.2));
    check(aggregate_topk_regcost(instance.updates, 0.8, RatioSource::CrossRound,
                                 &instance.history),
          naive::topk_regcost(values, n, cross_ratios, 0.8));
  }
}

TEST_CASE("property: permutation invariance and convex bounds") {
  std::mt19937_64 rng(202);
  for (int trial = 0; trial < 60; ++trial) {
    auto instance = testsupport::random_round(rng);

    auto run_all = [&](const std::vector<ClientUpdate>& updates) {
      std::vector<ParamVector> out;
      out.push_back(aggregate_fedavg(updates));
      out.push_back(aggregate_costwagg(updates, instance.history, 0.4));
      out.push_back(aggregate_roundcwagg(updates, 0.1));
      out.push_back(aggregate_reg(updates, CenterKind::Mean,
                                  CombineKind::Multiplicative, 1e-5));
      out.push_back(aggregate_reg(updates, CenterKind::Mean,
                                  CombineKind::Additive, 1e-5));
      out.push_back(aggregate_reg(updates, CenterKind::Median,
                                  CombineKind::Multiplicative, 1e-5));
      out.push_back(aggregate_regcost(updates));
      return out;
    };

    const auto base = run_all(instance.updates);
    auto shuffled = instance.updates;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const auto permuted = run_all(shuffled);
    for (std::size_t i = 0; i < base.size(); ++i) {
      CHECK(base[i] == permuted[i]);
    }

    // convex-combination bound per coordinate
    const std::size_t dim = instance.updates[0].params.size();
    for (std::size_t j = 0; j < dim; ++j) {
      double lo = instance.updates[0].params[j];
      double hi = lo;
      for (const auto& u : instance.updates) {
        lo = std::min(lo, u.params[j]);
        hi = std::max(hi, u.params[j]);
      }
      for (const auto& result : base) {
        CHECK(result[j] >= lo - 1e-12);
        CHECK(result[j] <= hi + 1e-12);
      }
    }
  }
}

TEST_CASE("reduction identities") {
  std::mt19937_64 rng(303);
  auto instance = testsupport::random_round(rng);
  const auto& updates = instance.updates;

  const ParamVector fedavg = aggregate_fedavg(updates);
  const ParamVector mean = [&] {
    std::vector<ParamVector> vs;
    for (const auto& u : updates) vs.push_back(u.params);
    return coordinate_mean(vs);
  }();

  auto close = [](const ParamVector& a, const ParamVector& b) {
    for (std::size_t j = 0; j < a.size(); ++j) {
      CHECK(std::abs(a[j] - b[j]) <= 1e-12);
    }
  };

  close(aggregate_costwagg(updates, instance.history, 1.0), fedavg);
  close(aggregate_trimmed_mean(updates, 0.0), mean);
  close(aggregate_topk_regcost(updates, 1.0), mean);

  // RegCostAgg with uniform ratios = FedAvg
  auto uniform = updates;
  for (auto& u : uniform) {
    u.pre_loss = 2.0;
    u.post_loss = 1.0;
  }
  close(aggregate_regcost(uniform), aggregate_fedavg(uniform));
}

TEST_CASE("policy validation") {
  AggregationPolicy policy;
  policy.alpha = 1.5;
  CHECK_THROWS_AS(policy.validate(), std::invalid_argument);
  policy = {};
  policy.trim_fraction = 0.5;
  CHECK_THROWS_AS(policy.validate(), std::invalid_argument);
  policy = {};
  policy.keep_fraction = 0.0;
  CHECK_THROWS_AS(policy.validate(), std::invalid_argument);
  policy = {};
  policy.epsilon = 0.0;
  CHECK_THROWS_AS(policy.validate(), std::invalid_argument);
  CHECK_NOTHROW(AggregationPolicy{}.validate());
}
