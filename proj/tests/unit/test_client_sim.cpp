#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <stdexcept>

#include "doctest.h"
#include "fedproto/dataset.hpp"
#include "fedproto/local_train.hpp"
#include "fedproto/task_model.hpp"

using namespace fedproto;

namespace {

LabeledSet toy_set() {
  LabeledSet s;
  s.x = {{1.0, 0.5}, {-0.5, 2.0}, {0.0, -1.0}, {2.0, 1.0}};
  s.y = {0, 1, 2, 0};
  return s;
}

std::vector<std::size_t> all_indices(const LabeledSet& s) {
  std::vector<std::size_t> idx(s.size());
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

std::map<int, double> label_histogram(const ClientDataset& client) {
  std::map<int, double> hist;
  for (int y : client.train.y) hist[y] += 1.0;
  for (int y : client.val.y) hist[y] += 1.0;
  const double total = static_cast<double>(client.n_total());
  for (auto& [k, v] : hist) v /= total;
  return hist;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("logistic model at zero parameters scores ln K") {
  TaskModel model{ModelKind::MultinomialLogistic, 2, 3, 0};
  const ParamVector zero = model.init_params(0);
  const LabeledSet data = toy_set();
  const auto idx = all_indices(data);

  const auto [loss, grad] = loss_and_grad(model, zero, data, idx);
  CHECK(loss == doctest::Approx(std::log(3.0)).epsilon(1e-12));

  const EvalResult eval = evaluate(model, zero, data);
  CHECK(eval.loss == doctest::Approx(std::log(3.0)).epsilon(1e-12));
  // All logits tie, so every prediction falls back to class 0.
  CHECK(eval.accuracy == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("analytic gradients match central differences") {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> normal(0.0, 1.0);

  auto check_model = [&](const TaskModel& model) {
    LabeledSet data;
    std::uniform_int_distribution<int> label_dist(0, model.n_classes - 1);
    for (int i = 0; i < 12; ++i) {
      std::vector<double> x(model.input_dim);
      for (double& v : x) v = normal(rng);
      data.x.push_back(std::move(x));
      data.y.push_back(label_dist(rng));
    }
    const auto idx = all_indices(data);

    ParamVector params = model.init_params(3);
    std::vector<double> values(params.values().begin(), params.values().end());
    for (double& v : values) v += 0.3 * normal(rng);
    params = ParamVector(model.layout(), values);

    const auto [loss, grad] = loss_and_grad(model, params, data, idx);
    CHECK(std::isfinite(loss));

    std::uniform_int_distribution<std::size_t> coord(0, params.size() - 1);
    const double h = 1e-6;
    for (int probe = 0; probe < 25; ++probe) {
      const std::size_t j = coord(rng);
      auto plus = values;
      auto minus = values;
      plus[j] += h;
      minus[j] -= h;
      const double lp =
          loss_and_grad(model, ParamVector(model.layout(), plus), data, idx)
              .first;
      const double lm =
          loss_and_grad(model, ParamVector(model.layout(), minus), data, idx)
              .first;
      const double fd = (lp - lm) / (2.0 * h);
      const double scale = std::max({std::abs(fd), std::abs(grad[j]), 1e-4});
      CHECK(std::abs(fd - grad[j]) / scale < 1e-5);
    }
  };

  check_model(TaskModel{ModelKind::MultinomialLogistic, 4, 3, 0});
  check_model(TaskModel{ModelKind::OneHiddenLayerNet, 4, 3, 5});
}

TEST_CASE("duplicating every batch index leaves the mean loss unchanged") {
  TaskModel model{ModelKind::OneHiddenLayerNet, 2, 3, 4};
  const ParamVector params = model.init_params(9);
  const LabeledSet data = toy_set();
  const std::vector<std::size_t> once = {0, 1, 2, 3};
  const std::vector<std::size_t> twice = {0, 1, 2, 3, 0, 1, 2, 3};

  const auto [l1, g1] = loss_and_grad(model, params, data, once);
  const auto [l2, g2] = loss_and_grad(model, params, data, twice);
  CHECK(l1 == doctest::Approx(l2).epsilon(1e-14));
  for (std::size_t j = 0; j < g1.size(); ++j) {
    CHECK(std::abs(g1[j] - g2[j]) <= 1e-14);
  }
}

TEST_CASE("local training with lr=0 returns the broadcast unchanged") {
  const Dataset dataset = make_synthetic_dataset(60, 3, 3, 2.0, 5);
  const auto clients =
      partition_skewed(dataset, 2, 10.0, uniform_profile(2), 5);
  TaskModel model{ModelKind::MultinomialLogistic, 3, 3, 0};
  const ParamVector broadcast = model.init_params(0);

  ClientTrainConfig config;
  config.lr = 0.0;
  config.run_seed = 5;
  const ClientUpdate update = local_train(model, broadcast, clients[0], config, 1);
  CHECK(update.params == broadcast);
  CHECK(update.pre_loss == doctest::Approx(update.post_loss).epsilon(1e-15));
  CHECK(update.n_samples == clients[0].train.size());
}

TEST_CASE("local training lowers validation loss on separable data") {
  const Dataset dataset = make_synthetic_dataset(300, 4, 3, 4.0, 11);
  const auto clients =
      partition_skewed(dataset, 1, 100.0, uniform_profile(1), 11);
  TaskModel model{ModelKind::MultinomialLogistic, 4, 3, 0};
  const ParamVector broadcast = model.init_params(0);

  ClientTrainConfig config;
  config.lr = 0.01;
  config.epochs_per_round = 5;
  config.run_seed = 11;
  const ClientUpdate update = local_train(model, broadcast, clients[0], config, 1);
  CHECK(update.post_loss < update.pre_loss);
}

TEST_CASE("local training is bitwise deterministic") {
  const Dataset dataset = make_synthetic_dataset(120, 3, 4, 2.0, 21);
  const auto clients =
      partition_skewed(dataset, 3, 0.5, skewed_profile(3), 21);
  TaskModel model{ModelKind::OneHiddenLayerNet, 3, 4, 6};
  const ParamVector broadcast = model.init_params(21);

  ClientTrainConfig config;
  config.lr = 5e-3;
  config.run_seed = 21;
  const ClientUpdate a = local_train(model, broadcast, clients[1], config, 4);
  const ClientUpdate b = local_train(model, broadcast, clients[1], config, 4);
  CHECK(a.params == b.params);
  CHECK(a.pre_loss == b.pre_loss);
  CHECK(a.post_loss == b.post_loss);
}

TEST_CASE("partitioning conserves samples and follows the size profile") {
  const Dataset dataset = make_synthetic_dataset(1000, 5, 4, 2.0, 33);
  const std::size_t n_clients = 10;
  const auto profile = skewed_profile(n_clients);
  const auto clients = partition_skewed(dataset, n_clients, 0.5, profile, 33);

  REQUIRE(clients.size() == n_clients);
  std::size_t total = 0;
  for (std::size_t c = 0; c < n_clients; ++c) {
    CHECK(clients[c].client_id == static_cast<int>(c) + 1);
    total += clients[c].n_total();
    const double expected = profile[c] * 1000.0;
    CHECK(std::abs(static_cast<double>(clients[c].n_total()) - expected) <=
          1.0 + 1e-9);
    // 80-20 split, validation share rounded to nearest.
    const auto n = clients[c].n_total();
    CHECK(clients[c].val.size() ==
          static_cast<std::size_t>(std::llround(0.2 * static_cast<double>(n))));
  }
  CHECK(total == dataset.size());
}

TEST_CASE("huge concentration approaches the global label mix") {
  const Dataset dataset = make_synthetic_dataset(2000, 4, 4, 2.0, 7);
  const auto clients =
      partition_skewed(dataset, 4, 1e6, uniform_profile(4), 7);
  for (const auto& client : clients) {
    const auto hist = label_histogram(client);
    for (int k = 0; k < 4; ++k) {
      const auto it = hist.find(k);
      REQUIRE(it != hist.end());
      CHECK(std::abs(it->second - 0.25) < 0.10 * 0.25 + 0.02);
    }
  }
}

TEST_CASE("small concentration concentrates labels") {
  const Dataset dataset = make_synthetic_dataset(2000, 4, 4, 2.0, 7);
  const auto clients =
      partition_skewed(dataset, 8, 0.05, uniform_profile(8), 7);
  // At least one client should be dominated by a single class.
  bool found_dominated = false;
  for (const auto& client : clients) {
    for (const auto& [k, share] : label_histogram(client)) {
      if (share > 0.7) found_dominated = true;
    }
  }
  CHECK(found_dominated);
}

TEST_CASE("partition csv loads and builds clients") {
  const Dataset dataset = make_synthetic_dataset(10, 2, 2, 2.0, 1);
  const std::string path = temp_path("fedproto_partition_test.csv");
  {
    std::ofstream os(path);
    os << "client_id,sample_id\n";
    for (std::size_t i = 0; i < 10; ++i) {
      os << (i % 3 + 1) << ",s" << i << "\n";
    }
  }
  const auto assignments = load_partition_csv(path);
  REQUIRE(assignments.size() == 10);
  const auto clients = build_clients(dataset, assignments, 1);
  REQUIRE(clients.size() == 3);
  std::size_t total = 0;
  for (const auto& c : clients) total += c.n_total();
  CHECK(total == 10);
  std::filesystem::remove(path);
}

TEST_CASE("partition csv rejects duplicates and bad headers") {
  const std::string dup = temp_path("fedproto_partition_dup.csv");
  {
    std::ofstream os(dup);
    os << "client_id,sample_id\n1,s0\n2,s0\n";
  }
  CHECK_THROWS_AS(load_partition_csv(dup), std::runtime_error);
  std::filesystem::remove(dup);

  const std::string bad = temp_path("fedproto_partition_hdr.csv");
  {
    std::ofstream os(bad);
    os << "sample_id,client_id\n";
  }
  CHECK_THROWS_AS(load_partition_csv(bad), std::runtime_error);
  std::filesystem::remove(bad);

  CHECK_THROWS_AS(load_partition_csv(temp_path("fedproto_no_such.csv")),
                  std::runtime_error);
}

TEST_CASE("dataset csv round trip") {
  const std::string path = temp_path("fedproto_dataset_test.csv");
  {
    std::ofstream os(path);
    os << "sample_id,label,f0,f1\n";
    os << "a,0,1.5,-2.0\n";
    os << "b,1,0.0,3.25\n";
    os << "c,2,1.0,1.0\n";
  }
  const Dataset dataset = load_dataset_csv(path);
  CHECK(dataset.size() == 3);
  CHECK(dataset.n_features == 2);
  CHECK(dataset.n_classes == 3);
  CHECK(dataset.sample_ids[1] == "b");
  CHECK(dataset.features[0][1] == -2.0);
  CHECK(dataset.labels[2] == 2);
  std::filesystem::remove(path);
}

TEST_CASE("evaluate reaches full accuracy on a trivially separable setup") {
  TaskModel model{ModelKind::MultinomialLogistic, 2, 2, 0};
  // Class 0 when x0 large, class 1 when x1 large.
  const ParamVector params =
      ParamVector(model.layout(), {10.0, 0.0, 0.0, 10.0, 0.0, 0.0});
  LabeledSet data;
  data.x = {{3.0, 0.0}, {0.0, 3.0}, {5.0, 1.0}};
  data.y = {0, 1, 0};
  const EvalResult eval = evaluate(model, params, data);
  CHECK(eval.accuracy == doctest::Approx(1.0));
}
