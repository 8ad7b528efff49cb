#include "fedproto/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include "fedproto/rng.hpp"

namespace fedproto {

namespace {

// Largest-remainder apportionment: integer counts summing exactly to total.
std::vector<std::size_t> apportion(const std::vector<double>& weights,
                                   std::size_t total) {
  const double wsum = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(wsum > 0.0)) {
    throw std::invalid_argument("apportion: weights must sum to > 0");
  }
  const std::size_t n = weights.size();
  std::vector<std::size_t> counts(n);
  std::vector<std::pair<double, std::size_t>> remainders(n);
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double exact = weights[i] / wsum * static_cast<double>(total);
    counts[i] = static_cast<std::size_t>(exact);
    assigned += counts[i];
    remainders[i] = {exact - static_cast<double>(counts[i]), i};
  }
  std::sort(remainders.begin(), remainders.end(),
            [](const auto& a, const auto& b) {
              if (a.first != b.first) return a.first > b.first;
              return a.second < b.second;
            });
  for (std::size_t i = 0; assigned < total; ++i, ++assigned) {
    counts[remainders[i % n].second] += 1;
  }
  return counts;
}

std::vector<double> dirichlet(Rng& rng, const std::vector<double>& alpha) {
  std::vector<double> out(alpha.size());
  double total = 0.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    std::gamma_distribution<double> gamma(alpha[i], 1.0);
    out[i] = gamma(rng);
    total += out[i];
  }
  if (total <= 0.0) {
    // All gamma draws underflowed (tiny concentration); pick one class.
    std::uniform_int_distribution<std::size_t> pick(0, alpha.size() - 1);
    out.assign(alpha.size(), 0.0);
    out[pick(rng)] = 1.0;
    return out;
  }
  for (double& v : out) v /= total;
  return out;
}

ClientDataset split_client(const Dataset& dataset, int client_id,
                           std::vector<std::size_t> indices,
                           std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x73706c69 /* "spli" */,
                      static_cast<std::uint64_t>(client_id)));
  std::shuffle(indices.begin(), indices.end(), rng);
  const std::size_t n_val = static_cast<std::size_t>(
      std::llround(0.2 * static_cast<double>(indices.size())));
  ClientDataset client;
  client.client_id = client_id;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    LabeledSet& dest = i < n_val ? client.val : client.train;
    dest.x.push_back(dataset.features[indices[i]]);
    dest.y.push_back(dataset.labels[indices[i]]);
  }
  return client;
}

}  // namespace

Dataset make_synthetic_dataset(std::size_t n_samples, std::size_t n_features,
                               int n_classes, double separation,
                               std::uint64_t seed) {
  if (n_samples == 0 || n_features == 0 || n_classes < 2) {
    throw std::invalid_argument("make_synthetic_dataset: bad dimensions");
  }
  Rng rng(derive_seed(seed, 0x64617461 /* "data" */));
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<std::vector<double>> means(static_cast<std::size_t>(n_classes));
  for (auto& mean : means) {
    mean.resize(n_features);
    double norm = 0.0;
    for (double& m : mean) {
      m = normal(rng);
      norm += m * m;
    }
    norm = std::sqrt(norm);
    for (double& m : mean) m = separation * m / norm;
  }

  Dataset dataset;
  dataset.n_features = n_features;
  dataset.n_classes = n_classes;
  dataset.sample_ids.reserve(n_samples);
  dataset.features.reserve(n_samples);
  dataset.labels.reserve(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i) {
    const int label = static_cast<int>(i % static_cast<std::size_t>(n_classes));
    std::vector<double> x(n_features);
    for (std::size_t j = 0; j < n_features; ++j) {
      x[j] = means[static_cast<std::size_t>(label)][j] + normal(rng);
    }
    dataset.sample_ids.push_back("s" + std::to_string(i));
    dataset.features.push_back(std::move(x));
    dataset.labels.push_back(label);
  }
  return dataset;
}

std::vector<double> uniform_profile(std::size_t n_clients) {
  return std::vector<double>(n_clients, 1.0 / static_cast<double>(n_clients));
}

std::vector<double> skewed_profile(std::size_t n_clients) {
  if (n_clients == 1) return {1.0};
  if (n_clients == 2) return {0.6, 0.4};
  std::vector<double> profile(n_clients,
                              0.25 / static_cast<double>(n_clients - 2));
  profile[0] = 0.45;
  profile[1] = 0.30;
  return profile;
}

std::vector<ClientDataset> partition_skewed(
    const Dataset& dataset, std::size_t n_clients, double concentration,
    const std::vector<double>& size_profile, std::uint64_t seed) {
  if (n_clients < 1) {
    throw std::invalid_argument("partition_skewed: n_clients must be >= 1");
  }
  if (dataset.size() < n_clients) {
    throw std::invalid_argument("partition_skewed: dataset too small");
  }
  if (size_profile.size() != n_clients) {
    throw std::invalid_argument(
        "partition_skewed: profile size must match client count");
  }
  if (!(concentration > 0.0)) {
    throw std::invalid_argument("partition_skewed: concentration must be > 0");
  }

  const std::size_t n_classes = static_cast<std::size_t>(dataset.n_classes);
  std::vector<std::size_t> client_sizes = apportion(size_profile, dataset.size());
  // Every client must own at least one sample.
  for (std::size_t c = 0; c < n_clients; ++c) {
    while (client_sizes[c] == 0) {
      auto largest = std::max_element(client_sizes.begin(), client_sizes.end());
      *largest -= 1;
      client_sizes[c] += 1;
    }
  }

  // Class pools in seeded-shuffled order.
  std::vector<std::vector<std::size_t>> pools(n_classes);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    pools[static_cast<std::size_t>(dataset.labels[i])].push_back(i);
  }
  Rng pool_rng(derive_seed(seed, 0x706f6f6c /* "pool" */));
  for (auto& pool : pools) std::shuffle(pool.begin(), pool.end(), pool_rng);

  std::vector<double> global_freq(n_classes);
  for (std::size_t k = 0; k < n_classes; ++k) {
    global_freq[k] =
        static_cast<double>(pools[k].size()) / static_cast<double>(dataset.size());
  }

  // Per-client class targets from a Dirichlet draw.
  std::vector<std::vector<std::size_t>> targets(n_clients);
  for (std::size_t c = 0; c < n_clients; ++c) {
    Rng rng(derive_seed(seed, 0x64697269 /* "diri" */, c));
    std::vector<double> alpha(n_classes);
    for (std::size_t k = 0; k < n_classes; ++k) {
      alpha[k] = std::max(concentration * global_freq[k], 1e-12);
    }
    targets[c] = apportion(dirichlet(rng, alpha), client_sizes[c]);
  }

  // First pass honors the targets as far as the pools allow; the second pass
  // tops up deficits from whatever remains.
  std::vector<std::size_t> pool_pos(n_classes, 0);
  std::vector<std::vector<std::size_t>> assigned(n_clients);
  for (std::size_t c = 0; c < n_clients; ++c) {
    for (std::size_t k = 0; k < n_classes; ++k) {
      const std::size_t available = pools[k].size() - pool_pos[k];
      const std::size_t take = std::min(targets[c][k], available);
      for (std::size_t i = 0; i < take; ++i) {
        assigned[c].push_back(pools[k][pool_pos[k]++]);
      }
    }
  }
  for (std::size_t c = 0; c < n_clients; ++c) {
    std::size_t deficit = client_sizes[c] - assigned[c].size();
    for (std::size_t k = 0; k < n_classes && deficit > 0; ++k) {
      while (deficit > 0 && pool_pos[k] < pools[k].size()) {
        assigned[c].push_back(pools[k][pool_pos[k]++]);
        --deficit;
      }
    }
  }

  std::vector<ClientDataset> clients;
  clients.reserve(n_clients);
  for (std::size_t c = 0; c < n_clients; ++c) {
    clients.push_back(split_client(dataset, static_cast<int>(c) + 1,
                                   std::move(assigned[c]), seed));
  }
  return clients;
}

std::vector<std::pair<int, std::string>> load_partition_csv(
    const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open partition file: " + path);
  std::string line;
  if (!std::getline(is, line) || line != "client_id,sample_id") {
    throw std::runtime_error("partition file: bad header in " + path);
  }
  std::vector<std::pair<int, std::string>> assignments;
  std::set<std::string> seen;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos || comma == 0 || comma + 1 >= line.size()) {
      throw std::runtime_error("partition file: malformed row at line " +
                               std::to_string(line_no));
    }
    int client_id = 0;
    try {
      client_id = std::stoi(line.substr(0, comma));
    } catch (const std::exception&) {
      throw std::runtime_error("partition file: bad client_id at line " +
                               std::to_string(line_no));
    }
    std::string sample_id = line.substr(comma + 1);
    if (!seen.insert(sample_id).second) {
      throw std::runtime_error("partition file: duplicate sample_id '" +
                               sample_id + "'");
    }
    assignments.emplace_back(client_id, std::move(sample_id));
  }
  return assignments;
}

std::vector<ClientDataset> build_clients(
    const Dataset& dataset,
    const std::vector<std::pair<int, std::string>>& assignments,
    std::uint64_t seed) {
  std::map<std::string, std::size_t> index_of;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    index_of[dataset.sample_ids[i]] = i;
  }
  std::map<int, std::vector<std::size_t>> by_client;
  for (const auto& [client_id, sample_id] : assignments) {
    auto it = index_of.find(sample_id);
    if (it == index_of.end()) {
      throw std::runtime_error("partition references unknown sample_id '" +
                               sample_id + "'");
    }
    by_client[client_id].push_back(it->second);
  }
  std::vector<ClientDataset> clients;
  clients.reserve(by_client.size());
  for (auto& [client_id, indices] : by_client) {
    clients.push_back(
        split_client(dataset, client_id, std::move(indices), seed));
  }
  return clients;
}

Dataset load_dataset_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open dataset file: " + path);
  std::string line;
  if (!std::getline(is, line) || line.rfind("sample_id,label", 0) != 0) {
    throw std::runtime_error("dataset file: bad header in " + path);
  }
  Dataset dataset;
  int max_label = -1;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    if (!std::getline(ss, field, ',')) {
      throw std::runtime_error("dataset file: malformed row at line " +
                               std::to_string(line_no));
    }
    dataset.sample_ids.push_back(field);
    if (!std::getline(ss, field, ',')) {
      throw std::runtime_error("dataset file: missing label at line " +
                               std::to_string(line_no));
    }
    const int label = std::stoi(field);
    max_label = std::max(max_label, label);
    dataset.labels.push_back(label);
    std::vector<double> features;
    while (std::getline(ss, field, ',')) {
      features.push_back(std::stod(field));
    }
    if (dataset.n_features == 0) {
      dataset.n_features = features.size();
    } else if (features.size() != dataset.n_features) {
      throw std::runtime_error("dataset file: inconsistent feature count at line " +
                               std::to_string(line_no));
    }
    dataset.features.push_back(std::move(features));
  }
  dataset.n_classes = max_label + 1;
  return dataset;
}

}  // namespace fedproto
