#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace fedproto {

struct LabeledSet {
  std::vector<std::vector<double>> x;
  std::vector<int> y;

  std::size_t size() const { return x.size(); }
};

struct Dataset {
  std::size_t n_features = 0;
  int n_classes = 0;
  std::vector<std::string> sample_ids;
  std::vector<std::vector<double>> features;
  std::vector<int> labels;

  std::size_t size() const { return features.size(); }
};

/// One client's partition, already split 80-20 into train and validation.
struct ClientDataset {
  int client_id = 0;
  LabeledSet train;
  LabeledSet val;

  std::size_t n_total() const { return train.size() + val.size(); }
};

// Gaussian class-conditional clusters; class means are unit directions scaled
// by `separation`, so difficulty is tunable and separable cases exist.
Dataset make_synthetic_dataset(std::size_t n_samples, std::size_t n_features,
                               int n_classes, double separation,
                               std::uint64_t seed);

std::vector<double> uniform_profile(std::size_t n_clients);
// Two dominant clients holding a major chunk, long tail for the rest.
std::vector<double> skewed_profile(std::size_t n_clients);

// Non-iid partitioning: sample counts follow `size_profile` (±1 from
// apportionment) and per-client label mixes are drawn from a Dirichlet with
// alpha_k = concentration * global_class_frequency_k.
std::vector<ClientDataset> partition_skewed(
    const Dataset& dataset, std::size_t n_clients, double concentration,
    const std::vector<double>& size_profile, std::uint64_t seed);

// Partition CSV: header "client_id,sample_id", one assignment per row.
std::vector<std::pair<int, std::string>> load_partition_csv(
    const std::string& path);

std::vector<ClientDataset> build_clients(
    const Dataset& dataset,
    const std::vector<std::pair<int, std::string>>& assignments,
    std::uint64_t seed);

// Dataset CSV: header "sample_id,label,f0,f1,...".
Dataset load_dataset_csv(const std::string& path);

}  // namespace fedproto
