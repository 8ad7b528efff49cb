#include "fedproto/local_train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "fedproto/rng.hpp"

namespace fedproto {

void ClientTrainConfig::validate() const {
  if (epochs_per_round < 1) {
    throw std::invalid_argument("ClientTrainConfig: epochs_per_round >= 1");
  }
  if (!(lr >= 0.0)) {
    throw std::invalid_argument("ClientTrainConfig: lr must be >= 0");
  }
  if (batch_size < 1) {
    throw std::invalid_argument("ClientTrainConfig: batch_size >= 1");
  }
  if (!(tau > 0.0)) {
    throw std::invalid_argument("ClientTrainConfig: tau must be > 0");
  }
}

ClientUpdate local_train(const TaskModel& model, const ParamVector& broadcast,
                         const ClientDataset& client,
                         const ClientTrainConfig& config, int round) {
  config.validate();
  const double pre_loss = evaluate(model, broadcast, client.val).loss;

  const std::size_t n = client.train.size();
  std::vector<double> w(broadcast.values().begin(), broadcast.values().end());
  std::vector<double> m(w.size(), 0.0);
  std::vector<double> v(w.size(), 0.0);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(config.run_seed, 0x74726e /* "trn" */,
                      static_cast<std::uint64_t>(client.client_id),
                      static_cast<std::uint64_t>(round)));

  ParamVector params = broadcast;
  for (int epoch = 0; epoch < config.epochs_per_round; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t end = std::min(n, start + config.batch_size);
      const std::span<const std::size_t> batch(order.data() + start,
                                               end - start);
      auto [loss, grad] = loss_and_grad(model, params, client.train, batch);
      if (!std::isfinite(loss)) {
        throw ClientFailure("client " + std::to_string(client.client_id) +
                            ": non-finite training loss");
      }
      // Same accumulation rule as the server-side Adam variant: no bias
      // correction, tau outside the square root.
      bool finite = true;
      for (std::size_t j = 0; j < w.size(); ++j) {
        const double g = grad[j];
        m[j] = config.beta1 * m[j] + (1.0 - config.beta1) * g;
        v[j] = config.beta2 * v[j] + (1.0 - config.beta2) * g * g;
        w[j] -= config.lr * m[j] / (std::sqrt(v[j]) + config.tau);
        if (!std::isfinite(w[j])) finite = false;
      }
      if (!finite) {
        throw ClientFailure("client " + std::to_string(client.client_id) +
                            ": non-finite parameters during training");
      }
      params = ParamVector(broadcast.layout(), w);
    }
  }

  const double post_loss = evaluate(model, params, client.val).loss;
  if (!std::isfinite(post_loss)) {
    throw ClientFailure("client " + std::to_string(client.client_id) +
                        ": non-finite validation loss");
  }

  ClientUpdate update;
  update.client_id = client.client_id;
  update.params = std::move(params);
  update.n_samples = n;
  update.pre_loss = pre_loss;
  update.post_loss = post_loss;
  return update;
}

}  // namespace fedproto
