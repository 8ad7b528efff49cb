#include "fedproto/task_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "fedproto/rng.hpp"

namespace fedproto {

namespace {

void softmax_inplace(std::vector<double>& logits) {
  const double peak = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double& v : logits) {
    v = std::exp(v - peak);
    total += v;
  }
  for (double& v : logits) v /= total;
}

std::size_t argmax_lowest(const std::vector<double>& values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

}  // namespace

std::string model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::MultinomialLogistic: return "logistic";
    case ModelKind::OneHiddenLayerNet: return "mlp";
  }
  throw std::logic_error("unknown model kind");
}

ModelKind model_kind_from_name(const std::string& name) {
  if (name == "logistic") return ModelKind::MultinomialLogistic;
  if (name == "mlp") return ModelKind::OneHiddenLayerNet;
  throw std::invalid_argument("unknown model kind: " + name);
}

Layout TaskModel::layout() const {
  const std::size_t k = static_cast<std::size_t>(n_classes);
  if (kind == ModelKind::MultinomialLogistic) {
    return {{"W", input_dim * k}, {"b", k}};
  }
  return {{"W1", input_dim * hidden},
          {"b1", hidden},
          {"W2", hidden * k},
          {"b2", k}};
}

ParamVector TaskModel::init_params(std::uint64_t seed) const {
  if (kind == ModelKind::MultinomialLogistic) {
    return ParamVector::zeros(layout());
  }
  Rng rng(derive_seed(seed, 0x696e6974 /* "init" */));
  std::normal_distribution<double> normal(0.0, 1.0);
  const double scale1 = 1.0 / std::sqrt(static_cast<double>(input_dim));
  const double scale2 = 1.0 / std::sqrt(static_cast<double>(hidden));
  Layout lay = layout();
  std::vector<double> values(layout_size(lay), 0.0);
  std::size_t pos = 0;
  for (std::size_t i = 0; i < lay[0].length; ++i) values[pos++] = scale1 * normal(rng);
  pos += lay[1].length;  // b1 zero
  for (std::size_t i = 0; i < lay[2].length; ++i) values[pos++] = scale2 * normal(rng);
  return ParamVector(std::move(lay), std::move(values));
}

std::pair<double, ParamVector> loss_and_grad(
    const TaskModel& model, const ParamVector& params, const LabeledSet& data,
    std::span<const std::size_t> indices) {
  if (indices.empty()) {
    throw std::invalid_argument("loss_and_grad: empty batch");
  }
  const std::size_t d = model.input_dim;
  const std::size_t k = static_cast<std::size_t>(model.n_classes);
  const double inv_n = 1.0 / static_cast<double>(indices.size());
  std::vector<double> grad(params.size(), 0.0);
  double loss = 0.0;

  if (model.kind == ModelKind::MultinomialLogistic) {
    const std::size_t b_off = d * k;
    std::vector<double> probs(k);
    for (std::size_t idx : indices) {
      const auto& x = data.x[idx];
      if (x.size() != d) {
        throw std::invalid_argument("loss_and_grad: feature dimension mismatch");
      }
      const std::size_t y = static_cast<std::size_t>(data.y[idx]);
      for (std::size_t c = 0; c < k; ++c) {
        double logit = params[b_off + c];
        for (std::size_t j = 0; j < d; ++j) logit += x[j] * params[j * k + c];
        probs[c] = logit;
      }
      softmax_inplace(probs);
      loss -= std::log(std::max(probs[y], 1e-300)) * inv_n;
      for (std::size_t c = 0; c < k; ++c) {
        const double err = (probs[c] - (c == y ? 1.0 : 0.0)) * inv_n;
        grad[b_off + c] += err;
        for (std::size_t j = 0; j < d; ++j) grad[j * k + c] += x[j] * err;
      }
    }
  } else {
    const std::size_t h = model.hidden;
    const std::size_t w1_off = 0;
    const std::size_t b1_off = d * h;
    const std::size_t w2_off = b1_off + h;
    const std::size_t b2_off = w2_off + h * k;
    std::vector<double> hidden_act(h);
    std::vector<double> probs(k);
    std::vector<double> hidden_err(h);
    for (std::size_t idx : indices) {
      const auto& x = data.x[idx];
      if (x.size() != d) {
        throw std::invalid_argument("loss_and_grad: feature dimension mismatch");
      }
      const std::size_t y = static_cast<std::size_t>(data.y[idx]);
      for (std::size_t m = 0; m < h; ++m) {
        double z = params[b1_off + m];
        for (std::size_t j = 0; j < d; ++j) {
          z += x[j] * params[w1_off + j * h + m];
        }
        hidden_act[m] = std::tanh(z);
      }
      for (std::size_t c = 0; c < k; ++c) {
        double logit = params[b2_off + c];
        for (std::size_t m = 0; m < h; ++m) {
          logit += hidden_act[m] * params[w2_off + m * k + c];
        }
        probs[c] = logit;
      }
      softmax_inplace(probs);
      loss -= std::log(std::max(probs[y], 1e-300)) * inv_n;
      std::fill(hidden_err.begin(), hidden_err.end(), 0.0);
      for (std::size_t c = 0; c < k; ++c) {
        const double err = (probs[c] - (c == y ? 1.0 : 0.0)) * inv_n;
        grad[b2_off + c] += err;
        for (std::size_t m = 0; m < h; ++m) {
          grad[w2_off + m * k + c] += hidden_act[m] * err;
          hidden_err[m] += params[w2_off + m * k + c] * err;
        }
      }
      for (std::size_t m = 0; m < h; ++m) {
        const double dz = (1.0 - hidden_act[m] * hidden_act[m]) * hidden_err[m];
        grad[b1_off + m] += dz;
        for (std::size_t j = 0; j < d; ++j) {
          grad[w1_off + j * h + m] += x[j] * dz;
        }
      }
    }
  }

  return {loss, ParamVector(params.layout(), std::move(grad))};
}

EvalResult evaluate(const TaskModel& model, const ParamVector& params,
                    const LabeledSet& data) {
  if (data.size() == 0) {
    throw std::invalid_argument("evaluate: empty validation split");
  }
  const std::size_t d = model.input_dim;
  const std::size_t k = static_cast<std::size_t>(model.n_classes);
  const double inv_n = 1.0 / static_cast<double>(data.size());
  double loss = 0.0;
  std::size_t correct = 0;
  std::vector<double> probs(k);
  std::vector<double> hidden_act(model.hidden);

  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& x = data.x[i];
    const std::size_t y = static_cast<std::size_t>(data.y[i]);
    if (model.kind == ModelKind::MultinomialLogistic) {
      const std::size_t b_off = d * k;
      for (std::size_t c = 0; c < k; ++c) {
        double logit = params[b_off + c];
        for (std::size_t j = 0; j < d; ++j) logit += x[j] * params[j * k + c];
        probs[c] = logit;
      }
    } else {
      const std::size_t h = model.hidden;
      const std::size_t b1_off = d * h;
      const std::size_t w2_off = b1_off + h;
      const std::size_t b2_off = w2_off + h * k;
      for (std::size_t m = 0; m < h; ++m) {
        double z = params[b1_off + m];
        for (std::size_t j = 0; j < d; ++j) z += x[j] * params[j * h + m];
        hidden_act[m] = std::tanh(z);
      }
      for (std::size_t c = 0; c < k; ++c) {
        double logit = params[b2_off + c];
        for (std::size_t m = 0; m < h; ++m) {
          logit += hidden_act[m] * params[w2_off + m * k + c];
        }
        probs[c] = logit;
      }
    }
    softmax_inplace(probs);
    loss -= std::log(std::max(probs[y], 1e-300)) * inv_n;
    if (argmax_lowest(probs) == y) ++correct;
  }

  return {loss, static_cast<double>(correct) * inv_n};
}

}  // namespace fedproto
