#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>

#include "fedproto/dataset.hpp"
#include "fedproto/param_vector.hpp"

namespace fedproto {

enum class ModelKind { MultinomialLogistic, OneHiddenLayerNet };

std::string model_kind_name(ModelKind kind);
ModelKind model_kind_from_name(const std::string& name);

/// Desk-scale classifier whose parameters live in a ParamVector with one
/// segment per weight/bias tensor.
struct TaskModel {
  ModelKind kind = ModelKind::MultinomialLogistic;
  std::size_t input_dim = 0;
  int n_classes = 0;
  std::size_t hidden = 0;  // OneHiddenLayerNet only

  Layout layout() const;
  // Logistic starts at zero; the net gets a small seeded Gaussian init.
  ParamVector init_params(std::uint64_t seed) const;
};

struct EvalResult {
  double loss = 0.0;
  double accuracy = 0.0;
};

// Mean cross-entropy over the index subset plus its analytic gradient.
std::pair<double, ParamVector> loss_and_grad(
    const TaskModel& model, const ParamVector& params, const LabeledSet& data,
    std::span<const std::size_t> indices);

// Argmax ties resolve to the lowest class index.
EvalResult evaluate(const TaskModel& model, const ParamVector& params,
                    const LabeledSet& data);

}  // namespace fedproto
