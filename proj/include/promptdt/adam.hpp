#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "promptdt/tensor.hpp"

namespace promptdt {

/// Adam moments and hyperparameters. Weight decay is decoupled from the
/// moment estimates and applied directly to the parameters.
template <typename T>
struct AdamState {
  std::int64_t step_count = 0;
  std::vector<std::vector<T>> first_moment;
  std::vector<std::vector<T>> second_moment;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double learning_rate = 1e-4;
  double weight_decay = 0.0;

  AdamState() = default;
  AdamState(std::span<const Tensor<T>> params, double lr, double wd = 0.0);
};

/// One Adam update using each parameter's accumulated gradient. Parameters
/// without a gradient buffer are treated as having a zero gradient.
template <typename T>
void adam_step(std::span<Tensor<T>> params, AdamState<T>& state);

}  // namespace promptdt
