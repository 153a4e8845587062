#include "promptdt/adam.hpp"

#include <cmath>
#include <string>

namespace promptdt {

template <typename T>
AdamState<T>::AdamState(std::span<const Tensor<T>> params, double lr, double wd)
    : learning_rate(lr), weight_decay(wd) {
  first_moment.reserve(params.size());
  second_moment.reserve(params.size());
  for (const auto& p : params) {
    first_moment.emplace_back(p.numel(), T(0));
    second_moment.emplace_back(p.numel(), T(0));
  }
}

template <typename T>
void adam_step(std::span<Tensor<T>> params, AdamState<T>& state) {
  if (state.first_moment.size() != params.size() || state.second_moment.size() != params.size()) {
    throw DimensionError("adam_step: state tracks " + std::to_string(state.first_moment.size()) +
                         " parameters, got " + std::to_string(params.size()));
  }
  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const T b1 = static_cast<T>(state.beta1);
  const T b2 = static_cast<T>(state.beta2);
  const T c1 = static_cast<T>(1.0 / (1.0 - std::pow(state.beta1, t)));
  const T c2 = static_cast<T>(1.0 / (1.0 - std::pow(state.beta2, t)));
  const T lr = static_cast<T>(state.learning_rate);
  const T decay = static_cast<T>(state.learning_rate * state.weight_decay);
  const T eps = static_cast<T>(state.epsilon);

  for (std::size_t p = 0; p < params.size(); ++p) {
    auto& param = params[p];
    auto& m = state.first_moment[p];
    auto& v = state.second_moment[p];
    if (m.size() != param.numel() || v.size() != param.numel()) {
      throw DimensionError("adam_step: moment size mismatch for parameter " + std::to_string(p) +
                           " of shape " + shape_to_string(param.shape()));
    }
    auto w = param.data();
    const bool has_grad = param.has_grad();
    auto g = std::as_const(param).grad();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const T gi = has_grad ? g[i] : T(0);
      m[i] = b1 * m[i] + (T(1) - b1) * gi;
      v[i] = b2 * v[i] + (T(1) - b2) * gi * gi;
      w[i] -= decay * w[i];
      const T mhat = m[i] * c1;
      const T vhat = v[i] * c2;
      w[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

template struct AdamState<float>;
template struct AdamState<double>;
template void adam_step(std::span<Tensor<float>>, AdamState<float>&);
template void adam_step(std::span<Tensor<double>>, AdamState<double>&);

}  // namespace promptdt
