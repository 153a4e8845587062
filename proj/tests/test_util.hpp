#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "promptdt/tensor.hpp"

namespace promptdt::testing {

inline Tensor<double> random_tensor(Shape shape, std::mt19937_64& rng, double scale = 1.0,
                                    bool requires_grad = true) {
  std::normal_distribution<double> n(0.0, scale);
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = n(rng);
  return Tensor<double>(std::move(shape), std::move(v), requires_grad);
}

/// sum(out * weights): a scalar whose gradient w.r.t. out is `weights`.
inline Tensor<double> weighted_sum(Tape<double>& tape, const Tensor<double>& out,
                                   const Tensor<double>& weights) {
  return ops::sum(tape, ops::mul(tape, out, weights));
}

struct GradCheck {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

/// Compares backward() against central differences for every element of every
/// input. Relative error uses max(|analytic|, |numeric|, 1e-3) as denominator
/// so entries whose true gradient is ~0 are judged on absolute error.
inline GradCheck check_gradients(std::vector<Tensor<double>> inputs,
                                 const std::function<Tensor<double>(Tape<double>&)>& loss_fn,
                                 double h = 1e-5) {
  for (auto& t : inputs) {
    t.set_requires_grad(true);
    t.clear_grad();
  }
  Tape<double> tape;
  Tensor<double> loss = loss_fn(tape);
  tape.backward(loss);
  std::vector<std::vector<double>> analytic;
  for (auto& t : inputs) {
    if (t.has_grad()) {
      auto g = std::as_const(t).grad();
      analytic.emplace_back(g.begin(), g.end());
    } else {
      analytic.emplace_back(t.numel(), 0.0);
    }
  }
  GradCheck out;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    auto data = inputs[i].data();
    for (std::size_t j = 0; j < data.size(); ++j) {
      const double saved = data[j];
      data[j] = saved + h;
      Tape<double> p(false);
      const double up = loss_fn(p).item();
      data[j] = saved - h;
      Tape<double> m(false);
      const double down = loss_fn(m).item();
      data[j] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[i][j];
      const double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-3});
      out.max_rel_error = std::max(out.max_rel_error, std::fabs(a - numeric) / denom);
      ++out.checked;
    }
  }
  return out;
}

}  // namespace promptdt::testing
