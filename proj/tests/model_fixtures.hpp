#pragma once

#include <random>
#include <vector>

#include "promptdt/model.hpp"
#include "promptdt/trajectory.hpp"

namespace promptdt::testing {

inline Trajectory random_episode(std::size_t T, std::size_t ds, std::size_t da, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  Trajectory tr;
  tr.state_dim = ds;
  tr.action_dim = da;
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t k = 0; k < ds; ++k) tr.states.push_back(n(rng));
    for (std::size_t k = 0; k < da; ++k) tr.actions.push_back(n(rng));
    tr.rewards.push_back(n(rng));
    tr.timesteps.push_back(static_cast<std::int64_t>(t));
  }
  tr.rtg = compute_rtg(tr.rewards);
  return tr;
}

/// Small architecture so finite differences over every parameter stay cheap.
inline ModelConfig tiny_config(Variant v = Variant::PromptDT, std::size_t layers = 1) {
  ModelConfig c;
  c.state_dim = 3;
  c.action_dim = 2;
  c.embed_dim = 8;
  c.n_layers = layers;
  c.n_heads = 2;
  c.context_len = 4;
  c.max_prompt_len = 6;
  c.max_ep_len = 30;
  c.rtg_scale = 2.0;
  c.variant = v;
  c.state_mean = {0.1, -0.2, 0.3};
  c.state_std = {1.5, 0.7, 1.1};
  return c;
}

/// Initialized weights with every parameter (gains and biases included)
/// perturbed by N(0, scale) so no gradient is trivially zero.
template <typename T>
ModelWeights<T> random_weights(const ModelConfig& c, std::uint64_t seed, double scale = 0.3) {
  auto w = ModelWeights<T>::initialize(c, seed);
  std::mt19937_64 rng(seed + 1000);
  std::normal_distribution<double> n(0.0, scale);
  for (auto& [name, t] : w.named_parameters()) {
    for (auto& x : t->data()) x += static_cast<T>(n(rng));
  }
  return w;
}

/// Full-layout inputs (prompt + rtg everywhere) drawn from random episodes,
/// then reduced to the variant's layout.
inline std::vector<ModelInput> random_batch(Variant v, std::size_t B, std::size_t J, std::size_t H,
                                            std::size_t K, std::size_t ds, std::size_t da,
                                            std::uint64_t seed, std::size_t T = 30) {
  std::vector<Trajectory> demos{random_episode(T, ds, da, seed), random_episode(T, ds, da, seed + 1)};
  const Trajectory ep = random_episode(T, ds, da, seed + 2);
  Rng rng(seed);
  std::vector<ModelInput> batch;
  for (std::size_t b = 0; b < B; ++b) {
    // Alternate between a fully real and a partly padded history.
    const std::size_t end = b % 2 == 0 ? T - 1 - b : (K > 1 ? K / 2 - 1 : 0);
    auto in = assemble_input(get_prompt(demos, J, H, rng), history_ending_at(ep, end, K));
    batch.push_back(apply_variant(v, std::move(in)));
  }
  return batch;
}

}  // namespace promptdt::testing
