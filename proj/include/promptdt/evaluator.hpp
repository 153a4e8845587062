#pragma once

#include <cstdint>
#include <ostream>
#include <span>
#include <vector>

#include "promptdt/datagen.hpp"
#include "promptdt/envs.hpp"
#include "promptdt/model.hpp"

namespace promptdt {

struct EvalConfig {
  double target_return = 0.0;  // G*
  std::size_t horizon = kEpisodeLength;
  std::size_t episodes_per_task = 20;
  std::size_t J = 1;
  std::size_t H = 5;
  std::size_t K = 20;
  std::uint64_t seed = 0;
  /// When set, one JSON line per environment step is written here.
  std::ostream* trace = nullptr;
};

/// A test task and the demonstrations its prompts are drawn from.
struct EvalTask {
  TaskSpec task;
  std::vector<Trajectory> demos;
};

struct EpisodeLog {
  std::vector<double> rewards;
  std::vector<double> rtg;  // reward-to-go fed to the model at each step
  std::vector<std::array<double, kActionDim>> actions;
  std::size_t max_history = 0;  // largest number of real history slots seen
  double episode_return = 0.0;
};

/// Runs one episode. The prompt is drawn once from `demos` before the loop,
/// then the environment is reset, both with `rng`.
template <typename T>
double evaluate_episode(const ModelWeights<T>& w, const TaskSpec& task,
                        std::span<const Trajectory> demos, const EvalConfig& cfg, Rng& rng,
                        EpisodeLog* log = nullptr);

struct TaskReturns {
  int task_id = 0;
  double mean = 0.0;
  double std = 0.0;
  std::vector<double> returns;
};

struct SuiteResult {
  std::vector<TaskReturns> tasks;
  double aggregate = 0.0;  // mean of the per-task means
};

/// Rng stream for one (task, episode) pair of a suite.
Rng episode_rng(std::uint64_t seed, int task_id, std::size_t episode);

/// episodes_per_task episodes per task. All episodes advance in lockstep so
/// the model runs one batched forward pass per environment step.
template <typename T>
SuiteResult evaluate_suite(const ModelWeights<T>& w, std::span<const EvalTask> tasks,
                           const EvalConfig& cfg);

/// 90th percentile (linear interpolation) of the episode returns, rounded to
/// two significant figures.
double select_target_return(std::span<const OfflineDataset> datasets);

/// Rounds to `digits` significant figures; zero stays zero.
double round_significant(double x, int digits);

}  // namespace promptdt
