#pragma once

#include <cstdint>
#include <functional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "promptdt/datagen.hpp"
#include "promptdt/evaluator.hpp"
#include "promptdt/model.hpp"

namespace promptdt {

struct TrainConfig {
  std::size_t iterations = 5000;      // N
  std::size_t batch_per_task = 8;     // M
  double learning_rate = 1e-4;
  double weight_decay = 1e-4;
  std::size_t J = 1;
  std::size_t H = 5;
  std::size_t K = 20;
  std::size_t eval_interval = 500;    // 0 disables evaluation during training
  std::size_t eval_episodes = 20;
  std::uint64_t eval_seed = 0;        // the same seed at every eval point
  double target_return = 0.0;         // G* used by evaluation
  Variant variant = Variant::PromptDT;
  std::uint64_t seed = 1;
  /// 0 derives the scale from the data: the mean absolute episode return of
  /// the training episodes, floored at 1.
  double rtg_scale = 0.0;
  /// Architecture. Dimensions, rtg_scale, normalization, context length and
  /// variant are overwritten by resolve_model_config().
  ModelConfig model;
};

/// Training data for one task: its offline episodes and demonstrations.
struct TaskData {
  TaskSpec task;
  std::vector<Trajectory> episodes;
  std::vector<Trajectory> demos;
};

/// Rng for the batch of one iteration, so any batch can be rebuilt from
/// (seed, iteration) alone.
Rng batch_rng(std::uint64_t seed, std::size_t iteration);

/// M sequences per task, tasks in order. Each sequence pairs a history window
/// from a uniformly chosen episode with a prompt from the same task's demos.
std::vector<ModelInput> make_batch(std::span<const TaskData> tasks, std::size_t M, std::size_t J,
                                   std::size_t H, std::size_t K, Variant variant, Rng& rng);

/// Enforces the prompt-size rule: each prompt segment may cover at most a fifth
/// of an episode.
void check_prompt_shape(std::size_t J, std::size_t H, std::size_t episode_length);

struct MetricRecord {
  std::size_t iteration = 0;          // optimizer steps taken so far
  std::vector<TaskReturns> tasks;
  double aggregate = 0.0;
  double train_loss = 0.0;            // mean loss since the previous record
  double wall_clock_s = 0.0;
};

struct MetricLog {
  std::vector<MetricRecord> records;
  std::vector<double> losses;         // one per iteration

  /// CSV with header iter,variant,task_id,mean_return,train_loss,wall_clock_s.
  /// Without `with_wall_clock` the wall_clock_s column is written as 0 so
  /// reruns produce identical files.
  void write_csv(std::ostream& out, Variant variant, bool with_wall_clock = false) const;
};

/// Raised when the training loss stops being finite.
class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(std::size_t iteration, std::uint64_t seed, double loss);
  std::size_t iteration;
  std::uint64_t batch_seed;
};

template <typename T>
struct TrainResult {
  ModelWeights<T> weights;
  MetricLog log;
};

/// Resolves the model configuration train() would use for these tasks.
ModelConfig resolve_model_config(const TrainConfig& cfg, std::span<const TaskData> train_tasks);

/// Multi-task training. eval_tasks may be empty, in which case no returns are
/// measured but loss records are still written every eval_interval steps.
template <typename T>
TrainResult<T> train(const TrainConfig& cfg, std::span<const TaskData> train_tasks,
                     std::span<const EvalTask> eval_tasks,
                     const std::function<void(const MetricRecord&)>& on_record = {});

/// Finetuning data: n transitions from the target task, as contiguous windows
/// of at most K steps drawn uniformly from its demonstrations.
std::vector<Segment> sample_finetune_data(std::span<const Trajectory> demos, std::size_t n_transitions,
                                          std::size_t K, Rng& rng);

struct FinetuneConfig {
  std::size_t steps = 10;
  std::size_t batch_size = 0;  // segments per step; 0 uses every segment
  double learning_rate = 1e-4;
  double weight_decay = 0.0;
  std::size_t K = 20;
  std::uint64_t seed = 0;
};

/// Behavior-cloning updates on target-task data. Returns adapted copies; the
/// input weights are left untouched. Only prompt-free variants are supported.
template <typename T>
ModelWeights<T> finetune(const ModelWeights<T>& w, std::span<const Segment> data, const FinetuneConfig& cfg);

}  // namespace promptdt
