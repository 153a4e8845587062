#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "promptdt/datagen.hpp"
#include "promptdt/evaluator.hpp"
#include "promptdt/trainer.hpp"

namespace promptdt {

/// Seed of the rng that picks the demonstration episodes of one task.
std::uint64_t demo_seed(std::uint64_t run_seed, const TaskSpec& task);

/// Dataset and demonstrations for one task at one tier, generated exactly as
/// gen-data writes them.
struct TaskBundle {
  OfflineDataset dataset;
  DemoSet demos;
};

TaskBundle generate_bundle(const TaskSpec& task, Quality quality, std::size_t n_episodes,
                           std::size_t n_demos, std::uint64_t seed);

/// Every dataset a family/split experiment can ask for, generated on first
/// use. Bundles may also be supplied up front (e.g. loaded from disk).
class ExperimentData {
 public:
  ExperimentData(TaskFamily family, Split split, std::size_t n_episodes = 200,
                 std::size_t n_demos = kDefaultDemos, std::uint64_t seed = 7);

  TaskFamily family() const { return family_; }
  Split split() const { return split_; }
  std::uint64_t seed() const { return seed_; }
  std::size_t n_episodes() const { return n_episodes_; }
  const TaskSet& tasks() const { return tasks_; }

  const TaskBundle& bundle(const TaskSpec& task, Quality q);
  void insert(Quality q, TaskBundle bundle);

  /// Offline episodes and same-tier demonstrations of every training task.
  std::vector<TaskData> train_data(Quality q);
  /// Test tasks with demonstrations of tier q.
  std::vector<EvalTask> eval_tasks(Quality q);
  /// G* from the expert datasets of the training tasks.
  double target_return();
  /// Mean episode return of the expert datasets of the test tasks.
  double expert_return();
  /// Mean episode return of the tier-q datasets of the test tasks.
  double behavior_return(Quality q);

 private:
  TaskFamily family_;
  Split split_;
  std::size_t n_episodes_;
  std::size_t n_demos_;
  std::uint64_t seed_;
  TaskSet tasks_;
  std::map<std::pair<int, int>, TaskBundle> bundles_;  // (tier, task_index)
};

/// Test-time budget for prompt-free variants: finetune on n_transitions from
/// each test task's demonstrations, then evaluate that task.
struct FinetuneBudget {
  std::size_t transitions = 0;  // 0 disables finetuning
  std::size_t steps = 10;
  double learning_rate = 1e-4;
};

/// Few-shot evaluation of trained weights on the test tasks with tier-q
/// prompts (or, with a budget, after per-task finetuning).
SuiteResult evaluate_test_tasks(const ModelWeights<Real>& w, ExperimentData& data, Quality prompt_quality,
                                const EvalConfig& cfg, const FinetuneBudget& budget = {});

enum class SweepKind { PromptLength, Quality, Ood };
std::string_view sweep_name(SweepKind k);
SweepKind parse_sweep(std::string_view name);

/// One (K*, J, H) row of the prompt-length sweep.
struct PromptShape {
  std::size_t J = 1;
  std::size_t H = 5;
  std::size_t kstar() const { return J * H; }
};
inline constexpr std::array<PromptShape, 4> kPromptLengthSweep{{{1, 2}, {1, 5}, {1, 10}, {2, 20}}};

struct SweepOptions {
  SweepKind kind = SweepKind::PromptLength;
  TaskFamily family = TaskFamily::PointDir;  // ignored by the OOD sweep
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::size_t n_episodes = 200;
  std::uint64_t data_seed = 7;
  TrainConfig train;  // iterations, M, lr, K, architecture; J/H/variant set per cell
  std::size_t eval_episodes = 20;
  std::uint64_t eval_seed = 0;
};

struct SweepRow {
  std::string sweep;
  std::size_t cell = 0;
  std::uint64_t seed = 0;
  Variant variant = Variant::PromptDT;
  Quality train_quality = Quality::Expert;
  Quality prompt_quality = Quality::Expert;
  PromptShape prompt;
  double mean_return = 0.0;
  double expert_return = 0.0;
};

/// Runs every cell for every seed, in order. Rows are reported as they finish.
std::vector<SweepRow> run_sweep(const SweepOptions& opts,
                                const std::function<void(const SweepRow&)>& on_row = {});

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);

}  // namespace promptdt
