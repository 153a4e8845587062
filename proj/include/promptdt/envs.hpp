#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "promptdt/trajectory.hpp"

namespace promptdt {

/// Point-mass task families. Observations are (px, py, vx, vy); actions are
/// 2-D forces clipped to [-1, 1].
enum class TaskFamily { PointDir, PointVel, PointDirAngle };

enum class Quality { Expert, Medium, Random };

/// Which goal split make_task_set returns. OutOfDistribution is only defined
/// for PointDirAngle.
enum class Split { InDistribution, OutOfDistribution };

std::string_view family_name(TaskFamily f);   // "point-dir", "point-vel", "point-dir-angle"
TaskFamily parse_family(std::string_view name);
std::string_view quality_name(Quality q);     // "expert", "medium", "random"
Quality parse_quality(std::string_view name);
std::string_view split_name(Split s);         // "in-distribution", "ood"
Split parse_split(std::string_view name);

inline constexpr std::size_t kStateDim = 4;
inline constexpr std::size_t kActionDim = 2;
inline constexpr std::size_t kEpisodeLength = 100;
inline constexpr double kTimeStep = 0.1;
inline constexpr double kFriction = 0.5;
inline constexpr double kDefaultControlCost = 0.05;
inline constexpr double kMediumNoise = 0.5;

struct TaskSpec {
  TaskFamily family = TaskFamily::PointDir;
  /// Direction sign, target speed or goal angle in radians, by family.
  double goal = 1.0;
  int task_index = 0;
  double control_cost = kDefaultControlCost;

  bool operator==(const TaskSpec&) const = default;
};

/// Throws std::invalid_argument if the goal is outside its family's range.
void validate_task(const TaskSpec& task);

struct EnvState {
  std::array<double, 2> position{0.0, 0.0};
  std::array<double, 2> velocity{0.0, 0.0};
  int t = 0;

  std::array<double, kStateDim> observation() const {
    return {position[0], position[1], velocity[0], velocity[1]};
  }
  bool operator==(const EnvState&) const = default;
};

struct StepResult {
  EnvState state;
  double reward = 0.0;
};

StepResult step(const TaskSpec& task, const EnvState& st, std::span<const double> action);

/// Origin, velocity uniform in [-0.05, 0.05] per component, t = 0.
EnvState reset(const TaskSpec& task, Rng& rng);

std::array<double, kActionDim> behavior_action(const TaskSpec& task, const EnvState& st,
                                               Quality quality, Rng& rng);

/// The complete goal grid of a family, indexed by task_index.
std::vector<TaskSpec> task_grid(TaskFamily family);

struct TaskSet {
  std::vector<TaskSpec> train;
  std::vector<TaskSpec> test;
};

/// Fixed train/test splits over task_grid(family).
TaskSet make_task_set(TaskFamily family, Split split = Split::InDistribution);

}  // namespace promptdt
