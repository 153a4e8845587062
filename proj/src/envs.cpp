#include "promptdt/envs.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace promptdt {

std::string_view family_name(TaskFamily f) {
  switch (f) {
    case TaskFamily::PointDir: return "point-dir";
    case TaskFamily::PointVel: return "point-vel";
    case TaskFamily::PointDirAngle: return "point-dir-angle";
  }
  return "?";
}

TaskFamily parse_family(std::string_view name) {
  for (auto f : {TaskFamily::PointDir, TaskFamily::PointVel, TaskFamily::PointDirAngle}) {
    if (family_name(f) == name) return f;
  }
  throw std::invalid_argument("unknown task family '" + std::string(name) + "'");
}

std::string_view quality_name(Quality q) {
  switch (q) {
    case Quality::Expert: return "expert";
    case Quality::Medium: return "medium";
    case Quality::Random: return "random";
  }
  return "?";
}

Quality parse_quality(std::string_view name) {
  for (auto q : {Quality::Expert, Quality::Medium, Quality::Random}) {
    if (quality_name(q) == name) return q;
  }
  throw std::invalid_argument("unknown quality tier '" + std::string(name) + "'");
}

std::string_view split_name(Split s) {
  return s == Split::InDistribution ? "in-distribution" : "ood";
}

Split parse_split(std::string_view name) {
  if (name == "in-distribution") return Split::InDistribution;
  if (name == "ood") return Split::OutOfDistribution;
  throw std::invalid_argument("unknown split '" + std::string(name) + "'");
}

void validate_task(const TaskSpec& task) {
  if (!(task.control_cost >= 0.0)) throw std::invalid_argument("control cost must be >= 0");
  switch (task.family) {
    case TaskFamily::PointDir:
      if (task.goal != 1.0 && task.goal != -1.0) {
        throw std::invalid_argument("point-dir goal must be +1 or -1, got " + std::to_string(task.goal));
      }
      break;
    case TaskFamily::PointVel:
      if (!(task.goal >= 0.0 && task.goal <= 3.0)) {
        throw std::invalid_argument("point-vel goal must lie in [0, 3], got " + std::to_string(task.goal));
      }
      break;
    case TaskFamily::PointDirAngle:
      if (!std::isfinite(task.goal)) throw std::invalid_argument("point-dir-angle goal must be finite");
      break;
  }
}

namespace {

double clip_unit(double x) { return std::clamp(x, -1.0, 1.0); }

}  // namespace

StepResult step(const TaskSpec& task, const EnvState& st, std::span<const double> action) {
  if (action.size() != kActionDim) {
    throw std::invalid_argument("step: action must have 2 components, got " +
                                std::to_string(action.size()));
  }
  const double a[2] = {clip_unit(action[0]), clip_unit(action[1])};
  StepResult out;
  for (int i = 0; i < 2; ++i) {
    out.state.velocity[i] = st.velocity[i] + a[i] * kTimeStep - kFriction * st.velocity[i] * kTimeStep;
    out.state.position[i] = st.position[i] + out.state.velocity[i] * kTimeStep;
  }
  out.state.t = st.t + 1;
  const auto& v = out.state.velocity;
  const double control = task.control_cost * (a[0] * a[0] + a[1] * a[1]);
  switch (task.family) {
    case TaskFamily::PointDir:
      out.reward = task.goal * v[0] - control;
      break;
    case TaskFamily::PointVel:
      out.reward = -(v[0] - task.goal) * (v[0] - task.goal) - control;
      break;
    case TaskFamily::PointDirAngle:
      out.reward = v[0] * std::cos(task.goal) + v[1] * std::sin(task.goal) - control;
      break;
  }
  return out;
}

EnvState reset(const TaskSpec&, Rng& rng) {
  std::uniform_real_distribution<double> u(-0.05, 0.05);
  EnvState st;
  st.velocity[0] = u(rng);
  st.velocity[1] = u(rng);
  return st;
}

std::array<double, kActionDim> behavior_action(const TaskSpec& task, const EnvState& st,
                                               Quality quality, Rng& rng) {
  if (quality == Quality::Random) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const double x = u(rng);
    return {x, u(rng)};
  }
  std::array<double, kActionDim> a{};
  switch (task.family) {
    case TaskFamily::PointDir:
      a = {task.goal, 0.0};
      break;
    case TaskFamily::PointVel:
      a = {clip_unit(2.0 * (task.goal - st.velocity[0])), clip_unit(-2.0 * st.velocity[1])};
      break;
    case TaskFamily::PointDirAngle:
      a = {std::cos(task.goal), std::sin(task.goal)};
      break;
  }
  if (quality == Quality::Medium) {
    std::normal_distribution<double> noise(0.0, kMediumNoise);
    for (auto& x : a) x = clip_unit(x + noise(rng));
  }
  return a;
}

std::vector<TaskSpec> task_grid(TaskFamily family) {
  std::vector<TaskSpec> grid;
  switch (family) {
    case TaskFamily::PointDir:
      grid.push_back({family, 1.0, 0, kDefaultControlCost});
      grid.push_back({family, -1.0, 1, kDefaultControlCost});
      break;
    case TaskFamily::PointVel:
      for (int i = 0; i < 40; ++i) grid.push_back({family, 3.0 * i / 39.0, i, kDefaultControlCost});
      break;
    case TaskFamily::PointDirAngle:
      for (int i = 0; i < 50; ++i) {
        grid.push_back({family, 2.0 * std::numbers::pi * i / 50.0, i, kDefaultControlCost});
      }
      break;
  }
  return grid;
}

namespace {

TaskSet split_by_index(const std::vector<TaskSpec>& grid, const std::vector<int>& train_idx,
                       const std::vector<int>& test_idx) {
  TaskSet set;
  for (int i : train_idx) set.train.push_back(grid.at(static_cast<std::size_t>(i)));
  for (int i : test_idx) set.test.push_back(grid.at(static_cast<std::size_t>(i)));
  return set;
}

TaskSet holdout(const std::vector<TaskSpec>& grid, const std::vector<int>& held) {
  std::vector<int> train;
  for (const auto& t : grid) {
    if (std::find(held.begin(), held.end(), t.task_index) == held.end()) train.push_back(t.task_index);
  }
  return split_by_index(grid, train, held);
}

}  // namespace

TaskSet make_task_set(TaskFamily family, Split split) {
  const auto grid = task_grid(family);
  if (split == Split::OutOfDistribution) {
    if (family != TaskFamily::PointDirAngle) {
      throw std::invalid_argument("the ood split is only defined for point-dir-angle");
    }
    return split_by_index(grid, {8, 13, 16, 20, 22, 26, 32, 37}, {1, 4, 41});
  }
  switch (family) {
    case TaskFamily::PointDir:
      return TaskSet{grid, grid};
    case TaskFamily::PointVel:
      return holdout(grid, {2, 7, 15, 23, 26});
    case TaskFamily::PointDirAngle:
      return holdout(grid, {6, 17, 23, 30, 41});
  }
  throw std::invalid_argument("unknown task family");
}

}  // namespace promptdt
