#include "promptdt/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

namespace promptdt {

Rng episode_rng(std::uint64_t seed, int task_id, std::size_t episode) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(task_id), static_cast<std::uint32_t>(episode)};
  return Rng(seq);
}

namespace {

/// One rollout in flight.
struct Rollout {
  TaskSpec task;
  std::size_t episode = 0;
  TrajectoryPrompt prompt;
  EnvState state;
  std::deque<Step> recent;  // at most K steps, oldest first
  double collected = 0.0;   // reward prefix sum
  EpisodeLog log;
};

HistoryWindow window_of(const std::deque<Step>& recent, std::size_t K) {
  HistoryWindow h;
  h.slots.resize(K);
  const Step& newest = recent.back();
  const std::size_t pad = K - recent.size();
  for (std::size_t i = 0; i < pad; ++i) {
    h.slots[i].step.state.assign(newest.state.size(), 0.0);
    h.slots[i].step.action.assign(newest.action.size(), 0.0);
  }
  for (std::size_t i = 0; i < recent.size(); ++i) {
    h.slots[pad + i].step = recent[i];
    h.slots[pad + i].padded = false;
  }
  return h;
}

void check_config(const EvalConfig& cfg) {
  if (cfg.horizon == 0) throw std::invalid_argument("evaluation horizon must be >= 1");
  if (cfg.K == 0) throw std::invalid_argument("evaluation context length K must be >= 1");
}

template <typename T>
void run_lockstep(const ModelWeights<T>& w, std::vector<Rollout>& rollouts, const EvalConfig& cfg) {
  const Variant variant = w.config.variant;
  for (std::size_t t = 0; t < cfg.horizon; ++t) {
    std::vector<ModelInput> batch;
    batch.reserve(rollouts.size());
    for (auto& r : rollouts) {
      Step current;
      current.rtg = cfg.target_return - r.collected;
      const auto obs = r.state.observation();
      current.state.assign(obs.begin(), obs.end());
      current.action.assign(kActionDim, 0.0);  // placeholder until the action is known
      current.timestep = static_cast<std::int64_t>(t);
      r.recent.push_back(std::move(current));
      if (r.recent.size() > cfg.K) r.recent.pop_front();
      r.log.max_history = std::max(r.log.max_history, r.recent.size());
      r.log.rtg.push_back(r.recent.back().rtg);
      batch.push_back(apply_variant(variant, assemble_input(r.prompt, window_of(r.recent, cfg.K))));
    }
    const auto actions = predict_next_actions(w, std::span<const ModelInput>(batch));
    for (std::size_t i = 0; i < rollouts.size(); ++i) {
      auto& r = rollouts[i];
      const auto& a = actions[i];
      for (double x : a) {
        if (!std::isfinite(x)) {
          throw std::runtime_error("non-finite action at task " + std::to_string(r.task.task_index) +
                                   ", episode " + std::to_string(r.episode) + ", step " + std::to_string(t));
        }
      }
      const EnvState before = r.state;
      const StepResult next = step(r.task, before, a);
      r.recent.back().action = a;
      r.collected += next.reward;
      r.log.rewards.push_back(next.reward);
      r.log.actions.push_back({a[0], a[1]});
      if (cfg.trace) {
        const auto obs = before.observation();
        nlohmann::json line{{"task", r.task.task_index},
                            {"ep", r.episode},
                            {"t", t},
                            {"s", std::vector<double>(obs.begin(), obs.end())},
                            {"a", a},
                            {"r", next.reward},
                            {"g", r.recent.back().rtg}};
        *cfg.trace << line.dump() << '\n';
      }
      r.state = next.state;
    }
  }
  for (auto& r : rollouts) r.log.episode_return = r.collected;
}

template <typename T>
Rollout start_rollout(const ModelWeights<T>& w, const TaskSpec& task, std::span<const Trajectory> demos,
                      std::size_t episode, const EvalConfig& cfg, Rng& rng) {
  Rollout r;
  r.task = task;
  r.episode = episode;
  if (variant_uses_prompt(w.config.variant)) {
    if (demos.empty()) {
      throw std::invalid_argument("no demonstrations for test task " + std::to_string(task.task_index));
    }
    r.prompt = get_prompt(demos, cfg.J, cfg.H, rng);
  }
  r.state = reset(task, rng);
  return r;
}

}  // namespace

template <typename T>
double evaluate_episode(const ModelWeights<T>& w, const TaskSpec& task,
                        std::span<const Trajectory> demos, const EvalConfig& cfg, Rng& rng,
                        EpisodeLog* log) {
  check_config(cfg);
  std::vector<Rollout> rollouts;
  rollouts.push_back(start_rollout(w, task, demos, 0, cfg, rng));
  run_lockstep(w, rollouts, cfg);
  if (log) *log = rollouts.front().log;
  return rollouts.front().log.episode_return;
}

template <typename T>
SuiteResult evaluate_suite(const ModelWeights<T>& w, std::span<const EvalTask> tasks,
                           const EvalConfig& cfg) {
  check_config(cfg);
  if (tasks.empty()) throw std::invalid_argument("evaluate_suite: no test tasks");
  if (cfg.episodes_per_task == 0) throw std::invalid_argument("evaluate_suite: episodes_per_task must be >= 1");
  std::vector<Rollout> rollouts;
  rollouts.reserve(tasks.size() * cfg.episodes_per_task);
  for (const auto& et : tasks) {
    for (std::size_t ep = 0; ep < cfg.episodes_per_task; ++ep) {
      Rng rng = episode_rng(cfg.seed, et.task.task_index, ep);
      rollouts.push_back(start_rollout(w, et.task, et.demos, ep, cfg, rng));
    }
  }
  run_lockstep(w, rollouts, cfg);

  SuiteResult out;
  std::size_t i = 0;
  for (const auto& et : tasks) {
    TaskReturns tr;
    tr.task_id = et.task.task_index;
    for (std::size_t ep = 0; ep < cfg.episodes_per_task; ++ep) tr.returns.push_back(rollouts[i++].log.episode_return);
    const double n = static_cast<double>(tr.returns.size());
    tr.mean = std::accumulate(tr.returns.begin(), tr.returns.end(), 0.0) / n;
    double var = 0.0;
    for (double r : tr.returns) var += (r - tr.mean) * (r - tr.mean);
    tr.std = std::sqrt(var / n);
    out.tasks.push_back(std::move(tr));
  }
  double total = 0.0;
  for (const auto& tr : out.tasks) total += tr.mean;
  out.aggregate = total / static_cast<double>(out.tasks.size());
  return out;
}

double round_significant(double x, int digits) {
  if (x == 0.0 || !std::isfinite(x)) return x;
  const int exponent = static_cast<int>(std::floor(std::log10(std::fabs(x))));
  const double scale = std::pow(10.0, digits - 1 - exponent);
  return std::round(x * scale) / scale;
}

double select_target_return(std::span<const OfflineDataset> datasets) {
  std::vector<double> returns;
  for (const auto& ds : datasets) {
    if (ds.quality != Quality::Expert) {
      throw std::invalid_argument("select_target_return needs expert datasets, got " +
                                  std::string(quality_name(ds.quality)) + " for task " +
                                  std::to_string(ds.task.task_index));
    }
    if (ds.task.family != datasets.front().task.family) {
      throw std::invalid_argument("select_target_return: datasets mix task families");
    }
    for (const auto& ep : ds.episodes) returns.push_back(ep.episode_return());
  }
  if (returns.empty()) throw std::invalid_argument("select_target_return: no episodes");
  std::sort(returns.begin(), returns.end());
  const double pos = 0.9 * static_cast<double>(returns.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, returns.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return round_significant(returns[lo] + frac * (returns[hi] - returns[lo]), 2);
}

#define PROMPTDT_INSTANTIATE_EVAL(T)                                                              \
  template double evaluate_episode(const ModelWeights<T>&, const TaskSpec&,                       \
                                   std::span<const Trajectory>, const EvalConfig&, Rng&,          \
                                   EpisodeLog*);                                                  \
  template SuiteResult evaluate_suite(const ModelWeights<T>&, std::span<const EvalTask>,          \
                                      const EvalConfig&);

PROMPTDT_INSTANTIATE_EVAL(float)
PROMPTDT_INSTANTIATE_EVAL(double)

#undef PROMPTDT_INSTANTIATE_EVAL

}  // namespace promptdt
