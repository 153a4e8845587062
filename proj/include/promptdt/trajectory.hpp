#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <utility>
#include <vector>

namespace promptdt {

using Rng = std::mt19937_64;

/// One recorded episode. Per-step arrays are stored flat, row-major.
struct Trajectory {
  std::size_t state_dim = 0;
  std::size_t action_dim = 0;
  std::vector<double> states;   // length * state_dim
  std::vector<double> actions;  // length * action_dim
  std::vector<double> rewards;
  std::vector<double> rtg;
  std::vector<std::int64_t> timesteps;
  int task_id = 0;

  std::size_t length() const { return rewards.size(); }
  std::span<const double> state(std::size_t t) const {
    return std::span<const double>(states).subspan(t * state_dim, state_dim);
  }
  std::span<const double> action(std::size_t t) const {
    return std::span<const double>(actions).subspan(t * action_dim, action_dim);
  }
  double episode_return() const;
};

/// Throws std::invalid_argument when array lengths disagree, the episode is
/// empty or the timesteps are not 0, 1, 2, ...
void validate_trajectory(const Trajectory& traj);

/// One (reward-to-go, state, action, timestep) tuple.
struct Step {
  double rtg = 0.0;
  std::vector<double> state;
  std::vector<double> action;
  std::int64_t timestep = 0;

  bool operator==(const Step&) const = default;
};

Step step_at(const Trajectory& traj, std::size_t t);

struct Segment {
  std::size_t episode = 0;  // index into the demonstration list
  std::vector<Step> steps;
};

/// J segments of H contiguous steps each.
struct TrajectoryPrompt {
  std::vector<Segment> segments;

  /// Total number of tuples, J * H.
  std::size_t size() const;
  bool empty() const { return size() == 0; }
  std::vector<Step> flatten() const;
};

struct HistorySlot {
  Step step;
  bool padded = true;
};

/// Exactly K slots; real steps form a contiguous suffix, padding is all zero.
struct HistoryWindow {
  std::vector<HistorySlot> slots;

  std::size_t size() const { return slots.size(); }
  std::size_t real_steps() const;
};

enum class Modality : std::uint8_t { ReturnToGo, State, Action };

struct Token {
  Modality modality = Modality::State;
  bool in_prompt = false;
  std::size_t tuple = 0;  // tuple position in the assembled sequence
  std::int64_t timestep = 0;
  bool padded = false;
  std::vector<double> value;
};

/// Prompt followed by history, flattened into (rtg, state, action) tokens.
/// Variants may drop the prompt tuples or the rtg slot of some tuples.
struct ModelInput {
  std::size_t state_dim = 0;
  std::size_t action_dim = 0;
  TrajectoryPrompt prompt;
  HistoryWindow history;
  bool prompt_rtg = true;
  bool history_rtg = true;
  std::vector<Token> tokens;

  std::size_t prompt_tuples() const { return prompt.size(); }
  std::size_t history_tuples() const { return history.size(); }
  std::size_t tuple_count() const { return prompt_tuples() + history_tuples(); }
};

struct TupleView {
  Step step;
  bool in_prompt = false;
  bool padded = false;
  bool has_rtg = true;
};

/// Training-time reward-to-go: suffix sums of `rewards`.
std::vector<double> compute_rtg(std::span<const double> rewards);

/// Test-time reward-to-go bookkeeping: g - r.
inline double runtime_rtg_update(double g, double r) { return g - r; }

/// Samples J episodes uniformly with replacement and a uniformly placed window
/// of H steps inside each.
TrajectoryPrompt get_prompt(std::span<const Trajectory> demos, std::size_t J, std::size_t H,
                            Rng& rng);

/// Up to K steps ending at `end`, left-padded to exactly K slots.
HistoryWindow history_ending_at(const Trajectory& episode, std::size_t end, std::size_t K);

/// history_ending_at with the end index drawn uniformly from [0, T-1].
HistoryWindow sample_history(const Trajectory& episode, std::size_t K, Rng& rng);

ModelInput assemble_input(const TrajectoryPrompt& prompt, const HistoryWindow& history);

/// Rebuilds the token layout from prompt/history and the rtg flags.
void rebuild_tokens(ModelInput& input);

/// Reads tuples back out of the token stream, in sequence order.
std::vector<TupleView> read_tuples(const ModelInput& input);

}  // namespace promptdt
