#include "promptdt/trajectory.hpp"

#include <stdexcept>
#include <string>

#include "promptdt/tensor.hpp"

namespace promptdt {

double Trajectory::episode_return() const {
  double total = 0.0;
  for (double r : rewards) total += r;
  return total;
}

void validate_trajectory(const Trajectory& traj) {
  const std::size_t T = traj.length();
  if (T == 0) throw std::invalid_argument("trajectory is empty");
  if (traj.states.size() != T * traj.state_dim || traj.actions.size() != T * traj.action_dim ||
      traj.rtg.size() != T || traj.timesteps.size() != T) {
    throw std::invalid_argument("trajectory arrays disagree on length " + std::to_string(T));
  }
  for (std::size_t t = 0; t < T; ++t) {
    if (traj.timesteps[t] != static_cast<std::int64_t>(t)) {
      throw std::invalid_argument("trajectory timestep " + std::to_string(t) + " is " +
                                  std::to_string(traj.timesteps[t]));
    }
  }
}

Step step_at(const Trajectory& traj, std::size_t t) {
  Step s;
  s.rtg = traj.rtg[t];
  auto st = traj.state(t);
  auto ac = traj.action(t);
  s.state.assign(st.begin(), st.end());
  s.action.assign(ac.begin(), ac.end());
  s.timestep = traj.timesteps[t];
  return s;
}

std::size_t TrajectoryPrompt::size() const {
  std::size_t n = 0;
  for (const auto& seg : segments) n += seg.steps.size();
  return n;
}

std::vector<Step> TrajectoryPrompt::flatten() const {
  std::vector<Step> out;
  out.reserve(size());
  for (const auto& seg : segments) out.insert(out.end(), seg.steps.begin(), seg.steps.end());
  return out;
}

std::size_t HistoryWindow::real_steps() const {
  std::size_t n = 0;
  for (const auto& s : slots) n += s.padded ? 0 : 1;
  return n;
}

std::vector<double> compute_rtg(std::span<const double> rewards) {
  if (rewards.empty()) throw ContractError("compute_rtg: empty reward sequence");
  std::vector<double> out(rewards.size());
  double acc = 0.0;
  for (std::size_t i = rewards.size(); i-- > 0;) {
    acc += rewards[i];
    out[i] = acc;
  }
  return out;
}

TrajectoryPrompt get_prompt(std::span<const Trajectory> demos, std::size_t J, std::size_t H,
                            Rng& rng) {
  if (demos.empty()) throw std::invalid_argument("get_prompt: no demonstrations");
  if (J == 0 || H == 0) throw std::invalid_argument("get_prompt: J and H must be positive");
  for (std::size_t e = 0; e < demos.size(); ++e) {
    if (demos[e].length() < H) {
      throw std::invalid_argument("get_prompt: demonstration episode " + std::to_string(e) +
                                  " has " + std::to_string(demos[e].length()) +
                                  " steps, shorter than segment length H=" + std::to_string(H));
    }
  }
  TrajectoryPrompt prompt;
  prompt.segments.reserve(J);
  std::uniform_int_distribution<std::size_t> pick_episode(0, demos.size() - 1);
  for (std::size_t j = 0; j < J; ++j) {
    const std::size_t e = pick_episode(rng);
    const Trajectory& ep = demos[e];
    std::uniform_int_distribution<std::size_t> pick_start(0, ep.length() - H);
    const std::size_t start = pick_start(rng);
    Segment seg;
    seg.episode = e;
    seg.steps.reserve(H);
    for (std::size_t t = start; t < start + H; ++t) seg.steps.push_back(step_at(ep, t));
    prompt.segments.push_back(std::move(seg));
  }
  return prompt;
}

HistoryWindow history_ending_at(const Trajectory& episode, std::size_t end, std::size_t K) {
  if (episode.length() == 0) throw ContractError("history: empty episode");
  if (K == 0) throw ContractError("history: K must be positive");
  if (end >= episode.length()) {
    throw std::out_of_range("history: end index " + std::to_string(end) + " beyond episode of " +
                            std::to_string(episode.length()) + " steps");
  }
  HistoryWindow window;
  window.slots.resize(K);
  const std::size_t real = std::min(K, end + 1);
  const std::size_t first = end + 1 - real;
  for (std::size_t i = 0; i < K - real; ++i) {
    window.slots[i].step.state.assign(episode.state_dim, 0.0);
    window.slots[i].step.action.assign(episode.action_dim, 0.0);
    window.slots[i].padded = true;
  }
  for (std::size_t i = 0; i < real; ++i) {
    window.slots[K - real + i].step = step_at(episode, first + i);
    window.slots[K - real + i].padded = false;
  }
  return window;
}

HistoryWindow sample_history(const Trajectory& episode, std::size_t K, Rng& rng) {
  if (episode.length() == 0) throw ContractError("sample_history: empty episode");
  std::uniform_int_distribution<std::size_t> pick_end(0, episode.length() - 1);
  return history_ending_at(episode, pick_end(rng), K);
}

namespace {

void push_tuple(std::vector<Token>& tokens, const Step& step, std::size_t tuple, bool in_prompt,
                bool padded, bool with_rtg) {
  if (with_rtg) {
    tokens.push_back(Token{Modality::ReturnToGo, in_prompt, tuple, step.timestep, padded, {step.rtg}});
  }
  tokens.push_back(Token{Modality::State, in_prompt, tuple, step.timestep, padded, step.state});
  tokens.push_back(Token{Modality::Action, in_prompt, tuple, step.timestep, padded, step.action});
}

void check_dims(const Step& step, std::size_t ds, std::size_t da) {
  if (step.state.size() != ds || step.action.size() != da) {
    throw DimensionError("model input: tuple with state/action dims " +
                         std::to_string(step.state.size()) + "/" + std::to_string(step.action.size()) +
                         ", expected " + std::to_string(ds) + "/" + std::to_string(da));
  }
}

}  // namespace

void rebuild_tokens(ModelInput& input) {
  input.tokens.clear();
  input.tokens.reserve(3 * input.tuple_count());
  std::size_t tuple = 0;
  for (const auto& seg : input.prompt.segments) {
    for (const auto& step : seg.steps) {
      check_dims(step, input.state_dim, input.action_dim);
      push_tuple(input.tokens, step, tuple++, true, false, input.prompt_rtg);
    }
  }
  for (const auto& slot : input.history.slots) {
    check_dims(slot.step, input.state_dim, input.action_dim);
    push_tuple(input.tokens, slot.step, tuple++, false, slot.padded, input.history_rtg);
  }
}

ModelInput assemble_input(const TrajectoryPrompt& prompt, const HistoryWindow& history) {
  if (history.slots.empty()) throw ContractError("assemble_input: empty history window");
  ModelInput input;
  input.state_dim = history.slots.front().step.state.size();
  input.action_dim = history.slots.front().step.action.size();
  input.prompt = prompt;
  input.history = history;
  rebuild_tokens(input);
  return input;
}

std::vector<TupleView> read_tuples(const ModelInput& input) {
  std::vector<TupleView> tuples(input.tuple_count());
  for (const auto& tok : input.tokens) {
    auto& tv = tuples.at(tok.tuple);
    tv.in_prompt = tok.in_prompt;
    tv.padded = tok.padded;
    tv.step.timestep = tok.timestep;
    switch (tok.modality) {
      case Modality::ReturnToGo: tv.step.rtg = tok.value.at(0); break;
      case Modality::State: tv.step.state = tok.value; break;
      case Modality::Action: tv.step.action = tok.value; break;
    }
  }
  for (auto& tv : tuples) tv.has_rtg = tv.in_prompt ? input.prompt_rtg : input.history_rtg;
  return tuples;
}

}  // namespace promptdt
