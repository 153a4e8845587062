#include "promptdt/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include "promptdt/adam.hpp"

namespace promptdt {

Rng batch_rng(std::uint64_t seed, std::size_t iteration) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(iteration & 0xffffffffu),
                    static_cast<std::uint32_t>(static_cast<std::uint64_t>(iteration) >> 32), 0x62617463u};
  return Rng(seq);
}

void check_prompt_shape(std::size_t J, std::size_t H, std::size_t episode_length) {
  if (J == 0 || H == 0) throw std::invalid_argument("prompt needs J >= 1 and H >= 1");
  if (5 * H > episode_length) {
    throw std::invalid_argument("prompt segment length H=" + std::to_string(H) +
                                " exceeds a fifth of the episode length " + std::to_string(episode_length));
  }
}

std::vector<ModelInput> make_batch(std::span<const TaskData> tasks, std::size_t M, std::size_t J,
                                   std::size_t H, std::size_t K, Variant variant, Rng& rng) {
  if (tasks.empty()) throw std::invalid_argument("make_batch: no training tasks");
  std::vector<ModelInput> batch;
  batch.reserve(tasks.size() * M);
  const bool with_prompt = variant_uses_prompt(variant);
  for (const auto& td : tasks) {
    if (td.episodes.empty()) {
      throw std::invalid_argument("make_batch: no offline data for task " + std::to_string(td.task.task_index));
    }
    if (with_prompt && td.demos.empty()) {
      throw std::invalid_argument("make_batch: no demonstrations for task " + std::to_string(td.task.task_index));
    }
    std::uniform_int_distribution<std::size_t> pick(0, td.episodes.size() - 1);
    for (std::size_t m = 0; m < M; ++m) {
      const Trajectory& ep = td.episodes[pick(rng)];
      HistoryWindow history = sample_history(ep, K, rng);
      TrajectoryPrompt prompt;
      if (with_prompt) prompt = get_prompt(td.demos, J, H, rng);
      batch.push_back(apply_variant(variant, assemble_input(prompt, history)));
    }
  }
  return batch;
}

void MetricLog::write_csv(std::ostream& out, Variant variant, bool with_wall_clock) const {
  out << "iter,variant,task_id,mean_return,train_loss,wall_clock_s\n";
  const std::string name(variant_name(variant));
  auto num = [](double x) {
    std::ostringstream s;
    s.precision(10);
    s << x;
    return s.str();
  };
  for (const auto& rec : records) {
    const std::string tail =
        "," + num(rec.train_loss) + "," + (with_wall_clock ? num(rec.wall_clock_s) : std::string("0")) + "\n";
    for (const auto& t : rec.tasks) {
      out << rec.iteration << ',' << name << ',' << t.task_id << ',' << num(t.mean) << tail;
    }
    out << rec.iteration << ',' << name << ",-1," << (rec.tasks.empty() ? std::string("nan") : num(rec.aggregate))
        << tail;
  }
}

TrainingDiverged::TrainingDiverged(std::size_t it, std::uint64_t seed, double loss)
    : std::runtime_error("training loss became non-finite (" + std::to_string(loss) + ") at iteration " +
                         std::to_string(it) + "; batch rng = batch_rng(" + std::to_string(seed) + ", " +
                         std::to_string(it) + ")"),
      iteration(it),
      batch_seed(seed) {}

ModelConfig resolve_model_config(const TrainConfig& cfg, std::span<const TaskData> train_tasks) {
  if (train_tasks.empty()) throw std::invalid_argument("training needs at least one task");
  ModelConfig mc = cfg.model;
  std::vector<Trajectory> all;
  double abs_return = 0.0;
  for (const auto& td : train_tasks) {
    if (td.episodes.empty()) {
      throw std::invalid_argument("no offline data for training task " + std::to_string(td.task.task_index));
    }
    for (const auto& ep : td.episodes) {
      all.push_back(ep);
      abs_return += std::fabs(ep.episode_return());
    }
  }
  mc.state_dim = all.front().state_dim;
  mc.action_dim = all.front().action_dim;
  mc.variant = cfg.variant;
  mc.context_len = cfg.K;
  if (variant_uses_prompt(cfg.variant)) mc.max_prompt_len = std::max(mc.max_prompt_len, cfg.J * cfg.H);
  mc.rtg_scale = cfg.rtg_scale > 0.0 ? cfg.rtg_scale
                                     : std::max(1.0, abs_return / static_cast<double>(all.size()));
  const NormalizationStats stats = state_statistics(all);
  mc.state_mean = stats.mean;
  mc.state_std = stats.std;
  mc.validate();
  return mc;
}

template <typename T>
TrainResult<T> train(const TrainConfig& cfg, std::span<const TaskData> train_tasks,
                     std::span<const EvalTask> eval_tasks,
                     const std::function<void(const MetricRecord&)>& on_record) {
  if (cfg.batch_per_task == 0) throw std::invalid_argument("per-task batch size M must be >= 1");
  if (cfg.K == 0) throw std::invalid_argument("context length K must be >= 1");
  if (variant_uses_prompt(cfg.variant)) {
    for (const auto& td : train_tasks) {
      for (const auto& ep : td.episodes) check_prompt_shape(cfg.J, cfg.H, ep.length());
    }
  }
  const ModelConfig mc = resolve_model_config(cfg, train_tasks);
  TrainResult<T> result{ModelWeights<T>::initialize(mc, cfg.seed), {}};
  ModelWeights<T>& w = result.weights;
  auto params = w.parameters();
  AdamState<T> adam(params, cfg.learning_rate, cfg.weight_decay);

  EvalConfig ecfg;
  ecfg.target_return = cfg.target_return;
  ecfg.episodes_per_task = cfg.eval_episodes;
  ecfg.J = cfg.J;
  ecfg.H = cfg.H;
  ecfg.K = cfg.K;
  ecfg.seed = cfg.eval_seed;

  const auto start = std::chrono::steady_clock::now();
  double loss_sum = 0.0;
  std::size_t loss_count = 0;
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    Rng rng = batch_rng(cfg.seed, it);
    const auto batch = make_batch(train_tasks, cfg.batch_per_task, cfg.J, cfg.H, cfg.K, cfg.variant, rng);
    Tape<T> tape;
    Tensor<T> loss = compute_loss(tape, w, std::span<const ModelInput>(batch));
    const double value = static_cast<double>(loss.item());
    if (!std::isfinite(value)) throw TrainingDiverged(it, cfg.seed, value);
    w.zero_grad();
    tape.backward(loss);
    adam_step<T>(params, adam);
    result.log.losses.push_back(value);
    loss_sum += value;
    ++loss_count;

    const std::size_t done = it + 1;
    if (cfg.eval_interval > 0 && done % cfg.eval_interval == 0) {
      MetricRecord rec;
      rec.iteration = done;
      rec.train_loss = loss_sum / static_cast<double>(loss_count);
      if (!eval_tasks.empty()) {
        SuiteResult suite = evaluate_suite(w, eval_tasks, ecfg);
        rec.tasks = std::move(suite.tasks);
        rec.aggregate = suite.aggregate;
      }
      rec.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      loss_sum = 0.0;
      loss_count = 0;
      if (on_record) on_record(rec);
      result.log.records.push_back(std::move(rec));
    }
  }
  return result;
}

std::vector<Segment> sample_finetune_data(std::span<const Trajectory> demos, std::size_t n_transitions,
                                          std::size_t K, Rng& rng) {
  if (demos.empty()) throw std::invalid_argument("finetune data: no target-task demonstrations");
  if (n_transitions == 0) throw std::invalid_argument("finetune data: budget must be >= 1 transition");
  if (K == 0) throw std::invalid_argument("finetune data: K must be >= 1");
  std::vector<Segment> out;
  std::uniform_int_distribution<std::size_t> pick(0, demos.size() - 1);
  std::size_t remaining = n_transitions;
  while (remaining > 0) {
    const std::size_t len = std::min(K, remaining);
    const std::size_t e = pick(rng);
    const Trajectory& ep = demos[e];
    if (ep.length() < len) {
      throw std::invalid_argument("finetune data: demo " + std::to_string(e) + " is shorter than " +
                                  std::to_string(len) + " steps");
    }
    std::uniform_int_distribution<std::size_t> start(0, ep.length() - len);
    const std::size_t s0 = start(rng);
    Segment seg;
    seg.episode = e;
    for (std::size_t t = s0; t < s0 + len; ++t) seg.steps.push_back(step_at(ep, t));
    out.push_back(std::move(seg));
    remaining -= len;
  }
  return out;
}

namespace {

ModelInput segment_input(const Segment& seg, std::size_t K, Variant variant) {
  if (seg.steps.empty()) throw std::invalid_argument("finetune: empty segment");
  if (seg.steps.size() > K) throw std::invalid_argument("finetune: segment longer than K");
  HistoryWindow h;
  h.slots.resize(K);
  const std::size_t pad = K - seg.steps.size();
  for (std::size_t i = 0; i < pad; ++i) {
    h.slots[i].step.state.assign(seg.steps.front().state.size(), 0.0);
    h.slots[i].step.action.assign(seg.steps.front().action.size(), 0.0);
  }
  for (std::size_t i = 0; i < seg.steps.size(); ++i) {
    h.slots[pad + i].step = seg.steps[i];
    h.slots[pad + i].padded = false;
  }
  return apply_variant(variant, assemble_input(TrajectoryPrompt{}, h));
}

}  // namespace

template <typename T>
ModelWeights<T> finetune(const ModelWeights<T>& w, std::span<const Segment> data, const FinetuneConfig& cfg) {
  if (data.empty()) throw std::invalid_argument("finetune: no target-task data");
  const Variant variant = w.config.variant;
  if (variant_uses_prompt(variant)) {
    throw std::invalid_argument("finetune supports prompt-free variants only, got " +
                                std::string(variant_name(variant)));
  }
  ModelWeights<T> out = w;
  if (cfg.steps == 0) return out;
  std::vector<ModelInput> inputs;
  for (const auto& seg : data) inputs.push_back(segment_input(seg, cfg.K, variant));
  auto params = out.parameters();
  AdamState<T> adam(params, cfg.learning_rate, cfg.weight_decay);
  Rng rng(cfg.seed);
  const std::size_t bs = cfg.batch_size == 0 ? inputs.size() : cfg.batch_size;
  std::uniform_int_distribution<std::size_t> pick(0, inputs.size() - 1);
  for (std::size_t s = 0; s < cfg.steps; ++s) {
    std::vector<ModelInput> batch;
    if (cfg.batch_size == 0) {
      batch = inputs;
    } else {
      for (std::size_t i = 0; i < bs; ++i) batch.push_back(inputs[pick(rng)]);
    }
    Tape<T> tape;
    Tensor<T> loss = compute_loss(tape, out, std::span<const ModelInput>(batch));
    if (!std::isfinite(static_cast<double>(loss.item()))) {
      throw std::runtime_error("finetune: non-finite loss at step " + std::to_string(s));
    }
    out.zero_grad();
    tape.backward(loss);
    adam_step<T>(params, adam);
  }
  out.zero_grad();
  return out;
}

#define PROMPTDT_INSTANTIATE_TRAIN(T)                                                             \
  template TrainResult<T> train(const TrainConfig&, std::span<const TaskData>,                    \
                                std::span<const EvalTask>,                                        \
                                const std::function<void(const MetricRecord&)>&);                 \
  template ModelWeights<T> finetune(const ModelWeights<T>&, std::span<const Segment>,             \
                                    const FinetuneConfig&);

PROMPTDT_INSTANTIATE_TRAIN(float)
PROMPTDT_INSTANTIATE_TRAIN(double)

#undef PROMPTDT_INSTANTIATE_TRAIN

}  // namespace promptdt
