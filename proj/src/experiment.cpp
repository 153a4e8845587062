#include "promptdt/experiment.hpp"

#include <ostream>
#include <sstream>
#include <stdexcept>

namespace promptdt {

std::uint64_t demo_seed(std::uint64_t run_seed, const TaskSpec& task) {
  return task_seed(run_seed ^ 0x64656d6f73ULL, task);
}

TaskBundle generate_bundle(const TaskSpec& task, Quality quality, std::size_t n_episodes,
                           std::size_t n_demos, std::uint64_t seed) {
  TaskBundle b;
  b.dataset = collect(task, quality, n_episodes, kEpisodeLength, task_seed(seed, task));
  Rng rng(demo_seed(seed, task));
  b.demos = build_demos(b.dataset, std::min(n_demos, n_episodes), rng);
  return b;
}

ExperimentData::ExperimentData(TaskFamily family, Split split, std::size_t n_episodes, std::size_t n_demos,
                               std::uint64_t seed)
    : family_(family),
      split_(split),
      n_episodes_(n_episodes),
      n_demos_(n_demos),
      seed_(seed),
      tasks_(make_task_set(family, split)) {}

const TaskBundle& ExperimentData::bundle(const TaskSpec& task, Quality q) {
  const auto key = std::make_pair(static_cast<int>(q), task.task_index);
  auto it = bundles_.find(key);
  if (it == bundles_.end()) {
    it = bundles_.emplace(key, generate_bundle(task, q, n_episodes_, n_demos_, seed_)).first;
  }
  return it->second;
}

void ExperimentData::insert(Quality q, TaskBundle bundle) {
  const auto key = std::make_pair(static_cast<int>(q), bundle.dataset.task.task_index);
  bundles_.insert_or_assign(key, std::move(bundle));
}

std::vector<TaskData> ExperimentData::train_data(Quality q) {
  std::vector<TaskData> out;
  for (const auto& t : tasks_.train) {
    const auto& b = bundle(t, q);
    out.push_back({t, b.dataset.episodes, b.demos.episodes});
  }
  return out;
}

std::vector<EvalTask> ExperimentData::eval_tasks(Quality q) {
  std::vector<EvalTask> out;
  for (const auto& t : tasks_.test) out.push_back({t, bundle(t, q).demos.episodes});
  return out;
}

double ExperimentData::target_return() {
  std::vector<OfflineDataset> expert;
  for (const auto& t : tasks_.train) expert.push_back(bundle(t, Quality::Expert).dataset);
  return select_target_return(expert);
}

double ExperimentData::behavior_return(Quality q) {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& t : tasks_.test) {
    for (const auto& ep : bundle(t, q).dataset.episodes) {
      total += ep.episode_return();
      ++n;
    }
  }
  return total / static_cast<double>(n);
}

double ExperimentData::expert_return() { return behavior_return(Quality::Expert); }

SuiteResult evaluate_test_tasks(const ModelWeights<Real>& w, ExperimentData& data, Quality prompt_quality,
                                const EvalConfig& cfg, const FinetuneBudget& budget) {
  const auto tasks = data.eval_tasks(prompt_quality);
  if (budget.transitions == 0) return evaluate_suite(w, std::span<const EvalTask>(tasks), cfg);

  SuiteResult out;
  for (const auto& et : tasks) {
    Rng rng(task_seed(cfg.seed ^ 0x66696e65ULL, et.task));
    const auto segments = sample_finetune_data(et.demos, budget.transitions, cfg.K, rng);
    FinetuneConfig fc;
    fc.steps = budget.steps;
    fc.learning_rate = budget.learning_rate;
    fc.K = cfg.K;
    fc.seed = cfg.seed;
    const auto adapted = finetune(w, std::span<const Segment>(segments), fc);
    const std::vector<EvalTask> one{et};
    auto r = evaluate_suite(adapted, std::span<const EvalTask>(one), cfg);
    out.tasks.push_back(std::move(r.tasks.front()));
  }
  double total = 0.0;
  for (const auto& t : out.tasks) total += t.mean;
  out.aggregate = total / static_cast<double>(out.tasks.size());
  return out;
}

std::string_view sweep_name(SweepKind k) {
  switch (k) {
    case SweepKind::PromptLength: return "prompt-length";
    case SweepKind::Quality: return "quality";
    case SweepKind::Ood: return "ood";
  }
  return "?";
}

SweepKind parse_sweep(std::string_view name) {
  for (auto k : {SweepKind::PromptLength, SweepKind::Quality, SweepKind::Ood}) {
    if (sweep_name(k) == name) return k;
  }
  throw std::invalid_argument("unknown sweep '" + std::string(name) + "'");
}

namespace {

EvalConfig eval_config_for(const SweepOptions& opts, double target, PromptShape shape) {
  EvalConfig ec;
  ec.target_return = target;
  ec.episodes_per_task = opts.eval_episodes;
  ec.seed = opts.eval_seed;
  ec.K = opts.train.K;
  ec.J = shape.J;
  ec.H = shape.H;
  return ec;
}

TrainConfig train_config_for(const SweepOptions& opts, std::uint64_t seed, Variant v, PromptShape shape,
                             double target) {
  TrainConfig tc = opts.train;
  tc.seed = seed;
  tc.variant = v;
  tc.J = shape.J;
  tc.H = shape.H;
  tc.target_return = target;
  tc.eval_interval = 0;
  return tc;
}

}  // namespace

std::vector<SweepRow> run_sweep(const SweepOptions& opts, const std::function<void(const SweepRow&)>& on_row) {
  if (opts.seeds.empty()) throw std::invalid_argument("sweep needs at least one seed");
  const TaskFamily family = opts.kind == SweepKind::Ood ? TaskFamily::PointDirAngle : opts.family;
  const Split split = opts.kind == SweepKind::Ood ? Split::OutOfDistribution : Split::InDistribution;
  ExperimentData data(family, split, opts.n_episodes, kDefaultDemos, opts.data_seed);
  const double target = data.target_return();
  const double expert = data.expert_return();

  std::vector<SweepRow> rows;
  auto emit = [&](SweepRow row) {
    row.sweep = std::string(sweep_name(opts.kind));
    row.expert_return = expert;
    if (on_row) on_row(row);
    rows.push_back(std::move(row));
  };
  const PromptShape base{opts.train.J, opts.train.H};

  for (const auto seed : opts.seeds) {
    switch (opts.kind) {
      case SweepKind::PromptLength:
        for (std::size_t c = 0; c < kPromptLengthSweep.size(); ++c) {
          const PromptShape shape = kPromptLengthSweep[c];
          const auto train_data = data.train_data(Quality::Expert);
          auto res = train<Real>(train_config_for(opts, seed, Variant::PromptDT, shape, target), train_data, {});
          const auto suite = evaluate_test_tasks(res.weights, data, Quality::Expert,
                                                 eval_config_for(opts, target, shape));
          emit({"", c, seed, Variant::PromptDT, Quality::Expert, Quality::Expert, shape, suite.aggregate, 0.0});
        }
        break;
      case SweepKind::Quality: {
        std::size_t c = 0;
        for (auto tq : {Quality::Expert, Quality::Medium, Quality::Random}) {
          const auto train_data = data.train_data(tq);
          auto res = train<Real>(train_config_for(opts, seed, Variant::PromptDT, base, target), train_data, {});
          for (auto pq : {Quality::Expert, Quality::Medium, Quality::Random}) {
            const auto suite = evaluate_test_tasks(res.weights, data, pq, eval_config_for(opts, target, base));
            emit({"", c++, seed, Variant::PromptDT, tq, pq, base, suite.aggregate, 0.0});
          }
        }
        break;
      }
      case SweepKind::Ood: {
        std::size_t c = 0;
        for (auto v : {Variant::PromptDT, Variant::MtOrl}) {
          const auto train_data = data.train_data(Quality::Expert);
          auto res = train<Real>(train_config_for(opts, seed, v, base, target), train_data, {});
          const auto suite = evaluate_test_tasks(res.weights, data, Quality::Expert,
                                                 eval_config_for(opts, target, base));
          emit({"", c++, seed, v, Quality::Expert, Quality::Expert, base, suite.aggregate, 0.0});
        }
        break;
      }
    }
  }
  return rows;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "sweep,cell,seed,variant,train_quality,prompt_quality,Kstar,J,H,mean_return,expert_return\n";
  auto num = [](double x) {
    std::ostringstream s;
    s.precision(10);
    s << x;
    return s.str();
  };
  for (const auto& r : rows) {
    out << r.sweep << ',' << r.cell << ',' << r.seed << ',' << variant_name(r.variant) << ','
        << quality_name(r.train_quality) << ',' << quality_name(r.prompt_quality) << ',' << r.prompt.kstar() << ','
        << r.prompt.J << ',' << r.prompt.H << ',' << num(r.mean_return) << ',' << num(r.expert_return) << '\n';
  }
}

}  // namespace promptdt
