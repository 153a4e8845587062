#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "promptdt/trainer.hpp"

using namespace promptdt;

namespace {

std::vector<TaskData> task_data(TaskFamily family, Quality q, std::size_t n_episodes, std::uint64_t seed) {
  std::vector<TaskData> out;
  for (const auto& t : make_task_set(family).train) {
    auto ds = collect(t, q, n_episodes, 100, task_seed(seed, t));
    Rng rng(seed);
    auto demos = build_demos(ds, std::min<std::size_t>(5, n_episodes), rng);
    out.push_back({t, ds.episodes, demos.episodes});
  }
  return out;
}

TrainConfig small_config(Variant v = Variant::PromptDT) {
  TrainConfig cfg;
  cfg.variant = v;
  cfg.iterations = 20;
  cfg.eval_interval = 0;
  cfg.learning_rate = 1e-3;
  cfg.model.embed_dim = 16;
  cfg.model.n_layers = 1;
  cfg.model.n_heads = 1;
  return cfg;
}

bool same_weights(const ModelWeights<float>& a, const ModelWeights<float>& b) {
  auto x = a.named_parameters();
  auto y = b.named_parameters();
  if (x.size() != y.size()) return false;
  for (std::size_t i = 0; i < x.size(); ++i) {
    auto p = x[i].second->data();
    auto q = y[i].second->data();
    if (!std::equal(p.begin(), p.end(), q.begin(), q.end())) return false;
  }
  return true;
}

// Index of the episode in `pool` that contains `s` at its timestep, or -1.
int find_source(const std::vector<Trajectory>& pool, const Step& s) {
  for (std::size_t e = 0; e < pool.size(); ++e) {
    const auto t = static_cast<std::size_t>(s.timestep);
    if (t < pool[e].length() && step_at(pool[e], t) == s) return static_cast<int>(e);
  }
  return -1;
}

}  // namespace

TEST(BatchTest, SizesFollowTasksTimesM) {
  auto dir = task_data(TaskFamily::PointDir, Quality::Expert, 10, 1);
  Rng rng(2);
  EXPECT_EQ(make_batch(dir, 8, 1, 5, 20, Variant::PromptDT, rng).size(), 16u);
  auto vel = task_data(TaskFamily::PointVel, Quality::Expert, 6, 1);
  ASSERT_EQ(vel.size(), 35u);
  auto batch = make_batch(vel, 8, 1, 5, 20, Variant::PromptDT, rng);
  ASSERT_EQ(batch.size(), 280u);
  for (const auto& in : batch) EXPECT_EQ(in.tokens.size(), 75u);
}

TEST(BatchTest, PromptAndHistoryComeFromTheSameTask) {
  auto vel = task_data(TaskFamily::PointVel, Quality::Medium, 6, 3);
  Rng rng(4);
  const std::size_t M = 3;
  auto batch = make_batch(vel, M, 2, 4, 10, Variant::PromptDT, rng);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& td = vel[i / M];
    for (const auto& seg : batch[i].prompt.segments) {
      ASSERT_LT(seg.episode, td.demos.size());
      for (const auto& s : seg.steps) EXPECT_EQ(step_at(td.demos[seg.episode], static_cast<std::size_t>(s.timestep)), s);
    }
    for (const auto& slot : batch[i].history.slots) {
      if (!slot.padded) EXPECT_GE(find_source(td.episodes, slot.step), 0) << "sequence " << i;
    }
  }
}

TEST(BatchTest, VariantsControlTheLayout) {
  auto dir = task_data(TaskFamily::PointDir, Quality::Expert, 4, 5);
  Rng rng(6);
  EXPECT_EQ(make_batch(dir, 2, 1, 5, 20, Variant::MtOrl, rng)[0].tokens.size(), 60u);
  EXPECT_EQ(make_batch(dir, 2, 1, 5, 20, Variant::PromptMtBc, rng)[0].tokens.size(), 55u);
  EXPECT_EQ(make_batch(dir, 2, 1, 5, 20, Variant::MtBc, rng)[0].tokens.size(), 40u);
  // Prompt-free variants need no demonstrations.
  dir[0].demos.clear();
  EXPECT_NO_THROW(make_batch(dir, 2, 1, 5, 20, Variant::MtBc, rng));
  EXPECT_THROW(make_batch(dir, 2, 1, 5, 20, Variant::PromptDT, rng), std::invalid_argument);
  dir[1].episodes.clear();
  try {
    make_batch(dir, 2, 1, 5, 20, Variant::MtBc, rng);
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("task 1"), std::string::npos);
  }
}

TEST(BatchTest, BatchRngIsReproducible) {
  auto dir = task_data(TaskFamily::PointDir, Quality::Medium, 4, 7);
  Rng a = batch_rng(3, 17), b = batch_rng(3, 17), c = batch_rng(3, 18);
  auto x = make_batch(dir, 4, 1, 5, 20, Variant::PromptDT, a);
  auto y = make_batch(dir, 4, 1, 5, 20, Variant::PromptDT, b);
  auto z = make_batch(dir, 4, 1, 5, 20, Variant::PromptDT, c);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(x[i].prompt.flatten(), y[i].prompt.flatten());
  bool differs = false;
  for (std::size_t i = 0; i < x.size(); ++i) differs = differs || x[i].prompt.flatten() != z[i].prompt.flatten();
  EXPECT_TRUE(differs);
}

TEST(PromptShapeTest, SegmentLengthRule) {
  EXPECT_NO_THROW(check_prompt_shape(1, 5, 100));
  EXPECT_NO_THROW(check_prompt_shape(2, 20, 100));
  EXPECT_THROW(check_prompt_shape(1, 21, 100), std::invalid_argument);
  EXPECT_THROW(check_prompt_shape(0, 5, 100), std::invalid_argument);
}

TEST(ResolveTest, ScaleAndStatsComeFromTrainingData) {
  auto dir = task_data(TaskFamily::PointDir, Quality::Expert, 10, 8);
  TrainConfig cfg = small_config();
  cfg.J = 2;
  cfg.H = 20;
  auto mc = resolve_model_config(cfg, dir);
  double abs_return = 0.0;
  for (const auto& td : dir) {
    for (const auto& ep : td.episodes) abs_return += std::abs(ep.episode_return()) / 20.0;
  }
  EXPECT_NEAR(mc.rtg_scale, abs_return, 1e-9);
  EXPECT_EQ(mc.max_prompt_len, 40u);
  EXPECT_EQ(mc.context_len, 20u);
  EXPECT_EQ(mc.state_mean.size(), 4u);
  cfg.rtg_scale = 7.0;
  EXPECT_EQ(resolve_model_config(cfg, dir).rtg_scale, 7.0);
  // Near-zero returns are floored at 1.
  auto vel = task_data(TaskFamily::PointVel, Quality::Expert, 2, 8);
  std::vector<TaskData> still{vel[0]};
  cfg.rtg_scale = 0.0;
  EXPECT_EQ(resolve_model_config(cfg, still).rtg_scale, 1.0);
}

TEST(TrainTest, ZeroIterationsReturnsInitialWeights) {
  auto dir = task_data(TaskFamily::PointDir, Quality::Expert, 4, 9);
  TrainConfig cfg = small_config();
  cfg.iterations = 0;
  auto res = train<float>(cfg, dir, {});
  EXPECT_TRUE(res.log.records.empty());
  EXPECT_TRUE(res.log.losses.empty());
  EXPECT_TRUE(same_weights(res.weights, ModelWeights<float>::initialize(resolve_model_config(cfg, dir), cfg.seed)));
}

TEST(TrainTest, LossFallsWithinTwoHundredIterations) {
  auto dir = task_data(TaskFamily::PointDir, Quality::Expert, 20, 10);
  TrainConfig cfg = small_config();
  cfg.iterations = 200;
  auto res = train<float>(cfg, dir, {});
  ASSERT_EQ(res.log.losses.size(), 200u);
  double first = 0.0, last = 0.0;
  for (std::size_t i = 0; i < 10; ++i) {
    first += res.log.losses[i] / 10.0;
    last += res.log.losses[190 + i] / 10.0;
  }
  EXPECT_LT(last, first);
  EXPECT_LT(res.log.losses.back(), res.log.losses.front());
}

TEST(TrainTest, SameSeedSameWeights) {
  auto dir = task_data(TaskFamily::PointDir, Quality::Medium, 6, 11);
  TrainConfig cfg = small_config();
  auto a = train<float>(cfg, dir, {});
  auto b = train<float>(cfg, dir, {});
  EXPECT_TRUE(same_weights(a.weights, b.weights));
  EXPECT_EQ(a.log.losses, b.log.losses);
  cfg.seed = 2;
  EXPECT_FALSE(same_weights(a.weights, train<float>(cfg, dir, {}).weights));
}

TEST(TrainTest, RecordsAtEveryEvalInterval) {
  auto dir = task_data(TaskFamily::PointDir, Quality::Expert, 6, 12);
  std::vector<EvalTask> eval;
  for (const auto& td : dir) eval.push_back({td.task, td.demos});
  TrainConfig cfg = small_config();
  cfg.iterations = 6;
  cfg.eval_interval = 3;
  cfg.eval_episodes = 2;
  cfg.target_return = 160.0;
  std::size_t callbacks = 0;
  auto res = train<float>(cfg, dir, eval, [&](const MetricRecord&) { ++callbacks; });
  ASSERT_EQ(res.log.records.size(), 2u);
  EXPECT_EQ(callbacks, 2u);
  EXPECT_EQ(res.log.records[0].iteration, 3u);
  EXPECT_EQ(res.log.records[1].iteration, 6u);
  EXPECT_EQ(res.log.records[1].tasks.size(), 2u);
  EXPECT_NEAR(res.log.records[0].train_loss, (res.log.losses[0] + res.log.losses[1] + res.log.losses[2]) / 3.0,
              1e-12);
}

TEST(TrainTest, NonFiniteLossReportsIteration) {
  auto dir = task_data(TaskFamily::PointDir, Quality::Expert, 2, 13);
  for (auto& td : dir) {
    for (auto& ep : td.episodes) std::fill(ep.rtg.begin(), ep.rtg.end(), std::nan(""));
  }
  TrainConfig cfg = small_config(Variant::MtOrl);
  cfg.rtg_scale = 1.0;
  cfg.seed = 5;
  try {
    train<float>(cfg, dir, {});
    FAIL();
  } catch (const TrainingDiverged& e) {
    EXPECT_EQ(e.iteration, 0u);
    EXPECT_EQ(e.batch_seed, 5u);
  }
}

TEST(TrainTest, RejectsOversizedPromptSegments) {
  auto dir = task_data(TaskFamily::PointDir, Quality::Expert, 2, 14);
  TrainConfig cfg = small_config();
  cfg.H = 30;
  EXPECT_THROW(train<float>(cfg, dir, {}), std::invalid_argument);
  cfg.variant = Variant::MtOrl;  // J and H are unused without a prompt
  EXPECT_NO_THROW(train<float>(cfg, dir, {}));
}

TEST(FinetuneTest, BudgetIsCountedInTransitions) {
  auto dir = task_data(TaskFamily::PointDir, Quality::Expert, 5, 15);
  Rng rng(16);
  auto five = sample_finetune_data(dir[0].demos, 5, 20, rng);
  ASSERT_EQ(five.size(), 1u);
  EXPECT_EQ(five[0].steps.size(), 5u);
  auto big = sample_finetune_data(dir[0].demos, 1280, 20, rng);
  std::size_t total = 0;
  for (const auto& seg : big) {
    total += seg.steps.size();
    const auto& src = dir[0].demos.at(seg.episode);
    const auto t0 = static_cast<std::size_t>(seg.steps[0].timestep);
    for (std::size_t i = 0; i < seg.steps.size(); ++i) EXPECT_EQ(seg.steps[i], step_at(src, t0 + i));
  }
  EXPECT_EQ(big.size(), 64u);
  EXPECT_EQ(total, 1280u);
  EXPECT_THROW(sample_finetune_data({}, 5, 20, rng), std::invalid_argument);
}

TEST(FinetuneTest, CopyOnAdapt) {
  auto dir = task_data(TaskFamily::PointDir, Quality::Expert, 5, 17);
  TrainConfig cfg = small_config(Variant::MtBc);
  auto base = train<float>(cfg, dir, {}).weights;
  const auto snapshot = base;
  Rng rng(18);
  auto data = sample_finetune_data(dir[1].demos, 5, 20, rng);
  FinetuneConfig fc;
  fc.steps = 0;
  EXPECT_TRUE(same_weights(finetune(base, data, fc), base));
  fc.steps = 10;
  auto adapted = finetune(base, data, fc);
  EXPECT_TRUE(same_weights(base, snapshot));
  EXPECT_FALSE(same_weights(adapted, base));
  EXPECT_THROW(finetune(base, std::span<const Segment>{}, fc), std::invalid_argument);
}

TEST(FinetuneTest, PromptVariantsAreRejected) {
  auto dir = task_data(TaskFamily::PointDir, Quality::Expert, 5, 19);
  auto w = ModelWeights<float>::initialize(resolve_model_config(small_config(), dir), 1);
  Rng rng(20);
  auto data = sample_finetune_data(dir[0].demos, 5, 20, rng);
  EXPECT_THROW(finetune(w, data, FinetuneConfig{}), std::invalid_argument);
}

TEST(MetricLogTest, CsvLayout) {
  MetricLog log;
  MetricRecord r;
  r.iteration = 500;
  r.tasks = {{0, 1.5, 0.1, {}}, {1, -2.25, 0.1, {}}};
  r.aggregate = -0.375;
  r.train_loss = 0.125;
  r.wall_clock_s = 12.5;
  log.records.push_back(r);
  std::ostringstream a, b;
  log.write_csv(a, Variant::PromptDT);
  EXPECT_EQ(a.str(),
            "iter,variant,task_id,mean_return,train_loss,wall_clock_s\n"
            "500,prompt-dt,0,1.5,0.125,0\n"
            "500,prompt-dt,1,-2.25,0.125,0\n"
            "500,prompt-dt,-1,-0.375,0.125,0\n");
  log.write_csv(b, Variant::MtOrl, true);
  EXPECT_NE(b.str().find("500,mt-orl,-1,-0.375,0.125,12.5\n"), std::string::npos);
}
