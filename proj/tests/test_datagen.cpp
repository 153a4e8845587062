#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "promptdt/datagen.hpp"

using namespace promptdt;

namespace {

const TaskSpec kForward{TaskFamily::PointDir, 1.0, 0, kDefaultControlCost};

std::filesystem::path temp_path(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "promptdt_datagen_tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

std::vector<char> read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void write_bytes(const std::filesystem::path& p, const std::vector<char>& b) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(b.data(), static_cast<std::streamsize>(b.size()));
}

}  // namespace

TEST(CollectTest, ShapesAndInvariants) {
  auto ds = collect(kForward, Quality::Medium, 200, 100, 7);
  ASSERT_EQ(ds.episodes.size(), 200u);
  for (const auto& ep : ds.episodes) {
    ASSERT_EQ(ep.length(), 100u);
    ASSERT_NO_THROW(validate_trajectory(ep));
    // rtg is stored at 32-bit precision, so compare against suffix sums loosely.
    double suffix = 0.0;
    for (std::size_t t = ep.length(); t-- > 0;) {
      suffix += ep.rewards[t];
      ASSERT_NEAR(ep.rtg[t], suffix, 1e-5 * (1.0 + std::abs(suffix)));
    }
  }
  ASSERT_EQ(ds.stats.mean.size(), kStateDim);
}

TEST(CollectTest, SameSeedSameData) {
  EXPECT_EQ(collect(kForward, Quality::Random, 5, 100, 3), collect(kForward, Quality::Random, 5, 100, 3));
  EXPECT_FALSE(collect(kForward, Quality::Random, 5, 100, 3) == collect(kForward, Quality::Random, 5, 100, 4));
}

TEST(CollectTest, ExpertForwardReturnIsPositive) {
  auto ds = collect(kForward, Quality::Expert, 20, 100, 1);
  double mean = 0.0;
  for (const auto& ep : ds.episodes) mean += ep.episode_return() / 20.0;
  EXPECT_GT(mean, 0.0);
}

TEST(CollectTest, DatasetsKeepQualityOrdering) {
  for (auto family : {TaskFamily::PointDir, TaskFamily::PointVel, TaskFamily::PointDirAngle}) {
    const auto task = make_task_set(family).test.front();
    double mean[3];
    for (int q = 0; q < 3; ++q) {
      auto ds = collect(task, static_cast<Quality>(q), 20, 100, task_seed(9, task));
      mean[q] = 0.0;
      for (const auto& ep : ds.episodes) mean[q] += ep.episode_return() / 20.0;
    }
    EXPECT_GT(mean[0], mean[1]) << family_name(family);
    EXPECT_GT(mean[1], mean[2]) << family_name(family);
  }
}

TEST(CollectTest, RejectsEmptyRequests) {
  EXPECT_THROW(collect(kForward, Quality::Expert, 0, 100, 1), std::invalid_argument);
}

TEST(TaskSeedTest, DistinctPerTaskAndRun) {
  std::set<std::uint64_t> seen;
  for (const auto& t : task_grid(TaskFamily::PointVel)) seen.insert(task_seed(1, t));
  for (const auto& t : task_grid(TaskFamily::PointVel)) seen.insert(task_seed(2, t));
  EXPECT_EQ(seen.size(), 80u);
}

TEST(StatsTest, MeanAndFlooredStd) {
  Trajectory ep;
  ep.state_dim = 2;
  ep.action_dim = 1;
  ep.states = {1, 5, 3, 5};
  ep.actions = {0, 0};
  ep.rewards = {0, 0};
  ep.rtg = {0, 0};
  ep.timesteps = {0, 1};
  std::vector<Trajectory> eps{ep};
  auto s = state_statistics(eps);
  EXPECT_EQ(s.mean, (std::vector<double>{2, 5}));
  EXPECT_EQ(s.std, (std::vector<double>{1, 1e-3}));
}

TEST(DemoTest, DistinctMembersOfSource) {
  auto ds = collect(kForward, Quality::Medium, 30, 10, 2);
  Rng rng(3);
  auto demos = build_demos(ds, 5, rng);
  ASSERT_EQ(demos.episodes.size(), 5u);
  std::set<std::size_t> ids(demos.episode_ids.begin(), demos.episode_ids.end());
  EXPECT_EQ(ids.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) {
    ASSERT_LT(demos.episode_ids[i], ds.episodes.size());
    EXPECT_EQ(demos.episodes[i].states, ds.episodes[demos.episode_ids[i]].states);
  }
  auto again = demos_from_ids(ds, demos.episode_ids);
  EXPECT_EQ(again.episode_ids, demos.episode_ids);
  EXPECT_EQ(again.episodes[4].rewards, demos.episodes[4].rewards);
}

TEST(DemoTest, FullDrawIsAPermutation) {
  auto ds = collect(kForward, Quality::Random, 12, 5, 4);
  Rng rng(5);
  auto demos = build_demos(ds, 12, rng);
  auto ids = demos.episode_ids;
  std::sort(ids.begin(), ids.end());
  for (std::size_t i = 0; i < ids.size(); ++i) EXPECT_EQ(ids[i], i);
  EXPECT_THROW(build_demos(ds, 13, rng), std::invalid_argument);
}

TEST(DatasetFileTest, RoundTripIsLossless) {
  auto ds = collect({TaskFamily::PointVel, 3.0 * 7 / 39.0, 7, kDefaultControlCost}, Quality::Medium, 8, 100, 11);
  const auto path = temp_path("roundtrip.pdtd");
  save_dataset(ds, path);
  auto back = load_dataset(path);
  EXPECT_EQ(back, ds);
  EXPECT_EQ(back.rng_seed, 11u);
  EXPECT_EQ(back.stats, ds.stats);
}

TEST(DatasetFileTest, DamageIsReportedByKind) {
  auto ds = collect(kForward, Quality::Expert, 3, 20, 12);
  const auto path = temp_path("damaged.pdtd");
  save_dataset(ds, path);
  const auto bytes = read_bytes(path);

  auto payload = bytes;
  payload[payload.size() - 40] ^= 0x01;
  write_bytes(path, payload);
  EXPECT_THROW(load_dataset(path), DatasetChecksumError);

  auto version = bytes;
  version[4] = static_cast<char>(kDatasetVersion + 1);
  write_bytes(path, version);
  EXPECT_THROW(load_dataset(path), DatasetVersionError);

  write_bytes(path, std::vector<char>(bytes.begin(), bytes.end() - 100));
  EXPECT_THROW(load_dataset(path), DatasetTruncatedError);

  auto magic = bytes;
  magic[1] = 'Q';
  write_bytes(path, magic);
  EXPECT_THROW(load_dataset(path), DatasetFormatError);

  auto trailing = bytes;
  trailing.push_back(0);
  write_bytes(path, trailing);
  EXPECT_THROW(load_dataset(path), DatasetFormatError);
}
