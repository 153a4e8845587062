#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

#include "promptdt/envs.hpp"
#include "promptdt/trajectory.hpp"

namespace promptdt {

struct NormalizationStats {
  std::vector<double> mean;
  std::vector<double> std;

  bool empty() const { return mean.empty(); }
  bool operator==(const NormalizationStats&) const = default;
};

/// Per-dimension state statistics over every step of every episode. Standard
/// deviations are floored at 1e-3.
NormalizationStats state_statistics(std::span<const Trajectory> episodes);

/// Episodes collected on one task by one behavior tier.
struct OfflineDataset {
  TaskSpec task;
  Quality quality = Quality::Expert;
  std::uint64_t rng_seed = 0;
  std::size_t horizon = kEpisodeLength;
  std::vector<Trajectory> episodes;
  NormalizationStats stats;

  bool operator==(const OfflineDataset&) const;
};

/// Seed for one task of a collection run, derived from the run seed.
std::uint64_t task_seed(std::uint64_t run_seed, const TaskSpec& task);

/// Rolls out the behavior policy n_episodes times for T steps each. All stored
/// values are rounded to 32-bit floats so they survive the file format
/// unchanged; rewards-to-go are suffix sums of the stored rewards.
OfflineDataset collect(const TaskSpec& task, Quality quality, std::size_t n_episodes,
                       std::size_t T, std::uint64_t seed);

struct DemoSet {
  int task_id = 0;
  std::vector<std::size_t> episode_ids;  // indices into the source dataset
  std::vector<Trajectory> episodes;
};

inline constexpr std::size_t kDefaultDemos = 5;

/// n_demo episodes drawn uniformly without replacement.
DemoSet build_demos(const OfflineDataset& dataset, std::size_t n_demo, Rng& rng);

/// Rebuilds a demo set from stored episode ids.
DemoSet demos_from_ids(const OfflineDataset& dataset, std::span<const std::size_t> ids);

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class DatasetFormatError : public DatasetError {
 public:
  using DatasetError::DatasetError;
};
class DatasetVersionError : public DatasetError {
 public:
  using DatasetError::DatasetError;
};
class DatasetTruncatedError : public DatasetError {
 public:
  using DatasetError::DatasetError;
};
class DatasetChecksumError : public DatasetError {
 public:
  using DatasetError::DatasetError;
};

inline constexpr std::uint16_t kDatasetVersion = 1;

void save_dataset(const OfflineDataset& dataset, const std::filesystem::path& path);
OfflineDataset load_dataset(const std::filesystem::path& path);

}  // namespace promptdt
