#include "promptdt/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include <nlohmann/json.hpp>

#include "binary_io.hpp"
#include "promptdt/tensor.hpp"

namespace promptdt {

namespace {

double round_f32(double x) { return static_cast<double>(static_cast<float>(x)); }

}  // namespace

NormalizationStats state_statistics(std::span<const Trajectory> episodes) {
  if (episodes.empty()) throw std::invalid_argument("state_statistics: no episodes");
  const std::size_t ds = episodes.front().state_dim;
  std::vector<double> sum(ds, 0.0), sq(ds, 0.0);
  std::size_t n = 0;
  for (const auto& ep : episodes) {
    if (ep.state_dim != ds) throw DimensionError("state_statistics: mixed state dimensions");
    for (std::size_t t = 0; t < ep.length(); ++t) {
      auto s = ep.state(t);
      for (std::size_t k = 0; k < ds; ++k) sum[k] += s[k];
    }
    n += ep.length();
  }
  NormalizationStats out;
  out.mean.resize(ds);
  out.std.resize(ds);
  for (std::size_t k = 0; k < ds; ++k) out.mean[k] = sum[k] / static_cast<double>(n);
  // Second pass keeps the variance accurate for large offsets.
  for (const auto& ep : episodes) {
    for (std::size_t t = 0; t < ep.length(); ++t) {
      auto s = ep.state(t);
      for (std::size_t k = 0; k < ds; ++k) sq[k] += (s[k] - out.mean[k]) * (s[k] - out.mean[k]);
    }
  }
  for (std::size_t k = 0; k < ds; ++k) {
    out.std[k] = std::max(std::sqrt(sq[k] / static_cast<double>(n)), 1e-3);
  }
  return out;
}

bool OfflineDataset::operator==(const OfflineDataset& o) const {
  if (!(task == o.task && quality == o.quality && rng_seed == o.rng_seed && horizon == o.horizon &&
        stats == o.stats && episodes.size() == o.episodes.size())) {
    return false;
  }
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    const auto& a = episodes[i];
    const auto& b = o.episodes[i];
    if (a.states != b.states || a.actions != b.actions || a.rewards != b.rewards || a.rtg != b.rtg ||
        a.timesteps != b.timesteps || a.task_id != b.task_id || a.state_dim != b.state_dim ||
        a.action_dim != b.action_dim) {
      return false;
    }
  }
  return true;
}

std::uint64_t task_seed(std::uint64_t run_seed, const TaskSpec& task) {
  std::seed_seq seq{static_cast<std::uint32_t>(run_seed & 0xffffffffu),
                    static_cast<std::uint32_t>(run_seed >> 32),
                    static_cast<std::uint32_t>(task.family),
                    static_cast<std::uint32_t>(task.task_index)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[1]) << 32) | words[0];
}

OfflineDataset collect(const TaskSpec& task, Quality quality, std::size_t n_episodes,
                       std::size_t T, std::uint64_t seed) {
  validate_task(task);
  if (n_episodes == 0) throw std::invalid_argument("collect: n_episodes must be >= 1");
  if (T == 0) throw std::invalid_argument("collect: episode length must be >= 1");
  OfflineDataset ds;
  ds.task = task;
  ds.quality = quality;
  ds.rng_seed = seed;
  ds.horizon = T;
  Rng rng(seed);
  ds.episodes.reserve(n_episodes);
  for (std::size_t e = 0; e < n_episodes; ++e) {
    Trajectory tr;
    tr.state_dim = kStateDim;
    tr.action_dim = kActionDim;
    tr.task_id = task.task_index;
    EnvState st = reset(task, rng);
    for (std::size_t t = 0; t < T; ++t) {
      for (double x : st.observation()) tr.states.push_back(round_f32(x));
      auto a = behavior_action(task, st, quality, rng);
      for (auto& x : a) {
        x = round_f32(x);
        tr.actions.push_back(x);
      }
      const StepResult next = step(task, st, a);
      tr.rewards.push_back(round_f32(next.reward));
      tr.timesteps.push_back(static_cast<std::int64_t>(t));
      st = next.state;
    }
    tr.rtg = compute_rtg(tr.rewards);
    for (auto& g : tr.rtg) g = round_f32(g);
    ds.episodes.push_back(std::move(tr));
  }
  ds.stats = state_statistics(ds.episodes);
  return ds;
}

DemoSet build_demos(const OfflineDataset& dataset, std::size_t n_demo, Rng& rng) {
  const std::size_t n = dataset.episodes.size();
  if (n_demo == 0 || n_demo > n) {
    throw std::invalid_argument("build_demos: cannot draw " + std::to_string(n_demo) +
                                " demonstrations from " + std::to_string(n) + " episodes");
  }
  // Partial Fisher-Yates shuffle.
  std::vector<std::size_t> ids(n);
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  for (std::size_t i = 0; i < n_demo; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(ids[i], ids[pick(rng)]);
  }
  ids.resize(n_demo);
  return demos_from_ids(dataset, ids);
}

DemoSet demos_from_ids(const OfflineDataset& dataset, std::span<const std::size_t> ids) {
  DemoSet out;
  out.task_id = dataset.task.task_index;
  for (auto id : ids) {
    if (id >= dataset.episodes.size()) {
      throw std::out_of_range("demo episode " + std::to_string(id) + " not in dataset of " +
                              std::to_string(dataset.episodes.size()));
    }
    out.episode_ids.push_back(id);
    out.episodes.push_back(dataset.episodes[id]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// File format
//
// "PDTD" | u16 version | u32 header length | JSON header | payload | u32 CRC32
// of the payload. The payload holds, per episode, f32 LE states[T x ds],
// actions[T x da], rewards[T], rtg[T].

namespace {

nlohmann::json task_to_json(const TaskSpec& t) {
  return {{"family", std::string(family_name(t.family))},
          {"goal", t.goal},
          {"task_index", t.task_index},
          {"control_cost", t.control_cost}};
}

TaskSpec task_from_json(const nlohmann::json& j) {
  TaskSpec t;
  t.family = parse_family(j.at("family").get<std::string>());
  t.goal = j.at("goal").get<double>();
  t.task_index = j.at("task_index").get<int>();
  t.control_cost = j.at("control_cost").get<double>();
  return t;
}

}  // namespace

void save_dataset(const OfflineDataset& dataset, const std::filesystem::path& path) {
  if (dataset.episodes.empty()) throw std::invalid_argument("save_dataset: dataset has no episodes");
  const std::size_t T = dataset.horizon;
  nlohmann::json header{{"task", task_to_json(dataset.task)},
                        {"quality", std::string(quality_name(dataset.quality))},
                        {"seed", dataset.rng_seed},
                        {"T", T},
                        {"n_episodes", dataset.episodes.size()},
                        {"ds", kStateDim},
                        {"da", kActionDim},
                        {"state_mean", dataset.stats.mean},
                        {"state_std", dataset.stats.std}};
  std::vector<unsigned char> payload;
  payload.reserve(dataset.episodes.size() * T * (kStateDim + kActionDim + 2) * 4);
  for (const auto& ep : dataset.episodes) {
    validate_trajectory(ep);
    if (ep.length() != T || ep.state_dim != kStateDim || ep.action_dim != kActionDim) {
      throw DimensionError("save_dataset: episode shape does not match the header");
    }
    for (double x : ep.states) io::put_f32(payload, static_cast<float>(x));
    for (double x : ep.actions) io::put_f32(payload, static_cast<float>(x));
    for (double x : ep.rewards) io::put_f32(payload, static_cast<float>(x));
    for (double x : ep.rtg) io::put_f32(payload, static_cast<float>(x));
  }
  const std::string head = header.dump();
  std::vector<unsigned char> bytes;
  io::put_bytes(bytes, "PDTD");
  io::put_u16(bytes, kDatasetVersion);
  io::put_u32(bytes, static_cast<std::uint32_t>(head.size()));
  io::put_bytes(bytes, head);
  bytes.insert(bytes.end(), payload.begin(), payload.end());
  io::put_u32(bytes, io::crc32_of(payload));
  io::write_file(path.string(), bytes);
}

OfflineDataset load_dataset(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw DatasetError("dataset not found: " + path.string());
  const auto bytes = io::read_file(path.string());
  io::Reader in(bytes);
  nlohmann::json header;
  try {
    if (in.str(4) != "PDTD") throw DatasetFormatError("not a dataset file (bad magic): " + path.string());
    const auto version = in.u16();
    if (version != kDatasetVersion) {
      throw DatasetVersionError("dataset version " + std::to_string(version) + " unsupported (expected " +
                                std::to_string(kDatasetVersion) + "): " + path.string());
    }
    header = nlohmann::json::parse(in.str(in.u32()));
  } catch (const std::out_of_range&) {
    throw DatasetTruncatedError("truncated dataset header: " + path.string());
  } catch (const nlohmann::json::exception& e) {
    throw DatasetFormatError("bad dataset header in " + path.string() + ": " + e.what());
  }

  OfflineDataset ds;
  std::size_t n_episodes = 0;
  try {
    ds.task = task_from_json(header.at("task"));
    ds.quality = parse_quality(header.at("quality").get<std::string>());
    ds.rng_seed = header.at("seed").get<std::uint64_t>();
    ds.horizon = header.at("T").get<std::size_t>();
    n_episodes = header.at("n_episodes").get<std::size_t>();
    if (header.at("ds").get<std::size_t>() != kStateDim || header.at("da").get<std::size_t>() != kActionDim) {
      throw DatasetFormatError("dataset dimensions do not match the point-mass environments");
    }
    ds.stats.mean = header.at("state_mean").get<std::vector<double>>();
    ds.stats.std = header.at("state_std").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw DatasetFormatError("bad dataset header in " + path.string() + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw DatasetFormatError("bad dataset header in " + path.string() + ": " + e.what());
  }

  const std::size_t T = ds.horizon;
  const std::size_t per_episode = T * (kStateDim + kActionDim + 2) * 4;
  if (!in.has(n_episodes * per_episode + 4)) {
    throw DatasetTruncatedError("truncated dataset payload: " + path.string());
  }
  auto payload = in.take(n_episodes * per_episode);
  if (in.u32() != io::crc32_of(payload)) throw DatasetChecksumError("dataset checksum mismatch: " + path.string());
  if (in.remaining() != 0) throw DatasetFormatError("trailing bytes after dataset checksum: " + path.string());

  io::Reader body(payload);
  auto read_block = [&body](std::vector<double>& dst, std::size_t n) {
    dst.resize(n);
    for (auto& x : dst) x = static_cast<double>(body.f32());
  };
  ds.episodes.resize(n_episodes);
  for (auto& ep : ds.episodes) {
    ep.state_dim = kStateDim;
    ep.action_dim = kActionDim;
    ep.task_id = ds.task.task_index;
    read_block(ep.states, T * kStateDim);
    read_block(ep.actions, T * kActionDim);
    read_block(ep.rewards, T);
    read_block(ep.rtg, T);
    ep.timesteps.resize(T);
    std::iota(ep.timesteps.begin(), ep.timesteps.end(), std::int64_t{0});
  }
  return ds;
}

}  // namespace promptdt
