#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cli.hpp"
#include "promptdt/experiment.hpp"

namespace promptdt::cli {

namespace fs = std::filesystem;
using nlohmann::json;

fs::path runs_root() {
  const char* env = std::getenv("PROMPTDT_RUNS_DIR");
  return env && *env ? fs::path(env) : fs::path("runs");
}

void prepare_output_dir(const fs::path& dir, bool force) {
  if (fs::exists(dir)) {
    if (!fs::is_directory(dir)) throw UsageError("output path exists and is not a directory: " + dir.string());
    if (!fs::is_empty(dir) && !force) {
      throw UsageError("output directory " + dir.string() + " is not empty (use --force to overwrite)");
    }
  }
  fs::create_directories(dir);
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw UsageError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

std::string num(double x) {
  std::ostringstream s;
  s.precision(10);
  s << x;
  return s.str();
}

fs::path output_dir(const std::string& flag, const std::string& default_name) {
  return flag.empty() ? runs_root() / default_name : fs::path(flag);
}

std::vector<int> task_indices(const std::vector<TaskSpec>& tasks) {
  std::vector<int> out;
  for (const auto& t : tasks) out.push_back(t.task_index);
  return out;
}

// ---- data directories ----

std::string dataset_file_name(int task_index) {
  std::ostringstream s;
  s << "task_" << std::setw(2) << std::setfill('0') << task_index << ".pdtd";
  return s.str();
}

struct DataDir {
  fs::path dir;
  json manifest;
  TaskFamily family = TaskFamily::PointDir;
  Split split = Split::InDistribution;
  Quality quality = Quality::Expert;
  std::uint64_t seed = 0;
  std::size_t n_episodes = 0;
  std::size_t n_demos = 0;
};

DataDir read_data_dir(const fs::path& dir) {
  const fs::path manifest = dir / "manifest.json";
  if (!fs::exists(manifest)) throw UsageError("no dataset manifest at " + manifest.string());
  DataDir d;
  d.dir = dir;
  d.manifest = read_json(manifest);
  try {
    d.family = parse_family(d.manifest.at("family").get<std::string>());
    d.split = parse_split(d.manifest.at("split").get<std::string>());
    d.quality = parse_quality(d.manifest.at("quality").get<std::string>());
    d.seed = d.manifest.at("seed").get<std::uint64_t>();
    d.n_episodes = d.manifest.at("n_episodes").get<std::size_t>();
    d.n_demos = d.manifest.at("n_demos").get<std::size_t>();
  } catch (const std::exception& e) {
    throw UsageError("bad manifest " + manifest.string() + ": " + e.what());
  }
  return d;
}

/// Experiment data backed by the files of a gen-data directory. Other tiers
/// are regenerated in memory from the manifest seed.
ExperimentData load_experiment(const DataDir& d) {
  ExperimentData data(d.family, d.split, d.n_episodes, d.n_demos, d.seed);
  std::vector<TaskSpec> needed = data.tasks().train;
  needed.insert(needed.end(), data.tasks().test.begin(), data.tasks().test.end());
  std::map<int, const json*> entries;
  for (const auto& f : d.manifest.at("files")) entries[f.at("task_index").get<int>()] = &f;
  for (const auto& t : needed) {
    auto it = entries.find(t.task_index);
    if (it == entries.end()) throw UsageError("manifest lists no dataset for task " + std::to_string(t.task_index));
    const fs::path file = d.dir / it->second->at("file").get<std::string>();
    if (!fs::exists(file)) throw UsageError("missing dataset file " + file.string());
    TaskBundle b;
    b.dataset = load_dataset(file);
    const auto ids = it->second->at("demo_ids").get<std::vector<std::size_t>>();
    b.demos = demos_from_ids(b.dataset, ids);
    data.insert(d.quality, std::move(b));
  }
  return data;
}

// ---- prompt shape flags ----

struct PromptFlags {
  std::size_t kstar = 0, J = 1, H = 5;
};

/// Resolves --Kstar/--J/--H. K* alone means one segment of K* steps.
void resolve_prompt(CLI::App* sub, PromptFlags& p) {
  const bool has_k = sub->count("--Kstar") > 0, has_j = sub->count("--J") > 0, has_h = sub->count("--H") > 0;
  if (!has_k) return;
  if (p.kstar == 0) throw UsageError("--Kstar must be >= 1");
  if (has_j && has_h) {
    if (p.J * p.H != p.kstar) {
      throw UsageError("--Kstar " + std::to_string(p.kstar) + " does not equal --J x --H = " +
                       std::to_string(p.J * p.H));
    }
  } else if (has_j) {
    if (p.J == 0 || p.kstar % p.J != 0) throw UsageError("--Kstar is not a multiple of --J");
    p.H = p.kstar / p.J;
  } else if (has_h) {
    if (p.H == 0 || p.kstar % p.H != 0) throw UsageError("--Kstar is not a multiple of --H");
    p.J = p.kstar / p.H;
  } else {
    p.J = 1;
    p.H = p.kstar;
  }
}

void add_prompt_flags(CLI::App* sub, PromptFlags& p) {
  sub->add_option("--Kstar", p.kstar, "Prompt length K* = J * H");
  sub->add_option("--J", p.J, "Prompt segments")->capture_default_str();
  sub->add_option("--H", p.H, "Steps per prompt segment")->capture_default_str();
}

// ---- gen-data ----

struct GenDataFlags {
  std::string family, quality = "expert", split = "in-distribution", out;
  std::uint64_t seed = 7;
  std::size_t episodes = 200, demos = kDefaultDemos;
  bool force = false;
};

void gen_data(const GenDataFlags& f) {
  const TaskFamily family = parse_family(f.family);
  const Quality quality = parse_quality(f.quality);
  const Split split = parse_split(f.split);
  if (f.episodes == 0) throw UsageError("--episodes must be >= 1");
  if (f.demos == 0 || f.demos > f.episodes) throw UsageError("--demos must lie in [1, --episodes]");
  const TaskSet set = make_task_set(family, split);
  const fs::path dir = output_dir(f.out, "data-" + f.family + "-" + f.quality + "-s" + std::to_string(f.seed));
  prepare_output_dir(dir, f.force);
  write_json(dir / "config.json", {{"schema_version", kConfigSchemaVersion},
                                   {"command", "gen-data"},
                                   {"family", f.family},
                                   {"quality", f.quality},
                                   {"split", f.split},
                                   {"seed", f.seed},
                                   {"n_episodes", f.episodes},
                                   {"n_demos", f.demos},
                                   {"T", kEpisodeLength},
                                   {"out", dir.string()}});
  json files = json::array();
  for (const auto& task : task_grid(family)) {
    const TaskBundle b = generate_bundle(task, quality, f.episodes, f.demos, f.seed);
    const std::string name = dataset_file_name(task.task_index);
    save_dataset(b.dataset, dir / name);
    files.push_back({{"task_index", task.task_index},
                     {"goal", task.goal},
                     {"file", name},
                     {"seed", b.dataset.rng_seed},
                     {"demo_ids", b.demos.episode_ids}});
  }
  write_json(dir / "manifest.json", {{"schema_version", kConfigSchemaVersion},
                                     {"family", f.family},
                                     {"quality", f.quality},
                                     {"split", f.split},
                                     {"seed", f.seed},
                                     {"T", kEpisodeLength},
                                     {"n_episodes", f.episodes},
                                     {"n_demos", f.demos},
                                     {"train", task_indices(set.train)},
                                     {"test", task_indices(set.test)},
                                     {"files", files}});
  std::cout << "wrote " << files.size() << " datasets to " << dir.string() << "\n";
}

// ---- train ----

struct ModelFlags {
  std::size_t embed_dim = 128, layers = 3, heads = 1;
};

void add_model_flags(CLI::App* sub, ModelFlags& m) {
  sub->add_option("--embed-dim", m.embed_dim)->capture_default_str();
  sub->add_option("--layers", m.layers)->capture_default_str();
  sub->add_option("--heads", m.heads)->capture_default_str();
}

struct TrainFlags {
  std::string data, variant = "prompt-dt", out;
  PromptFlags prompt;
  ModelFlags model;
  std::size_t K = 20, iterations = 5000, batch_per_task = 8, eval_interval = 500, eval_episodes = 20;
  double lr = 1e-4, weight_decay = 1e-4, target_return = 0.0, rtg_scale = 0.0;
  std::uint64_t seed = 1, eval_seed = 0;
  bool force = false, wall_clock = false;
};

json train_config_json(const TrainConfig& c) {
  return {{"iterations", c.iterations},
          {"batch_per_task", c.batch_per_task},
          {"learning_rate", c.learning_rate},
          {"weight_decay", c.weight_decay},
          {"J", c.J},
          {"H", c.H},
          {"Kstar", c.J * c.H},
          {"K", c.K},
          {"eval_interval", c.eval_interval},
          {"eval_episodes", c.eval_episodes},
          {"eval_seed", c.eval_seed},
          {"target_return", c.target_return},
          {"variant", std::string(variant_name(c.variant))},
          {"seed", c.seed},
          {"model", c.model}};
}

void warn_unused_prompt(CLI::App* sub, Variant v) {
  if (variant_uses_prompt(v) || sub->count("--Kstar") + sub->count("--J") + sub->count("--H") == 0) return;
  std::cerr << "warning: --variant " << variant_name(v) << " has no prompt; ignoring --Kstar/--J/--H\n";
}

void train_cmd(CLI::App* sub, TrainFlags f) {
  const Variant variant = parse_variant(f.variant);
  resolve_prompt(sub, f.prompt);
  warn_unused_prompt(sub, variant);
  if (f.data.empty()) throw UsageError("--data is required");
  const DataDir d = read_data_dir(f.data);
  ExperimentData data = load_experiment(d);

  TrainConfig cfg;
  cfg.iterations = f.iterations;
  cfg.batch_per_task = f.batch_per_task;
  cfg.learning_rate = f.lr;
  cfg.weight_decay = f.weight_decay;
  cfg.J = f.prompt.J;
  cfg.H = f.prompt.H;
  cfg.K = f.K;
  cfg.eval_interval = f.eval_interval;
  cfg.eval_episodes = f.eval_episodes;
  cfg.eval_seed = f.eval_seed;
  cfg.variant = variant;
  cfg.seed = f.seed;
  cfg.rtg_scale = f.rtg_scale;
  cfg.model.embed_dim = f.model.embed_dim;
  cfg.model.n_layers = f.model.layers;
  cfg.model.n_heads = f.model.heads;
  cfg.target_return = sub->count("--target-return") ? f.target_return : data.target_return();
  if (variant_uses_prompt(variant)) {
    for (const auto& t : data.tasks().train) {
      for (const auto& ep : data.bundle(t, d.quality).dataset.episodes) check_prompt_shape(cfg.J, cfg.H, ep.length());
    }
  }

  const auto train_tasks = data.train_data(d.quality);
  const auto eval_tasks = data.eval_tasks(d.quality);
  cfg.model = resolve_model_config(cfg, train_tasks);
  try {
    cfg.model.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  const fs::path dir = output_dir(f.out, "train-" + f.variant + "-s" + std::to_string(f.seed));
  prepare_output_dir(dir, f.force);
  json config{{"schema_version", kConfigSchemaVersion},
              {"command", "train"},
              {"data", fs::absolute(d.dir).lexically_normal().string()},
              {"family", std::string(family_name(d.family))},
              {"split", std::string(split_name(d.split))},
              {"data_quality", std::string(quality_name(d.quality))},
              {"train_tasks", task_indices(data.tasks().train)},
              {"test_tasks", task_indices(data.tasks().test)},
              {"train", train_config_json(cfg)},
              {"out", dir.string()}};
  write_json(dir / "config.json", config);

  auto res = train<Real>(cfg, std::span<const TaskData>(train_tasks), std::span<const EvalTask>(eval_tasks),
                         [](const MetricRecord& r) {
                           std::cout << "iter " << r.iteration << "  loss " << num(r.train_loss);
                           if (!r.tasks.empty()) std::cout << "  return " << num(r.aggregate);
                           std::cout << std::endl;
                         });
  save_checkpoint(res.weights, dir / "checkpoint.pdtw");
  std::ostringstream csv;
  res.log.write_csv(csv, variant, f.wall_clock);
  write_text(dir / "metrics.csv", csv.str());
  std::cout << "wrote " << (dir / "checkpoint.pdtw").string() << " and metrics.csv\n";
}

// ---- eval ----

struct EvalFlags {
  std::string run, checkpoint, data, variant, trace, out;
  std::vector<std::string> prompt_quality;
  PromptFlags prompt;
  std::size_t episodes = 20, finetune_data = 0, finetune_steps = 10;
  double finetune_lr = 1e-4, target_return = 0.0;
  std::uint64_t seed = 0;
  bool force = false;
};

void eval_cmd(CLI::App* sub, EvalFlags f) {
  if (f.run.empty() == f.checkpoint.empty()) throw UsageError("give exactly one of --run or --checkpoint");
  json run_config;
  fs::path ckpt = f.checkpoint;
  if (!f.run.empty()) {
    ckpt = fs::path(f.run) / "checkpoint.pdtw";
    if (fs::exists(fs::path(f.run) / "config.json")) run_config = read_json(fs::path(f.run) / "config.json");
  }
  if (!fs::exists(ckpt)) throw UsageError("checkpoint not found: " + ckpt.string());
  const ModelWeights<Real> w = load_checkpoint<Real>(ckpt);
  const Variant variant = w.config.variant;
  if (!f.variant.empty() && parse_variant(f.variant) != variant) {
    throw UsageError("--variant " + f.variant + " does not match the checkpoint's variant " +
                     std::string(variant_name(variant)));
  }

  std::string data_path = f.data;
  if (data_path.empty() && run_config.contains("data")) data_path = run_config.at("data").get<std::string>();
  if (data_path.empty()) throw UsageError("--data is required");
  const DataDir d = read_data_dir(data_path);
  ExperimentData data = load_experiment(d);

  PromptFlags p = f.prompt;
  if (run_config.contains("train") && !sub->count("--J") && !sub->count("--H")) {
    p.J = run_config["train"].value("J", p.J);
    p.H = run_config["train"].value("H", p.H);
  }
  resolve_prompt(sub, p);
  warn_unused_prompt(sub, variant);

  EvalConfig ec;
  ec.episodes_per_task = f.episodes;
  ec.seed = f.seed;
  ec.J = p.J;
  ec.H = p.H;
  ec.K = w.config.context_len;
  if (sub->count("--target-return")) {
    ec.target_return = f.target_return;
  } else if (run_config.contains("train")) {
    ec.target_return = run_config["train"].at("target_return").get<double>();
  } else {
    ec.target_return = data.target_return();
  }
  if (variant_uses_prompt(variant) && p.J * p.H > w.config.max_prompt_len) {
    throw UsageError("prompt length " + std::to_string(p.J * p.H) + " exceeds the checkpoint's max_prompt_len " +
                     std::to_string(w.config.max_prompt_len));
  }

  FinetuneBudget budget;
  if (f.finetune_data > 0) {
    if (variant_uses_prompt(variant)) {
      throw UsageError("--finetune-data needs a prompt-free checkpoint (mt-orl or mt-bc), got " +
                       std::string(variant_name(variant)));
    }
    budget = {f.finetune_data, f.finetune_steps, f.finetune_lr};
  }

  std::vector<Quality> qualities;
  for (const auto& q : f.prompt_quality) qualities.push_back(parse_quality(q));
  if (qualities.empty()) qualities.push_back(d.quality);

  const fs::path dir = output_dir(f.out, "eval-" + std::string(variant_name(variant)) + "-s" + std::to_string(f.seed));
  prepare_output_dir(dir, f.force);
  std::vector<std::string> qnames;
  for (auto q : qualities) qnames.emplace_back(quality_name(q));
  write_json(dir / "config.json", {{"schema_version", kConfigSchemaVersion},
                                   {"command", "eval"},
                                   {"checkpoint", fs::absolute(ckpt).lexically_normal().string()},
                                   {"data", fs::absolute(d.dir).lexically_normal().string()},
                                   {"variant", std::string(variant_name(variant))},
                                   {"prompt_quality", qnames},
                                   {"J", ec.J},
                                   {"H", ec.H},
                                   {"Kstar", ec.J * ec.H},
                                   {"K", ec.K},
                                   {"episodes", ec.episodes_per_task},
                                   {"seed", ec.seed},
                                   {"target_return", ec.target_return},
                                   {"finetune_data", budget.transitions},
                                   {"finetune_steps", budget.steps},
                                   {"finetune_lr", budget.learning_rate},
                                   {"out", dir.string()}});

  std::ofstream trace;
  if (!f.trace.empty()) {
    trace.open(f.trace, std::ios::trunc);
    if (!trace) throw UsageError("cannot write trace file " + f.trace);
    ec.trace = &trace;
  }

  const std::string mode = budget.transitions > 0 ? "finetune" : "few-shot";
  std::ostringstream csv;
  csv << "mode,prompt_quality,task_id,mean_return,std_return,episodes\n";
  std::cout << std::left << std::setw(10) << "mode" << std::setw(10) << "prompt" << std::setw(8) << "task"
            << "mean_return\n";
  for (auto q : qualities) {
    const SuiteResult r = evaluate_test_tasks(w, data, q, ec, budget);
    const std::string qn(quality_name(q));
    for (const auto& t : r.tasks) {
      csv << mode << ',' << qn << ',' << t.task_id << ',' << num(t.mean) << ',' << num(t.std) << ','
          << t.returns.size() << '\n';
      std::cout << std::setw(10) << mode << std::setw(10) << qn << std::setw(8) << t.task_id << num(t.mean) << '\n';
    }
    csv << mode << ',' << qn << ",-1," << num(r.aggregate) << ",0," << r.tasks.size() * ec.episodes_per_task << '\n';
    std::cout << std::setw(10) << mode << std::setw(10) << qn << std::setw(8) << "all" << num(r.aggregate) << '\n';
  }
  write_text(dir / "eval.csv", csv.str());
}

// ---- ablate ----

struct AblateFlags {
  std::string sweep, family, out;
  std::string seeds = "1,2,3";
  PromptFlags prompt;
  ModelFlags model;
  std::size_t K = 20, iterations = 5000, batch_per_task = 8, eval_episodes = 20, episodes = 200;
  double lr = 1e-4, weight_decay = 1e-4;
  std::uint64_t data_seed = 7, eval_seed = 0;
  bool force = false;
};

void ablate_cmd(CLI::App* sub, AblateFlags f) {
  SweepOptions o;
  o.kind = parse_sweep(f.sweep);
  std::vector<std::uint64_t> seeds;
  {
    std::stringstream s(f.seeds);
    std::string tok;
    while (std::getline(s, tok, ',')) {
      if (tok.empty()) continue;
      try {
        std::size_t used = 0;
        seeds.push_back(std::stoull(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw UsageError("bad seed '" + tok + "' in --seeds");
      }
    }
  }
  if (seeds.empty()) throw UsageError("empty sweep: --seeds lists no seeds");
  if (!f.family.empty()) {
    o.family = parse_family(f.family);
  } else {
    o.family = o.kind == SweepKind::Quality ? TaskFamily::PointVel : TaskFamily::PointDir;
  }
  if (o.kind == SweepKind::Ood && !f.family.empty() && o.family != TaskFamily::PointDirAngle) {
    throw UsageError("the ood sweep runs on point-dir-angle");
  }
  resolve_prompt(sub, f.prompt);
  o.seeds = seeds;
  o.n_episodes = f.episodes;
  o.data_seed = f.data_seed;
  o.eval_episodes = f.eval_episodes;
  o.eval_seed = f.eval_seed;
  o.train.iterations = f.iterations;
  o.train.batch_per_task = f.batch_per_task;
  o.train.learning_rate = f.lr;
  o.train.weight_decay = f.weight_decay;
  o.train.K = f.K;
  o.train.J = f.prompt.J;
  o.train.H = f.prompt.H;
  o.train.model.embed_dim = f.model.embed_dim;
  o.train.model.n_layers = f.model.layers;
  o.train.model.n_heads = f.model.heads;

  const fs::path dir = output_dir(f.out, "ablate-" + f.sweep);
  prepare_output_dir(dir, f.force);
  write_json(dir / "config.json",
             {{"schema_version", kConfigSchemaVersion},
              {"command", "ablate"},
              {"sweep", f.sweep},
              {"family", std::string(family_name(o.kind == SweepKind::Ood ? TaskFamily::PointDirAngle : o.family))},
              {"seeds", o.seeds},
              {"n_episodes", o.n_episodes},
              {"data_seed", o.data_seed},
              {"eval_episodes", o.eval_episodes},
              {"eval_seed", o.eval_seed},
              {"train", train_config_json(o.train)},
              {"out", dir.string()}});
  const auto rows = run_sweep(o, [](const SweepRow& r) {
    std::cout << r.sweep << " cell " << r.cell << " seed " << r.seed << " " << variant_name(r.variant) << " train="
              << quality_name(r.train_quality) << " prompt=" << quality_name(r.prompt_quality)
              << " K*=" << r.prompt.kstar() << "  return " << num(r.mean_return) << std::endl;
  });
  std::ostringstream csv;
  write_sweep_csv(csv, rows);
  write_text(dir / "ablation.csv", csv.str());
}

// ---- plot ----

struct PlotFlags {
  std::vector<std::string> metrics;
  std::string ablation, out;
  bool force = false;
};

struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::string text;
  std::size_t col(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw UsageError("CSV has no column '" + name + "'");
  }
};

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream s(line);
  std::string cell;
  while (std::getline(s, cell, ',')) out.push_back(cell);
  return out;
}

Csv read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read " + path.string());
  Csv csv;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    csv.text += line + "\n";
    if (csv.header.empty()) {
      csv.header = split_line(line);
    } else {
      csv.rows.push_back(split_line(line));
    }
  }
  if (csv.header.empty()) throw UsageError("empty CSV: " + path.string());
  return csv;
}

void plot_cmd(const PlotFlags& f) {
  if (f.metrics.empty() && f.ablation.empty()) throw UsageError("nothing to plot: give --metrics and/or --ablation");
  const fs::path dir = output_dir(f.out, "plots");
  prepare_output_dir(dir, f.force);
  write_json(dir / "config.json", {{"schema_version", kConfigSchemaVersion},
                                   {"command", "plot"},
                                   {"metrics", f.metrics},
                                   {"ablation", f.ablation},
                                   {"out", dir.string()}});
  if (!f.metrics.empty()) {
    std::vector<Series> series;
    std::string comment;
    for (const auto& path : f.metrics) {
      const Csv csv = read_csv(path);
      const auto it = csv.col("iter"), var = csv.col("variant"), task = csv.col("task_id"),
                 ret = csv.col("mean_return");
      Series s;
      s.label = fs::path(path).parent_path().filename().string();
      for (const auto& r : csv.rows) {
        if (r.size() != csv.header.size() || r[task] != "-1" || r[ret] == "nan") continue;
        if (s.x.empty()) s.label = r[var] + " " + s.label;
        s.x.push_back(std::stod(r[it]));
        s.y.push_back(std::stod(r[ret]));
      }
      if (s.x.empty()) throw UsageError("no aggregate return rows in " + path);
      comment += "source: " + path + "\n" + csv.text;
      series.push_back(std::move(s));
    }
    write_text(dir / "returns.svg",
               line_chart_svg("Few-shot return on test tasks", "iteration", "mean return", series, comment));
    std::cout << "wrote " << (dir / "returns.svg").string() << "\n";
  }
  if (!f.ablation.empty()) {
    const Csv csv = read_csv(f.ablation);
    const auto sweep = csv.col("sweep"), cell = csv.col("cell"), var = csv.col("variant"),
               tq = csv.col("train_quality"), pq = csv.col("prompt_quality"), ks = csv.col("Kstar"),
               J = csv.col("J"), H = csv.col("H"), ret = csv.col("mean_return");
    std::map<int, std::pair<std::string, std::vector<double>>> cells;
    std::string title = "Ablation";
    for (const auto& r : csv.rows) {
      if (r.size() != csv.header.size()) continue;
      std::string label;
      if (r[sweep] == "prompt-length") {
        label = "K*=" + r[ks] + " (" + r[J] + "," + r[H] + ")";
      } else if (r[sweep] == "quality") {
        label = r[tq] + "/" + r[pq];
      } else {
        label = r[var];
      }
      title = "Ablation: " + r[sweep];
      auto& c = cells[std::stoi(r[cell])];
      c.first = label;
      c.second.push_back(std::stod(r[ret]));
    }
    if (cells.empty()) throw UsageError("no ablation rows in " + f.ablation);
    std::vector<Bar> bars;
    for (const auto& [idx, c] : cells) {
      double m = 0.0;
      for (double v : c.second) m += v / static_cast<double>(c.second.size());
      bars.push_back({c.first, m});
    }
    write_text(dir / "ablation.svg",
               bar_chart_svg(title + " (mean over seeds)", "mean return", bars, "source: " + f.ablation + "\n" + csv.text));
    std::cout << "wrote " << (dir / "ablation.svg").string() << "\n";
  }
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Prompt-based Decision Transformer: data generation, training, few-shot evaluation"};
  app.require_subcommand(1);

  GenDataFlags gd;
  auto* gen = app.add_subcommand("gen-data", "Generate one offline dataset per task plus a manifest");
  gen->add_option("--family", gd.family, "point-dir | point-vel | point-dir-angle")->required();
  gen->add_option("--quality", gd.quality, "expert | medium | random")->capture_default_str();
  gen->add_option("--split", gd.split, "in-distribution | ood")->capture_default_str();
  gen->add_option("--seed", gd.seed)->capture_default_str();
  gen->add_option("--episodes", gd.episodes, "Episodes per task")->capture_default_str();
  gen->add_option("--demos", gd.demos, "Demonstrations per task")->capture_default_str();
  gen->add_option("--out", gd.out, "Output directory");
  gen->add_flag("--force", gd.force, "Overwrite a non-empty output directory");

  TrainFlags tf;
  auto* tr = app.add_subcommand("train", "Multi-task training; writes checkpoint, metrics.csv, config.json");
  tr->add_option("--data", tf.data, "gen-data directory")->required();
  tr->add_option("--variant", tf.variant, "prompt-dt | mt-orl | prompt-mt-bc | mt-bc")->capture_default_str();
  add_prompt_flags(tr, tf.prompt);
  add_model_flags(tr, tf.model);
  tr->add_option("--K", tf.K, "History length")->capture_default_str();
  tr->add_option("--iterations", tf.iterations)->capture_default_str();
  tr->add_option("--batch-per-task", tf.batch_per_task)->capture_default_str();
  tr->add_option("--lr", tf.lr)->capture_default_str();
  tr->add_option("--weight-decay", tf.weight_decay)->capture_default_str();
  tr->add_option("--eval-interval", tf.eval_interval, "0 disables evaluation")->capture_default_str();
  tr->add_option("--eval-episodes", tf.eval_episodes)->capture_default_str();
  tr->add_option("--eval-seed", tf.eval_seed)->capture_default_str();
  tr->add_option("--target-return", tf.target_return, "G*; derived from expert data when omitted");
  tr->add_option("--rtg-scale", tf.rtg_scale, "0 derives it from the data")->capture_default_str();
  tr->add_option("--seed", tf.seed)->capture_default_str();
  tr->add_option("--out", tf.out, "Run directory");
  tr->add_flag("--force", tf.force);
  tr->add_flag("--wall-clock", tf.wall_clock, "Record elapsed seconds in metrics.csv");

  EvalFlags ef;
  auto* ev = app.add_subcommand("eval", "Few-shot (or finetuned) evaluation on the test tasks");
  ev->add_option("--run", ef.run, "Run directory from train");
  ev->add_option("--checkpoint", ef.checkpoint, "Checkpoint file");
  ev->add_option("--data", ef.data, "gen-data directory (defaults to the run's)");
  ev->add_option("--variant", ef.variant, "Expected variant of the checkpoint");
  ev->add_option("--prompt-quality", ef.prompt_quality, "Prompt tiers to evaluate, one row each");
  add_prompt_flags(ev, ef.prompt);
  ev->add_option("--episodes", ef.episodes, "Episodes per test task")->capture_default_str();
  ev->add_option("--seed", ef.seed)->capture_default_str();
  ev->add_option("--target-return", ef.target_return);
  ev->add_option("--finetune-data", ef.finetune_data, "Transitions per test task for finetuning")->capture_default_str();
  ev->add_option("--finetune-steps", ef.finetune_steps)->capture_default_str();
  ev->add_option("--finetune-lr", ef.finetune_lr)->capture_default_str();
  ev->add_option("--trace", ef.trace, "Write a JSON-lines rollout trace");
  ev->add_option("--out", ef.out);
  ev->add_flag("--force", ef.force);

  AblateFlags af;
  auto* ab = app.add_subcommand("ablate", "Run a sweep; writes ablation.csv");
  ab->add_option("--sweep", af.sweep, "prompt-length | quality | ood")->required();
  ab->add_option("--family", af.family);
  ab->add_option("--seeds", af.seeds, "Comma-separated training seeds")->capture_default_str();
  add_prompt_flags(ab, af.prompt);
  add_model_flags(ab, af.model);
  ab->add_option("--K", af.K)->capture_default_str();
  ab->add_option("--iterations", af.iterations)->capture_default_str();
  ab->add_option("--batch-per-task", af.batch_per_task)->capture_default_str();
  ab->add_option("--lr", af.lr)->capture_default_str();
  ab->add_option("--weight-decay", af.weight_decay)->capture_default_str();
  ab->add_option("--eval-episodes", af.eval_episodes)->capture_default_str();
  ab->add_option("--eval-seed", af.eval_seed)->capture_default_str();
  ab->add_option("--episodes", af.episodes, "Offline episodes per task")->capture_default_str();
  ab->add_option("--data-seed", af.data_seed)->capture_default_str();
  ab->add_option("--out", af.out);
  ab->add_flag("--force", af.force);

  PlotFlags pf;
  auto* pl = app.add_subcommand("plot", "Render metrics/ablation CSVs as SVG");
  pl->add_option("--metrics", pf.metrics, "metrics.csv files");
  pl->add_option("--ablation", pf.ablation, "ablation.csv file");
  pl->add_option("--out", pf.out);
  pl->add_flag("--force", pf.force);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (gen->parsed()) gen_data(gd);
    if (tr->parsed()) train_cmd(tr, tf);
    if (ev->parsed()) eval_cmd(ev, ef);
    if (ab->parsed()) ablate_cmd(ab, af);
    if (pl->parsed()) plot_cmd(pf);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace promptdt::cli
