// Command-line front end: map generation, expert solving, dataset builds,
// training, evaluation, and shard inspection over the mapf core library.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "mapf/dataset.hpp"
#include "mapf/errors.hpp"
#include "mapf/evaluator.hpp"
#include "mapf/expert.hpp"
#include "mapf/generators.hpp"
#include "mapf/movingai.hpp"
#include "mapf/tokenizer.hpp"
#include "mapf/trainer.hpp"

namespace {

using json = nlohmann::json;
using namespace mapf;

// Usage-class failure: bad invocation rather than a failed computation.
// Reported with exit code 2, like unknown flags.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw UsageError("config file not found: " + path);
  try {
    json j;
    in >> j;
    if (!j.is_object()) throw UsageError("config file " + path + ": top level must be an object");
    return j;
  } catch (const json::exception& e) {
    throw UsageError("config file " + path + ": " + e.what());
  }
}

template <typename T>
T cfg_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw UsageError(std::string("config key \"") + key + "\": " + e.what());
  }
}

MapFamily parse_family(const std::string& name) {
  if (name == "random") return MapFamily::Random;
  if (name == "maze") return MapFamily::Maze;
  throw UsageError("unknown map family \"" + name + "\" (random, maze)");
}

ExpertAlgorithm parse_algorithm(const std::string& name) {
  if (name == "pibt") return ExpertAlgorithm::Pibt;
  if (name == "prioritized") return ExpertAlgorithm::Prioritized;
  throw UsageError("unknown algorithm \"" + name + "\" (pibt, prioritized, fallback)");
}

// ---------------------------------------------------------------- gen-maps

struct GenMapsArgs {
  std::string config, out, family = "random";
  std::uint64_t seed = 0;
  int count = 5, width = 17, height = 17;
  double density = 0.3;
};

int run_gen_maps(const GenMapsArgs& a, const CLI::App* sub) {
  GenMapsArgs v = a;
  const json j = load_config(v.config);
  if (!sub->count("--family")) v.family = cfg_or(j, "family", v.family);
  if (!sub->count("--count")) v.count = cfg_or(j, "count", v.count);
  if (!sub->count("--width")) v.width = cfg_or(j, "width", v.width);
  if (!sub->count("--height")) v.height = cfg_or(j, "height", v.height);
  if (!sub->count("--density")) v.density = cfg_or(j, "density", v.density);
  if (!sub->count("--seed")) v.seed = cfg_or(j, "seed", v.seed);
  if (v.count < 1) throw UsageError("gen-maps: count must be >= 1");

  std::filesystem::create_directories(v.out);
  GeneratorConfig gen;
  gen.family = parse_family(v.family);
  gen.width = v.width;
  gen.height = v.height;
  gen.obstacle_density = v.density;
  for (int i = 0; i < v.count; ++i) {
    gen.seed = mix_seed(v.seed, static_cast<std::uint64_t>(i));
    const GridMap map = gen_map(gen);
    char name[64];
    std::snprintf(name, sizeof name, "%s_%03d.map", v.family.c_str(), i);
    const auto path = std::filesystem::path(v.out) / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw PipelineError("cannot write " + path.string());
    out << to_movingai(map);
    std::printf("%s\n", path.string().c_str());
  }
  return 0;
}

// ------------------------------------------------------------------- solve

struct SolveArgs {
  std::string config, out, map_file, family = "random", algorithm = "fallback";
  std::uint64_t seed = 0, map_seed = 0;
  int agents = 8, width = 17, height = 17, t_max = 128, restarts = 16;
  double density = 0.3;
};

int run_solve(const SolveArgs& a, const CLI::App* sub) {
  SolveArgs v = a;
  const json j = load_config(v.config);
  if (!sub->count("--map")) v.map_file = cfg_or(j, "map", v.map_file);
  if (!sub->count("--family")) v.family = cfg_or(j, "family", v.family);
  if (!sub->count("--algorithm")) v.algorithm = cfg_or(j, "algorithm", v.algorithm);
  if (!sub->count("--agents")) v.agents = cfg_or(j, "agents", v.agents);
  if (!sub->count("--width")) v.width = cfg_or(j, "width", v.width);
  if (!sub->count("--height")) v.height = cfg_or(j, "height", v.height);
  if (!sub->count("--density")) v.density = cfg_or(j, "density", v.density);
  if (!sub->count("--t-max")) v.t_max = cfg_or(j, "t_max", v.t_max);
  if (!sub->count("--restarts")) v.restarts = cfg_or(j, "restarts", v.restarts);
  if (!sub->count("--seed")) v.seed = cfg_or(j, "seed", v.seed);
  if (!sub->count("--map-seed")) v.map_seed = cfg_or(j, "map_seed", v.map_seed);

  GridMap map;
  if (!v.map_file.empty()) {
    map = parse_movingai_file(v.map_file);
  } else {
    GeneratorConfig gen;
    gen.family = parse_family(v.family);
    gen.width = v.width;
    gen.height = v.height;
    gen.obstacle_density = v.density;
    gen.seed = v.map_seed;
    map = gen_map(gen);
  }
  const MapfInstance instance = sample_instance(map, v.agents, v.seed);

  ExpertConfig cfg;
  cfg.t_max = v.t_max;
  cfg.restarts = v.restarts;
  cfg.seed = v.seed;
  SolveResult result;
  if (v.algorithm == "fallback") {
    result = solve_with_fallback(instance, cfg);
  } else {
    cfg.algorithm = parse_algorithm(v.algorithm);
    result = solve_expert(instance, cfg);
  }

  if (!result.success) {
    std::fprintf(stderr, "solve: no solution (%s) after %d attempts\n", result.reason.c_str(),
                 result.attempts);
    return 1;
  }
  const SolutionMetrics m = metrics(result.plans, instance, v.t_max);
  std::printf("success=1 agents=%d soc=%lld makespan=%d attempts=%d\n", v.agents,
              static_cast<long long>(m.soc), m.makespan, result.attempts);
  if (!v.out.empty()) {
    json plans = json::array();
    for (const Plan& p : result.plans) {
      json steps = json::array();
      for (const Cell c : p) steps.push_back({c.row, c.col});
      plans.push_back(steps);
    }
    json doc{{"agents", v.agents},
             {"soc", m.soc},
             {"makespan", m.makespan},
             {"attempts", result.attempts},
             {"plans", plans}};
    std::ofstream out(v.out, std::ios::binary);
    if (!out) throw PipelineError("cannot write " + v.out);
    out << doc.dump(2) << "\n";
  }
  return 0;
}

// ----------------------------------------------------------- build-dataset

struct BuildArgs {
  std::string config, out;
  std::uint64_t seed = 0;
};

int run_build_dataset(const BuildArgs& a, const CLI::App* sub) {
  const json j = load_config(a.config);
  DatasetConfig cfg;
  cfg.maze_maps = cfg_or(j, "maze_maps", cfg.maze_maps);
  cfg.random_maps = cfg_or(j, "random_maps", cfg.random_maps);
  cfg.agent_counts = cfg_or(j, "agent_counts", cfg.agent_counts);
  cfg.instances_per_map = cfg_or(j, "instances_per_map", cfg.instances_per_map);
  cfg.min_side = cfg_or(j, "min_side", cfg.min_side);
  cfg.max_side = cfg_or(j, "max_side", cfg.max_side);
  cfg.obstacle_density = cfg_or(j, "obstacle_density", cfg.obstacle_density);
  cfg.maze_fraction = cfg_or(j, "maze_fraction", cfg.maze_fraction);
  cfg.wait_keep_fraction = cfg_or(j, "wait_keep_fraction", cfg.wait_keep_fraction);
  cfg.shard_size = cfg_or(j, "shard_size", cfg.shard_size);
  cfg.t_max = cfg_or(j, "t_max", cfg.t_max);
  cfg.restarts = cfg_or(j, "restarts", cfg.restarts);
  cfg.seed = cfg_or(j, "seed", cfg.seed);
  if (sub->count("--seed")) cfg.seed = a.seed;

  const BuildReport report = build_dataset(cfg, a.out);
  std::printf("instances: %d attempted, %d solved (failure rate %.3f)\n",
              report.instances_attempted, report.instances_solved, report.expert_failure_rate);
  std::printf("samples: %zu traced, %zu kept (maze share %.3f)\n", report.samples_traced,
              report.samples_final, report.maze_share);
  std::printf("shards: %zu under %s\n", report.shards.size(), a.out.c_str());
  return 0;
}

// ------------------------------------------------------------------- train

ModelConfig parse_model(const json& j) {
  if (j.is_null()) return ModelConfig{};
  if (j.is_string()) return model_preset(j.get<std::string>());
  if (!j.is_object()) throw UsageError("config key \"model\": preset name or object expected");
  ModelConfig cfg;
  cfg.n_layers = cfg_or(j, "n_layers", cfg.n_layers);
  cfg.n_heads = cfg_or(j, "n_heads", cfg.n_heads);
  cfg.d_embed = cfg_or(j, "d_embed", cfg.d_embed);
  return cfg;
}

struct TrainArgs {
  std::string config, out, data, val;
  std::uint64_t seed = 0;
  int iters = -1;
};

int run_train(const TrainArgs& a, const CLI::App* sub) {
  const json j = load_config(a.config);
  TrainConfig cfg;
  cfg.model = parse_model(j.contains("model") ? j.at("model") : json());
  cfg.batch_size = cfg_or(j, "batch_size", cfg.batch_size);
  cfg.grad_accum = cfg_or(j, "grad_accum", cfg.grad_accum);
  cfg.total_iters = cfg_or(j, "total_iters", cfg.total_iters);
  cfg.eval_interval = cfg_or(j, "eval_interval", cfg.eval_interval);
  cfg.checkpoint_interval = cfg_or(j, "checkpoint_interval", cfg.checkpoint_interval);
  cfg.warmup_iters = cfg_or(j, "warmup_iters", cfg.warmup_iters);
  cfg.max_lr = cfg_or(j, "max_lr", cfg.max_lr);
  cfg.min_lr = cfg_or(j, "min_lr", cfg.min_lr);
  cfg.seed = cfg_or(j, "seed", cfg.seed);
  cfg.dataset_dir = cfg_or(j, "dataset_dir", cfg.dataset_dir);
  cfg.val_dir = cfg_or(j, "val_dir", cfg.val_dir);
  cfg.out_dir = cfg_or(j, "out_dir", cfg.out_dir);
  cfg.init_checkpoint = cfg_or(j, "init_checkpoint", cfg.init_checkpoint);
  cfg.resume = cfg_or(j, "resume", cfg.resume);
  if (sub->count("--seed")) cfg.seed = a.seed;
  if (sub->count("--out")) cfg.out_dir = a.out;
  if (sub->count("--data")) cfg.dataset_dir = a.data;
  if (sub->count("--val")) cfg.val_dir = a.val;
  if (sub->count("--iters")) cfg.total_iters = a.iters;

  const TrainResult result = train(cfg);
  std::printf("iters=%d train_loss=%.6f val_loss=%.6f val_acc=%.4f\n", result.iters_run,
              result.final_train_loss, result.final_val.loss, result.final_val.accuracy);
  std::printf("checkpoint: %s\nmetrics: %s\n", result.checkpoint_path.c_str(),
              result.metrics_path.c_str());
  if (!result.completed) {
    std::fprintf(stderr, "train: halted before completion (see metrics log)\n");
    return 1;
  }
  return 0;
}

// -------------------------------------------------------------------- eval

BenchmarkConfig builtin_suite(const std::string& name) {
  BenchmarkConfig cfg;
  cfg.agent_counts = {8, 16};
  cfg.instances_per_map = 2;
  MapSetConfig random_set;
  random_set.name = "desk-random";
  random_set.family = MapFamily::Random;
  MapSetConfig maze_set;
  maze_set.name = "desk-maze";
  maze_set.family = MapFamily::Maze;
  if (name == "desk-random") {
    cfg.map_sets = {random_set};
  } else if (name == "desk-maze") {
    cfg.map_sets = {maze_set};
  } else if (name == "desk-mixed") {
    cfg.map_sets = {random_set, maze_set};
  } else {
    throw UsageError("unknown suite \"" + name + "\" (desk-random, desk-maze, desk-mixed)");
  }
  return cfg;
}

BenchmarkConfig suite_from_json(const json& j) {
  BenchmarkConfig cfg;
  if (!j.contains("map_sets") || !j.at("map_sets").is_array() || j.at("map_sets").empty())
    throw UsageError("suite config: \"map_sets\" must be a non-empty array");
  for (const json& js : j.at("map_sets")) {
    MapSetConfig set;
    set.name = cfg_or(js, "name", set.name);
    set.family = parse_family(cfg_or(js, "family", std::string("random")));
    set.width = cfg_or(js, "width", set.width);
    set.height = cfg_or(js, "height", set.height);
    set.obstacle_density = cfg_or(js, "obstacle_density", set.obstacle_density);
    set.map_count = cfg_or(js, "map_count", set.map_count);
    set.map_files = cfg_or(js, "map_files", set.map_files);
    cfg.map_sets.push_back(std::move(set));
  }
  cfg.agent_counts = cfg_or(j, "agent_counts", cfg.agent_counts);
  cfg.instances_per_map = cfg_or(j, "instances_per_map", cfg.instances_per_map);
  const std::string mode = cfg_or(j, "mode", std::string("mapf"));
  if (mode == "mapf") cfg.mode = EpisodeMode::Mapf;
  else if (mode == "lmapf") cfg.mode = EpisodeMode::Lmapf;
  else throw UsageError("suite config: unknown mode \"" + mode + "\" (mapf, lmapf)");
  cfg.t_max = cfg_or(j, "t_max", cfg.t_max);
  cfg.seed = cfg_or(j, "seed", cfg.seed);
  cfg.timing = cfg_or(j, "timing", cfg.timing);
  if (j.contains("expert")) {
    const json& je = j.at("expert");
    cfg.expert.t_max = cfg_or(je, "t_max", cfg.expert.t_max);
    cfg.expert.restarts = cfg_or(je, "restarts", cfg.expert.restarts);
    cfg.expert.seed = cfg_or(je, "seed", cfg.expert.seed);
  }
  return cfg;
}

struct EvalArgs {
  std::string config, out, policy, checkpoint, suite = "desk-random", mode;
  std::uint64_t seed = 0;
  int t_max = -1;
  std::vector<int> agents;
  bool timing = false;
};

int run_eval(const EvalArgs& a, const CLI::App* sub) {
  BenchmarkConfig cfg =
      a.config.empty() ? builtin_suite(a.suite) : suite_from_json(load_config(a.config));
  if (sub->count("--seed")) cfg.seed = a.seed;
  if (sub->count("--t-max")) cfg.t_max = a.t_max;
  if (sub->count("--agents")) cfg.agent_counts = a.agents;
  if (sub->count("--mode")) {
    if (a.mode == "mapf") cfg.mode = EpisodeMode::Mapf;
    else if (a.mode == "lmapf") cfg.mode = EpisodeMode::Lmapf;
    else throw UsageError("unknown mode \"" + a.mode + "\" (mapf, lmapf)");
  }
  if (a.timing) cfg.timing = true;

  std::unique_ptr<Policy> policy;
  if (a.policy == "greedy") {
    policy = make_greedy_policy();
  } else if (a.policy == "random") {
    policy = make_random_policy(cfg.seed);
  } else if (a.policy == "expert") {
    ExpertConfig ecfg = cfg.expert;
    ecfg.t_max = cfg.t_max;
    policy = make_expert_policy(ecfg);
  } else if (a.policy == "model") {
    if (a.checkpoint.empty()) throw UsageError("eval --policy model needs --checkpoint <file>");
    policy = make_model_policy(a.checkpoint, cfg.seed);
  } else {
    throw UsageError("unknown policy \"" + a.policy + "\" (model, expert, greedy, random)");
  }

  const BenchmarkReport report = run_benchmark(*policy, cfg);
  std::fputs(report_text(report).c_str(), stdout);
  if (!a.out.empty()) {
    write_report_csv(report, a.out);
    std::printf("csv: %s\n", a.out.c_str());
  }
  return 0;
}

// ---------------------------------------------------------- inspect-shard

std::string describe_value_token(Token t) {
  char buf[16];
  if (t == kTokenBlocked) return "#";
  if (t == kTokenBeyondPlus) return ">+20";
  if (t == kTokenBeyondMinus) return "<-20";
  std::snprintf(buf, sizeof buf, "%d", static_cast<int>(t) - 20);
  return buf;
}

void print_record(const TokenizedSample& sample, std::uint64_t index) {
  std::printf("record %llu: label=%s\n", static_cast<unsigned long long>(index),
              std::string(action_name(static_cast<Action>(sample.label))).c_str());
  std::printf("costmap (%dx%d, ego at center, values relative to ego):\n", kFovSize, kFovSize);
  for (int r = 0; r < kFovSize; ++r) {
    std::string line;
    for (int c = 0; c < kFovSize; ++c) {
      const Token t = sample.tokens[static_cast<std::size_t>(r * kFovSize + c)];
      char cell[8];
      std::snprintf(cell, sizeof cell, "%5s", describe_value_token(t).c_str());
      line += cell;
    }
    std::printf("%s\n", line.c_str());
  }
  int used = 0;
  for (int slot = 0; slot < kMaxVisibleAgents; ++slot) {
    const std::size_t base =
        static_cast<std::size_t>(kAgentsOffset + slot * kAgentBlockTokens);
    bool empty = true;
    for (int k = 0; k < kAgentBlockTokens; ++k)
      if (sample.tokens[base + static_cast<std::size_t>(k)] != kTokenEmpty) empty = false;
    if (empty) continue;
    ++used;
    std::string hist;
    for (int k = 0; k < kHistoryLength; ++k) {
      const Token t = sample.tokens[base + 4 + static_cast<std::size_t>(k)];
      if (!hist.empty()) hist += ",";
      hist += (t == kTokenEmptyAction)
                  ? "-"
                  : std::string(action_name(static_cast<Action>(t - kTokenActionBase)));
    }
    const int mask = static_cast<int>(sample.tokens[base + 9]) - kTokenGreedyBase;
    std::string greedy;
    for (int d = 0; d < 4; ++d)
      if (mask & (1 << d)) {
        if (!greedy.empty()) greedy += ",";
        greedy += action_name(static_cast<Action>(d));
      }
    if (greedy.empty()) greedy = "none";
    std::printf("agent slot %d%s: pos %s,%s goal %s,%s hist [%s] greedy {%s}\n", slot,
                slot == 0 ? " (ego)" : "", describe_value_token(sample.tokens[base]).c_str(),
                describe_value_token(sample.tokens[base + 1]).c_str(),
                describe_value_token(sample.tokens[base + 2]).c_str(),
                describe_value_token(sample.tokens[base + 3]).c_str(), hist.c_str(),
                greedy.c_str());
  }
  std::printf("agent slots used: %d of %d\n", used, kMaxVisibleAgents);
}

struct InspectArgs {
  std::string file;
  std::uint64_t index = 0;
};

int run_inspect(const InspectArgs& a) {
  ShardReader reader(a.file);
  std::printf("shard: %s (%llu records)\n", a.file.c_str(),
              static_cast<unsigned long long>(reader.size()));
  if (a.index >= reader.size())
    throw InvalidConfig("inspect-shard: index " + std::to_string(a.index) + " out of range (" +
                        std::to_string(reader.size()) + " records)");
  std::optional<TokenizedSample> sample;
  for (std::uint64_t i = 0; i <= a.index; ++i) sample = reader.next();
  print_record(*sample, a.index);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"desk-scale multi-agent pathfinding pipeline"};
  app.require_subcommand(1);

  GenMapsArgs gen_args;
  CLI::App* gen = app.add_subcommand("gen-maps", "generate maps as MovingAI .map files");
  gen->add_option("--config", gen_args.config, "JSON config file");
  gen->add_option("--out", gen_args.out, "output directory")->required();
  gen->add_option("--seed", gen_args.seed, "base seed");
  gen->add_option("--family", gen_args.family, "random or maze");
  gen->add_option("--count", gen_args.count, "number of maps");
  gen->add_option("--width", gen_args.width, "map width");
  gen->add_option("--height", gen_args.height, "map height");
  gen->add_option("--density", gen_args.density, "obstacle density (random family)");

  SolveArgs solve_args;
  CLI::App* solve = app.add_subcommand("solve", "run the expert on one instance");
  solve->add_option("--config", solve_args.config, "JSON config file");
  solve->add_option("--out", solve_args.out, "write plans as JSON");
  solve->add_option("--seed", solve_args.seed, "instance/solver seed");
  solve->add_option("--map", solve_args.map_file, "MovingAI map file");
  solve->add_option("--family", solve_args.family, "generated map family");
  solve->add_option("--width", solve_args.width, "generated map width");
  solve->add_option("--height", solve_args.height, "generated map height");
  solve->add_option("--density", solve_args.density, "generated map density");
  solve->add_option("--map-seed", solve_args.map_seed, "generated map seed");
  solve->add_option("--agents", solve_args.agents, "agent count");
  solve->add_option("--algorithm", solve_args.algorithm, "pibt, prioritized, or fallback");
  solve->add_option("--t-max", solve_args.t_max, "step budget");
  solve->add_option("--restarts", solve_args.restarts, "solver restarts");

  BuildArgs build_args;
  CLI::App* build = app.add_subcommand("build-dataset", "solve instances and write shards");
  build->add_option("--config", build_args.config, "JSON config file");
  build->add_option("--out", build_args.out, "output directory")->required();
  build->add_option("--seed", build_args.seed, "override config seed");

  TrainArgs train_args;
  CLI::App* train = app.add_subcommand("train", "train a model on built shards");
  train->add_option("--config", train_args.config, "JSON config file");
  train->add_option("--out", train_args.out, "override output directory");
  train->add_option("--seed", train_args.seed, "override seed");
  train->add_option("--data", train_args.data, "override training shard directory");
  train->add_option("--val", train_args.val, "override validation shard directory");
  train->add_option("--iters", train_args.iters, "override total iterations");

  EvalArgs eval_args;
  CLI::App* eval = app.add_subcommand("eval", "benchmark a policy over a suite");
  eval->add_option("--config", eval_args.config, "suite JSON config file");
  eval->add_option("--out", eval_args.out, "write per-episode CSV here");
  eval->add_option("--seed", eval_args.seed, "suite + policy seed");
  eval->add_option("--policy", eval_args.policy, "model, expert, greedy, or random")->required();
  eval->add_option("--checkpoint", eval_args.checkpoint, "model checkpoint (policy=model)");
  eval->add_option("--suite", eval_args.suite, "built-in suite name");
  eval->add_option("--mode", eval_args.mode, "mapf or lmapf");
  eval->add_option("--t-max", eval_args.t_max, "step budget");
  eval->add_option("--agents", eval_args.agents, "agent counts (repeatable)");
  eval->add_flag("--timing", eval_args.timing, "measure per-step decision time");

  InspectArgs inspect_args;
  CLI::App* inspect = app.add_subcommand("inspect-shard", "pretty-print one dataset record");
  inspect->add_option("file", inspect_args.file, "shard file")->required();
  inspect->add_option("--index", inspect_args.index, "record index (default 0)");

  try {
    app.parse(argc, argv);
    if (gen->parsed()) return run_gen_maps(gen_args, gen);
    if (solve->parsed()) return run_solve(solve_args, solve);
    if (build->parsed()) return run_build_dataset(build_args, build);
    if (train->parsed()) return run_train(train_args, train);
    if (eval->parsed()) return run_eval(eval_args, eval);
    if (inspect->parsed()) return run_inspect(inspect_args);
    return 2;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const UsageError& e) {
    std::fprintf(stderr, "mapf: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "mapf: error: %s\n", e.what());
    return 1;
  }
}
