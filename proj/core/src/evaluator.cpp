#include "mapf/evaluator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <utility>

#include "mapf/errors.hpp"
#include "mapf/movingai.hpp"
#include "mapf/observation.hpp"
#include "mapf/rng.hpp"
#include "mapf/tokenizer.hpp"

namespace mapf {

void Policy::reset(const MapfInstance&, std::uint64_t) {}

namespace {

class ModelPolicy final : public Policy {
 public:
  ModelPolicy(const ModelConfig& cfg, ModelParams<float> params, std::uint64_t seed)
      : cfg_(cfg), params_(std::move(params)), policy_seed_(seed) {
    check_model_config(cfg_);
    if (cfg_.n_actions != kNumActions)
      throw IncompatiblePolicy("model policy: checkpoint has " + std::to_string(cfg_.n_actions) +
                               " action outputs, episodes need " + std::to_string(kNumActions));
    if (cfg_.vocab_size != kVocabSize)
      throw IncompatiblePolicy("model policy: checkpoint vocabulary size " +
                               std::to_string(cfg_.vocab_size) + " != " +
                               std::to_string(kVocabSize));
  }

  std::string name() const override { return "model"; }

  void reset(const MapfInstance&, std::uint64_t seed) override {
    rng_ = Rng(mix_seed(policy_seed_, seed));
  }

  std::vector<Action> decide(const JointState& state, const MapfInstance& instance,
                             std::span<const CostToGoField> fields) override {
    const int n = state.agent_count();
    std::vector<TokenSeq> batch(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
      batch[static_cast<std::size_t>(i)] = encode_observation(observe(state, instance, fields, i));
    const MatX<float> logits = forward(cfg_, params_, batch);
    std::vector<Action> actions(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      const std::span<const float> row(logits.data() +
                                           static_cast<std::size_t>(i) *
                                               static_cast<std::size_t>(cfg_.n_actions),
                                       static_cast<std::size_t>(cfg_.n_actions));
      actions[static_cast<std::size_t>(i)] = static_cast<Action>(sample_action(row, rng_));
    }
    return actions;
  }

 private:
  ModelConfig cfg_;
  ModelParams<float> params_;
  std::uint64_t policy_seed_;
  Rng rng_{0};
};

class ExpertPolicy final : public Policy {
 public:
  explicit ExpertPolicy(const ExpertConfig& cfg) : cfg_(cfg) {}

  std::string name() const override { return "expert"; }

  void reset(const MapfInstance& instance, std::uint64_t) override {
    solve_from(instance.starts, instance.goals, instance, 0);
  }

  std::vector<Action> decide(const JointState& state, const MapfInstance& instance,
                             std::span<const CostToGoField>) override {
    const int n = state.agent_count();
    if (instance.goals != planned_goals_ || out_of_sync(state))
      solve_from(state.positions, instance.goals, instance, state.time);
    std::vector<Action> actions(static_cast<std::size_t>(n), Action::Wait);
    if (plans_.empty()) return actions;  // solve failed: hold position
    const int idx = state.time - base_time_;
    for (int i = 0; i < n; ++i) {
      const Plan& p = plans_[static_cast<std::size_t>(i)];
      const int last = static_cast<int>(p.size()) - 1;
      const Cell from = p[static_cast<std::size_t>(std::min(idx, last))];
      const Cell to = p[static_cast<std::size_t>(std::min(idx + 1, last))];
      actions[static_cast<std::size_t>(i)] = action_between(from, to).value_or(Action::Wait);
    }
    return actions;
  }

 private:
  bool out_of_sync(const JointState& state) const {
    if (plans_.empty()) return false;  // a known-failed solve is not re-run
    const int idx = state.time - base_time_;
    for (int i = 0; i < state.agent_count(); ++i) {
      const Plan& p = plans_[static_cast<std::size_t>(i)];
      const int last = static_cast<int>(p.size()) - 1;
      if (state.positions[static_cast<std::size_t>(i)] !=
          p[static_cast<std::size_t>(std::min(idx, last))])
        return true;
    }
    return false;
  }

  void solve_from(const std::vector<Cell>& starts, const std::vector<Cell>& goals,
                  const MapfInstance& instance, int time) {
    MapfInstance here{instance.map, starts, goals};
    const SolveResult result = solve_with_fallback(here, cfg_);
    plans_ = result.success ? result.plans : PlanSet{};
    planned_goals_ = goals;
    base_time_ = time;
  }

  ExpertConfig cfg_;
  PlanSet plans_;
  std::vector<Cell> planned_goals_;
  int base_time_ = 0;
};

class GreedyPolicy final : public Policy {
 public:
  std::string name() const override { return "greedy"; }

  std::vector<Action> decide(const JointState& state, const MapfInstance& instance,
                             std::span<const CostToGoField> fields) override {
    const int n = state.agent_count();
    std::vector<Action> actions(static_cast<std::size_t>(n), Action::Wait);
    for (int i = 0; i < n; ++i) {
      const GreedyMask mask = greedy_mask(instance.map, fields[static_cast<std::size_t>(i)],
                                          state.positions[static_cast<std::size_t>(i)]);
      for (int a = 0; a < 4; ++a) {
        if (mask & (1u << a)) {
          actions[static_cast<std::size_t>(i)] = static_cast<Action>(a);
          break;
        }
      }
    }
    return actions;
  }
};

class RandomPolicy final : public Policy {
 public:
  explicit RandomPolicy(std::uint64_t seed) : policy_seed_(seed) {}

  std::string name() const override { return "random"; }

  void reset(const MapfInstance&, std::uint64_t seed) override {
    rng_ = Rng(mix_seed(policy_seed_, seed));
  }

  std::vector<Action> decide(const JointState& state, const MapfInstance&,
                             std::span<const CostToGoField>) override {
    std::vector<Action> actions(static_cast<std::size_t>(state.agent_count()));
    for (Action& a : actions)
      a = static_cast<Action>(rng_.below(static_cast<std::uint64_t>(kNumActions)));
    return actions;
  }

 private:
  std::uint64_t policy_seed_;
  Rng rng_{0};
};

}  // namespace

std::unique_ptr<Policy> make_model_policy(const std::string& checkpoint_path, std::uint64_t seed) {
  LoadedCheckpoint loaded;
  try {
    loaded = load_checkpoint(checkpoint_path);
  } catch (const IncompatibleVocabulary& e) {
    throw IncompatiblePolicy(e.what());
  }
  return std::make_unique<ModelPolicy>(loaded.config, std::move(loaded.params), seed);
}

std::unique_ptr<Policy> make_model_policy(const ModelConfig& cfg, ModelParams<float> params,
                                          std::uint64_t seed) {
  return std::make_unique<ModelPolicy>(cfg, std::move(params), seed);
}

std::unique_ptr<Policy> make_expert_policy(const ExpertConfig& cfg) {
  return std::make_unique<ExpertPolicy>(cfg);
}

std::unique_ptr<Policy> make_greedy_policy() { return std::make_unique<GreedyPolicy>(); }

std::unique_ptr<Policy> make_random_policy(std::uint64_t seed) {
  return std::make_unique<RandomPolicy>(seed);
}

namespace {

bool all_at_goal(const JointState& state, const std::vector<Cell>& goals) {
  for (int i = 0; i < state.agent_count(); ++i)
    if (state.positions[static_cast<std::size_t>(i)] != goals[static_cast<std::size_t>(i)])
      return false;
  return true;
}

}  // namespace

EpisodeReport run_episode(Policy& policy, const MapfInstance& instance, const EpisodeConfig& cfg) {
  if (cfg.t_max < 1) throw InvalidConfig("run_episode: t_max must be >= 1");
  check_instance(instance);
  const int n = instance.agent_count();

  MapfInstance work = instance;  // lifelong episodes reassign goals in place
  std::vector<CostToGoField> fields = cost_to_go_all(work.map, work.goals);
  JointState state = initial_state(work);

  EpisodeReport report;
  report.agent_count = n;
  report.trajectory.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    report.trajectory[static_cast<std::size_t>(i)].push_back(
        state.positions[static_cast<std::size_t>(i)]);

  Rng goal_rng(mix_seed(cfg.seed, kGoalStream));
  const std::vector<Cell> free = work.map.free_cells();

  // A fresh goal for every agent standing on its current one: uniform over
  // the free cells minus the agent's cell and all assigned goals, from the
  // documented kGoalStream derivation so runs are reproducible.
  const auto resample_goals = [&](bool count_arrivals) {
    for (int i = 0; i < n; ++i) {
      if (state.positions[static_cast<std::size_t>(i)] != work.goals[static_cast<std::size_t>(i)])
        continue;
      if (count_arrivals) ++report.goals_reached;
      std::vector<Cell> candidates;
      candidates.reserve(free.size());
      for (const Cell c : free) {
        if (c == state.positions[static_cast<std::size_t>(i)]) continue;
        if (std::find(work.goals.begin(), work.goals.end(), c) != work.goals.end()) continue;
        candidates.push_back(c);
      }
      if (candidates.empty())
        throw InstanceInfeasible("lifelong episode: no free cell left to assign as a goal");
      work.goals[static_cast<std::size_t>(i)] =
          candidates[static_cast<std::size_t>(goal_rng.below(candidates.size()))];
      fields[static_cast<std::size_t>(i)] =
          cost_to_go(work.map, work.goals[static_cast<std::size_t>(i)]);
    }
  };

  if (cfg.mode == EpisodeMode::Lmapf) resample_goals(false);
  policy.reset(work, cfg.seed);

  double decide_ms = 0.0;
  for (int t = 0; t < cfg.t_max; ++t) {
    if (cfg.mode == EpisodeMode::Mapf && all_at_goal(state, work.goals)) break;
    std::vector<Action> actions;
    if (cfg.timing) {
      const auto t0 = std::chrono::steady_clock::now();
      actions = policy.decide(state, work, fields);
      const auto t1 = std::chrono::steady_clock::now();
      decide_ms += std::chrono::duration<double, std::milli>(t1 - t0).count();
    } else {
      actions = policy.decide(state, work, fields);
    }
    if (static_cast<int>(actions.size()) != n)
      throw ArityMismatch("policy '" + policy.name() + "' returned " +
                          std::to_string(actions.size()) + " actions for " + std::to_string(n) +
                          " agents");
    state = step(state, actions, work.map);
    ++report.steps;
    for (int i = 0; i < n; ++i)
      report.trajectory[static_cast<std::size_t>(i)].push_back(
          state.positions[static_cast<std::size_t>(i)]);
    if (cfg.mode == EpisodeMode::Lmapf) resample_goals(true);
  }

  report.mean_step_ms = (cfg.timing && report.steps > 0) ? decide_ms / report.steps : 0.0;
  if (cfg.mode == EpisodeMode::Mapf) {
    const SolutionMetrics m = metrics(report.trajectory, instance, cfg.t_max);
    report.success = m.success;
    report.soc = m.soc;
    report.makespan = m.makespan;
  } else {
    report.success = true;  // a lifelong episode has no failure state
    report.makespan = report.steps;
    report.throughput = static_cast<double>(report.goals_reached) / cfg.t_max;
  }
  return report;
}

namespace {

constexpr std::uint64_t kMapStream = 0x6d617073;
constexpr std::uint64_t kInstanceStream = 0x696e7374;
constexpr std::uint64_t kEpisodeStream = 0x65706973;

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (const double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// 95% half-width, normal approximation with the sample standard deviation.
double ci95_of(const std::vector<double>& v) {
  const std::size_t n = v.size();
  if (n < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (const double x : v) ss += (x - m) * (x - m);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  return 1.96 * sd / std::sqrt(static_cast<double>(n));
}

void validate_suite(const BenchmarkConfig& cfg) {
  if (cfg.map_sets.empty()) throw InvalidConfig("benchmark: no map sets");
  if (cfg.agent_counts.empty()) throw InvalidConfig("benchmark: no agent counts");
  for (const int n : cfg.agent_counts)
    if (n < 1) throw InvalidConfig("benchmark: agent counts must be >= 1");
  if (cfg.instances_per_map < 1) throw InvalidConfig("benchmark: instances_per_map must be >= 1");
  if (cfg.t_max < 1) throw InvalidConfig("benchmark: t_max must be >= 1");
  for (const MapSetConfig& set : cfg.map_sets) {
    if (set.name.empty()) throw InvalidConfig("benchmark: map set without a name");
    if (set.map_files.empty() && set.map_count < 1)
      throw InvalidConfig("benchmark: map set '" + set.name + "' has no maps");
  }
}

std::vector<GridMap> suite_maps(const MapSetConfig& set, std::uint64_t suite_seed,
                                std::size_t set_index) {
  std::vector<GridMap> maps;
  if (!set.map_files.empty()) {
    maps.reserve(set.map_files.size());
    for (const std::string& file : set.map_files) maps.push_back(parse_movingai_file(file));
    return maps;
  }
  maps.reserve(static_cast<std::size_t>(set.map_count));
  for (int m = 0; m < set.map_count; ++m) {
    GeneratorConfig gen;
    gen.family = set.family;
    gen.width = set.width;
    gen.height = set.height;
    gen.obstacle_density = set.obstacle_density;
    gen.seed = mix_seed(mix_seed(mix_seed(suite_seed, kMapStream), set_index),
                        static_cast<std::uint64_t>(m));
    maps.push_back(gen_map(gen));
  }
  return maps;
}

}  // namespace

BenchmarkReport run_benchmark(Policy& policy, const BenchmarkConfig& cfg) {
  validate_suite(cfg);

  BenchmarkReport report;
  report.policy_name = policy.name();
  report.mode = cfg.mode;
  report.t_max = cfg.t_max;

  std::unique_ptr<Policy> reference;
  if (cfg.mode == EpisodeMode::Mapf) {
    ExpertConfig ref_cfg = cfg.expert;
    ref_cfg.t_max = cfg.t_max;
    reference = make_expert_policy(ref_cfg);
  }

  for (std::size_t si = 0; si < cfg.map_sets.size(); ++si) {
    const MapSetConfig& set = cfg.map_sets[si];
    const std::vector<GridMap> maps = suite_maps(set, cfg.seed, si);
    const std::uint64_t set_seed = mix_seed(mix_seed(cfg.seed, kMapStream), si);

    for (const int n : cfg.agent_counts) {
      CellSummary cell;
      cell.map_set = set.name;
      cell.n_agents = n;
      std::vector<double> successes, socs, throughputs, step_ms, ratios;

      for (std::size_t mi = 0; mi < maps.size(); ++mi) {
        const std::uint64_t map_seed = mix_seed(set_seed, mi);
        for (int k = 0; k < cfg.instances_per_map; ++k) {
          const std::uint64_t inst_seed =
              mix_seed(mix_seed(mix_seed(map_seed, kInstanceStream), static_cast<std::uint64_t>(n)),
                       static_cast<std::uint64_t>(k));
          const MapfInstance instance = sample_instance(maps[mi], n, inst_seed);

          EpisodeConfig ecfg;
          ecfg.mode = cfg.mode;
          ecfg.t_max = cfg.t_max;
          ecfg.seed = mix_seed(inst_seed, kEpisodeStream);
          ecfg.timing = cfg.timing;
          const EpisodeReport ep = run_episode(policy, instance, ecfg);

          EpisodeRecord rec;
          rec.map_set = set.name;
          rec.map_id = static_cast<int>(mi);
          rec.n_agents = n;
          rec.seed = inst_seed;
          rec.success = ep.success;
          rec.soc = ep.soc;
          rec.makespan = ep.makespan;
          rec.throughput = ep.throughput;
          rec.mean_step_ms = ep.mean_step_ms;
          report.episodes.push_back(rec);

          successes.push_back(ep.success ? 1.0 : 0.0);
          socs.push_back(static_cast<double>(ep.soc));
          throughputs.push_back(ep.throughput);
          step_ms.push_back(ep.mean_step_ms);

          if (reference) {
            EpisodeConfig rcfg = ecfg;
            rcfg.timing = false;
            const EpisodeReport ref_ep = run_episode(*reference, instance, rcfg);
            if (ep.success && ref_ep.success && ref_ep.soc > 0)
              ratios.push_back(static_cast<double>(ep.soc) / static_cast<double>(ref_ep.soc));
          }
        }
      }

      cell.episodes = static_cast<int>(successes.size());
      cell.success_rate = mean_of(successes);
      cell.success_ci =
          cell.episodes > 0
              ? 1.96 * std::sqrt(cell.success_rate * (1.0 - cell.success_rate) / cell.episodes)
              : 0.0;
      cell.mean_soc = mean_of(socs);
      cell.soc_ci = ci95_of(socs);
      cell.ratio_count = static_cast<int>(ratios.size());
      cell.soc_ratio = mean_of(ratios);
      cell.mean_throughput = mean_of(throughputs);
      cell.mean_step_ms = mean_of(step_ms);
      report.cells.push_back(std::move(cell));
    }
  }
  return report;
}

std::string report_csv(const BenchmarkReport& report) {
  std::string out = "map_set,map_id,n_agents,seed,success,soc,makespan,throughput,mean_step_ms\n";
  char line[320];
  for (const EpisodeRecord& e : report.episodes) {
    std::snprintf(line, sizeof line, "%s,%d,%d,%llu,%d,%lld,%d,%.6f,%.3f\n", e.map_set.c_str(),
                  e.map_id, e.n_agents, static_cast<unsigned long long>(e.seed),
                  e.success ? 1 : 0, static_cast<long long>(e.soc), e.makespan, e.throughput,
                  e.mean_step_ms);
    out += line;
  }
  return out;
}

std::string report_text(const BenchmarkReport& report) {
  char line[320];
  std::snprintf(line, sizeof line, "policy %s  mode %s  t_max %d\n", report.policy_name.c_str(),
                report.mode == EpisodeMode::Mapf ? "mapf" : "lmapf", report.t_max);
  std::string out = line;
  std::snprintf(line, sizeof line, "%-20s %4s %5s %18s %22s %12s %11s %9s\n", "map_set", "n",
                "eps", "success", "soc", "soc_ratio", "throughput", "ms/step");
  out += line;
  for (const CellSummary& c : report.cells) {
    char ratio[32];
    if (c.ratio_count > 0)
      std::snprintf(ratio, sizeof ratio, "%.3f (%d)", c.soc_ratio, c.ratio_count);
    else
      std::snprintf(ratio, sizeof ratio, "-");
    char success[32], soc[32];
    std::snprintf(success, sizeof success, "%.3f +- %.3f", c.success_rate, c.success_ci);
    std::snprintf(soc, sizeof soc, "%.1f +- %.1f", c.mean_soc, c.soc_ci);
    std::snprintf(line, sizeof line, "%-20s %4d %5d %18s %22s %12s %11.4f %9.3f\n",
                  c.map_set.c_str(), c.n_agents, c.episodes, success, soc, ratio,
                  c.mean_throughput, c.mean_step_ms);
    out += line;
  }
  return out;
}

void write_report_csv(const BenchmarkReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw PipelineError("cannot open report for writing: " + path);
  out << report_csv(report);
  if (!out.flush()) throw PipelineError("failed writing report: " + path);
}

}  // namespace mapf
