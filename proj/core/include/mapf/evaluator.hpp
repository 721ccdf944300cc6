#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mapf/cost_to_go.hpp"
#include "mapf/expert.hpp"
#include "mapf/generators.hpp"
#include "mapf/instance.hpp"
#include "mapf/joint_state.hpp"
#include "mapf/model.hpp"
#include "mapf/plan.hpp"

namespace mapf {

// Decision maker for all agents of one episode. decide() runs once per time
// step and returns one action per agent. `instance.goals` and `fields` track
// the agents' *current* goal assignments, which lifelong episodes reassign
// mid-run. All policies except the expert are decentralized: agent i's action
// is a function of agent i's own observation only.
class Policy {
 public:
  virtual ~Policy() = default;

  virtual std::string name() const = 0;

  // Called once before an episode's first step. `seed` is the episode seed;
  // stochastic policies fold it into their own seed so that episodes are
  // reproducible per (policy seed, instance, episode seed).
  virtual void reset(const MapfInstance& instance, std::uint64_t seed);

  virtual std::vector<Action> decide(const JointState& state, const MapfInstance& instance,
                                     std::span<const CostToGoField> fields) = 0;
};

// Trained network. All agents are encoded and evaluated as one forward batch
// per step; actions are sampled from the per-agent distributions. Throws
// IncompatiblePolicy when the checkpoint's vocabulary hash or action count
// does not match this build. The file-loading overload surfaces I/O and
// corruption errors unchanged.
std::unique_ptr<Policy> make_model_policy(const std::string& checkpoint_path, std::uint64_t seed);
std::unique_ptr<Policy> make_model_policy(const ModelConfig& cfg, ModelParams<float> params,
                                          std::uint64_t seed);

// Centralized planner baseline: solves the instance once at reset and replays
// the plan. Re-solves from the live state whenever goals change (lifelong
// mode) or execution diverges from the plan. If a solve fails, every agent
// waits until the goals change again.
std::unique_ptr<Policy> make_expert_policy(const ExpertConfig& cfg);

// Per agent: the enabled direction with the lowest action id from the
// cost-to-go greedy mask, Wait when the mask is empty.
std::unique_ptr<Policy> make_greedy_policy();

// Uniform over all five actions, from a per-episode stream.
std::unique_ptr<Policy> make_random_policy(std::uint64_t seed);

enum class EpisodeMode {
  Mapf,   // ends when every agent sits on its goal, or at t_max
  Lmapf,  // always runs t_max steps; goals are reassigned on arrival
};

// Stream tag for the lifelong goal-resampling draws: the episode's goal rng
// is Rng(mix_seed(cfg.seed, kGoalStream)). Each arrival draws one below(k)
// index into the candidate list: free cells in row-major order, minus the
// agent's current cell and every currently assigned goal. Agents are
// processed in index order, before the first step and after every step.
inline constexpr std::uint64_t kGoalStream = 0x676f616c;

struct EpisodeConfig {
  EpisodeMode mode = EpisodeMode::Mapf;
  int t_max = 128;         // step budget, >= 1
  std::uint64_t seed = 0;  // episode seed: policy sampling + goal resampling
  bool timing = false;     // measure decide() wall clock; off reports exactly 0
};

struct EpisodeReport {
  bool success = false;      // MAPF: all agents on their goals at the end
  std::int64_t soc = 0;      // MAPF sum-of-costs; unfinished agents charge t_max
  int makespan = 0;
  double throughput = 0.0;   // lifelong: goals_reached / t_max
  int goals_reached = 0;     // lifelong arrival count
  int agent_count = 0;
  int steps = 0;             // steps actually executed
  double mean_step_ms = 0.0; // mean decide() wall clock, 0 unless cfg.timing
  PlanSet trajectory;        // recorded positions, trajectory[agent][time]
};

// Closed loop: observe -> decide -> step until the mode's stop condition.
// MAPF metrics are computed from the recorded trajectory, so the reported
// soc/makespan always match a metrics() recomputation. Throws InvalidConfig
// on t_max < 1, ArityMismatch when the policy returns the wrong number of
// actions, InstanceInfeasible when a lifelong goal draw has no candidate.
EpisodeReport run_episode(Policy& policy, const MapfInstance& instance, const EpisodeConfig& cfg);

// One group of evaluation maps: either `map_count` generated maps or an
// explicit list of map files (MovingAI format; wins when non-empty).
struct MapSetConfig {
  std::string name;
  MapFamily family = MapFamily::Random;
  int width = 17;
  int height = 17;
  double obstacle_density = 0.3;
  int map_count = 5;
  std::vector<std::string> map_files;
};

struct BenchmarkConfig {
  std::vector<MapSetConfig> map_sets;
  std::vector<int> agent_counts;
  int instances_per_map = 2;
  EpisodeMode mode = EpisodeMode::Mapf;
  int t_max = 128;
  std::uint64_t seed = 0;
  bool timing = false;
  // Reference expert for the SoC ratio; its t_max is overridden to match the
  // episode budget. The reference runs only in MAPF mode.
  ExpertConfig expert;
};

// One episode, i.e. one CSV row.
struct EpisodeRecord {
  std::string map_set;
  int map_id = 0;
  int n_agents = 0;
  std::uint64_t seed = 0;  // instance seed; the episode seed derives from it
  bool success = false;
  std::int64_t soc = 0;
  int makespan = 0;
  double throughput = 0.0;
  double mean_step_ms = 0.0;
};

// Aggregates over one (map set, agent count) cell. Confidence intervals are
// 95% half-widths under a normal approximation across episodes.
struct CellSummary {
  std::string map_set;
  int n_agents = 0;
  int episodes = 0;
  double success_rate = 0.0;
  double success_ci = 0.0;
  double mean_soc = 0.0;  // over all episodes; failures carry the t_max charge
  double soc_ci = 0.0;
  double soc_ratio = 0.0;  // mean per-instance policy/expert SoC, both solved
  int ratio_count = 0;     // instances contributing to soc_ratio
  double mean_throughput = 0.0;
  double mean_step_ms = 0.0;
};

struct BenchmarkReport {
  std::string policy_name;
  EpisodeMode mode = EpisodeMode::Mapf;
  int t_max = 0;
  std::vector<EpisodeRecord> episodes;
  std::vector<CellSummary> cells;
};

// Runs the policy over every (map set, agent count, map, instance)
// combination. Maps, instances, and episode seeds all derive from cfg.seed,
// so a rerun reproduces the report byte for byte. In MAPF mode the reference
// expert runs on the same instances for the SoC ratio column. Throws
// InvalidConfig on an empty or malformed suite.
BenchmarkReport run_benchmark(Policy& policy, const BenchmarkConfig& cfg);

// CSV: header map_set,map_id,n_agents,seed,success,soc,makespan,throughput,
// mean_step_ms, one row per episode. mean_step_ms is 0.000 unless the run
// measured timing, which keeps untimed reports byte-stable.
std::string report_csv(const BenchmarkReport& report);

// Fixed-width summary table, one line per (map set, agent count).
std::string report_text(const BenchmarkReport& report);

void write_report_csv(const BenchmarkReport& report, const std::string& path);

}  // namespace mapf
