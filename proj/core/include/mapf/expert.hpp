#pragma once

#include <cstdint>
#include <string>

#include "mapf/plan.hpp"

namespace mapf {

enum class ExpertAlgorithm { Pibt, Prioritized };

struct ExpertConfig {
  ExpertAlgorithm algorithm = ExpertAlgorithm::Pibt;
  int t_max = 128;
  int restarts = 16;
  std::uint64_t seed = 0;
};

struct SolveResult {
  bool success = false;
  PlanSet plans;          // padded to equal length; empty on failure
  std::string reason;     // failure explanation
  int attempts = 0;       // orderings tried

  explicit operator bool() const { return success; }
};

// PIBT rollout with dynamic priorities: base priority is a seeded random
// permutation, bumped by each agent's consecutive steps without getting
// closer to its goal. A failed rollout reshuffles and retries, up to
// cfg.restarts attempts. Every success passes validate and parks all agents
// on their goals.
SolveResult solve(const MapfInstance& instance, const ExpertConfig& cfg);

// Prioritized planning: agents in seeded random order run time-expanded A*
// (unit step cost, cost-to-go heuristic) against vertex/edge reservations of
// the agents planned before them, which occupy their goals forever once
// arrived. Unroutable agent → next ordering, up to cfg.restarts.
SolveResult solve_prioritized(const MapfInstance& instance, const ExpertConfig& cfg);

// Dispatch on cfg.algorithm.
SolveResult solve_expert(const MapfInstance& instance, const ExpertConfig& cfg);

// The pipeline's expert: PIBT rollouts first (fast), prioritized planning as
// the fallback when every rollout fails. cfg.algorithm is ignored.
SolveResult solve_with_fallback(const MapfInstance& instance, const ExpertConfig& cfg);

}  // namespace mapf
