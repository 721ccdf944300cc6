#include <doctest.h>

#include <set>

#include "mapf/errors.hpp"
#include "mapf/expert.hpp"
#include "mapf/generators.hpp"
#include "mapf/pibt.hpp"
#include "mapf/rng.hpp"
#include "oracles.hpp"

using namespace mapf;

namespace {

std::vector<int> identity_order(int n) {
  std::vector<int> o(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) o[static_cast<std::size_t>(i)] = i;
  return o;
}

}  // namespace

TEST_CASE("pibt_step: single agent walks onto an adjacent goal") {
  const GridMap map = grid_from_text(".....\n");
  const MapfInstance inst{map, {{0, 2}}, {{0, 3}}};
  const auto fields = cost_to_go_all(map, inst.goals);
  const auto actions = pibt_step(initial_state(inst), map, fields, identity_order(1));
  CHECK(actions[0] == Action::Right);
}

TEST_CASE("pibt_step: everyone already home waits") {
  const GridMap map = grid_from_text("...\n...\n");
  const MapfInstance inst{map, {{0, 0}, {1, 2}}, {{0, 0}, {1, 2}}};
  const auto fields = cost_to_go_all(map, inst.goals);
  const auto actions = pibt_step(initial_state(inst), map, fields, identity_order(2));
  CHECK(actions[0] == Action::Wait);
  CHECK(actions[1] == Action::Wait);
}

TEST_CASE("pibt_step: head-on corridor, the lower-priority agent yields into the lacuna") {
  // Corridor row 1 with a pocket at (0,3), ahead of the yielding agent.
  const GridMap map = grid_from_text(
      "###.#\n"
      ".....\n");
  const MapfInstance inst{map, {{1, 1}, {1, 3}}, {{1, 4}, {1, 0}}};
  const auto fields = cost_to_go_all(map, inst.goals);

  // Agent 0 outranks agent 1: it advances every step; 1 yields sideways or
  // waits, and the replay never trips the environment's conflict resolution.
  JointState st = initial_state(inst);
  bool used_pocket = false;
  for (int t = 0; t < 12 && st.positions != inst.goals; ++t) {
    const auto acts = pibt_step(st, map, fields, identity_order(2));
    if (t == 0) CHECK(acts[0] == Action::Right);
    const JointState nxt = step(st, acts, map);
    for (int i = 0; i < 2; ++i) {
      CHECK(nxt.positions[static_cast<std::size_t>(i)] ==
            apply(st.positions[static_cast<std::size_t>(i)], acts[static_cast<std::size_t>(i)]));
    }
    st = nxt;
    used_pocket = used_pocket || st.positions[1] == Cell{0, 3};
  }
  CHECK(st.positions == inst.goals);
  CHECK(used_pocket);
}

TEST_CASE("pibt_step: fuzzed joint actions are conflict-free") {
  Rng rng(2718);
  for (int trial = 0; trial < 40; ++trial) {
    const GridMap map = gen_maze_map({MapFamily::Maze, 9, 9, 0.0, rng.next_u64()});
    MapfInstance inst;
    try {
      inst = sample_instance(map, 6, rng.next_u64());
    } catch (const InstanceInfeasible&) {
      continue;
    }
    const auto fields = cost_to_go_all(map, inst.goals);
    JointState st = initial_state(inst);
    for (int t = 0; t < 15; ++t) {
      auto order = random_permutation(6, rng);
      const auto acts = pibt_step(st, map, fields, order);
      const JointState nxt = step(st, acts, map);
      for (int i = 0; i < 6; ++i) {
        // No agent was reverted: pibt already avoided vertex and edge conflicts.
        CHECK(nxt.positions[static_cast<std::size_t>(i)] ==
              apply(st.positions[static_cast<std::size_t>(i)], acts[static_cast<std::size_t>(i)]));
      }
      st = nxt;
    }
  }
}

TEST_CASE("solve: single agent on an open map is Manhattan-optimal") {
  const GridMap map = grid_from_text(".....\n.....\n.....\n.....\n.....\n");
  const MapfInstance inst{map, {{0, 0}}, {{3, 4}}};
  const ExpertConfig cfg{ExpertAlgorithm::Pibt, 64, 4, 0};
  const SolveResult r = solve(inst, cfg);
  REQUIRE(r.success);
  CHECK(validate(r.plans, inst).ok());
  const auto m = metrics(r.plans, inst, cfg.t_max);
  CHECK(m.soc == 7);
  CHECK(m.success);
}

TEST_CASE("solve: two agents swap across an open room") {
  const GridMap map = grid_from_text("...\n...\n...\n");
  const MapfInstance inst{map, {{1, 0}, {1, 2}}, {{1, 2}, {1, 0}}};
  const SolveResult r = solve(inst, {ExpertAlgorithm::Pibt, 64, 8, 0});
  REQUIRE(r.success);
  CHECK(validate(r.plans, inst).ok());
  CHECK(r.plans[0].back() == inst.goals[0]);
  CHECK(r.plans[1].back() == inst.goals[1]);
}

TEST_CASE("solve: impassable corridor fails with a reason") {
  const GridMap map = grid_from_text("....\n");
  const MapfInstance inst{map, {{0, 0}, {0, 3}}, {{0, 3}, {0, 0}}};
  const SolveResult r = solve(inst, {ExpertAlgorithm::Pibt, 50, 3, 1});
  CHECK_FALSE(r.success);
  CHECK_FALSE(r.reason.empty());
  CHECK(r.attempts == 3);

  const SolveResult rp = solve_prioritized(inst, {ExpertAlgorithm::Prioritized, 50, 3, 1});
  CHECK_FALSE(rp.success);
}

TEST_CASE("solve: unreachable goal reports failure up front") {
  const GridMap map = grid_from_text("..#..\n..#..\n");
  const MapfInstance inst{map, {{0, 0}}, {{0, 4}}};
  const SolveResult r = solve(inst, {ExpertAlgorithm::Pibt, 50, 2, 0});
  CHECK_FALSE(r.success);
  CHECK(r.reason.find("unreachable") != std::string::npos);
  CHECK_FALSE(solve_prioritized(inst, {ExpertAlgorithm::Prioritized, 50, 2, 0}).success);
}

TEST_CASE("solve: config validation") {
  const GridMap map = grid_from_text("..\n");
  const MapfInstance inst{map, {{0, 0}}, {{0, 1}}};
  CHECK_THROWS_AS(solve(inst, {ExpertAlgorithm::Pibt, 0, 1, 0}), InvalidConfig);
  CHECK_THROWS_AS(solve(inst, {ExpertAlgorithm::Pibt, 10, 0, 0}), InvalidConfig);
}

TEST_CASE("solve: maze batch validates, parks everyone, and is deterministic") {
  int pibt_solved = 0, hybrid_solved = 0;
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    const GridMap map = gen_maze_map({MapFamily::Maze, 17, 17, 0.0, seed});
    const MapfInstance inst = sample_instance(map, 8, seed + 100);
    const ExpertConfig cfg{ExpertAlgorithm::Pibt, 128, 16, seed};

    const SolveResult r = solve(inst, cfg);
    if (r.success) {
      ++pibt_solved;
      CHECK(validate(r.plans, inst).ok());
      const SolveResult again = solve(inst, cfg);
      CHECK(again.plans == r.plans);
    }

    const SolveResult h = solve_with_fallback(inst, cfg);
    if (h.success) {
      ++hybrid_solved;
      CHECK(validate(h.plans, inst).ok());
      for (int i = 0; i < 8; ++i) {
        CHECK(h.plans[static_cast<std::size_t>(i)].back() ==
              inst.goals[static_cast<std::size_t>(i)]);
      }
    }
  }
  // Frozen from measurement: plain PIBT clears most corridor mazes, the
  // prioritized fallback picks up the stragglers.
  CHECK(pibt_solved >= 6);
  CHECK(hybrid_solved >= 11);
}

TEST_CASE("solve_prioritized: single agent and parked starts") {
  const GridMap map = grid_from_text(".....\n.....\n.....\n.....\n.....\n");
  const ExpertConfig cfg{ExpertAlgorithm::Prioritized, 64, 4, 0};

  const MapfInstance inst{map, {{0, 0}}, {{3, 4}}};
  const SolveResult r = solve_prioritized(inst, cfg);
  REQUIRE(r.success);
  CHECK(metrics(r.plans, inst, 64).soc == 7);

  const MapfInstance parked{map, {{2, 2}}, {{2, 2}}};
  const SolveResult rp = solve_prioritized(parked, cfg);
  REQUIRE(rp.success);
  CHECK(rp.plans[0] == Plan{{2, 2}});
  CHECK(metrics(rp.plans, parked, 64).soc == 0);
}

TEST_CASE("solve_prioritized: crossing at a junction costs one wait (oracle check)") {
  const GridMap map = grid_from_text(
      "##.##\n"
      "##.##\n"
      ".....\n"
      "##.##\n"
      "##.##\n");
  const MapfInstance inst{map, {{2, 0}, {0, 2}}, {{2, 4}, {4, 2}}};
  const SolveResult r = solve_prioritized(inst, {ExpertAlgorithm::Prioritized, 64, 4, 0});
  REQUIRE(r.success);
  CHECK(validate(r.plans, inst).ok());
  const auto m = metrics(r.plans, inst, 64);
  CHECK(m.soc == oracle::optimal_soc(inst));
  CHECK(m.soc == 9);  // 4 + 4 + one wait at the crossing
}

TEST_CASE("experts stay within 3x of optimal SoC on tiny instances") {
  Rng rng(77);
  int checked = 0;
  while (checked < 50) {
    const GridMap map = gen_random_map({MapFamily::Random, 5, 5, 0.2, rng.next_u64()});
    MapfInstance inst;
    try {
      inst = sample_instance(map, 2, rng.next_u64());
    } catch (const InstanceInfeasible&) {
      continue;
    }
    const std::int64_t opt = oracle::optimal_soc(inst);
    if (opt < 0) continue;  // sampled instance unsolvable under swap rules

    // PIBT alone is incomplete; the bound is only asserted for runs that
    // finished, but the fallback pipeline must always crack a 2-agent 5x5.
    const SolveResult pibt = solve(inst, {ExpertAlgorithm::Pibt, 64, 16, 5});
    const SolveResult prio = solve_prioritized(inst, {ExpertAlgorithm::Prioritized, 64, 16, 5});
    const SolveResult both = solve_with_fallback(inst, {ExpertAlgorithm::Pibt, 64, 16, 5});
    REQUIRE(both.success);
    for (const SolveResult* r : {&pibt, &prio, &both}) {
      if (!r->success) continue;
      const auto m = metrics(r->plans, inst, 64);
      CHECK(m.soc >= opt);
      CHECK(m.soc <= 3 * opt);
    }
    CHECK(prio.success);
    ++checked;
  }
}

TEST_CASE("solve_expert dispatches on the algorithm") {
  const GridMap map = grid_from_text("...\n");
  const MapfInstance inst{map, {{0, 0}}, {{0, 2}}};
  const SolveResult a = solve_expert(inst, {ExpertAlgorithm::Pibt, 16, 2, 0});
  const SolveResult b = solve_expert(inst, {ExpertAlgorithm::Prioritized, 16, 2, 0});
  CHECK(a.success);
  CHECK(b.success);
  CHECK(a.plans == b.plans);
}
