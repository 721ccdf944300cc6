#pragma once

// Reference implementations used only to cross-check the library. They are
// deliberately written with different algorithms than the production code.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <queue>
#include <vector>

#include "mapf/grid.hpp"
#include "mapf/instance.hpp"

namespace oracle {

inline constexpr std::int64_t kInf = std::numeric_limits<std::int64_t>::max() / 4;

// Single-source shortest path by naive relaxation to a fixpoint (no queue,
// no visit order assumptions). Distances from `goal` to every free cell.
inline std::vector<std::int64_t> relaxation_distances(const mapf::GridMap& map, mapf::Cell goal) {
  std::vector<std::int64_t> dist(map.cell_count(), kInf);
  dist[map.index(goal)] = 0;
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t i = 0; i < map.cell_count(); ++i) {
      const mapf::Cell c = map.cell_at(i);
      if (!map.is_free(c)) continue;
      for (mapf::Action a : mapf::kMoveActions) {
        const mapf::Cell n = mapf::apply(c, a);
        if (!map.is_free(n)) continue;
        const std::int64_t cand = dist[map.index(n)] == kInf ? kInf : dist[map.index(n)] + 1;
        if (cand < dist[i]) {
          dist[i] = cand;
          changed = true;
        }
      }
    }
  }
  return dist;
}

// Exact optimal sum-of-costs for 1-2 agents on tiny maps, by A* over the
// joint state (positions, per-agent goal streaks). Staying on the goal is
// free until the agent leaves, at which point the banked steps are charged;
// popping a terminal state therefore yields the true stay-at-target SoC.
// Streaks are capped; on maps this small an optimal plan never parks longer.
inline std::int64_t optimal_soc(const mapf::MapfInstance& inst) {
  using mapf::Action;
  using mapf::Cell;
  const auto& map = inst.map;
  const int n = inst.agent_count();
  const int cells = static_cast<int>(map.cell_count());
  constexpr int kStreakCap = 16;

  std::vector<std::vector<std::int64_t>> dist;
  for (const Cell g : inst.goals) dist.push_back(relaxation_distances(map, g));

  auto heuristic = [&](const std::vector<Cell>& pos) {
    std::int64_t h = 0;
    for (int i = 0; i < n; ++i) h += dist[static_cast<std::size_t>(i)][map.index(pos[static_cast<std::size_t>(i)])];
    return h;
  };

  auto encode = [&](const std::vector<Cell>& pos, const std::vector<int>& streak) {
    std::uint64_t key = 0;
    for (int i = 0; i < n; ++i) {
      key = key * static_cast<std::uint64_t>(cells) + map.index(pos[static_cast<std::size_t>(i)]);
      key = key * (kStreakCap + 1) + static_cast<std::uint64_t>(streak[static_cast<std::size_t>(i)]);
    }
    return key;
  };

  struct Node {
    std::int64_t f, g;
    std::vector<Cell> pos;
    std::vector<int> streak;
    bool operator<(const Node& o) const { return f != o.f ? f > o.f : g < o.g; }
  };

  std::priority_queue<Node> open;
  std::map<std::uint64_t, std::int64_t> best;
  const std::vector<int> zero(static_cast<std::size_t>(n), 0);
  open.push({heuristic(inst.starts), 0, inst.starts, zero});
  best[encode(inst.starts, zero)] = 0;

  while (!open.empty()) {
    const Node cur = open.top();
    open.pop();
    if (cur.g > best[encode(cur.pos, cur.streak)]) continue;
    if (cur.pos == inst.goals) return cur.g;

    const int joint = n == 1 ? 5 : 25;
    for (int code = 0; code < joint; ++code) {
      std::vector<Cell> np(static_cast<std::size_t>(n));
      bool legal = true;
      int c = code;
      for (int i = 0; i < n && legal; ++i, c /= 5) {
        np[static_cast<std::size_t>(i)] = mapf::apply(cur.pos[static_cast<std::size_t>(i)],
                                                      static_cast<Action>(c % 5));
        legal = map.is_free(np[static_cast<std::size_t>(i)]);
      }
      if (!legal) continue;
      if (n == 2) {
        if (np[0] == np[1]) continue;  // vertex
        if (np[0] == cur.pos[1] && np[1] == cur.pos[0]) continue;  // swap
      }

      std::int64_t charge = 0;
      std::vector<int> ns(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) {
        const bool was = cur.pos[static_cast<std::size_t>(i)] == inst.goals[static_cast<std::size_t>(i)];
        const bool now = np[static_cast<std::size_t>(i)] == inst.goals[static_cast<std::size_t>(i)];
        const int s = cur.streak[static_cast<std::size_t>(i)];
        if (now) {
          charge += was ? 0 : 1;
          ns[static_cast<std::size_t>(i)] = was ? std::min(s + 1, kStreakCap) : 0;
        } else {
          charge += 1 + (was ? s : 0);
          ns[static_cast<std::size_t>(i)] = 0;
        }
      }

      const std::int64_t ng = cur.g + charge;
      const std::uint64_t key = encode(np, ns);
      const auto it = best.find(key);
      if (it != best.end() && it->second <= ng) continue;
      best[key] = ng;
      open.push({ng + heuristic(np), ng, np, ns});
    }
  }
  return -1;  // unsolvable
}

}  // namespace oracle
