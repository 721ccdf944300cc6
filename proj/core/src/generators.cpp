#include "mapf/generators.hpp"

#include <algorithm>
#include <string>

#include "mapf/errors.hpp"
#include "mapf/rng.hpp"

namespace mapf {

GridMap gen_random_map(const GeneratorConfig& cfg) {
  if (cfg.obstacle_density < 0.0 || cfg.obstacle_density > 1.0) {
    throw InvalidConfig("gen_random_map: obstacle_density must lie in [0,1]");
  }
  GridMap map(cfg.width, cfg.height);
  Rng rng(cfg.seed);
  for (int r = 0; r < cfg.height; ++r) {
    for (int c = 0; c < cfg.width; ++c) {
      if (rng.bernoulli(cfg.obstacle_density)) map.set_blocked({r, c}, true);
    }
  }
  return map;
}

GridMap gen_maze_map(const GeneratorConfig& cfg) {
  if (cfg.width < 5 || cfg.height < 5) {
    throw InvalidConfig("gen_maze_map: needs at least 5x5");
  }
  // Rooms sit at even coordinates; odd cells are walls that may be carved.
  const int lat_w = (cfg.width + 1) / 2;
  const int lat_h = (cfg.height + 1) / 2;

  GridMap map(cfg.width, cfg.height);
  for (int r = 0; r < cfg.height; ++r) {
    for (int c = 0; c < cfg.width; ++c) {
      if (r % 2 != 0 || c % 2 != 0) map.set_blocked({r, c}, true);
    }
  }

  Rng rng(cfg.seed);
  std::vector<std::uint8_t> visited(static_cast<std::size_t>(lat_w) * static_cast<std::size_t>(lat_h), 0);
  auto lat_index = [&](int lr, int lc) {
    return static_cast<std::size_t>(lr) * static_cast<std::size_t>(lat_w) + static_cast<std::size_t>(lc);
  };

  std::vector<std::pair<int, int>> stack{{0, 0}};
  visited[lat_index(0, 0)] = 1;
  while (!stack.empty()) {
    const auto [lr, lc] = stack.back();
    std::array<Action, 4> dirs = kMoveActions;
    // Fisher-Yates over the four directions.
    for (int i = 3; i > 0; --i) {
      std::swap(dirs[static_cast<std::size_t>(i)], dirs[rng.below(static_cast<std::uint64_t>(i) + 1)]);
    }
    bool advanced = false;
    for (Action a : dirs) {
      const Cell d = delta(a);
      const int nr = lr + d.row, nc = lc + d.col;
      if (nr < 0 || nr >= lat_h || nc < 0 || nc >= lat_w || visited[lat_index(nr, nc)]) continue;
      visited[lat_index(nr, nc)] = 1;
      // Carve the wall between the two rooms.
      map.set_blocked({lr * 2 + d.row, lc * 2 + d.col}, false);
      stack.emplace_back(nr, nc);
      advanced = true;
      break;
    }
    if (!advanced) stack.pop_back();
  }

  // Knock out 10% of the walls that still separate two adjacent rooms.
  for (int r = 0; r < cfg.height; ++r) {
    for (int c = 0; c < cfg.width; ++c) {
      const bool separator = (r % 2 == 0) != (c % 2 == 0);
      if (!separator || !map.is_blocked({r, c})) continue;
      const bool interior = (r % 2 == 1) ? (r + 1 < cfg.height) : (c + 1 < cfg.width);
      if (!interior) continue;  // wall on the ragged edge of an even-sized map
      if (rng.bernoulli(0.1)) map.set_blocked({r, c}, false);
    }
  }
  return map;
}

GridMap gen_map(const GeneratorConfig& cfg) {
  return cfg.family == MapFamily::Maze ? gen_maze_map(cfg) : gen_random_map(cfg);
}

std::vector<std::vector<Cell>> free_components(const GridMap& map) {
  std::vector<std::uint8_t> seen(map.cell_count(), 0);
  std::vector<std::vector<Cell>> components;
  for (std::size_t i = 0; i < map.cell_count(); ++i) {
    const Cell root = map.cell_at(i);
    if (seen[i] || !map.is_free(root)) continue;
    std::vector<Cell> comp{root};
    seen[i] = 1;
    for (std::size_t head = 0; head < comp.size(); ++head) {
      for (Action a : kMoveActions) {
        const Cell n = apply(comp[head], a);
        if (map.is_free(n) && !seen[map.index(n)]) {
          seen[map.index(n)] = 1;
          comp.push_back(n);
        }
      }
    }
    std::sort(comp.begin(), comp.end());
    components.push_back(std::move(comp));
  }
  std::stable_sort(components.begin(), components.end(), [](const auto& a, const auto& b) {
    return a.size() != b.size() ? a.size() > b.size() : a.front() < b.front();
  });
  return components;
}

MapfInstance sample_instance(const GridMap& map, int n_agents, std::uint64_t seed) {
  if (n_agents < 1) throw InvalidConfig("sample_instance: need at least one agent");
  const auto components = free_components(map);
  if (components.empty() || static_cast<int>(components.front().size()) < n_agents) {
    throw InstanceInfeasible("sample_instance: largest free component has fewer than " +
                             std::to_string(n_agents) + " cells");
  }
  const auto& comp = components.front();

  Rng rng(seed);
  std::vector<Cell> pool = comp;
  rng.shuffle(pool);
  const std::vector<Cell> starts(pool.begin(), pool.begin() + n_agents);

  // Goals: a fresh shuffle per attempt until no agent's goal lands on its own
  // start. Distinctness comes free from sampling without replacement.
  for (int attempt = 0; attempt < 256; ++attempt) {
    pool = comp;
    rng.shuffle(pool);
    bool ok = true;
    for (int i = 0; i < n_agents; ++i) {
      if (pool[static_cast<std::size_t>(i)] == starts[static_cast<std::size_t>(i)]) {
        ok = false;
        break;
      }
    }
    if (ok) {
      return MapfInstance{map, starts,
                          std::vector<Cell>(pool.begin(), pool.begin() + n_agents)};
    }
  }
  throw InstanceInfeasible("sample_instance: could not place distinct goals");
}

}  // namespace mapf
