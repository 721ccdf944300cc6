#pragma once

#include <cstdint>
#include <vector>

#include "mapf/instance.hpp"

namespace mapf {

enum class MapFamily { Random, Maze };

struct GeneratorConfig {
  MapFamily family = MapFamily::Random;
  int width = 17;
  int height = 17;
  double obstacle_density = 0.3;  // random maps only
  std::uint64_t seed = 0;
};

// Each cell blocked independently with probability obstacle_density.
GridMap gen_random_map(const GeneratorConfig& cfg);

// Recursive-backtracker maze over a lattice of rooms at even coordinates,
// corridor width 1, then 10% of the remaining separating walls are knocked
// out to create loops. Free cells always form one connected component.
GridMap gen_maze_map(const GeneratorConfig& cfg);

GridMap gen_map(const GeneratorConfig& cfg);

// Connected components of the free-cell graph, largest first (ties broken by
// smallest cell). Each component is sorted row-major.
std::vector<std::vector<Cell>> free_components(const GridMap& map);

// Starts and goals drawn without replacement from the largest free component;
// goal_i != start_i for every agent. Throws InstanceInfeasible when no
// component holds enough cells.
MapfInstance sample_instance(const GridMap& map, int n_agents, std::uint64_t seed);

}  // namespace mapf
