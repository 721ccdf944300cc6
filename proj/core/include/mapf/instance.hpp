#pragma once

#include <vector>

#include "mapf/grid.hpp"

namespace mapf {

// One MAPF problem: a map plus per-agent start and goal cells. Starts are
// pairwise distinct and so are goals; a goal may coincide with another
// agent's start. Plain aggregate; call check_instance before trusting one
// that came from outside the generators.
struct MapfInstance {
  GridMap map;
  std::vector<Cell> starts;
  std::vector<Cell> goals;

  int agent_count() const { return static_cast<int>(starts.size()); }
};

// Throws ArityMismatch / InvalidGoal if the invariants above do not hold.
void check_instance(const MapfInstance& instance);

}  // namespace mapf
