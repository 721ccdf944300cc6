#pragma once

#include <cstdint>
#include <vector>

#include "mapf/grid.hpp"

namespace mapf {

// Shortest-path distance from every cell to one goal, 4-connected, unit step
// cost. Cells the goal cannot reach (and blocked cells) are unreachable.
class CostToGoField {
 public:
  CostToGoField() = default;
  CostToGoField(int width, int height, Cell goal)
      : width_(width), goal_(goal),
        dist_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), kUnreachable) {}

  Cell goal() const { return goal_; }
  bool reachable(Cell c) const { return at(c) != kUnreachable; }

  // Distance in steps; kUnreachable (< 0) when no path exists.
  std::int32_t at(Cell c) const {
    return dist_[static_cast<std::size_t>(c.row) * static_cast<std::size_t>(width_) +
                 static_cast<std::size_t>(c.col)];
  }

  void set(Cell c, std::int32_t d) {
    dist_[static_cast<std::size_t>(c.row) * static_cast<std::size_t>(width_) +
          static_cast<std::size_t>(c.col)] = d;
  }

  static constexpr std::int32_t kUnreachable = -1;

 private:
  int width_ = 0;
  Cell goal_{};
  std::vector<std::int32_t> dist_;
};

// BFS from the goal. Throws InvalidGoal if the goal is blocked or outside.
CostToGoField cost_to_go(const GridMap& map, Cell goal);

// Convenience: one field per goal.
std::vector<CostToGoField> cost_to_go_all(const GridMap& map, const std::vector<Cell>& goals);

}  // namespace mapf
