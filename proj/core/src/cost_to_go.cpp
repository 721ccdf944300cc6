#include "mapf/cost_to_go.hpp"

#include <deque>

#include "mapf/errors.hpp"

namespace mapf {

CostToGoField cost_to_go(const GridMap& map, Cell goal) {
  if (!map.is_free(goal)) throw InvalidGoal("cost_to_go: goal is blocked or out of bounds");

  CostToGoField field(map.width(), map.height(), goal);
  field.set(goal, 0);
  std::deque<Cell> frontier{goal};
  while (!frontier.empty()) {
    const Cell c = frontier.front();
    frontier.pop_front();
    const std::int32_t d = field.at(c);
    for (Action a : kMoveActions) {
      const Cell n = apply(c, a);
      if (map.is_free(n) && !field.reachable(n)) {
        field.set(n, d + 1);
        frontier.push_back(n);
      }
    }
  }
  return field;
}

std::vector<CostToGoField> cost_to_go_all(const GridMap& map, const std::vector<Cell>& goals) {
  std::vector<CostToGoField> fields;
  fields.reserve(goals.size());
  for (Cell g : goals) fields.push_back(cost_to_go(map, g));
  return fields;
}

}  // namespace mapf
