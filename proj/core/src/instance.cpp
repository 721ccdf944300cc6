#include "mapf/instance.hpp"

#include <string>
#include <unordered_set>

#include "mapf/errors.hpp"

namespace mapf {

void check_instance(const MapfInstance& instance) {
  if (instance.starts.size() != instance.goals.size()) {
    throw ArityMismatch("instance: starts and goals differ in length");
  }
  if (instance.starts.empty()) throw ArityMismatch("instance: no agents");

  std::unordered_set<Cell> seen_starts, seen_goals;
  for (std::size_t i = 0; i < instance.starts.size(); ++i) {
    const Cell s = instance.starts[i];
    const Cell g = instance.goals[i];
    if (!instance.map.is_free(s)) {
      throw InvalidGoal("instance: start of agent " + std::to_string(i) + " is not a free cell");
    }
    if (!instance.map.is_free(g)) {
      throw InvalidGoal("instance: goal of agent " + std::to_string(i) + " is not a free cell");
    }
    if (!seen_starts.insert(s).second) {
      throw InvalidGoal("instance: duplicate start at agent " + std::to_string(i));
    }
    if (!seen_goals.insert(g).second) {
      throw InvalidGoal("instance: duplicate goal at agent " + std::to_string(i));
    }
  }
}

}  // namespace mapf
