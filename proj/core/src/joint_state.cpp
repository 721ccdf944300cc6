#include "mapf/joint_state.hpp"

#include <cassert>
#include <unordered_map>

#include "mapf/errors.hpp"

namespace mapf {

JointState initial_state(const MapfInstance& instance) {
  check_instance(instance);
  JointState st;
  st.positions = instance.starts;
  st.histories.assign(instance.starts.size(), ActionHistory{});
  st.time = 0;
  return st;
}

JointState step(const JointState& state, std::span<const Action> actions, const GridMap& map) {
  const int n = state.agent_count();
  if (static_cast<int>(actions.size()) != n) {
    throw ArityMismatch("step: one action per agent required");
  }

  std::vector<Cell> target(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const Cell t = apply(state.positions[static_cast<std::size_t>(i)], actions[static_cast<std::size_t>(i)]);
    target[static_cast<std::size_t>(i)] =
        map.is_free(t) ? t : state.positions[static_cast<std::size_t>(i)];
  }

  // Occupant lookup for swap detection stays valid because positions never
  // change during resolution, only targets do.
  std::unordered_map<Cell, int> occupant;
  for (int i = 0; i < n; ++i) occupant.emplace(state.positions[static_cast<std::size_t>(i)], i);

  auto stays = [&](int i) {
    return target[static_cast<std::size_t>(i)] == state.positions[static_cast<std::size_t>(i)];
  };

  bool changed = true;
  while (changed) {
    changed = false;

    // Vertex conflicts: per contested cell keep the current winner, revert others.
    std::unordered_map<Cell, int> claim;
    claim.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      auto [it, fresh] = claim.try_emplace(target[static_cast<std::size_t>(i)], i);
      if (fresh) continue;
      const int j = it->second;
      // An agent staying on the contested cell cannot yield; otherwise the
      // lower index (j, inserted earlier) keeps the cell.
      if (stays(i)) {
        target[static_cast<std::size_t>(j)] = state.positions[static_cast<std::size_t>(j)];
        it->second = i;
      } else {
        target[static_cast<std::size_t>(i)] = state.positions[static_cast<std::size_t>(i)];
      }
      changed = true;
    }

    // Swaps: both parties revert.
    for (int i = 0; i < n; ++i) {
      if (stays(i)) continue;
      const auto it = occupant.find(target[static_cast<std::size_t>(i)]);
      if (it == occupant.end()) continue;
      const int j = it->second;
      if (j != i && target[static_cast<std::size_t>(j)] == state.positions[static_cast<std::size_t>(i)] &&
          !stays(j)) {
        target[static_cast<std::size_t>(i)] = state.positions[static_cast<std::size_t>(i)];
        target[static_cast<std::size_t>(j)] = state.positions[static_cast<std::size_t>(j)];
        changed = true;
      }
    }
  }

  JointState next;
  next.positions = std::move(target);
  next.histories = state.histories;
  next.time = state.time + 1;
  for (int i = 0; i < n; ++i) {
    auto& h = next.histories[static_cast<std::size_t>(i)];
    for (int k = 0; k + 1 < kHistoryLength; ++k) h[static_cast<std::size_t>(k)] = h[static_cast<std::size_t>(k) + 1];
    const auto executed =
        action_between(state.positions[static_cast<std::size_t>(i)], next.positions[static_cast<std::size_t>(i)]);
    assert(executed.has_value());
    h[kHistoryLength - 1] = *executed;
  }
  return next;
}

std::vector<Action> executed_actions(const JointState& prev, const JointState& next) {
  assert(prev.agent_count() == next.agent_count());
  std::vector<Action> out;
  out.reserve(prev.positions.size());
  for (std::size_t i = 0; i < prev.positions.size(); ++i) {
    const auto a = action_between(prev.positions[i], next.positions[i]);
    assert(a.has_value());
    out.push_back(*a);
  }
  return out;
}

}  // namespace mapf
