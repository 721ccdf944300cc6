#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "mapf/instance.hpp"

namespace mapf {

inline constexpr int kHistoryLength = 5;

// Last kHistoryLength executed actions, oldest first; nullopt where the
// episode is younger than the slot.
using ActionHistory = std::array<std::optional<Action>, kHistoryLength>;

struct JointState {
  std::vector<Cell> positions;
  std::vector<ActionHistory> histories;
  int time = 0;

  int agent_count() const { return static_cast<int>(positions.size()); }
};

JointState initial_state(const MapfInstance& instance);

// Executes one synchronized step. Moves into blocked or out-of-bounds cells
// become Wait. Conflicts are resolved by reverting movers to Wait, iterated
// to a fixed point:
//   - several agents target one cell: the agent already standing there (if it
//     stays) wins, otherwise the lowest index; the rest revert;
//   - two agents swapping along an edge both revert.
// Rotations of three or more agents are legal. Histories shift left and
// record the executed (post-resolution) action. Throws ArityMismatch when
// actions.size() != agent count.
JointState step(const JointState& state, std::span<const Action> actions, const GridMap& map);

// Actions that transform prev into next (cells are identical or adjacent).
std::vector<Action> executed_actions(const JointState& prev, const JointState& next);

}  // namespace mapf
