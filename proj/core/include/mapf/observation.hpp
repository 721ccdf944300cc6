#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "mapf/cost_to_go.hpp"
#include "mapf/joint_state.hpp"

namespace mapf {

inline constexpr int kFovRadius = 5;
inline constexpr int kFovSize = 2 * kFovRadius + 1;          // 11
inline constexpr int kCostmapCells = kFovSize * kFovSize;    // 121
inline constexpr int kMaxVisibleAgents = 13;                 // ego included
inline constexpr int kCoordClip = 20;

// One costmap cell: either a cost-to-go value relative to the ego cell, or
// blocked (obstacle, outside the map, or unreachable from the ego's goal).
struct CostmapEntry {
  bool blocked = true;
  std::int32_t value = 0;  // field(cell) − field(ego), meaningful when !blocked
};

// Bitmask over move directions, bit i set when Action(i) strictly decreases
// the agent's cost-to-go. Empty at the goal.
using GreedyMask = std::uint8_t;

struct AgentBlock {
  int agent = -1;
  // Deltas to ego, clamped to ±(kCoordClip+1); the extreme value means the
  // true delta lies beyond the representable ±kCoordClip range.
  std::array<int, 2> rel_pos{};
  std::array<int, 2> rel_goal{};
  ActionHistory history{};
  GreedyMask greedy = 0;
};

struct Observation {
  int ego = -1;
  std::array<CostmapEntry, kCostmapCells> costmap{};  // row-major 11×11 window
  std::vector<AgentBlock> agents;                     // ego first, ≤ kMaxVisibleAgents
};

GreedyMask greedy_mask(const GridMap& map, const CostToGoField& field, Cell at);

// Egocentric view for one agent: relative costmap over the 11×11 window and
// blocks for the visible agents, ego first, the rest ordered by Manhattan
// distance (ties by agent index) and truncated at kMaxVisibleAgents.
Observation observe(const JointState& state, const MapfInstance& instance,
                    std::span<const CostToGoField> fields, int ego);

}  // namespace mapf
