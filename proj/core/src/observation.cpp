#include "mapf/observation.hpp"

#include <algorithm>
#include <cstdlib>

#include "mapf/errors.hpp"

namespace mapf {

namespace {

// One past the clip bound marks "beyond range" so downstream encoding can
// tell a delta of exactly ±kCoordClip from an overflow.
int saturate(int v) { return std::clamp(v, -kCoordClip - 1, kCoordClip + 1); }

}  // namespace

GreedyMask greedy_mask(const GridMap& map, const CostToGoField& field, Cell at) {
  if (!field.reachable(at)) return 0;
  const std::int32_t here = field.at(at);
  GreedyMask mask = 0;
  for (Action a : kMoveActions) {
    const Cell n = apply(at, a);
    if (map.is_free(n) && field.reachable(n) && field.at(n) < here) {
      mask |= static_cast<GreedyMask>(1u << static_cast<unsigned>(a));
    }
  }
  return mask;
}

Observation observe(const JointState& state, const MapfInstance& instance,
                    std::span<const CostToGoField> fields, int ego) {
  const int n = state.agent_count();
  if (static_cast<int>(fields.size()) != n) {
    throw ArityMismatch("observe: one cost-to-go field per agent required");
  }
  if (ego < 0 || ego >= n) throw InvalidConfig("observe: ego index out of range");

  const GridMap& map = instance.map;
  const Cell center = state.positions[static_cast<std::size_t>(ego)];
  const CostToGoField& ego_field = fields[static_cast<std::size_t>(ego)];
  const bool ego_reachable = ego_field.reachable(center);
  const std::int32_t ego_cost = ego_reachable ? ego_field.at(center) : 0;

  Observation obs;
  obs.ego = ego;

  int k = 0;
  for (int dr = -kFovRadius; dr <= kFovRadius; ++dr) {
    for (int dc = -kFovRadius; dc <= kFovRadius; ++dc, ++k) {
      const Cell c{center.row + dr, center.col + dc};
      auto& entry = obs.costmap[static_cast<std::size_t>(k)];
      if (map.is_free(c) && ego_reachable && ego_field.reachable(c)) {
        entry.blocked = false;
        entry.value = ego_field.at(c) - ego_cost;
      }  // else stays blocked
    }
  }

  std::vector<int> visible;
  for (int j = 0; j < n; ++j) {
    if (j == ego) continue;
    const Cell p = state.positions[static_cast<std::size_t>(j)];
    if (std::abs(p.row - center.row) <= kFovRadius && std::abs(p.col - center.col) <= kFovRadius) {
      visible.push_back(j);
    }
  }
  std::sort(visible.begin(), visible.end(), [&](int a, int b) {
    const Cell pa = state.positions[static_cast<std::size_t>(a)];
    const Cell pb = state.positions[static_cast<std::size_t>(b)];
    const int da = std::abs(pa.row - center.row) + std::abs(pa.col - center.col);
    const int db = std::abs(pb.row - center.row) + std::abs(pb.col - center.col);
    return da != db ? da < db : a < b;
  });
  if (static_cast<int>(visible.size()) > kMaxVisibleAgents - 1) {
    visible.resize(kMaxVisibleAgents - 1);
  }
  visible.insert(visible.begin(), ego);

  for (int j : visible) {
    const Cell p = state.positions[static_cast<std::size_t>(j)];
    // The field's goal is the agent's current goal; instance.goals may lag
    // behind it in lifelong runs.
    const Cell g = fields[static_cast<std::size_t>(j)].goal();
    AgentBlock block;
    block.agent = j;
    block.rel_pos = {saturate(p.row - center.row), saturate(p.col - center.col)};
    block.rel_goal = {saturate(g.row - center.row), saturate(g.col - center.col)};
    block.history = state.histories[static_cast<std::size_t>(j)];
    block.greedy = greedy_mask(map, fields[static_cast<std::size_t>(j)], p);
    obs.agents.push_back(block);
  }
  return obs;
}

}  // namespace mapf
