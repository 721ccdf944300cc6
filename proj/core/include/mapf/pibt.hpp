#pragma once

#include <span>
#include <vector>

#include "mapf/cost_to_go.hpp"
#include "mapf/joint_state.hpp"

namespace mapf {

// One step of priority inheritance with backtracking. `order` lists agent ids
// from highest to lowest priority. Each agent takes the candidate (4 moves +
// wait, sorted by its cost-to-go, ties by action id) that is not reserved,
// recursively pushing the current occupant; swaps with the pusher are
// excluded, so the returned joint action is vertex- and edge-conflict-free.
std::vector<Action> pibt_step(const JointState& state, const GridMap& map,
                              std::span<const CostToGoField> fields, std::span<const int> order);

}  // namespace mapf
