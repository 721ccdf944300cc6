#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mapf/instance.hpp"

namespace mapf {

// Sequence of cells an agent occupies, element 0 being its start. A plan that
// is shorter than the joint horizon implicitly stays at its final cell.
using Plan = std::vector<Cell>;
using PlanSet = std::vector<Plan>;

// Longest plan length minus one, i.e. number of time steps.
int plan_horizon(const PlanSet& plans);

// Repeat each final cell so all plans share the same length.
void pad_plans(PlanSet& plans);

enum class Violation {
  None,
  WrongArity,     // plan count != agent count
  EmptyPlan,
  WrongStart,
  IllegalStep,    // consecutive cells not identical or 4-adjacent
  BlockedCell,    // enters a blocked or out-of-bounds cell
  VertexConflict,
  EdgeConflict,
};

struct ValidationResult {
  Violation violation = Violation::None;
  int agent = -1;
  int other = -1;  // second agent for conflicts
  int time = -1;

  bool ok() const { return violation == Violation::None; }
  explicit operator bool() const { return ok(); }
  std::string describe() const;
};

// Physical legality only: starts, step shapes, blocked cells, vertex and edge
// conflicts under stay-at-target semantics. Reaching goals is judged by
// metrics, not here.
ValidationResult validate(const PlanSet& plans, const MapfInstance& instance);

struct SolutionMetrics {
  std::int64_t soc = 0;
  int makespan = 0;
  bool success = false;
};

// cost(i) is the earliest time after which agent i sits on its goal forever
// (0 if it never leaves the goal). Agents that do not end on their goal, or
// arrive after t_max, cost t_max and fail the run.
SolutionMetrics metrics(const PlanSet& plans, const MapfInstance& instance, int t_max);

}  // namespace mapf
