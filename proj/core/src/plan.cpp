#include "mapf/plan.hpp"

#include <algorithm>
#include <unordered_map>

namespace mapf {

int plan_horizon(const PlanSet& plans) {
  std::size_t longest = 1;
  for (const Plan& p : plans) longest = std::max(longest, p.size());
  return static_cast<int>(longest) - 1;
}

void pad_plans(PlanSet& plans) {
  const std::size_t len = static_cast<std::size_t>(plan_horizon(plans)) + 1;
  for (Plan& p : plans) {
    if (!p.empty()) p.resize(len, p.back());
  }
}

std::string ValidationResult::describe() const {
  auto at = [this](const char* what) {
    std::string s = what;
    s += " (agent " + std::to_string(agent);
    if (other >= 0) s += " and " + std::to_string(other);
    if (time >= 0) s += " at t=" + std::to_string(time);
    return s + ")";
  };
  switch (violation) {
    case Violation::None:           return "ok";
    case Violation::WrongArity:     return "plan count does not match agent count";
    case Violation::EmptyPlan:      return at("empty plan");
    case Violation::WrongStart:     return at("plan does not begin at the agent's start");
    case Violation::IllegalStep:    return at("cells not adjacent");
    case Violation::BlockedCell:    return at("blocked or out-of-bounds cell");
    case Violation::VertexConflict: return at("vertex conflict");
    case Violation::EdgeConflict:   return at("edge conflict");
  }
  return "?";
}

ValidationResult validate(const PlanSet& plans, const MapfInstance& instance) {
  const int n = instance.agent_count();
  if (static_cast<int>(plans.size()) != n) return {Violation::WrongArity};

  for (int i = 0; i < n; ++i) {
    const Plan& p = plans[static_cast<std::size_t>(i)];
    if (p.empty()) return {Violation::EmptyPlan, i};
    if (p.front() != instance.starts[static_cast<std::size_t>(i)]) {
      return {Violation::WrongStart, i, -1, 0};
    }
    for (std::size_t t = 0; t < p.size(); ++t) {
      if (!instance.map.is_free(p[t])) {
        return {Violation::BlockedCell, i, -1, static_cast<int>(t)};
      }
      if (t + 1 < p.size() && !action_between(p[t], p[t + 1]).has_value()) {
        return {Violation::IllegalStep, i, -1, static_cast<int>(t + 1)};
      }
    }
  }

  // Stay-at-target: index past the end of a plan means its final cell.
  auto cell_at = [&](int i, int t) {
    const Plan& p = plans[static_cast<std::size_t>(i)];
    return t < static_cast<int>(p.size()) ? p[static_cast<std::size_t>(t)] : p.back();
  };

  const int horizon = plan_horizon(plans);
  std::unordered_map<Cell, int> occupied;
  for (int t = 0; t <= horizon; ++t) {
    occupied.clear();
    for (int i = 0; i < n; ++i) {
      const auto [it, fresh] = occupied.try_emplace(cell_at(i, t), i);
      if (!fresh) return {Violation::VertexConflict, it->second, i, t};
    }
    if (t == 0) continue;
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        if (cell_at(i, t) == cell_at(j, t - 1) && cell_at(j, t) == cell_at(i, t - 1) &&
            cell_at(i, t) != cell_at(i, t - 1)) {
          return {Violation::EdgeConflict, i, j, t};
        }
      }
    }
  }
  return {};
}

SolutionMetrics metrics(const PlanSet& plans, const MapfInstance& instance, int t_max) {
  SolutionMetrics m;
  m.success = true;
  for (int i = 0; i < instance.agent_count(); ++i) {
    const Plan& p = plans[static_cast<std::size_t>(i)];
    const Cell goal = instance.goals[static_cast<std::size_t>(i)];
    int cost;
    if (p.empty() || p.back() != goal) {
      cost = t_max;
      m.success = false;
    } else {
      cost = 0;
      for (std::size_t t = 0; t < p.size(); ++t) {
        if (p[t] != goal) cost = static_cast<int>(t) + 1;
      }
      if (cost > t_max) m.success = false;
    }
    m.soc += cost;
    m.makespan = std::max(m.makespan, cost);
  }
  return m;
}

}  // namespace mapf
