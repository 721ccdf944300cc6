#include "mapf/expert.hpp"

#include <algorithm>
#include <cassert>
#include <numeric>
#include <queue>
#include <unordered_map>
#include <unordered_set>

#include "mapf/cost_to_go.hpp"
#include "mapf/errors.hpp"
#include "mapf/pibt.hpp"
#include "mapf/rng.hpp"

namespace mapf {

namespace {

void check_solver_config(const ExpertConfig& cfg) {
  if (cfg.t_max < 1) throw InvalidConfig("expert: t_max must be >= 1");
  if (cfg.restarts < 1) throw InvalidConfig("expert: restarts must be >= 1");
}

bool all_at_goals(const std::vector<Cell>& positions, const std::vector<Cell>& goals) {
  return positions == goals;
}

}  // namespace

SolveResult solve(const MapfInstance& instance, const ExpertConfig& cfg) {
  check_solver_config(cfg);
  check_instance(instance);
  const int n = instance.agent_count();
  const auto fields = cost_to_go_all(instance.map, instance.goals);
  for (int i = 0; i < n; ++i) {
    if (!fields[static_cast<std::size_t>(i)].reachable(instance.starts[static_cast<std::size_t>(i)])) {
      return {false, {}, "goal of agent " + std::to_string(i) + " unreachable from its start", 0};
    }
  }

  Rng rng(cfg.seed);
  SolveResult result;
  for (int attempt = 1; attempt <= cfg.restarts; ++attempt) {
    result.attempts = attempt;
    const std::vector<int> base = random_permutation(n, rng);
    std::vector<int> base_rank(static_cast<std::size_t>(n));
    for (int r = 0; r < n; ++r) base_rank[static_cast<std::size_t>(base[static_cast<std::size_t>(r)])] = r;

    JointState st = initial_state(instance);
    std::vector<int> stuck(static_cast<std::size_t>(n), 0);
    PlanSet plans(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) plans[static_cast<std::size_t>(i)].push_back(st.positions[static_cast<std::size_t>(i)]);

    std::vector<int> order(static_cast<std::size_t>(n));
    for (int t = 0; t < cfg.t_max && !all_at_goals(st.positions, instance.goals); ++t) {
      for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
      std::sort(order.begin(), order.end(), [&](int a, int b) {
        const int sa = stuck[static_cast<std::size_t>(a)], sb = stuck[static_cast<std::size_t>(b)];
        return sa != sb ? sa > sb : base_rank[static_cast<std::size_t>(a)] < base_rank[static_cast<std::size_t>(b)];
      });

      const auto actions = pibt_step(st, instance.map, fields, order);
      st = step(st, actions, instance.map);
      for (int i = 0; i < n; ++i) {
        // Waiting time since the agent last sat on its goal; parked agents
        // drop to the bottom of the order, starved ones rise until they can
        // push through.
        const bool home =
            st.positions[static_cast<std::size_t>(i)] == instance.goals[static_cast<std::size_t>(i)];
        stuck[static_cast<std::size_t>(i)] = home ? 0 : stuck[static_cast<std::size_t>(i)] + 1;
        plans[static_cast<std::size_t>(i)].push_back(st.positions[static_cast<std::size_t>(i)]);
      }
    }

    if (all_at_goals(st.positions, instance.goals)) {
      pad_plans(plans);
      result.success = true;
      result.plans = std::move(plans);
      return result;
    }
  }
  result.reason = "no rollout parked all agents within t_max across " +
                  std::to_string(cfg.restarts) + " restarts";
  return result;
}

namespace {

// Reservation table from already-planned trajectories. Times are plan
// indices; an agent occupies plan.back() for every time past its end.
struct Reservations {
  std::unordered_map<Cell, std::vector<int>> vertex;  // sorted times per cell
  std::unordered_map<Cell, int> parked;               // cell -> arrival time
  // Edge keyed by (from, to) at arrival time.
  struct EdgeKey {
    Cell from, to;
    int t;
    friend bool operator==(const EdgeKey&, const EdgeKey&) = default;
  };
  struct EdgeKeyHash {
    std::size_t operator()(const EdgeKey& k) const {
      std::size_t h = std::hash<Cell>()(k.from);
      h = h * 1000003u ^ std::hash<Cell>()(k.to);
      return h * 1000003u ^ static_cast<std::size_t>(k.t);
    }
  };
  std::unordered_set<EdgeKey, EdgeKeyHash> edges;

  void add_plan(const Plan& plan) {
    for (std::size_t t = 0; t < plan.size(); ++t) {
      // Insert in order: times from different plans interleave, and
      // vertex_free binary-searches this vector.
      auto& times = vertex[plan[t]];
      const int ti = static_cast<int>(t);
      times.insert(std::upper_bound(times.begin(), times.end(), ti), ti);
      if (t > 0 && plan[t] != plan[t - 1]) {
        edges.insert({plan[t - 1], plan[t], static_cast<int>(t)});
      }
    }
    const auto [it, fresh] = parked.try_emplace(plan.back(), static_cast<int>(plan.size()) - 1);
    if (!fresh) it->second = std::min(it->second, static_cast<int>(plan.size()) - 1);
  }

  bool vertex_free(Cell c, int t) const {
    const auto p = parked.find(c);
    if (p != parked.end() && t >= p->second) return false;
    const auto v = vertex.find(c);
    if (v == vertex.end()) return true;
    return !std::binary_search(v->second.begin(), v->second.end(), t);
  }

  bool edge_free(Cell from, Cell to, int t) const {
    return !edges.count({to, from, t});  // someone else traversing the reverse edge
  }

  // Latest time any reservation touches the cell (for parking there).
  int last_activity(Cell c) const {
    if (parked.count(c)) return std::numeric_limits<int>::max();
    const auto v = vertex.find(c);
    return v == vertex.end() || v->second.empty() ? -1 : v->second.back();
  }
};

// Time-expanded A* for one agent. Returns an empty plan when unroutable.
Plan plan_single(const MapfInstance& instance, const CostToGoField& field, Cell start, Cell goal,
                 int t_max, const Reservations& res) {
  if (!field.reachable(start)) return {};
  const GridMap& map = instance.map;
  const int width = map.width();
  const int cells = static_cast<int>(map.cell_count());
  const int park_after = res.last_activity(goal);
  if (park_after == std::numeric_limits<int>::max()) return {};  // goal permanently taken

  auto node_id = [&](Cell c, int t) {
    return static_cast<std::size_t>(t) * static_cast<std::size_t>(cells) +
           static_cast<std::size_t>(c.row * width + c.col);
  };

  struct QEntry {
    int f, t;
    Cell cell;
    // Deterministic total order: best f first, deeper t first, then cell.
    bool operator<(const QEntry& o) const {
      if (f != o.f) return f > o.f;
      if (t != o.t) return t < o.t;
      if (cell.row != o.cell.row) return cell.row > o.cell.row;
      return cell.col > o.cell.col;
    }
  };

  std::priority_queue<QEntry> open;
  std::unordered_map<std::size_t, std::size_t> parent;  // node -> predecessor node
  std::unordered_set<std::size_t> closed;

  if (!res.vertex_free(start, 0)) return {};
  open.push({field.at(start), 0, start});
  parent.emplace(node_id(start, 0), node_id(start, 0));

  while (!open.empty()) {
    const QEntry cur = open.top();
    open.pop();
    const std::size_t cur_id = node_id(cur.cell, cur.t);
    if (!closed.insert(cur_id).second) continue;

    if (cur.cell == goal && cur.t > park_after) {
      Plan plan(static_cast<std::size_t>(cur.t) + 1);
      std::size_t id = cur_id;
      for (int t = cur.t; t >= 0; --t) {
        const auto cell_index = static_cast<int>(id % static_cast<std::size_t>(cells));
        plan[static_cast<std::size_t>(t)] = {cell_index / width, cell_index % width};
        id = parent.at(id);
      }
      return plan;
    }
    if (cur.t == t_max) continue;

    for (Action a : kAllActions) {
      const Cell nxt = apply(cur.cell, a);
      if (!map.is_free(nxt) || !field.reachable(nxt)) continue;
      const int nt = cur.t + 1;
      if (!res.vertex_free(nxt, nt)) continue;
      if (nxt != cur.cell && !res.edge_free(cur.cell, nxt, nt)) continue;
      const std::size_t nid = node_id(nxt, nt);
      if (closed.count(nid) || parent.count(nid)) continue;
      parent.emplace(nid, cur_id);
      open.push({nt + field.at(nxt), nt, nxt});
    }
  }
  return {};
}

}  // namespace

SolveResult solve_prioritized(const MapfInstance& instance, const ExpertConfig& cfg) {
  check_solver_config(cfg);
  check_instance(instance);
  const int n = instance.agent_count();
  const auto fields = cost_to_go_all(instance.map, instance.goals);

  // First attempt routes the most constrained agents (longest shortest
  // path) before the rest; later attempts fall back to random orderings.
  std::vector<int> by_distance(static_cast<std::size_t>(n));
  std::iota(by_distance.begin(), by_distance.end(), 0);
  std::stable_sort(by_distance.begin(), by_distance.end(), [&](int a, int b) {
    return fields[static_cast<std::size_t>(a)].at(instance.starts[static_cast<std::size_t>(a)]) >
           fields[static_cast<std::size_t>(b)].at(instance.starts[static_cast<std::size_t>(b)]);
  });

  Rng rng(cfg.seed);
  SolveResult result;
  for (int attempt = 1; attempt <= cfg.restarts; ++attempt) {
    result.attempts = attempt;
    const std::vector<int> order = attempt == 1 ? by_distance : random_permutation(n, rng);

    Reservations res;
    PlanSet plans(static_cast<std::size_t>(n));
    bool ok = true;
    for (int i : order) {
      Plan p = plan_single(instance, fields[static_cast<std::size_t>(i)],
                           instance.starts[static_cast<std::size_t>(i)],
                           instance.goals[static_cast<std::size_t>(i)], cfg.t_max, res);
      if (p.empty()) {
        ok = false;
        break;
      }
      res.add_plan(p);
      plans[static_cast<std::size_t>(i)] = std::move(p);
    }
    if (ok) {
      pad_plans(plans);
      result.success = true;
      result.plans = std::move(plans);
      return result;
    }
  }
  result.reason = "no agent ordering yielded a conflict-free routing within " +
                  std::to_string(cfg.restarts) + " attempts";
  return result;
}

SolveResult solve_expert(const MapfInstance& instance, const ExpertConfig& cfg) {
  return cfg.algorithm == ExpertAlgorithm::Pibt ? solve(instance, cfg)
                                                : solve_prioritized(instance, cfg);
}

SolveResult solve_with_fallback(const MapfInstance& instance, const ExpertConfig& cfg) {
  SolveResult first = solve(instance, cfg);
  if (first.success) return first;
  SolveResult second = solve_prioritized(instance, cfg);
  second.attempts += first.attempts;
  if (!second.success) {
    second.reason = "pibt: " + first.reason + "; prioritized: " + second.reason;
  }
  return second;
}

}  // namespace mapf
