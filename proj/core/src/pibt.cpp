#include "mapf/pibt.hpp"

#include <algorithm>
#include <limits>
#include <unordered_map>

#include "mapf/errors.hpp"

namespace mapf {

namespace {

struct PibtPass {
  const JointState& state;
  const GridMap& map;
  std::span<const CostToGoField> fields;
  std::unordered_map<Cell, int> occupied_now;
  std::unordered_map<Cell, int> occupied_next;
  std::vector<Cell> next;
  std::vector<std::uint8_t> decided;

  Cell pos(int i) const { return state.positions[static_cast<std::size_t>(i)]; }

  // pusher < 0 for root calls. Returns false when the agent had to stay put
  // against its will (all candidates taken); it then reserves its own cell.
  bool decide(int i, int pusher) {
    const CostToGoField& field = fields[static_cast<std::size_t>(i)];
    const Cell here = pos(i);

    struct Candidate {
      Cell cell;
      std::int64_t cost;
      int action;
    };
    std::array<Candidate, kNumActions> cands;
    int n_cands = 0;
    for (Action a : kAllActions) {
      const Cell c = apply(here, a);
      if (!map.is_free(c)) continue;
      const std::int64_t cost =
          field.reachable(c) ? field.at(c) : std::numeric_limits<std::int64_t>::max() / 2;
      cands[static_cast<std::size_t>(n_cands++)] = {c, cost, static_cast<int>(a)};
    }
    std::sort(cands.begin(), cands.begin() + n_cands, [](const Candidate& a, const Candidate& b) {
      return a.cost != b.cost ? a.cost < b.cost : a.action < b.action;
    });

    for (int k = 0; k < n_cands; ++k) {
      const Cell c = cands[static_cast<std::size_t>(k)].cell;
      if (occupied_next.count(c)) continue;
      if (pusher >= 0 && c == pos(pusher)) continue;  // no swap with the pusher

      occupied_next[c] = i;
      next[static_cast<std::size_t>(i)] = c;
      decided[static_cast<std::size_t>(i)] = 1;

      const auto occ = occupied_now.find(c);
      if (occ != occupied_now.end() && occ->second != i &&
          !decided[static_cast<std::size_t>(occ->second)]) {
        if (!decide(occ->second, i)) {
          // The pushed agent reserved its own cell (= c) instead; pick again.
          decided[static_cast<std::size_t>(i)] = 0;
          continue;
        }
      }
      return true;
    }

    occupied_next[here] = i;
    next[static_cast<std::size_t>(i)] = here;
    decided[static_cast<std::size_t>(i)] = 1;
    return false;
  }
};

}  // namespace

std::vector<Action> pibt_step(const JointState& state, const GridMap& map,
                              std::span<const CostToGoField> fields, std::span<const int> order) {
  const int n = state.agent_count();
  if (static_cast<int>(fields.size()) != n || static_cast<int>(order.size()) != n) {
    throw ArityMismatch("pibt_step: fields and order must cover every agent");
  }

  PibtPass pass{state, map, fields};
  pass.next.assign(static_cast<std::size_t>(n), Cell{});
  pass.decided.assign(static_cast<std::size_t>(n), 0);
  pass.occupied_now.reserve(static_cast<std::size_t>(n) * 2);
  for (int i = 0; i < n; ++i) pass.occupied_now.emplace(pass.pos(i), i);

  for (int i : order) {
    if (!pass.decided[static_cast<std::size_t>(i)]) pass.decide(i, -1);
  }

  std::vector<Action> actions(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    actions[static_cast<std::size_t>(i)] =
        *action_between(pass.pos(i), pass.next[static_cast<std::size_t>(i)]);
  }
  return actions;
}

}  // namespace mapf
