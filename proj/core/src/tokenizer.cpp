#include "mapf/tokenizer.hpp"

#include <cassert>

#include "mapf/hash.hpp"

namespace mapf {

Token encode_value(std::int64_t v) {
  if (v > kCoordClip) return kTokenBeyondPlus;
  if (v < -kCoordClip) return kTokenBeyondMinus;
  return static_cast<Token>(v + kCoordClip);
}

Token encode_value(const CostmapEntry& entry) {
  return entry.blocked ? kTokenBlocked : encode_value(entry.value);
}

Token encode_action(Action a) {
  return static_cast<Token>(kTokenActionBase + static_cast<int>(a));
}

Token greedy_token(GreedyMask greedy) {
  assert(greedy < 16);
  return static_cast<Token>(kTokenGreedyBase + greedy);
}

std::array<Token, kAgentBlockTokens> encode_agent_block(const std::optional<AgentBlock>& block) {
  std::array<Token, kAgentBlockTokens> out;
  if (!block) {
    out.fill(kTokenEmpty);
    return out;
  }
  out[0] = encode_value(block->rel_pos[0]);
  out[1] = encode_value(block->rel_pos[1]);
  out[2] = encode_value(block->rel_goal[0]);
  out[3] = encode_value(block->rel_goal[1]);
  for (int k = 0; k < kHistoryLength; ++k) {
    const auto& slot = block->history[static_cast<std::size_t>(k)];
    out[static_cast<std::size_t>(4 + k)] = slot ? encode_action(*slot) : kTokenEmptyAction;
  }
  out[9] = greedy_token(block->greedy);
  return out;
}

TokenSeq encode_observation(const Observation& obs) {
  TokenSeq tokens;
  for (int i = 0; i < kCostmapCells; ++i) {
    tokens[static_cast<std::size_t>(i)] = encode_value(obs.costmap[static_cast<std::size_t>(i)]);
  }
  for (int slot = 0; slot < kMaxVisibleAgents; ++slot) {
    std::optional<AgentBlock> block;
    if (slot < static_cast<int>(obs.agents.size())) block = obs.agents[static_cast<std::size_t>(slot)];
    const auto enc = encode_agent_block(block);
    std::copy(enc.begin(), enc.end(),
              tokens.begin() + kAgentsOffset + slot * kAgentBlockTokens);
  }
  std::fill(tokens.begin() + kPaddingOffset, tokens.end(), kTokenEmpty);
  return tokens;
}

std::string token_name(int id) {
  if (id >= 0 && id <= 2 * kCoordClip) return std::to_string(id - kCoordClip);
  if (id == kTokenBeyondPlus) return "beyond+";
  if (id == kTokenBeyondMinus) return "beyond-";
  if (id == kTokenBlocked) return "blocked";
  if (id >= kTokenActionBase && id < kTokenEmptyAction) {
    return std::string(action_name(static_cast<Action>(id - kTokenActionBase)));
  }
  if (id == kTokenEmptyAction) return "no-action";
  if (id >= kTokenGreedyBase && id < kTokenEmpty) {
    const int mask = id - kTokenGreedyBase;
    if (mask == 0) return "greedy:none";
    std::string name = "greedy:";
    for (Action a : kMoveActions) {
      if (mask & (1 << static_cast<int>(a))) {
        if (name.back() != ':') name += '-';
        name += action_name(a);
      }
    }
    return name;
  }
  if (id == kTokenEmpty) return "empty";
  return "?";
}

const std::string& vocabulary_text() {
  static const std::string text = [] {
    std::string out = "mapf vocabulary v1\n";
    for (int id = 0; id < kVocabSize; ++id) {
      out += std::to_string(id);
      out += '\t';
      out += token_name(id);
      out += '\n';
    }
    return out;
  }();
  return text;
}

std::uint64_t vocabulary_hash() {
  static const std::uint64_t h = fnv1a64(vocabulary_text());
  return h;
}

}  // namespace mapf
