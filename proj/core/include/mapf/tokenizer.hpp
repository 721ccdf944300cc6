#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>

#include "mapf/observation.hpp"

namespace mapf {

// The 67-token vocabulary, as fixed ids:
//   0..40   integers -20..20 (id = value + 20)
//   41, 42  beyond +20 / below -20
//   43      blocked cell (infinite cost-to-go)
//   44..48  actions, id = 44 + action id (up, down, left, right, wait)
//   49      empty action: a history slot from before the episode started
//   50..65  greedy direction subsets, id = 50 + mask (bit i = Action i)
//   66      empty: absent agent slots and tail padding
using Token = std::uint8_t;

inline constexpr int kVocabSize = 67;
inline constexpr Token kTokenBeyondPlus = 41;
inline constexpr Token kTokenBeyondMinus = 42;
inline constexpr Token kTokenBlocked = 43;
inline constexpr Token kTokenActionBase = 44;
inline constexpr Token kTokenEmptyAction = 49;
inline constexpr Token kTokenGreedyBase = 50;
inline constexpr Token kTokenEmpty = 66;

// A sample is 256 tokens: the 11x11 costmap, 13 agent blocks of 10 tokens
// each (ego first, absent slots all-empty), then 5 empty padding tokens.
inline constexpr int kAgentBlockTokens = 10;
inline constexpr int kSampleTokens = 256;
inline constexpr int kAgentsOffset = kCostmapCells;
inline constexpr int kPaddingOffset = kAgentsOffset + kMaxVisibleAgents * kAgentBlockTokens;

static_assert(kPaddingOffset == 251);
static_assert(kSampleTokens - kPaddingOffset == 5);

using TokenSeq = std::array<Token, kSampleTokens>;

struct TokenizedSample {
  TokenSeq tokens{};
  std::uint8_t label = 0;  // action id, 0..4
  friend bool operator==(const TokenizedSample&, const TokenizedSample&) = default;
};

/// Numeric token for v in [-20, 20], overflow token outside.
Token encode_value(std::int64_t v);

/// Costmap cell: blocked token, or the (possibly overflowed) numeric value.
Token encode_value(const CostmapEntry& entry);

Token encode_action(Action a);

/// Token for the set of directions that strictly reduce cost-to-go.
Token greedy_token(GreedyMask greedy);

/// 10 tokens: rel row, rel col, rel goal row, rel goal col, 5 history
/// entries oldest first (empty-action where none yet), greedy subset.
/// An absent agent encodes as 10 empty tokens.
std::array<Token, kAgentBlockTokens> encode_agent_block(const std::optional<AgentBlock>& block);

TokenSeq encode_observation(const Observation& obs);

std::string token_name(int id);

/// Canonical text listing of the vocabulary. Datasets and checkpoints store
/// its hash so an encoder change can't be mixed with stale artifacts.
const std::string& vocabulary_text();
std::uint64_t vocabulary_hash();

}  // namespace mapf
