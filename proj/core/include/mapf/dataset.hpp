#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <vector>

#include "mapf/generators.hpp"
#include "mapf/instance.hpp"
#include "mapf/plan.hpp"
#include "mapf/tokenizer.hpp"

namespace mapf {

// Shard file: 28-byte header, then fixed 257-byte records (256 token bytes
// + 1 label byte), little-endian integers.
inline constexpr char kShardMagic[8] = {'M', 'A', 'P', 'F', 'S', 'H', 'R', 'D'};
inline constexpr std::uint32_t kShardVersion = 1;
inline constexpr std::size_t kShardHeaderBytes = 8 + 4 + 8 + 8;
inline constexpr std::size_t kShardRecordBytes = kSampleTokens + 1;

struct DatasetConfig {
  int maze_maps = 200;
  int random_maps = 50;
  std::vector<int> agent_counts = {8, 16};
  int instances_per_map = 2;  // start/goal resamples of each map
  int min_side = 17;
  int max_side = 21;
  double obstacle_density = 0.3;  // random family only
  double maze_fraction = 0.9;     // target maze share of final samples
  double wait_keep_fraction = 0.2;
  std::uint64_t shard_size = std::uint64_t{1} << 21;
  int t_max = 128;
  int restarts = 16;
  std::uint64_t seed = 0;
};

/// True when the sample's ego agent sits on its goal and the label is Wait.
/// Derived from the encoded tokens; no side channel.
bool wait_at_target(const TokenizedSample& s);

/// One sample per agent per time step of the episode: the observation before
/// the step, labeled with the action the plan takes. Plans must validate.
std::vector<TokenizedSample> trace_instance(const MapfInstance& instance, const PlanSet& plans);

struct FilterStats {
  std::size_t input = 0;
  std::size_t duplicates_dropped = 0;
  std::size_t label_conflicts = 0;  // dropped duplicates that disagreed on the label
  std::size_t wait_seen = 0;        // wait-at-target samples after dedup
  std::size_t wait_kept = 0;
  std::size_t output = 0;
};

/// Dedup identical token sequences (seeded uniform pick of the survivor),
/// then keep each wait-at-target sample with probability wait_keep_fraction.
/// kept_indices, when given, receives each output's index in the input.
std::vector<TokenizedSample> filter_pairs(const std::vector<TokenizedSample>& samples,
                                          double wait_keep_fraction, std::uint64_t seed,
                                          FilterStats* stats = nullptr,
                                          std::vector<std::size_t>* kept_indices = nullptr);

/// Seeded global shuffle, then fixed-size shard files (shard_0000.bin, ...)
/// under dir. Returns the written paths in order.
std::vector<std::filesystem::path> write_shards(std::vector<TokenizedSample> samples,
                                                std::uint64_t shard_size, std::uint64_t seed,
                                                const std::filesystem::path& dir);

/// Streams one shard without loading it whole. Throws CorruptShard on a bad
/// magic/version/size and IncompatibleVocabulary on a vocabulary-hash change.
class ShardReader {
 public:
  explicit ShardReader(const std::filesystem::path& file);
  std::uint64_t size() const { return count_; }
  std::optional<TokenizedSample> next();

 private:
  std::ifstream in_;
  std::uint64_t count_ = 0;
  std::uint64_t read_ = 0;
};

/// All records of all shard_*.bin files under dir, in file order.
std::vector<TokenizedSample> read_shards(const std::filesystem::path& dir);

struct BuildReport {
  int instances_attempted = 0;
  int instances_solved = 0;
  double expert_failure_rate = 0.0;
  std::size_t samples_traced = 0;
  std::size_t samples_final = 0;
  double maze_share = 0.0;  // of the final samples
  std::vector<std::filesystem::path> shards;
  std::string manifest_json;
};

/// Generate maps and instances, solve them with the fallback expert, trace,
/// filter, mix families toward cfg.maze_fraction, shard, and write
/// manifest.json + vocabulary.txt into out_dir.
BuildReport build_dataset(const DatasetConfig& cfg, const std::filesystem::path& out_dir);

}  // namespace mapf
