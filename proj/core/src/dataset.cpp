#include "mapf/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <map>
#include <numeric>
#include <string>
#include <unordered_map>

#include <json.hpp>

#include "mapf/cost_to_go.hpp"
#include "mapf/errors.hpp"
#include "mapf/expert.hpp"
#include "mapf/hash.hpp"
#include "mapf/joint_state.hpp"
#include "mapf/observation.hpp"
#include "mapf/rng.hpp"

namespace fs = std::filesystem;

namespace mapf {

namespace {

// Stream separators so the dedup pick, the wait filter, and the shard
// shuffle never share random draws.
constexpr std::uint64_t kDedupStream = 0x6465647570;    // "dedup"
constexpr std::uint64_t kWaitStream = 0x77616974;       // "wait"
constexpr std::uint64_t kShuffleStream = 0x73687566;    // "shuf"

void put_u32(std::ofstream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 4);
}

void put_u64(std::ofstream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 8);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

struct Hash128Hasher {
  std::size_t operator()(const Hash128& h) const {
    return static_cast<std::size_t>(h.lo ^ (h.hi * 0x9e3779b97f4a7c15ULL));
  }
};

}  // namespace

bool wait_at_target(const TokenizedSample& s) {
  return s.label == static_cast<std::uint8_t>(Action::Wait) &&
         s.tokens[kAgentsOffset + 2] == encode_value(0) &&
         s.tokens[kAgentsOffset + 3] == encode_value(0);
}

std::vector<TokenizedSample> trace_instance(const MapfInstance& instance, const PlanSet& plans) {
  const ValidationResult check = validate(plans, instance);
  if (!check.ok()) {
    throw InvalidConfig("trace_instance: plans rejected: " + check.describe());
  }
  const int n = instance.agent_count();
  const int horizon = plan_horizon(plans);
  const auto fields = cost_to_go_all(instance.map, instance.goals);

  auto cell_at = [&](int agent, int t) {
    const Plan& p = plans[static_cast<std::size_t>(agent)];
    const std::size_t idx = std::min<std::size_t>(static_cast<std::size_t>(t), p.size() - 1);
    return p[idx];
  };

  std::vector<TokenizedSample> out;
  out.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(horizon));
  JointState st = initial_state(instance);
  for (int t = 0; t < horizon; ++t) {
    std::vector<Action> actions(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      TokenizedSample s;
      s.tokens = encode_observation(observe(st, instance, fields, i));
      const auto a = action_between(cell_at(i, t), cell_at(i, t + 1));
      s.label = static_cast<std::uint8_t>(*a);  // validate guarantees adjacency
      actions[static_cast<std::size_t>(i)] = *a;
      out.push_back(s);
    }
    st = step(st, actions, instance.map);
  }
  return out;
}

std::vector<TokenizedSample> filter_pairs(const std::vector<TokenizedSample>& samples,
                                          double wait_keep_fraction, std::uint64_t seed,
                                          FilterStats* stats,
                                          std::vector<std::size_t>* kept_indices) {
  if (!(wait_keep_fraction >= 0.0 && wait_keep_fraction <= 1.0)) {
    throw InvalidConfig("filter_pairs: wait_keep_fraction must be in [0, 1]");
  }

  // Group exact-duplicate token sequences; 128-bit hash for the index, full
  // token comparison on every hash hit.
  std::unordered_map<Hash128, std::vector<std::size_t>, Hash128Hasher> by_hash;
  std::vector<std::vector<std::size_t>> groups;  // first-seen order
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Hash128 h = murmur3_x64_128(samples[i].tokens.data(), samples[i].tokens.size());
    auto& bucket = by_hash[h];
    bool placed = false;
    for (std::size_t gid : bucket) {
      if (samples[groups[gid].front()].tokens == samples[i].tokens) {
        groups[gid].push_back(i);
        placed = true;
        break;
      }
    }
    if (!placed) {
      bucket.push_back(groups.size());
      groups.push_back({i});
    }
  }

  FilterStats st;
  st.input = samples.size();

  Rng pick(mix_seed(seed, kDedupStream));
  Rng keep(mix_seed(seed, kWaitStream));
  std::vector<TokenizedSample> out;
  out.reserve(groups.size());
  if (kept_indices) kept_indices->clear();
  for (const auto& group : groups) {
    std::size_t survivor = group.front();
    if (group.size() > 1) {
      survivor = group[pick.below(group.size())];
      st.duplicates_dropped += group.size() - 1;
      for (std::size_t i : group) {
        if (samples[i].label != samples[group.front()].label) {
          ++st.label_conflicts;
          break;
        }
      }
    }
    const TokenizedSample& s = samples[survivor];
    if (wait_at_target(s)) {
      ++st.wait_seen;
      if (keep.uniform() >= wait_keep_fraction) continue;
      ++st.wait_kept;
    }
    out.push_back(s);
    if (kept_indices) kept_indices->push_back(survivor);
  }
  st.output = out.size();
  if (stats) *stats = st;
  return out;
}

std::vector<fs::path> write_shards(std::vector<TokenizedSample> samples, std::uint64_t shard_size,
                                   std::uint64_t seed, const fs::path& dir) {
  if (shard_size < 1) throw InvalidConfig("write_shards: shard_size must be >= 1");
  fs::create_directories(dir);

  Rng rng(mix_seed(seed, kShuffleStream));
  rng.shuffle(samples);

  std::vector<fs::path> paths;
  for (std::size_t begin = 0; begin < samples.size(); begin += shard_size) {
    const std::size_t end = std::min(samples.size(), begin + shard_size);
    char name[32];
    std::snprintf(name, sizeof name, "shard_%04zu.bin", paths.size());
    const fs::path path = dir / name;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw PipelineError("write_shards: cannot open " + path.string());
    out.write(kShardMagic, sizeof kShardMagic);
    put_u32(out, kShardVersion);
    put_u64(out, vocabulary_hash());
    put_u64(out, end - begin);
    for (std::size_t i = begin; i < end; ++i) {
      out.write(reinterpret_cast<const char*>(samples[i].tokens.data()), kSampleTokens);
      out.write(reinterpret_cast<const char*>(&samples[i].label), 1);
    }
    if (!out) throw PipelineError("write_shards: short write to " + path.string());
    paths.push_back(path);
  }
  return paths;
}

ShardReader::ShardReader(const fs::path& file) : in_(file, std::ios::binary) {
  if (!in_) throw CorruptShard("cannot open " + file.string());
  char magic[sizeof kShardMagic];
  in_.read(magic, sizeof magic);
  if (!in_ || std::memcmp(magic, kShardMagic, sizeof magic) != 0) {
    throw CorruptShard("bad magic in " + file.string());
  }
  const std::uint32_t version = get_u32(in_);
  if (!in_ || version != kShardVersion) {
    throw CorruptShard("unsupported shard version " + std::to_string(version) + " in " +
                       file.string());
  }
  const std::uint64_t vocab = get_u64(in_);
  if (!in_) throw CorruptShard("truncated header in " + file.string());
  if (vocab != vocabulary_hash()) {
    throw IncompatibleVocabulary("shard " + file.string() +
                                 " was written under a different vocabulary");
  }
  count_ = get_u64(in_);
  if (!in_) throw CorruptShard("truncated header in " + file.string());
  const auto expected = kShardHeaderBytes + count_ * kShardRecordBytes;
  if (fs::file_size(file) != expected) {
    throw CorruptShard("record count disagrees with file size in " + file.string());
  }
}

std::optional<TokenizedSample> ShardReader::next() {
  if (read_ == count_) return std::nullopt;
  TokenizedSample s;
  in_.read(reinterpret_cast<char*>(s.tokens.data()), kSampleTokens);
  char label;
  in_.read(&label, 1);
  if (!in_) throw CorruptShard("truncated record");
  s.label = static_cast<std::uint8_t>(label);
  for (Token t : s.tokens) {
    if (t >= kVocabSize) throw CorruptShard("token byte out of range");
  }
  if (s.label >= kNumActions) throw CorruptShard("label byte out of range");
  ++read_;
  return s;
}

std::vector<TokenizedSample> read_shards(const fs::path& dir) {
  std::vector<fs::path> files;
  if (fs::exists(dir)) {
    for (const auto& entry : fs::directory_iterator(dir)) {
      const std::string name = entry.path().filename().string();
      if (name.starts_with("shard_") && name.ends_with(".bin")) files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<TokenizedSample> out;
  for (const fs::path& f : files) {
    ShardReader reader(f);
    while (auto s = reader.next()) out.push_back(*s);
  }
  return out;
}

namespace {

void check_dataset_config(const DatasetConfig& cfg) {
  if (cfg.maze_maps < 0 || cfg.random_maps < 0) {
    throw InvalidConfig("build_dataset: map counts must be >= 0");
  }
  if (cfg.instances_per_map < 1) throw InvalidConfig("build_dataset: instances_per_map < 1");
  if (cfg.min_side < 5 || cfg.max_side < cfg.min_side) {
    throw InvalidConfig("build_dataset: need 5 <= min_side <= max_side");
  }
  for (int n : cfg.agent_counts) {
    if (n < 1) throw InvalidConfig("build_dataset: agent counts must be >= 1");
  }
  if (!(cfg.maze_fraction >= 0.0 && cfg.maze_fraction <= 1.0)) {
    throw InvalidConfig("build_dataset: maze_fraction must be in [0, 1]");
  }
  if (!(cfg.wait_keep_fraction >= 0.0 && cfg.wait_keep_fraction <= 1.0)) {
    throw InvalidConfig("build_dataset: wait_keep_fraction must be in [0, 1]");
  }
  if (cfg.shard_size < 1) throw InvalidConfig("build_dataset: shard_size must be >= 1");
}

// Seeded subsample of k indices out of n, returned in ascending order so the
// survivors keep their relative sequence.
std::vector<std::size_t> subsample(std::size_t n, std::size_t k, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(idx);
  idx.resize(std::min(n, k));
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::array<std::size_t, kNumActions> label_histogram(const std::vector<TokenizedSample>& samples) {
  std::array<std::size_t, kNumActions> h{};
  for (const auto& s : samples) h[s.label]++;
  return h;
}

}  // namespace

BuildReport build_dataset(const DatasetConfig& cfg, const fs::path& out_dir) {
  check_dataset_config(cfg);
  fs::create_directories(out_dir);

  BuildReport report;
  std::vector<TokenizedSample> maze_samples, random_samples;
  int infeasible = 0;

  struct FamilyJob {
    MapFamily family;
    int maps;
    std::vector<TokenizedSample>* sink;
  };
  const FamilyJob jobs[] = {{MapFamily::Maze, cfg.maze_maps, &maze_samples},
                            {MapFamily::Random, cfg.random_maps, &random_samples}};

  for (const FamilyJob& job : jobs) {
    const std::uint64_t family_seed =
        mix_seed(cfg.seed, static_cast<std::uint64_t>(job.family) + 1);
    for (int m = 0; m < job.maps; ++m) {
      const std::uint64_t map_seed = mix_seed(family_seed, static_cast<std::uint64_t>(m));
      Rng side_rng(mix_seed(map_seed, 0));
      const int side = cfg.min_side + static_cast<int>(side_rng.below(
                                          static_cast<std::uint64_t>(cfg.max_side - cfg.min_side + 1)));
      const GridMap map = gen_map({job.family, side, side, cfg.obstacle_density, map_seed});
      int variant = 0;
      for (int k = 0; k < cfg.instances_per_map; ++k) {
        for (int n : cfg.agent_counts) {
          const std::uint64_t inst_seed = mix_seed(map_seed, 1 + static_cast<std::uint64_t>(variant++));
          ++report.instances_attempted;
          MapfInstance inst;
          try {
            inst = sample_instance(map, n, inst_seed);
          } catch (const InstanceInfeasible&) {
            ++infeasible;
            continue;
          }
          const SolveResult solved = solve_with_fallback(
              inst, {ExpertAlgorithm::Pibt, cfg.t_max, cfg.restarts, mix_seed(inst_seed, 2)});
          if (!solved.success) continue;
          ++report.instances_solved;
          const auto traced = trace_instance(inst, solved.plans);
          job.sink->insert(job.sink->end(), traced.begin(), traced.end());
        }
      }
    }
  }

  const int failures = report.instances_attempted - report.instances_solved;
  report.expert_failure_rate =
      report.instances_attempted == 0
          ? 0.0
          : static_cast<double>(failures) / static_cast<double>(report.instances_attempted);
  if (report.instances_attempted > 0 && report.expert_failure_rate > 0.5) {
    throw PipelineError("build_dataset: expert failed on " + std::to_string(failures) + " of " +
                        std::to_string(report.instances_attempted) +
                        " instances; dataset would be unrepresentative");
  }

  report.samples_traced = maze_samples.size() + random_samples.size();
  std::vector<TokenizedSample> combined;
  combined.reserve(report.samples_traced);
  combined.insert(combined.end(), maze_samples.begin(), maze_samples.end());
  combined.insert(combined.end(), random_samples.begin(), random_samples.end());
  const auto traced_hist = label_histogram(combined);

  // Global dedup + wait filter; family membership recovered by position.
  FilterStats fstats;
  std::vector<std::size_t> kept;
  const auto filtered =
      filter_pairs(combined, cfg.wait_keep_fraction, mix_seed(cfg.seed, 3), &fstats, &kept);

  std::vector<TokenizedSample> maze_kept, random_kept;
  for (std::size_t j = 0; j < filtered.size(); ++j) {
    (kept[j] < maze_samples.size() ? maze_kept : random_kept).push_back(filtered[j]);
  }

  // Trim the over-represented family toward the target share.
  const double f = cfg.maze_fraction;
  std::size_t maze_quota = maze_kept.size(), random_quota = random_kept.size();
  if (f >= 1.0) {
    random_quota = 0;
  } else if (f <= 0.0) {
    maze_quota = 0;
  } else {
    const double mk = static_cast<double>(maze_kept.size());
    const double rk = static_cast<double>(random_kept.size());
    if (mk * (1.0 - f) > rk * f) {
      maze_quota = static_cast<std::size_t>(rk * f / (1.0 - f));
    } else {
      random_quota = static_cast<std::size_t>(mk * (1.0 - f) / f);
    }
  }
  std::vector<TokenizedSample> final_samples;
  for (std::size_t i : subsample(maze_kept.size(), maze_quota, mix_seed(cfg.seed, 4))) {
    final_samples.push_back(maze_kept[i]);
  }
  const std::size_t maze_final = final_samples.size();
  for (std::size_t i : subsample(random_kept.size(), random_quota, mix_seed(cfg.seed, 5))) {
    final_samples.push_back(random_kept[i]);
  }
  const std::size_t random_final = final_samples.size() - maze_final;

  report.samples_final = final_samples.size();
  report.maze_share = final_samples.empty()
                          ? 0.0
                          : static_cast<double>(maze_final) / static_cast<double>(final_samples.size());
  const auto final_hist = label_histogram(final_samples);
  report.shards = write_shards(std::move(final_samples), cfg.shard_size,
                               mix_seed(cfg.seed, 6), out_dir);

  nlohmann::json manifest;
  manifest["config"] = {{"maze_maps", cfg.maze_maps},
                        {"random_maps", cfg.random_maps},
                        {"agent_counts", cfg.agent_counts},
                        {"instances_per_map", cfg.instances_per_map},
                        {"min_side", cfg.min_side},
                        {"max_side", cfg.max_side},
                        {"obstacle_density", cfg.obstacle_density},
                        {"maze_fraction", cfg.maze_fraction},
                        {"wait_keep_fraction", cfg.wait_keep_fraction},
                        {"shard_size", cfg.shard_size},
                        {"t_max", cfg.t_max},
                        {"restarts", cfg.restarts},
                        {"seed", cfg.seed}};
  char vocab_hex[32];
  std::snprintf(vocab_hex, sizeof vocab_hex, "0x%016llx",
                static_cast<unsigned long long>(vocabulary_hash()));
  manifest["vocabulary_hash"] = vocab_hex;
  manifest["instances"] = {{"attempted", report.instances_attempted},
                           {"solved", report.instances_solved},
                           {"infeasible", infeasible},
                           {"expert_failure_rate", report.expert_failure_rate}};
  manifest["samples"] = {{"traced", report.samples_traced},
                         {"after_dedup", fstats.input - fstats.duplicates_dropped},
                         {"duplicates_dropped", fstats.duplicates_dropped},
                         {"label_conflict_groups", fstats.label_conflicts},
                         {"wait_seen", fstats.wait_seen},
                         {"wait_kept", fstats.wait_kept},
                         {"after_filter", fstats.output},
                         {"maze_final", maze_final},
                         {"random_final", random_final},
                         {"final", report.samples_final},
                         {"maze_share", report.maze_share}};
  manifest["label_histogram"] = {{"traced", traced_hist}, {"final", final_hist}};
  nlohmann::json shard_list = nlohmann::json::array();
  for (const fs::path& p : report.shards) {
    ShardReader reader(p);
    shard_list.push_back({{"file", p.filename().string()}, {"records", reader.size()}});
  }
  manifest["shards"] = shard_list;

  report.manifest_json = manifest.dump(2) + "\n";
  std::ofstream mf(out_dir / "manifest.json", std::ios::trunc);
  mf << report.manifest_json;
  std::ofstream vf(out_dir / "vocabulary.txt", std::ios::trunc);
  vf << vocabulary_text();
  if (!mf || !vf) throw PipelineError("build_dataset: failed writing metadata files");
  return report;
}

}  // namespace mapf
