#include <benchmark/benchmark.h>

#include <filesystem>
#include <vector>

#include "mapf/cost_to_go.hpp"
#include "mapf/dataset.hpp"
#include "mapf/evaluator.hpp"
#include "mapf/expert.hpp"
#include "mapf/generators.hpp"
#include "mapf/model.hpp"
#include "mapf/observation.hpp"
#include "mapf/rng.hpp"
#include "mapf/tokenizer.hpp"

namespace {

mapf::GridMap scattered(int side, double density, std::uint64_t seed) {
  mapf::GridMap map(side, side);
  mapf::Rng rng(seed);
  const auto target = static_cast<std::size_t>(density * side * side);
  while (map.blocked_count() < target) {
    map.set_blocked({rng.int_range(0, side - 1), rng.int_range(0, side - 1)}, true);
  }
  return map;
}

mapf::MapfInstance desk_instance(int n_agents, std::uint64_t seed, int side = 21) {
  mapf::GeneratorConfig gen;
  gen.width = side;
  gen.height = side;
  gen.obstacle_density = 0.3;
  gen.seed = seed;
  return mapf::sample_instance(mapf::gen_map(gen), n_agents, mapf::mix_seed(seed, 1));
}

void BM_CostToGo(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const auto map = scattered(side, 0.3, 11);
  const mapf::Cell goal = map.free_cells().front();
  for (auto _ : state) {
    benchmark::DoNotOptimize(mapf::cost_to_go(map, goal));
  }
}
BENCHMARK(BM_CostToGo)->Arg(21)->Arg(64)->Arg(256);

void BM_ExpertSolve(benchmark::State& state) {
  const auto instance = desk_instance(static_cast<int>(state.range(0)), 7);
  mapf::ExpertConfig cfg;
  for (auto _ : state) {
    benchmark::DoNotOptimize(mapf::solve_with_fallback(instance, cfg));
  }
}
BENCHMARK(BM_ExpertSolve)->Arg(8)->Arg(16)->Arg(32);

void BM_ObserveAll(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto instance = desk_instance(n, 13);
  const auto fields = mapf::cost_to_go_all(instance.map, instance.goals);
  const auto joint = mapf::initial_state(instance);
  for (auto _ : state) {
    for (int i = 0; i < n; ++i) {
      benchmark::DoNotOptimize(mapf::observe(joint, instance, fields, i));
    }
  }
}
BENCHMARK(BM_ObserveAll)->Arg(16)->Arg(64);

void BM_EncodeObservation(benchmark::State& state) {
  const auto instance = desk_instance(16, 13);
  const auto fields = mapf::cost_to_go_all(instance.map, instance.goals);
  const auto joint = mapf::initial_state(instance);
  const auto obs = mapf::observe(joint, instance, fields, 0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(mapf::encode_observation(obs));
  }
}
BENCHMARK(BM_EncodeObservation);

void BM_ModelForward(benchmark::State& state) {
  const auto cfg = mapf::model_preset("pico");
  const auto params = mapf::init_params<float>(cfg, 5);
  mapf::Rng rng(9);
  std::vector<mapf::TokenSeq> batch(static_cast<std::size_t>(state.range(0)));
  for (auto& seq : batch)
    for (auto& t : seq)
      t = static_cast<mapf::Token>(rng.below(mapf::kVocabSize));
  for (auto _ : state) {
    benchmark::DoNotOptimize(mapf::forward(cfg, params, batch));
  }
}
BENCHMARK(BM_ModelForward)->Arg(8)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_PolicyStep(benchmark::State& state) {
  // One closed-loop decision for all agents: observe + tokenize + forward.
  const int n = static_cast<int>(state.range(0));
  const auto instance = desk_instance(n, 23, 33);
  const auto fields = mapf::cost_to_go_all(instance.map, instance.goals);
  const auto joint = mapf::initial_state(instance);
  auto policy = mapf::make_model_policy(mapf::model_preset("pico"),
                                        mapf::init_params<float>(mapf::model_preset("pico"), 5),
                                        3);
  policy->reset(instance, 0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(policy->decide(joint, instance, fields));
  }
}
BENCHMARK(BM_PolicyStep)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_ShardRead(benchmark::State& state) {
  const auto dir = std::filesystem::temp_directory_path() / "mapf_bench_shard";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  mapf::Rng rng(3);
  std::vector<mapf::TokenizedSample> samples(4096);
  for (auto& s : samples) {
    for (auto& t : s.tokens) t = static_cast<mapf::Token>(rng.below(mapf::kVocabSize));
    s.label = static_cast<std::uint8_t>(rng.below(mapf::kNumActions));
  }
  mapf::write_shards(samples, 4096, 1, dir);
  for (auto _ : state) {
    benchmark::DoNotOptimize(mapf::read_shards(dir));
  }
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations()) * 4096 *
                          static_cast<std::int64_t>(mapf::kShardRecordBytes));
}
BENCHMARK(BM_ShardRead);

}  // namespace

BENCHMARK_MAIN();
