#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "mapf/movingai.hpp"

using namespace mapf;

namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("mapf_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

struct CmdResult {
  int rc = -1;
  std::string out;  // stdout and stderr merged
};

CmdResult run_cli(const std::string& args) {
  static int counter = 0;
  const fs::path log = fs::temp_directory_path() / ("mapf_cli_log_" + std::to_string(counter++));
  const std::string cmd = std::string(MAPF_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  CmdResult r;
  if (WIFEXITED(status)) r.rc = WEXITSTATUS(status);
  r.out = slurp(log);
  fs::remove(log);
  return r;
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  REQUIRE(out.good());
  out << text;
}

}  // namespace

TEST_CASE("bad invocations exit with the usage code") {
  CHECK(run_cli("").rc == 2);
  CHECK(run_cli("frobnicate").rc == 2);
  CHECK(run_cli("solve --no-such-flag").rc == 2);
  CHECK(run_cli("gen-maps").rc == 2);         // --out is required
  CHECK(run_cli("eval --out x.csv").rc == 2); // --policy is required
  const CmdResult help = run_cli("--help");
  CHECK(help.rc == 0);
  CHECK(help.out.find("gen-maps") != std::string::npos);
  CHECK(help.out.find("inspect-shard") != std::string::npos);
}

TEST_CASE("a missing config file names the path and exits 2") {
  const CmdResult r = run_cli("train --config /definitely/not/here.json");
  CHECK(r.rc == 2);
  CHECK(r.out.find("/definitely/not/here.json") != std::string::npos);
}

TEST_CASE("gen-maps writes parseable MovingAI files") {
  const fs::path dir = fresh_dir("gen");
  const CmdResult r =
      run_cli("gen-maps --out " + dir.string() + " --family maze --count 3 --seed 4");
  CHECK(r.rc == 0);
  int found = 0;
  for (int i = 0; i < 3; ++i) {
    const fs::path p = dir / ("maze_00" + std::to_string(i) + ".map");
    REQUIRE(fs::exists(p));
    const GridMap map = parse_movingai_file(p);
    CHECK(map.width() == 17);
    CHECK(map.height() == 17);
    ++found;
  }
  CHECK(found == 3);
}

TEST_CASE("solve prints a result line") {
  const fs::path dir = fresh_dir("solve");
  const CmdResult r =
      run_cli("solve --agents 4 --seed 3 --out " + (dir / "plans.json").string());
  CHECK(r.rc == 0);
  CHECK(r.out.find("success=1") != std::string::npos);
  CHECK(fs::exists(dir / "plans.json"));
  const std::string plans = slurp(dir / "plans.json");
  CHECK(plans.find("\"soc\"") != std::string::npos);
}

TEST_CASE("dataset build, training, and evaluation run end to end") {
  const fs::path root = fresh_dir("pipeline");
  const fs::path data = root / "data";
  const fs::path val = root / "val";
  const fs::path run = root / "run";

  spit(root / "data.json", R"({
    "maze_maps": 2, "random_maps": 2, "agent_counts": [2],
    "instances_per_map": 1, "min_side": 9, "max_side": 9,
    "maze_fraction": 0.5, "t_max": 32, "seed": 1
  })");
  spit(root / "val.json", R"({
    "maze_maps": 1, "random_maps": 1, "agent_counts": [2],
    "instances_per_map": 1, "min_side": 9, "max_side": 9,
    "maze_fraction": 0.5, "t_max": 32, "seed": 2
  })");

  CmdResult r = run_cli("build-dataset --config " + (root / "data.json").string() + " --out " +
                        data.string());
  CHECK(r.rc == 0);
  CHECK(r.out.find("shards:") != std::string::npos);
  REQUIRE(fs::exists(data / "shard_0000.bin"));
  REQUIRE(fs::exists(data / "manifest.json"));

  r = run_cli("build-dataset --config " + (root / "val.json").string() + " --out " + val.string());
  CHECK(r.rc == 0);
  REQUIRE(fs::exists(val / "shard_0000.bin"));

  r = run_cli("inspect-shard " + (data / "shard_0000.bin").string() + " --index 0");
  CHECK(r.rc == 0);
  CHECK(r.out.find("costmap") != std::string::npos);
  CHECK(r.out.find("label=") != std::string::npos);
  CHECK(r.out.find("(ego)") != std::string::npos);

  r = run_cli("inspect-shard " + (data / "shard_0000.bin").string() + " --index 999999");
  CHECK(r.rc == 1);
  CHECK(r.out.find("out of range") != std::string::npos);

  spit(root / "train.json", R"({
    "model": {"n_layers": 1, "n_heads": 2, "d_embed": 8},
    "batch_size": 8, "total_iters": 3, "eval_interval": 2,
    "dataset_dir": ")" + data.string() + R"(",
    "val_dir": ")" + val.string() + R"(",
    "out_dir": ")" + run.string() + R"("
  })");
  r = run_cli("train --config " + (root / "train.json").string());
  CHECK(r.rc == 0);
  CHECK(r.out.find("iters=3") != std::string::npos);
  REQUIRE(fs::exists(run / "model.ckpt"));
  REQUIRE(fs::exists(run / "metrics.txt"));

  spit(root / "suite.json", R"({
    "map_sets": [{"name": "tiny", "family": "random", "width": 9, "height": 9,
                  "obstacle_density": 0.2, "map_count": 1}],
    "agent_counts": [2], "instances_per_map": 1, "t_max": 16
  })");
  r = run_cli("eval --policy model --checkpoint " + (run / "model.ckpt").string() + " --config " +
              (root / "suite.json").string() + " --out " + (root / "model.csv").string());
  CHECK(r.rc == 0);
  CHECK(fs::exists(root / "model.csv"));

  r = run_cli("eval --policy greedy --config " + (root / "suite.json").string() + " --out " +
              (root / "greedy.csv").string());
  CHECK(r.rc == 0);
  const std::string csv = slurp(root / "greedy.csv");
  CHECK(csv.rfind("map_set,map_id,n_agents,seed,success,soc,makespan,throughput,mean_step_ms\n",
                  0) == 0);
  CHECK(r.out.find("policy greedy") != std::string::npos);

  r = run_cli("eval --policy model --config " + (root / "suite.json").string());
  CHECK(r.rc == 2);  // model policy without a checkpoint is a usage error
}

TEST_CASE("eval rejects unknown names with the usage code") {
  CHECK(run_cli("eval --policy nope").rc == 2);
  CHECK(run_cli("eval --policy greedy --suite nope").rc == 2);
  CHECK(run_cli("eval --policy greedy --mode nope").rc == 2);
}
