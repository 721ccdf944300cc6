#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <doctest.h>

#include "mapf/dataset.hpp"
#include "mapf/errors.hpp"
#include "mapf/model.hpp"
#include "mapf/rng.hpp"
#include "mapf/trainer.hpp"

using namespace mapf;
namespace fs = std::filesystem;

namespace {

const ModelConfig kMicro{.n_layers = 1, .n_heads = 2, .d_embed = 8};

fs::path fresh_dir(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("mapf_trainer_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Learnable synthetic task: the label is a function of the readout token, so
// even a one-layer model picks it up quickly.
std::vector<TokenizedSample> synth_samples(int n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<TokenizedSample> out(static_cast<std::size_t>(n));
  for (auto& s : out) {
    for (auto& t : s.tokens) t = static_cast<Token>(rng.below(kVocabSize));
    s.label = static_cast<std::uint8_t>(s.tokens[0] % kNumActions);
  }
  return out;
}

fs::path synth_shards(const std::string& tag, int n, std::uint64_t seed) {
  const fs::path dir = fresh_dir(tag);
  write_shards(synth_samples(n, seed), 200, seed, dir);
  return dir;
}

struct MetricsLine {
  int iter = 0;
  double lr = 0, train = 0, val = 0, acc = 0;
};

std::vector<MetricsLine> parse_metrics(const fs::path& p) {
  std::vector<MetricsLine> lines;
  std::ifstream in(p);
  REQUIRE(in);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream is(line);
    MetricsLine m;
    is >> m.iter >> m.lr >> m.train >> m.val >> m.acc;
    REQUIRE(!is.fail());
    lines.push_back(m);
  }
  return lines;
}

bool all_finite(const ModelParams<float>& p) {
  bool ok = true;
  for_each_tensor(p, [&](const char*, const auto& m, bool) {
    if (!m.allFinite()) ok = false;
  });
  return ok;
}

}  // namespace

TEST_CASE("sample stream: one visit per record per epoch, skippable") {
  SampleStream s(7, 99);
  std::vector<std::size_t> first, second;
  for (int i = 0; i < 7; ++i) first.push_back(s.next());
  CHECK(s.epoch() == 0);
  for (int i = 0; i < 7; ++i) second.push_back(s.next());
  CHECK(s.epoch() == 1);
  CHECK(s.consumed() == 14);

  auto sorted = first;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6});
  sorted = second;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6});
  CHECK(first != second);  // reshuffled between epochs

  // same seed, same order
  SampleStream t(7, 99);
  for (const std::size_t want : first) CHECK(t.next() == want);

  // skip(k) lands exactly where k next() calls would
  SampleStream a(7, 123), b(7, 123);
  std::vector<std::size_t> full;
  for (int i = 0; i < 25; ++i) full.push_back(a.next());
  b.skip(11);
  CHECK(b.consumed() == 11);
  for (int i = 11; i < 25; ++i) CHECK(b.next() == full[static_cast<std::size_t>(i)]);

  SampleStream one(1, 0);
  CHECK(one.next() == 0);
  CHECK(one.next() == 0);
  CHECK_THROWS_AS(SampleStream(0, 1), InvalidConfig);
}

TEST_CASE("evaluate_loss: single-record oracle and validation") {
  const ModelParams<float> p = init_params<float>(kMicro, 6);
  std::vector<TokenizedSample> one = synth_samples(1, 7);

  const std::vector<TokenSeq> batch{one[0].tokens};
  const MatX<float> logits = forward<float>(kMicro, p, batch);
  Eigen::Index argmax = 0;
  logits.row(0).maxCoeff(&argmax);

  one[0].label = static_cast<std::uint8_t>(argmax);
  EvalStats hit = evaluate_loss(kMicro, p, one);
  CHECK(hit.accuracy == 1.0);

  one[0].label = static_cast<std::uint8_t>((argmax + 1) % kNumActions);
  EvalStats miss = evaluate_loss(kMicro, p, one);
  CHECK(miss.accuracy == 0.0);

  // loss equals the hand-computed cross entropy of that row
  const double mx = logits.row(0).maxCoeff();
  double sum = 0;
  for (Eigen::Index a = 0; a < logits.cols(); ++a)
    sum += std::exp(static_cast<double>(logits(0, a)) - mx);
  const double want = -(static_cast<double>(logits(0, one[0].label)) - mx - std::log(sum));
  CHECK(miss.loss == doctest::Approx(want).epsilon(1e-12));

  CHECK_THROWS_AS(evaluate_loss(kMicro, p, {}), InvalidConfig);
}

TEST_CASE("train: smoke run learns a synthetic rule and logs metrics") {
  const fs::path train_dir = synth_shards("smoke_train", 512, 31);
  const fs::path val_dir = synth_shards("smoke_val", 128, 32);
  const fs::path out = fresh_dir("smoke_out");

  TrainConfig cfg;
  cfg.model = kMicro;
  cfg.batch_size = 16;
  cfg.total_iters = 120;
  cfg.eval_interval = 30;
  cfg.seed = 5;
  cfg.dataset_dir = train_dir.string();
  cfg.val_dir = val_dir.string();
  cfg.out_dir = out.string();

  const TrainResult res = train(cfg);
  CHECK(res.completed);
  CHECK(res.iters_run == 120);

  const auto lines = parse_metrics(res.metrics_path);
  REQUIRE(lines.size() == 5);  // 0, 30, 60, 90, 119
  CHECK(lines[0].iter == 0);
  CHECK(lines.back().iter == 119);
  // before any update the model is near-chance
  CHECK(std::abs(lines[0].train - std::log(5.0)) < 0.05);
  CHECK(std::abs(lines[0].val - std::log(5.0)) < 0.05);
  // it learned something
  CHECK(lines.back().train < lines[0].train - 0.2);
  CHECK(lines.back().acc > 0.3);
  // lr follows the 1-based schedule
  LrSchedule sched;
  sched.warmup = 12;  // total/10
  sched.total = 120;
  CHECK(lines[0].lr == doctest::Approx(lr_at(1, sched)).epsilon(1e-9));

  const LoadedCheckpoint ck = load_checkpoint(res.checkpoint_path, kMicro);
  CHECK(ck.has_optimizer);
  CHECK(ck.opt.iter == 120);
  CHECK(all_finite(ck.params));
}

TEST_CASE("train: identical config and seed give identical bytes") {
  const fs::path train_dir = synth_shards("det_train", 256, 41);
  const fs::path val_dir = synth_shards("det_val", 64, 42);
  const fs::path out_a = fresh_dir("det_a");
  const fs::path out_b = fresh_dir("det_b");

  TrainConfig cfg;
  cfg.model = kMicro;
  cfg.batch_size = 8;
  cfg.grad_accum = 2;
  cfg.total_iters = 12;
  cfg.eval_interval = 4;
  cfg.seed = 77;
  cfg.dataset_dir = train_dir.string();
  cfg.val_dir = val_dir.string();

  cfg.out_dir = out_a.string();
  train(cfg);
  cfg.out_dir = out_b.string();
  train(cfg);

  CHECK(slurp(out_a / "metrics.txt") == slurp(out_b / "metrics.txt"));
  CHECK(slurp(out_a / "model.ckpt") == slurp(out_b / "model.ckpt"));
}

TEST_CASE("train: zero iterations snapshots the initialization") {
  const fs::path train_dir = synth_shards("zero_train", 64, 51);
  const fs::path val_dir = synth_shards("zero_val", 32, 52);

  TrainConfig cfg;
  cfg.model = kMicro;
  cfg.batch_size = 4;
  cfg.total_iters = 0;
  cfg.seed = 9;
  cfg.dataset_dir = train_dir.string();
  cfg.val_dir = val_dir.string();
  cfg.out_dir = fresh_dir("zero_a").string();

  const TrainResult res = train(cfg);
  CHECK(res.completed);
  CHECK(res.iters_run == 0);
  const LoadedCheckpoint ck = load_checkpoint(res.checkpoint_path, kMicro);
  CHECK(ck.opt.iter == 0);

  // training 3 iters from that checkpoint matches training 3 iters fresh with
  // the same seed, so the snapshot really is the seed's initialization
  TrainConfig fresh = cfg;
  fresh.total_iters = 3;
  fresh.eval_interval = 1;
  fresh.out_dir = fresh_dir("zero_fresh").string();
  const TrainResult fresh_res = train(fresh);

  TrainConfig from_ckpt = fresh;
  from_ckpt.init_checkpoint = res.checkpoint_path;
  from_ckpt.out_dir = fresh_dir("zero_warm").string();
  const TrainResult warm_res = train(from_ckpt);

  CHECK(slurp(fresh_res.metrics_path) == slurp(warm_res.metrics_path));
  CHECK(slurp(fresh_res.checkpoint_path) == slurp(warm_res.checkpoint_path));
}

TEST_CASE("train: resume from an interval checkpoint reproduces the run") {
  const fs::path train_dir = synth_shards("res_train", 96, 61);
  const fs::path val_dir = synth_shards("res_val", 32, 62);

  TrainConfig cfg;
  cfg.model = kMicro;
  cfg.batch_size = 8;
  cfg.total_iters = 9;
  cfg.eval_interval = 3;
  cfg.checkpoint_interval = 3;
  cfg.seed = 7;
  cfg.dataset_dir = train_dir.string();
  cfg.val_dir = val_dir.string();

  cfg.out_dir = fresh_dir("res_full").string();
  const TrainResult full = train(cfg);
  const fs::path mid = fs::path(cfg.out_dir) / "model_000003.ckpt";
  REQUIRE(fs::exists(mid));
  REQUIRE(fs::exists(fs::path(cfg.out_dir) / "model_000006.ckpt"));

  TrainConfig cont = cfg;  // identical schedule, picked up mid-flight
  cont.out_dir = fresh_dir("res_cont").string();
  cont.init_checkpoint = mid.string();
  cont.resume = true;
  const TrainResult cont_res = train(cont);
  CHECK(cont_res.iters_run == 6);  // iters 3..8

  CHECK(slurp(full.checkpoint_path) == slurp(cont_res.checkpoint_path));

  // the continuation's metrics lines equal the full run's from iter 3 on
  const std::string resumed = slurp(cont_res.metrics_path);
  std::istringstream full_log(slurp(full.metrics_path));
  std::string line;
  int matched = 0;
  while (std::getline(full_log, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (std::stoi(line) < 3) continue;
    CHECK(resumed.find(line + "\n") != std::string::npos);
    ++matched;
  }
  CHECK(matched == 3);  // iters 3, 6, 8
}

TEST_CASE("train: fine-tune start requires a matching config") {
  const fs::path train_dir = synth_shards("ft_train", 64, 71);
  const fs::path val_dir = synth_shards("ft_val", 32, 72);

  TrainConfig cfg;
  cfg.model = kMicro;
  cfg.batch_size = 4;
  cfg.total_iters = 2;
  cfg.seed = 3;
  cfg.dataset_dir = train_dir.string();
  cfg.val_dir = val_dir.string();
  cfg.out_dir = fresh_dir("ft_a").string();
  const TrainResult res = train(cfg);

  TrainConfig wrong = cfg;
  wrong.model = model_preset("pico");
  wrong.init_checkpoint = res.checkpoint_path;
  wrong.out_dir = fresh_dir("ft_b").string();
  CHECK_THROWS_AS(train(wrong), ConfigMismatch);

  TrainConfig no_ckpt = cfg;
  no_ckpt.resume = true;
  no_ckpt.init_checkpoint.clear();
  CHECK_THROWS_AS(train(no_ckpt), InvalidConfig);
}

TEST_CASE("train: halts on non-finite loss and keeps the last good state") {
  const fs::path train_dir = synth_shards("nan_train", 64, 81);
  const fs::path val_dir = synth_shards("nan_val", 32, 82);
  const fs::path out = fresh_dir("nan_out");

  TrainConfig cfg;
  cfg.model = kMicro;
  cfg.batch_size = 4;
  cfg.total_iters = 6;
  cfg.eval_interval = 1;
  cfg.max_lr = 1e30;  // guaranteed blow-up
  cfg.min_lr = 1e29;
  cfg.seed = 13;
  cfg.dataset_dir = train_dir.string();
  cfg.val_dir = val_dir.string();
  cfg.out_dir = out.string();

  const TrainResult res = train(cfg);
  CHECK(!res.completed);
  CHECK(res.iters_run < 6);

  const LoadedCheckpoint ck = load_checkpoint(res.checkpoint_path, kMicro);
  CHECK(all_finite(ck.params));
  CHECK(slurp(res.metrics_path).find("# halted at iter") != std::string::npos);
}

TEST_CASE("train: config validation") {
  const fs::path train_dir = synth_shards("val_train", 16, 91);
  const fs::path val_dir = synth_shards("val_val", 16, 92);
  const fs::path empty = fresh_dir("val_empty");

  TrainConfig good;
  good.model = kMicro;
  good.batch_size = 2;
  good.total_iters = 1;
  good.dataset_dir = train_dir.string();
  good.val_dir = val_dir.string();
  good.out_dir = fresh_dir("val_out").string();

  TrainConfig c = good;
  c.batch_size = 0;
  CHECK_THROWS_AS(train(c), InvalidConfig);
  c = good;
  c.grad_accum = 0;
  CHECK_THROWS_AS(train(c), InvalidConfig);
  c = good;
  c.eval_interval = 0;
  CHECK_THROWS_AS(train(c), InvalidConfig);
  c = good;
  c.warmup_iters = 5;  // > total_iters
  CHECK_THROWS_AS(train(c), InvalidConfig);
  c = good;
  c.min_lr = 0;
  CHECK_THROWS_AS(train(c), InvalidConfig);
  c = good;
  c.dataset_dir = empty.string();
  CHECK_THROWS_AS(train(c), InvalidConfig);
  c = good;
  c.val_dir = empty.string();
  CHECK_THROWS_AS(train(c), InvalidConfig);
  c = good;
  c.val_dir.clear();
  CHECK_THROWS_AS(train(c), InvalidConfig);
}

TEST_CASE("train: gradient accumulation approximates the fused batch") {
  const fs::path train_dir = synth_shards("acc_train", 128, 95);
  const fs::path val_dir = synth_shards("acc_val", 32, 96);

  TrainConfig fused;
  fused.model = kMicro;
  fused.batch_size = 16;
  fused.grad_accum = 1;
  fused.total_iters = 1;
  fused.eval_interval = 1;
  fused.seed = 19;
  fused.dataset_dir = train_dir.string();
  fused.val_dir = val_dir.string();
  fused.out_dir = fresh_dir("acc_a").string();
  const TrainResult a = train(fused);

  TrainConfig split = fused;
  split.batch_size = 8;
  split.grad_accum = 2;
  split.out_dir = fresh_dir("acc_b").string();
  const TrainResult b = train(split);

  // same 16 samples in the same order, so the averaged loss agrees to float
  // round-off even though the micro-batching differs
  const auto la = parse_metrics(a.metrics_path);
  const auto lb = parse_metrics(b.metrics_path);
  REQUIRE(la.size() == 1);
  REQUIRE(lb.size() == 1);
  CHECK(la[0].train == doctest::Approx(lb[0].train).epsilon(1e-4));
}
