#include "mapf/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <vector>

#include "mapf/dataset.hpp"
#include "mapf/errors.hpp"
#include "mapf/rng.hpp"

namespace mapf {
namespace {

namespace fs = std::filesystem;

// Stream tags for deriving independent RNGs from the run seed.
constexpr std::uint64_t kInitStream = 0x696e6974;   // "init"
constexpr std::uint64_t kOrderStream = 0x6f726472;  // "ordr"

void zero_inplace(ModelParams<float>& p) {
  for_each_tensor(p, [](const char*, auto m, bool) { m.setZero(); });
}

void accumulate_scaled(ModelParams<float>& acc, const ModelParams<float>& add, float scale) {
  std::vector<Eigen::Map<const MatX<float>>> src;
  for_each_tensor(add, [&](const char*, auto m, bool) { src.push_back(m); });
  std::size_t i = 0;
  for_each_tensor(acc, [&](const char*, auto m, bool) { m.array() += src[i++].array() * scale; });
}

void validate(const TrainConfig& cfg) {
  check_model_config(cfg.model);
  if (cfg.batch_size < 1) throw InvalidConfig("train: batch_size must be >= 1");
  if (cfg.grad_accum < 1) throw InvalidConfig("train: grad_accum must be >= 1");
  if (cfg.total_iters < 0) throw InvalidConfig("train: total_iters must be >= 0");
  if (cfg.eval_interval < 1) throw InvalidConfig("train: eval_interval must be >= 1");
  if (cfg.checkpoint_interval < 0) throw InvalidConfig("train: checkpoint_interval must be >= 0");
  if (cfg.max_lr <= 0 || cfg.min_lr <= 0 || cfg.min_lr > cfg.max_lr)
    throw InvalidConfig("train: need 0 < min_lr <= max_lr");
  if (cfg.dataset_dir.empty()) throw InvalidConfig("train: dataset_dir is required");
  if (cfg.val_dir.empty()) throw InvalidConfig("train: val_dir is required");
  if (cfg.out_dir.empty()) throw InvalidConfig("train: out_dir is required");
  if (cfg.resume && cfg.init_checkpoint.empty())
    throw InvalidConfig("train: resume needs init_checkpoint");
  if (cfg.warmup_iters > cfg.total_iters)
    throw InvalidConfig("train: warmup_iters exceeds total_iters");
}

}  // namespace

SampleStream::SampleStream(std::size_t n, std::uint64_t seed) : n_(n), seed_(seed) {
  if (n == 0) throw InvalidConfig("SampleStream: empty dataset");
  reshuffle();
}

void SampleStream::reshuffle() {
  order_.resize(n_);
  for (std::size_t i = 0; i < n_; ++i) order_[i] = i;
  Rng rng(mix_seed(seed_, epoch_));
  rng.shuffle(order_);
  pos_ = 0;
}

std::size_t SampleStream::next() {
  if (pos_ == n_) {
    ++epoch_;
    reshuffle();
  }
  ++consumed_;
  return order_[pos_++];
}

void SampleStream::skip(std::uint64_t count) {
  consumed_ += count;
  std::uint64_t left = count;
  while (left >= n_ - pos_) {
    left -= n_ - pos_;
    ++epoch_;
    reshuffle();
  }
  pos_ += static_cast<std::size_t>(left);
}

EvalStats evaluate_loss(const ModelConfig& cfg, const ModelParams<float>& params,
                        std::span<const TokenizedSample> samples) {
  if (samples.empty()) throw InvalidConfig("evaluate_loss: empty sample set");
  check_model_config(cfg);

  constexpr std::size_t kChunk = 128;
  std::vector<TokenSeq> buf;
  double total_loss = 0;
  std::size_t correct = 0;
  for (std::size_t at = 0; at < samples.size(); at += kChunk) {
    const std::size_t n = std::min(kChunk, samples.size() - at);
    buf.resize(n);
    for (std::size_t i = 0; i < n; ++i) buf[i] = samples[at + i].tokens;
    const MatX<float> logits = forward<float>(cfg, params, buf);
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = logits.row(static_cast<Eigen::Index>(i));
      const int label = samples[at + i].label;
      Eigen::Index argmax = 0;
      row.maxCoeff(&argmax);
      if (static_cast<int>(argmax) == label) ++correct;
      const double mx = row.maxCoeff();
      double sum = 0;
      for (Eigen::Index a = 0; a < row.size(); ++a)
        sum += std::exp(static_cast<double>(row(a)) - mx);
      total_loss -= static_cast<double>(row(label)) - mx - std::log(sum);
    }
  }
  return {total_loss / static_cast<double>(samples.size()),
          static_cast<double>(correct) / static_cast<double>(samples.size())};
}

TrainResult train(const TrainConfig& cfg) {
  validate(cfg);
  const std::vector<TokenizedSample> data = read_shards(cfg.dataset_dir);
  if (data.empty()) throw InvalidConfig("train: dataset at " + cfg.dataset_dir + " is empty");
  const std::vector<TokenizedSample> val = read_shards(cfg.val_dir);
  if (val.empty()) throw InvalidConfig("train: validation set at " + cfg.val_dir + " is empty");
  fs::create_directories(cfg.out_dir);

  ModelParams<float> params;
  OptimizerState<float> opt = init_optimizer<float>(cfg.model);
  int start_iter = 0;
  if (!cfg.init_checkpoint.empty()) {
    LoadedCheckpoint ck = load_checkpoint(cfg.init_checkpoint, cfg.model);
    params = std::move(ck.params);
    if (cfg.resume) {
      if (!ck.has_optimizer)
        throw InvalidConfig("train: resume checkpoint has no optimizer state");
      opt = std::move(ck.opt);
      start_iter = static_cast<int>(opt.iter);
    }
  } else {
    params = init_params<float>(cfg.model, mix_seed(cfg.seed, kInitStream));
  }

  LrSchedule sched;
  sched.max_lr = cfg.max_lr;
  sched.min_lr = cfg.min_lr;
  sched.total = std::max(cfg.total_iters, 1);
  sched.warmup =
      cfg.warmup_iters >= 0 ? cfg.warmup_iters : std::max(1, cfg.total_iters / 10);

  SampleStream stream(data.size(), mix_seed(cfg.seed, kOrderStream));
  stream.skip(static_cast<std::uint64_t>(start_iter) *
              static_cast<std::uint64_t>(cfg.batch_size) *
              static_cast<std::uint64_t>(cfg.grad_accum));

  TrainResult res;
  res.checkpoint_path = (fs::path(cfg.out_dir) / "model.ckpt").string();
  res.metrics_path = (fs::path(cfg.out_dir) / "metrics.txt").string();

  std::ofstream log(res.metrics_path,
                    start_iter > 0 ? std::ios::app : std::ios::trunc);
  if (!log) throw PipelineError("train: cannot open " + res.metrics_path);
  if (start_iter == 0) log << "# iter lr train_loss val_loss val_acc\n";

  // Last state known to produce finite numbers, retained across a halt.
  ModelParams<float> good_params = params;
  OptimizerState<float> good_opt = opt;

  const auto save = [&](const ModelParams<float>& p, const OptimizerState<float>& o) {
    save_checkpoint(res.checkpoint_path, cfg.model, p, &o);
  };

  std::vector<TokenSeq> mb(static_cast<std::size_t>(cfg.batch_size));
  std::vector<std::uint8_t> ml(static_cast<std::size_t>(cfg.batch_size));
  ModelParams<float> grads = zero_params<float>(cfg.model);
  char line[192];

  for (int it = start_iter; it < cfg.total_iters; ++it) {
    double train_loss = 0;
    bool bad = false;
    std::string why;
    try {
      zero_inplace(grads);
      for (int k = 0; k < cfg.grad_accum; ++k) {
        for (int b = 0; b < cfg.batch_size; ++b) {
          const TokenizedSample& s = data[stream.next()];
          mb[static_cast<std::size_t>(b)] = s.tokens;
          ml[static_cast<std::size_t>(b)] = s.label;
        }
        const LossResult<float> r = loss_and_grads<float>(cfg.model, params, mb, ml);
        accumulate_scaled(grads, r.grads, 1.0f / static_cast<float>(cfg.grad_accum));
        train_loss += static_cast<double>(r.loss) / cfg.grad_accum;
      }
      if (!std::isfinite(train_loss)) throw NumericalError("non-finite train loss");
    } catch (const NumericalError& e) {
      bad = true;
      why = e.what();
    }
    if (bad) {
      save(good_params, good_opt);
      log << "# halted at iter " << it << ": " << why << "\n";
      log.flush();
      res.completed = false;
      res.iters_run = it - start_iter;
      return res;
    }

    // Optimizer steps are 1-based on the schedule so the first one already
    // has a positive learning rate.
    const double lr = lr_at(it + 1, sched);
    if (it % cfg.eval_interval == 0 || it == cfg.total_iters - 1) {
      const EvalStats vs = evaluate_loss(cfg.model, params, val);
      std::snprintf(line, sizeof line, "%d %.8e %.8f %.8f %.8f\n", it, lr, train_loss, vs.loss,
                    vs.accuracy);
      log << line;
      log.flush();
      good_params = params;
      good_opt = opt;
      res.final_val = vs;
    }

    adamw_step<float>(cfg.model, params, grads, opt, lr);
    res.final_train_loss = train_loss;
    res.iters_run = it - start_iter + 1;

    if (cfg.checkpoint_interval > 0 && (it + 1) % cfg.checkpoint_interval == 0 &&
        it + 1 < cfg.total_iters) {
      char name[32];
      std::snprintf(name, sizeof name, "model_%06d.ckpt", it + 1);
      save_checkpoint((fs::path(cfg.out_dir) / name).string(), cfg.model, params, &opt);
    }
  }

  save(params, opt);
  return res;
}

}  // namespace mapf
