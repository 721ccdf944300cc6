#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mapf/model.hpp"
#include "mapf/tokenizer.hpp"

namespace mapf {

/// One training run: stream shards, accumulate gradients, step AdamW on a
/// warmup+cosine schedule, log validation metrics, checkpoint.
struct TrainConfig {
  ModelConfig model;
  int batch_size = 64;   // samples per micro-step
  int grad_accum = 1;    // micro-steps per optimizer step
  int total_iters = 2000;
  int eval_interval = 200;      // metrics cadence, in optimizer steps
  int checkpoint_interval = 0;  // 0: write only at the end (or on halt)
  int warmup_iters = -1;        // -1: total_iters / 10, at least 1
  double max_lr = 6e-4;
  double min_lr = 6e-5;
  std::uint64_t seed = 0;
  std::string dataset_dir;      // training shards
  std::string val_dir;          // held-out shards
  std::string out_dir;          // checkpoint + metrics log
  std::string init_checkpoint;  // optional warm start (fine-tuning)
  bool resume = false;          // continue at the checkpoint's step count
};

/// Deterministic epoch-aware order over dataset indices: every epoch is an
/// independent seeded permutation, consumed sequentially, so each record is
/// visited exactly once per epoch.
class SampleStream {
 public:
  SampleStream(std::size_t n, std::uint64_t seed);
  std::size_t next();
  void skip(std::uint64_t count);
  std::uint64_t consumed() const { return consumed_; }
  std::uint64_t epoch() const { return epoch_; }

 private:
  void reshuffle();
  std::size_t n_;
  std::uint64_t seed_;
  std::uint64_t epoch_ = 0;
  std::size_t pos_ = 0;
  std::uint64_t consumed_ = 0;
  std::vector<std::size_t> order_;
};

struct EvalStats {
  double loss = 0;
  double accuracy = 0;  // argmax hit rate
};

/// Mean cross-entropy and argmax accuracy over the whole sample set.
EvalStats evaluate_loss(const ModelConfig& cfg, const ModelParams<float>& params,
                        std::span<const TokenizedSample> samples);

struct TrainResult {
  bool completed = true;  // false: halted on non-finite loss
  int iters_run = 0;      // optimizer steps performed by this call
  double final_train_loss = 0;
  EvalStats final_val;
  std::string checkpoint_path;
  std::string metrics_path;
};

TrainResult train(const TrainConfig& cfg);

}  // namespace mapf
