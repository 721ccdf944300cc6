#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "mapf/rng.hpp"
#include "mapf/tokenizer.hpp"

namespace mapf {

template <typename Scalar>
using MatX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using VecX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

struct ModelConfig {
  int n_layers = 2;
  int n_heads = 2;
  int d_embed = 64;
  int vocab_size = kVocabSize;
  int context = kSampleTokens;
  int n_actions = kNumActions;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Named sizes: pico {2,2,64}, mini {4,4,128}, and the reference ladder
/// base160 {5,5,160}, base256 {8,8,256}, base768 {12,12,768}.
ModelConfig model_preset(std::string_view name);

void check_model_config(const ModelConfig& cfg);
std::int64_t parameter_count(const ModelConfig& cfg);

/// Decoder-style transformer weights. Linear layers carry no bias terms;
/// the two layer norms per block and the final norm carry gain and bias.
template <typename Scalar>
struct ModelParams {
  struct Block {
    VecX<Scalar> ln1_gain, ln1_bias;
    MatX<Scalar> wq, wk, wv, wo;      // d x d each
    VecX<Scalar> ln2_gain, ln2_bias;
    MatX<Scalar> w_fc;                // d x 4d
    MatX<Scalar> w_proj;              // 4d x d
  };
  MatX<Scalar> token_embedding;     // vocab x d
  MatX<Scalar> position_embedding;  // context x d
  std::vector<Block> blocks;
  VecX<Scalar> lnf_gain, lnf_bias;
  MatX<Scalar> head;                // d x n_actions
};

/// Visits every tensor in a fixed declaration order. fn(name, matrix_ref,
/// wants_weight_decay); vectors are passed as 1-column matrix maps.
template <typename Scalar, typename Fn>
void for_each_tensor(ModelParams<Scalar>& p, Fn&& fn) {
  auto vec = [&](const char* name, VecX<Scalar>& v) {
    Eigen::Map<MatX<Scalar>> m(v.data(), v.size(), 1);
    fn(name, m, false);
  };
  auto mat = [&](const char* name, MatX<Scalar>& w) {
    Eigen::Map<MatX<Scalar>> m(w.data(), w.rows(), w.cols());
    fn(name, m, true);
  };
  mat("token_embedding", p.token_embedding);
  mat("position_embedding", p.position_embedding);
  std::string scratch;
  for (std::size_t l = 0; l < p.blocks.size(); ++l) {
    auto& b = p.blocks[l];
    auto named = [&](const char* field) {
      scratch = "block" + std::to_string(l) + "." + field;
      return scratch.c_str();
    };
    vec(named("ln1_gain"), b.ln1_gain);
    vec(named("ln1_bias"), b.ln1_bias);
    mat(named("wq"), b.wq);
    mat(named("wk"), b.wk);
    mat(named("wv"), b.wv);
    mat(named("wo"), b.wo);
    vec(named("ln2_gain"), b.ln2_gain);
    vec(named("ln2_bias"), b.ln2_bias);
    mat(named("w_fc"), b.w_fc);
    mat(named("w_proj"), b.w_proj);
  }
  vec("lnf_gain", p.lnf_gain);
  vec("lnf_bias", p.lnf_bias);
  mat("head", p.head);
}

template <typename Scalar, typename Fn>
void for_each_tensor(const ModelParams<Scalar>& p, Fn&& fn) {
  auto vec = [&](const char* name, const VecX<Scalar>& v) {
    Eigen::Map<const MatX<Scalar>> m(v.data(), v.size(), 1);
    fn(name, m, false);
  };
  auto mat = [&](const char* name, const MatX<Scalar>& w) {
    Eigen::Map<const MatX<Scalar>> m(w.data(), w.rows(), w.cols());
    fn(name, m, true);
  };
  mat("token_embedding", p.token_embedding);
  mat("position_embedding", p.position_embedding);
  std::string scratch;
  for (std::size_t l = 0; l < p.blocks.size(); ++l) {
    const auto& b = p.blocks[l];
    auto named = [&](const char* field) {
      scratch = "block" + std::to_string(l) + "." + field;
      return scratch.c_str();
    };
    vec(named("ln1_gain"), b.ln1_gain);
    vec(named("ln1_bias"), b.ln1_bias);
    mat(named("wq"), b.wq);
    mat(named("wk"), b.wk);
    mat(named("wv"), b.wv);
    mat(named("wo"), b.wo);
    vec(named("ln2_gain"), b.ln2_gain);
    vec(named("ln2_bias"), b.ln2_bias);
    mat(named("w_fc"), b.w_fc);
    mat(named("w_proj"), b.w_proj);
  }
  vec("lnf_gain", p.lnf_gain);
  vec("lnf_bias", p.lnf_bias);
  mat("head", p.head);
}

template <typename Scalar>
ModelParams<Scalar> zero_params(const ModelConfig& cfg);

/// Gaussian(0, 0.02^2) weights and embeddings, unit norm gains, zero biases,
/// filled in declaration order from one seeded stream.
template <typename Scalar>
ModelParams<Scalar> init_params(const ModelConfig& cfg, std::uint64_t seed);

/// Unmasked self-attention encoder over the 256 tokens; the action logits
/// are read from position 0 after the final norm. Returns batch x n_actions.
template <typename Scalar>
MatX<Scalar> forward(const ModelConfig& cfg, const ModelParams<Scalar>& params,
                     std::span<const TokenSeq> batch);

template <typename Scalar>
struct LossResult {
  Scalar loss = 0;
  ModelParams<Scalar> grads;
};

/// Mean cross-entropy over the batch plus exact gradients for every tensor.
template <typename Scalar>
LossResult<Scalar> loss_and_grads(const ModelConfig& cfg, const ModelParams<Scalar>& params,
                                  std::span<const TokenSeq> batch,
                                  std::span<const std::uint8_t> labels);

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.95;
  double eps = 1e-8;
  double weight_decay = 0.1;  // decoupled, weight matrices only
  double clip_norm = 1.0;     // global gradient norm
};

template <typename Scalar>
struct OptimizerState {
  ModelParams<Scalar> m, v;
  std::int64_t iter = 0;
};

template <typename Scalar>
OptimizerState<Scalar> init_optimizer(const ModelConfig& cfg);

template <typename Scalar>
void adamw_step(const ModelConfig& cfg, ModelParams<Scalar>& params,
                const ModelParams<Scalar>& grads, OptimizerState<Scalar>& state, double lr,
                const AdamWConfig& opt = {});

struct LrSchedule {
  int warmup = 2000;
  double max_lr = 6e-4;
  double min_lr = 6e-5;
  int total = 10000;
};

/// Linear 0 -> max over [0, warmup], cosine max -> min over (warmup, total],
/// constant min afterward.
double lr_at(int iter, const LrSchedule& s);

/// Softmax then one multinomial draw; deterministic per rng state.
template <typename Scalar>
int sample_action(std::span<const Scalar> logits, Rng& rng);

/// Binary snapshot: config and vocabulary hash in the header, then float32
/// little-endian tensors in declaration order, optionally followed by the
/// AdamW moments and step counter.
void save_checkpoint(const std::string& path, const ModelConfig& cfg,
                     const ModelParams<float>& params,
                     const OptimizerState<float>* opt = nullptr);

struct LoadedCheckpoint {
  ModelConfig config;
  ModelParams<float> params;
  bool has_optimizer = false;
  OptimizerState<float> opt;  // meaningful only when has_optimizer
};

LoadedCheckpoint load_checkpoint(const std::string& path);

/// Same, but throws ConfigMismatch when the stored config differs from
/// `expected`.
LoadedCheckpoint load_checkpoint(const std::string& path, const ModelConfig& expected);

}  // namespace mapf
