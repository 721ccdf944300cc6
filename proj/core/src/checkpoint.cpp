#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "mapf/errors.hpp"
#include "mapf/model.hpp"
#include "mapf/tokenizer.hpp"

namespace mapf {
namespace {

constexpr char kMagic[8] = {'M', 'A', 'P', 'F', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  put_u32(out, bits);
}

void put_tensors(std::string& out, const ModelParams<float>& p) {
  for_each_tensor(p, [&](const char*, const auto& m, bool) {
    for (Eigen::Index i = 0; i < m.size(); ++i) put_f32(out, m.data()[i]);
  });
}

// Cursor over a fully loaded file; every read is bounds-checked.
struct Reader {
  const std::string& buf;
  const std::string& path;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > buf.size()) throw CorruptShard("truncated checkpoint " + path);
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos + static_cast<std::size_t>(i)])) << (8 * i);
    pos += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos + static_cast<std::size_t>(i)])) << (8 * i);
    pos += 8;
    return v;
  }
  float f32() {
    const std::uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
  }
  void tensors(ModelParams<float>& p) {
    for_each_tensor(p, [&](const char*, auto m, bool) {
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = f32();
    });
  }
};

}  // namespace

void save_checkpoint(const std::string& path, const ModelConfig& cfg,
                     const ModelParams<float>& params, const OptimizerState<float>* opt) {
  check_model_config(cfg);
  std::string out;
  out.append(kMagic, sizeof kMagic);
  put_u32(out, kVersion);
  for (int field : {cfg.n_layers, cfg.n_heads, cfg.d_embed, cfg.vocab_size, cfg.context,
                    cfg.n_actions})
    put_u32(out, static_cast<std::uint32_t>(field));
  put_u64(out, vocabulary_hash());
  out.push_back(opt ? 1 : 0);
  put_tensors(out, params);
  if (opt) {
    put_tensors(out, opt->m);
    put_tensors(out, opt->v);
    put_u64(out, static_cast<std::uint64_t>(opt->iter));
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw PipelineError("save_checkpoint: cannot open " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw PipelineError("save_checkpoint: short write to " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CorruptShard("cannot open checkpoint " + path);
  std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

  Reader r{buf, path};
  r.need(sizeof kMagic);
  if (std::memcmp(buf.data(), kMagic, sizeof kMagic) != 0)
    throw CorruptShard("bad magic in checkpoint " + path);
  r.pos = sizeof kMagic;
  const std::uint32_t version = r.u32();
  if (version != kVersion)
    throw CorruptShard("unsupported checkpoint version " + std::to_string(version) + " in " +
                       path);

  LoadedCheckpoint ck;
  ModelConfig& cfg = ck.config;
  cfg.n_layers = static_cast<int>(r.u32());
  cfg.n_heads = static_cast<int>(r.u32());
  cfg.d_embed = static_cast<int>(r.u32());
  cfg.vocab_size = static_cast<int>(r.u32());
  cfg.context = static_cast<int>(r.u32());
  cfg.n_actions = static_cast<int>(r.u32());
  try {
    check_model_config(cfg);
  } catch (const InvalidConfig& e) {
    throw CorruptShard("checkpoint " + path + " stores an unusable config: " + e.what());
  }
  const std::uint64_t vocab = r.u64();
  if (vocab != vocabulary_hash())
    throw IncompatibleVocabulary("checkpoint " + path + " was built under a different vocabulary");

  r.need(1);
  const unsigned char opt_flag = static_cast<unsigned char>(buf[r.pos++]);
  if (opt_flag > 1) throw CorruptShard("bad optimizer flag in checkpoint " + path);
  ck.has_optimizer = opt_flag == 1;

  ck.params = zero_params<float>(cfg);
  r.tensors(ck.params);
  if (ck.has_optimizer) {
    ck.opt = init_optimizer<float>(cfg);
    r.tensors(ck.opt.m);
    r.tensors(ck.opt.v);
    ck.opt.iter = static_cast<std::int64_t>(r.u64());
  }
  if (r.pos != buf.size())
    throw CorruptShard("checkpoint " + path + " has trailing bytes");
  return ck;
}

LoadedCheckpoint load_checkpoint(const std::string& path, const ModelConfig& expected) {
  LoadedCheckpoint ck = load_checkpoint(path);
  if (!(ck.config == expected))
    throw ConfigMismatch("checkpoint " + path + " stores a different model config (layers " +
                         std::to_string(ck.config.n_layers) + ", heads " +
                         std::to_string(ck.config.n_heads) + ", embed " +
                         std::to_string(ck.config.d_embed) + ")");
  return ck;
}

}  // namespace mapf
