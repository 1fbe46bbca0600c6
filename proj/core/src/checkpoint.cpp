#include "smoe/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace smoe {

namespace {

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out.insert(out.end(), b, b + n);
  }
  template <typename T>
  void le(T value) {
    static_assert(std::is_integral_v<T>);
    for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
  }
  void f64(double v) { le(std::bit_cast<std::uint64_t>(v)); }

  std::vector<std::uint8_t> out;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& b, std::size_t limit) : buf(b), end(limit) {}

  void need(std::size_t n) const {
    if (pos + n > end) throw DataError("checkpoint truncated");
  }
  template <typename T>
  T le() {
    need(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<T>(buf[pos + i]) << (8 * i));
    pos += sizeof(T);
    return v;
  }
  double f64() { return std::bit_cast<double>(le<std::uint64_t>()); }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(buf.data() + pos), n);
    pos += n;
    return s;
  }

  const std::vector<std::uint8_t>& buf;
  std::size_t pos = 0;
  std::size_t end;
};

std::uint32_t crc_of(const std::uint8_t* data, std::size_t n) {
  return static_cast<std::uint32_t>(crc32(crc32(0L, Z_NULL, 0), data, static_cast<uInt>(n)));
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Model& model, const AdamState* optimizer) {
  const auto params = model.parameters();
  Writer w;
  w.bytes(kCheckpointMagic, sizeof(kCheckpointMagic));
  w.le<std::uint32_t>(kCheckpointVersion);
  const auto& c = model.config();
  w.le<std::uint32_t>(static_cast<std::uint32_t>(c.depth));
  w.le<std::uint32_t>(static_cast<std::uint32_t>(c.base_channels));
  w.le<std::uint32_t>(static_cast<std::uint32_t>(c.input_channels));
  w.le<std::uint8_t>(c.smoe_enabled ? 1 : 0);
  w.le<std::uint32_t>(static_cast<std::uint32_t>(c.tsk_rules));
  w.le<std::uint8_t>(static_cast<std::uint8_t>(c.semantic_tap));
  w.le<std::uint8_t>(c.standardize_input ? 1 : 0);
  const bool with_opt = optimizer != nullptr;
  if (with_opt && !optimizer->matches(params)) throw Error("optimizer state does not match the model parameters");
  w.le<std::uint8_t>(with_opt ? 1 : 0);
  if (with_opt) {
    w.f64(optimizer->lr);
    w.f64(optimizer->beta1);
    w.f64(optimizer->beta2);
    w.f64(optimizer->eps);
    w.le<std::uint64_t>(optimizer->step);
  }
  w.le<std::uint32_t>(static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    w.le<std::uint32_t>(static_cast<std::uint32_t>(p.name.size()));
    w.bytes(p.name.data(), p.name.size());
    w.le<std::uint32_t>(static_cast<std::uint32_t>(p.tensor.rank()));
    for (auto e : p.tensor.shape()) w.le<std::uint64_t>(e);
    for (double v : p.tensor.data()) w.f64(v);
  }
  if (with_opt) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      for (double v : optimizer->m[i]) w.f64(v);
      for (double v : optimizer->v[i]) w.f64(v);
    }
  }
  w.le<std::uint32_t>(crc_of(w.out.data(), w.out.size()));
  return std::move(w.out);
}

LoadedCheckpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < sizeof(kCheckpointMagic) || std::memcmp(bytes.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0) {
    throw DataError("not a checkpoint: bad magic bytes");
  }
  if (bytes.size() < sizeof(kCheckpointMagic) + 8) throw DataError("checkpoint truncated");
  Reader r(bytes, bytes.size() - 4);
  r.pos = sizeof(kCheckpointMagic);
  const auto version = r.le<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                    std::to_string(kCheckpointVersion) + ")");
  }
  ModelConfig cfg;
  cfg.depth = r.le<std::uint32_t>();
  cfg.base_channels = r.le<std::uint32_t>();
  cfg.input_channels = r.le<std::uint32_t>();
  cfg.smoe_enabled = r.le<std::uint8_t>() != 0;
  cfg.tsk_rules = r.le<std::uint32_t>();
  const auto tap = r.le<std::uint8_t>();
  if (tap > 1) throw DataError("checkpoint has an unknown semantic tap");
  cfg.semantic_tap = static_cast<SemanticTap>(tap);
  cfg.standardize_input = r.le<std::uint8_t>() != 0;
  const bool with_opt = r.le<std::uint8_t>() != 0;
  AdamState opt;
  if (with_opt) {
    opt.lr = r.f64();
    opt.beta1 = r.f64();
    opt.beta2 = r.f64();
    opt.eps = r.f64();
    opt.step = r.le<std::uint64_t>();
  }
  // Verify the checksum before trusting any sizes below.
  const std::size_t body = bytes.size() - 4;
  std::uint32_t stored = 0;
  for (std::size_t i = 0; i < 4; ++i) stored |= static_cast<std::uint32_t>(bytes[body + i]) << (8 * i);

  try {
    cfg.validate();
  } catch (const Error& e) {
    throw DataError(std::string("checkpoint config invalid: ") + e.what());
  }
  if (cfg.depth > 16 || cfg.base_channels > 4096 || cfg.tsk_rules > 4096) {
    throw DataError("checkpoint config out of range");
  }
  if (crc_of(bytes.data(), body) != stored) throw DataError("checkpoint checksum mismatch (file corrupted)");

  Model model(cfg, 0);
  auto params = model.parameters();
  const auto count = r.le<std::uint32_t>();
  if (count != params.size()) {
    throw DataError("checkpoint holds " + std::to_string(count) + " parameters, model expects " +
                    std::to_string(params.size()));
  }
  for (auto& p : params) {
    const auto name = r.str(r.le<std::uint32_t>());
    if (name != p.name) throw DataError("checkpoint parameter '" + name + "' where '" + p.name + "' was expected");
    const auto rank = r.le<std::uint32_t>();
    Shape shape(rank);
    for (auto& e : shape) e = static_cast<std::size_t>(r.le<std::uint64_t>());
    if (shape != p.tensor.shape()) {
      throw DataError("checkpoint parameter " + name + " has shape " + shape_str(shape) + ", expected " +
                      shape_str(p.tensor.shape()));
    }
    for (double& v : p.tensor.mutable_data()) v = r.f64();
  }
  std::optional<AdamState> optimizer;
  if (with_opt) {
    const auto step = opt.step;
    opt.reset(params);
    opt.step = step;
    for (std::size_t i = 0; i < params.size(); ++i) {
      for (double& v : opt.m[i]) v = r.f64();
      for (double& v : opt.v[i]) v = r.f64();
    }
    optimizer = std::move(opt);
  }
  if (r.pos != body) throw DataError("checkpoint has trailing bytes");
  return {std::move(model), std::move(optimizer)};
}

void save_checkpoint(const std::filesystem::path& path, const Model& model, const AdamState* optimizer) {
  const auto bytes = encode_checkpoint(model, optimizer);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing checkpoint " + path.string());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected) {
  auto loaded = load_checkpoint(path);
  const auto d = loaded.model.config().diff(expected);
  if (!d.empty()) throw DataError("checkpoint config does not match the requested model (" + d + ")");
  return loaded;
}

}  // namespace smoe
