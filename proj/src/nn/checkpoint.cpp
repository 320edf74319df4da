#include "qmat/nn/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace qmat::nn {
namespace {

constexpr char kMagic[4] = {'Q', 'M', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) h = (h ^ c) * 0x100000001b3ull;
  return h;
}

struct Writer {
  std::string out;

  void raw(const void* p, std::size_t n) {
    out.append(reinterpret_cast<const char*>(p), n);
  }
  void u8(std::uint8_t v) { raw(&v, 1); }
  void u16(std::uint16_t v) { raw(&v, 2); }
  void u32(std::uint32_t v) { raw(&v, 4); }
  void u64(std::uint64_t v) { raw(&v, 8); }
  void i32(std::int32_t v) { raw(&v, 4); }
  void f64(double v) { raw(&v, 8); }
  void doubles(const std::vector<double>& v) { raw(v.data(), v.size() * sizeof(double)); }
  void blob(const std::string& name, const std::vector<double>& data,
            const std::vector<std::uint32_t>& dims) {
    u16(static_cast<std::uint16_t>(name.size()));
    raw(name.data(), name.size());
    u32(static_cast<std::uint32_t>(dims.size()));
    std::size_t n = 1;
    for (std::uint32_t d : dims) {
      u32(d);
      n *= d;
    }
    if (n != data.size()) throw CheckpointError("blob dims disagree with data size");
    doubles(data);
  }
};

struct Reader {
  std::string bytes;
  std::size_t pos = 0;
  std::string path;

  void raw(void* p, std::size_t n) {
    if (pos + n > bytes.size()) throw CheckpointError("truncated checkpoint: " + path);
    std::memcpy(p, bytes.data() + pos, n);
    pos += n;
  }
  std::uint8_t u8() { std::uint8_t v; raw(&v, 1); return v; }
  std::uint16_t u16() { std::uint16_t v; raw(&v, 2); return v; }
  std::uint32_t u32() { std::uint32_t v; raw(&v, 4); return v; }
  std::uint64_t u64() { std::uint64_t v; raw(&v, 8); return v; }
  std::int32_t i32() { std::int32_t v; raw(&v, 4); return v; }
  double f64() { double v; raw(&v, 8); return v; }
  void doubles(std::vector<double>& v) { raw(v.data(), v.size() * sizeof(double)); }
  void blob(const std::string& want_name, std::vector<double>& data) {
    std::string name(u16(), '\0');
    raw(name.data(), name.size());
    if (name != want_name)
      throw CheckpointError("checkpoint blob order mismatch: expected " + want_name +
                            ", found " + name);
    const std::uint32_t ndim = u32();
    std::size_t n = 1;
    for (std::uint32_t i = 0; i < ndim; ++i) n *= u32();
    if (n != data.size())
      throw CheckpointError("checkpoint blob " + name + " has unexpected size");
    doubles(data);
  }
};

std::vector<std::uint32_t> dims_of(const TensorPtr& t) {
  std::vector<std::uint32_t> d;
  for (int i = 0; i < t->shape.nd; ++i) d.push_back(static_cast<std::uint32_t>(t->shape.d[i]));
  return d;
}

}  // namespace

void save_checkpoint(const std::string& path, DenseNetModel& model,
                     const CheckpointMeta& meta, const AdamState* optimizer) {
  Writer w;
  w.raw(kMagic, 4);
  w.u32(kVersion);
  const DenseNetConfig& c = model.cfg;
  w.i32(c.depth);
  w.i32(c.num_blocks);
  w.i32(c.growth);
  w.i32(c.layers_per_block);
  w.i32(c.stem_channels);
  w.i32(c.nc);
  w.i32(c.in_channels);
  w.i32(c.in_h);
  w.i32(c.in_w);
  w.f64(c.dropout);
  w.i32(meta.qf2_hint);
  w.u32(static_cast<std::uint32_t>(meta.epoch));
  w.u8(optimizer ? 1 : 0);

  auto params = model.named_parameters();
  auto buffers = model.named_buffers();
  w.u32(static_cast<std::uint32_t>(params.size() + buffers.size()));
  for (auto& [name, t] : params) w.blob(name, t->data, dims_of(t));
  for (auto& [name, vec] : buffers)
    w.blob(name, *vec, {static_cast<std::uint32_t>(vec->size())});

  if (optimizer) {
    if (optimizer->m.size() != params.size())
      throw CheckpointError("optimizer state does not match model parameters");
    w.u64(optimizer->t);
    for (std::size_t i = 0; i < params.size(); ++i) {
      w.doubles(optimizer->m[i]);
      w.doubles(optimizer->v[i]);
    }
  }

  w.u64(fnv1a(w.out));

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw CheckpointError("cannot open checkpoint for writing: " + path);
  f.write(w.out.data(), static_cast<std::streamsize>(w.out.size()));
  if (!f) throw CheckpointError("checkpoint write failed: " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("cannot open checkpoint: " + path);
  Reader r;
  r.path = path;
  r.bytes.assign((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

  if (r.bytes.size() < 12 + 8) throw CheckpointError("checkpoint too small: " + path);
  const std::uint64_t stored_sum =
      *reinterpret_cast<const std::uint64_t*>(r.bytes.data() + r.bytes.size() - 8);
  const std::string body = r.bytes.substr(0, r.bytes.size() - 8);
  if (fnv1a(body) != stored_sum)
    throw CheckpointError("checkpoint checksum mismatch: " + path);

  char magic[4];
  r.raw(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw CheckpointError("bad checkpoint magic: " + path);
  if (r.u32() != kVersion) throw CheckpointError("unsupported checkpoint version: " + path);

  DenseNetConfig c;
  c.depth = r.i32();
  c.num_blocks = r.i32();
  c.growth = r.i32();
  c.layers_per_block = r.i32();
  c.stem_channels = r.i32();
  c.nc = r.i32();
  c.in_channels = r.i32();
  c.in_h = r.i32();
  c.in_w = r.i32();
  c.dropout = r.f64();

  LoadedCheckpoint out{DenseNetModel::init(c, 0), {}, std::nullopt};
  out.meta.qf2_hint = r.i32();
  out.meta.epoch = static_cast<int>(r.u32());
  const bool has_opt = r.u8() != 0;

  auto params = out.model.named_parameters();
  auto buffers = out.model.named_buffers();
  const std::uint32_t nblobs = r.u32();
  if (nblobs != params.size() + buffers.size())
    throw CheckpointError("checkpoint blob count mismatch: " + path);
  for (auto& [name, t] : params) r.blob(name, t->data);
  for (auto& [name, vec] : buffers) r.blob(name, *vec);

  if (has_opt) {
    AdamState s = AdamState::init(out.model.parameters());
    s.t = r.u64();
    for (std::size_t i = 0; i < params.size(); ++i) {
      r.doubles(s.m[i]);
      r.doubles(s.v[i]);
    }
    out.optimizer = std::move(s);
  }
  if (r.pos != body.size())
    throw CheckpointError("trailing bytes in checkpoint: " + path);
  return out;
}

}  // namespace qmat::nn
