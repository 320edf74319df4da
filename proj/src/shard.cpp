#include "qmat/shard.hpp"

#include <cstring>
#include <fstream>

namespace qmat {
namespace {

constexpr char kMagic[4] = {'Q', 'M', 'D', 'S'};
constexpr std::uint16_t kVersion = 1;

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

struct Reader {
  const std::uint8_t* p;
  std::size_t len;
  std::size_t pos = 0;
  const std::string& path;

  void need(std::size_t n) const {
    if (pos + n > len) throw ShardError("truncated shard file: " + path);
  }
  std::uint8_t u8() {
    need(1);
    return p[pos++];
  }
  std::uint16_t u16() {
    need(2);
    const std::uint16_t v = static_cast<std::uint16_t>(p[pos] | (p[pos + 1] << 8));
    pos += 2;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(p[pos + i]) << (8 * i);
    pos += 8;
    return v;
  }
  void bytes(void* dst, std::size_t n) {
    need(n);
    std::memcpy(dst, p + pos, n);
    pos += n;
  }
};

Reader open_header(const std::vector<std::uint8_t>& bytes, const std::string& path,
                   std::uint16_t* nc, std::uint64_t* count) {
  Reader r{bytes.data(), bytes.size(), 0, path};
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw ShardError("bad shard magic: " + path);
  const std::uint16_t version = r.u16();
  if (version != kVersion)
    throw ShardError("unsupported shard version " + std::to_string(version) + ": " + path);
  const std::uint16_t h = r.u16(), w = r.u16(), c = r.u16();
  if (h != kPatchSide || w != kPatchSide || c != kPatchChannels)
    throw ShardError("unexpected patch dimensions in shard: " + path);
  *nc = r.u16();
  if (*nc < 1 || *nc > 64) throw ShardError("bad nc in shard header: " + path);
  *count = r.u64();
  return r;
}

std::vector<std::uint8_t> slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ShardError("cannot open shard: " + path);
  return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(f)),
                                   std::istreambuf_iterator<char>());
}

}  // namespace

std::string split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

Split split_from_name(const std::string& name) {
  if (name == "train") return Split::train;
  if (name == "val") return Split::val;
  if (name == "test") return Split::test;
  throw std::invalid_argument("unknown split: " + name);
}

void validate(const DatasetManifest& m) {
  if (m.qf1_grid.empty()) throw std::invalid_argument("manifest: qf1_grid must be non-empty");
  for (int qf : m.qf1_grid)
    if (qf < 1 || qf > 100)
      throw std::invalid_argument("manifest: qf1 values must be in [1, 100]");
  if (m.qf2 < 1 || m.qf2 > 100) throw std::invalid_argument("manifest: qf2 must be in [1, 100]");
  if (m.patches_per_image_cap < 1 || m.patches_per_image_test < 1)
    throw std::invalid_argument("manifest: patch caps must be >= 1");
  if (m.nc < 1 || m.nc > 64) throw std::invalid_argument("manifest: nc must be in [1, 64]");
}

void write_shard(const std::vector<PatchRecord>& records, const std::string& path) {
  if (records.empty()) throw ShardError("refusing to write an empty shard");
  const int nc = static_cast<int>(records.front().label.size());

  std::string out;
  out.reserve(24 + records.size() * (kPatchBytes + 64));
  out.append(kMagic, 4);
  put_u16(out, kVersion);
  put_u16(out, kPatchSide);
  put_u16(out, kPatchSide);
  put_u16(out, kPatchChannels);
  put_u16(out, static_cast<std::uint16_t>(nc));
  put_u64(out, records.size());

  for (const PatchRecord& rec : records) {
    if (static_cast<int>(rec.label.size()) != nc)
      throw ShardError("inconsistent label length across records");
    if (rec.pixels.size() != kPatchBytes)
      throw ShardError("record pixel buffer is not 64x64x3");
    if (rec.source_id.size() > 0xffff) throw ShardError("source_id too long");
    out.push_back(static_cast<char>(rec.qf1));
    out.push_back(static_cast<char>(rec.qf2));
    out.push_back(static_cast<char>(rec.shift.dx));
    out.push_back(static_cast<char>(rec.shift.dy));
    put_u16(out, static_cast<std::uint16_t>(rec.source_id.size()));
    out.append(rec.source_id);
    for (int v : rec.label) put_u16(out, static_cast<std::uint16_t>(v));
    out.append(reinterpret_cast<const char*>(rec.pixels.data()), rec.pixels.size());
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ShardError("cannot open shard for writing: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw ShardError("shard write failed: " + path);
}

std::vector<PatchRecord> read_shard(const std::string& path) {
  const std::vector<std::uint8_t> bytes = slurp(path);
  std::uint16_t nc = 0;
  std::uint64_t count = 0;
  Reader r = open_header(bytes, path, &nc, &count);

  std::vector<PatchRecord> records;
  records.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    PatchRecord rec;
    rec.qf1 = r.u8();
    rec.qf2 = r.u8();
    rec.shift.dx = r.u8();
    rec.shift.dy = r.u8();
    const std::uint16_t id_len = r.u16();
    rec.source_id.resize(id_len);
    if (id_len > 0) r.bytes(rec.source_id.data(), id_len);
    rec.label.resize(nc);
    for (int k = 0; k < nc; ++k) rec.label[k] = r.u16();
    rec.pixels.resize(kPatchBytes);
    r.bytes(rec.pixels.data(), kPatchBytes);
    records.push_back(std::move(rec));
  }
  if (r.pos != bytes.size()) throw ShardError("trailing bytes after records: " + path);
  return records;
}

int shard_nc(const std::string& path) {
  const std::vector<std::uint8_t> bytes = slurp(path);
  std::uint16_t nc = 0;
  std::uint64_t count = 0;
  open_header(bytes, path, &nc, &count);
  return nc;
}

}  // namespace qmat
