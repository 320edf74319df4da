#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "qmat/image.hpp"

namespace qmat {

constexpr int kPatchSide = 64;
constexpr int kPatchChannels = 3;
constexpr int kPatchBytes = kPatchSide * kPatchSide * kPatchChannels;

// Smallest usable source: one 64x64 patch must survive the worst-case (7,7)
// shift plus re-cropping to block multiples.
constexpr int kMinPatchSourceSide = 72;

// One labeled double-compressed patch. `label` holds the first nc zig-zag
// steps of the luma table for qf1.
struct PatchRecord {
  std::vector<std::uint8_t> pixels;  // 64x64x3 interleaved
  std::vector<int> label;
  int qf1 = 0;
  int qf2 = 0;
  GridShift shift;
  std::string source_id;

  bool operator==(const PatchRecord& o) const {
    return pixels == o.pixels && label == o.label && qf1 == o.qf1 && qf2 == o.qf2 &&
           shift.dx == o.shift.dx && shift.dy == o.shift.dy && source_id == o.source_id;
  }
};

enum class Split { train, val, test };

std::string split_name(Split s);
Split split_from_name(const std::string& name);

struct DatasetManifest {
  Split split = Split::train;
  int qf2 = 90;
  std::vector<int> qf1_grid;
  int patches_per_image_cap = 100;
  int patches_per_image_test = 5;
  int nc = 15;
  std::uint64_t seed = 0;

  // Effective per-(image, qf1) cap for this split.
  int effective_cap() const {
    return split == Split::test ? patches_per_image_test : patches_per_image_cap;
  }
};

void validate(const DatasetManifest& m);

struct ShardError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shard layout (little-endian): magic "QMDS", u16 version=1, u16 patch_h,
// u16 patch_w, u16 channels, u16 nc, u64 record count; then per record
// u8 qf1, u8 qf2, u8 dx, u8 dy, u16 source_id_len, source_id bytes,
// nc x u16 label, 64*64*3 x u8 pixels.
void write_shard(const std::vector<PatchRecord>& records, const std::string& path);
std::vector<PatchRecord> read_shard(const std::string& path);

// nc stored in a shard header without reading the records.
int shard_nc(const std::string& path);

}  // namespace qmat
