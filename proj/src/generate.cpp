#include "qmat/generate.hpp"

#include <algorithm>
#include <map>
#include <unordered_set>

#include "qmat/codec.hpp"
#include "qmat/rng.hpp"

namespace qmat {
namespace {

std::uint64_t id_hash(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (char c : s) h = (h ^ static_cast<unsigned char>(c)) * 0x100000001b3ull;
  return h;
}

}  // namespace

std::vector<int> label_for_qf1(int qf1, int nc) {
  return qtarget_from_matrix(qf_to_table(qf1, Channel::luma), nc).values;
}

std::vector<PatchRecord> generate_patches(const PixelImage& img, const std::string& source_id,
                                          const DatasetManifest& manifest) {
  validate(manifest);
  if (img.channels != 3)
    throw std::invalid_argument("generate_patches: expected a 3-channel image");
  if (img.height < kMinPatchSourceSide || img.width < kMinPatchSourceSide)
    throw std::invalid_argument("generate_patches: image too small");

  const PixelImage base = crop_to_block_multiple(img);
  const QuantTables q2 = tables_for_quality(manifest.qf2);
  const int cap = manifest.effective_cap();

  std::vector<PatchRecord> out;
  for (int qf1 : manifest.qf1_grid) {
    CounterRng rng(CounterRng::derive_key(manifest.seed, "patchgen", id_hash(source_id),
                                          static_cast<std::uint64_t>(qf1)));
    GridShift shift{rng.uniform_int(0, 7), rng.uniform_int(0, 7)};

    const PixelImage dc = double_compress(base, tables_for_quality(qf1), q2, shift);
    const int ys = dc.height - kPatchSide + 1;
    const int xs = dc.width - kPatchSide + 1;
    const std::int64_t available = static_cast<std::int64_t>(ys) * xs;
    const int n = static_cast<int>(std::min<std::int64_t>(cap, available));

    // Distinct patch offsets, uniform over the ys*xs grid.
    std::vector<std::int64_t> picks;
    picks.reserve(n);
    if (available <= 4LL * n) {
      std::vector<std::int64_t> all(available);
      for (std::int64_t i = 0; i < available; ++i) all[i] = i;
      for (int i = 0; i < n; ++i) {
        const int j = i + rng.uniform_int(0, static_cast<int>(available) - 1 - i);
        std::swap(all[i], all[j]);
        picks.push_back(all[i]);
      }
    } else {
      std::unordered_set<std::int64_t> seen;
      while (static_cast<int>(picks.size()) < n) {
        const std::int64_t p = static_cast<std::int64_t>(rng.uniform_int(0, ys - 1)) * xs +
                               rng.uniform_int(0, xs - 1);
        if (seen.insert(p).second) picks.push_back(p);
      }
    }

    const std::vector<int> label = label_for_qf1(qf1, manifest.nc);
    for (std::int64_t p : picks) {
      const int y = static_cast<int>(p / xs);
      const int x = static_cast<int>(p % xs);
      PatchRecord rec;
      rec.pixels.resize(kPatchBytes);
      for (int row = 0; row < kPatchSide; ++row) {
        const std::uint8_t* src =
            dc.samples.data() + (static_cast<std::size_t>(y + row) * dc.width + x) * 3;
        std::copy(src, src + kPatchSide * 3, rec.pixels.data() + row * kPatchSide * 3);
      }
      rec.label = label;
      rec.qf1 = qf1;
      rec.qf2 = manifest.qf2;
      rec.shift = shift;
      rec.source_id = source_id;
      out.push_back(std::move(rec));
    }
  }
  return out;
}

bool audit_labels(const std::vector<PatchRecord>& records) {
  std::map<std::pair<int, int>, std::vector<int>> cache;  // (qf1, nc) -> label
  for (const PatchRecord& rec : records) {
    const auto key = std::make_pair(rec.qf1, static_cast<int>(rec.label.size()));
    auto it = cache.find(key);
    if (it == cache.end())
      it = cache.emplace(key, label_for_qf1(rec.qf1, key.second)).first;
    if (rec.label != it->second) return false;
  }
  return true;
}

int max_records_per_image_qf1(const std::vector<PatchRecord>& records) {
  std::map<std::pair<std::string, int>, int> counts;
  int worst = 0;
  for (const PatchRecord& rec : records)
    worst = std::max(worst, ++counts[{rec.source_id, rec.qf1}]);
  return worst;
}

double aligned_fraction(const std::vector<PatchRecord>& records) {
  if (records.empty()) return 0.0;
  std::size_t aligned = 0;
  for (const PatchRecord& rec : records)
    if (rec.shift.aligned()) ++aligned;
  return static_cast<double>(aligned) / static_cast<double>(records.size());
}

}  // namespace qmat
