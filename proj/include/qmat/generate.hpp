#pragma once

#include "qmat/quant.hpp"
#include "qmat/shard.hpp"

namespace qmat {

// Label for a first-compression quality factor: first nc zig-zag entries of
// the luma table.
std::vector<int> label_for_qf1(int qf1, int nc);

// Produce labeled patches from one source image following the manifest:
// per qf1, one uniform grid shift, one double compression of the whole image,
// then up to effective_cap() patch locations sampled uniformly without
// replacement at arbitrary pixel offsets. Deterministic given
// (manifest.seed, source_id); independent of processing order across images.
std::vector<PatchRecord> generate_patches(const PixelImage& img, const std::string& source_id,
                                          const DatasetManifest& manifest);

// Dataset audits.
bool audit_labels(const std::vector<PatchRecord>& records);          // label matches qf1
int max_records_per_image_qf1(const std::vector<PatchRecord>& records);
double aligned_fraction(const std::vector<PatchRecord>& records);

}  // namespace qmat
