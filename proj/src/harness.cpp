#include "qmat/harness.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "qmat/log.hpp"
#include "qmat/nn/checkpoint.hpp"
#include "qmat/nn/train.hpp"
#include "qmat/plot.hpp"

namespace qmat {

void EvalTable::add(const PatchRecord& rec, const Estimate& est) {
  if (nc == 0) {
    nc = static_cast<int>(rec.label.size());
    coeff_hits[0].assign(nc, 0);
    coeff_hits[1].assign(nc, 0);
  }
  const PatchMetrics m = patch_metrics(est, rec.label);
  EvalCell& cell = cells[EvalKey{rec.qf1, rec.shift.aligned()}];
  cell.mse_sum += m.mse;
  cell.acc_sum += m.acc;
  cell.count += 1;

  const int a = rec.shift.aligned() ? 1 : 0;
  patch_counts[a] += 1;
  for (int i = 0; i < nc; ++i)
    if (est.rounded[i] == rec.label[i]) coeff_hits[a][i] += 1;
}

std::uint64_t EvalTable::total_count() const {
  std::uint64_t n = 0;
  for (const auto& [key, cell] : cells) n += cell.count;
  return n;
}

std::vector<double> EvalTable::per_coeff_acc(int alignment) const {
  std::vector<double> out(nc, 0.0);
  if (patch_counts[alignment] == 0) return out;
  for (int i = 0; i < nc; ++i)
    out[i] = static_cast<double>(coeff_hits[alignment][i]) /
             static_cast<double>(patch_counts[alignment]);
  return out;
}

std::vector<double> EvalTable::per_coeff_acc_overall() const {
  std::vector<double> out(nc, 0.0);
  const std::uint64_t total = patch_counts[0] + patch_counts[1];
  if (total == 0) return out;
  for (int i = 0; i < nc; ++i)
    out[i] = static_cast<double>(coeff_hits[0][i] + coeff_hits[1][i]) /
             static_cast<double>(total);
  return out;
}

EvalTable merge(const EvalTable& a, const EvalTable& b) {
  if (a.nc == 0) return b;
  if (b.nc == 0) return a;
  if (a.nc != b.nc) throw std::invalid_argument("merge: tables have different nc");
  EvalTable out = a;
  for (const auto& [key, cell] : b.cells) {
    EvalCell& dst = out.cells[key];
    dst.mse_sum += cell.mse_sum;
    dst.acc_sum += cell.acc_sum;
    dst.count += cell.count;
  }
  for (int al = 0; al < 2; ++al) {
    out.patch_counts[al] += b.patch_counts[al];
    for (int i = 0; i < out.nc; ++i) out.coeff_hits[al][i] += b.coeff_hits[al][i];
  }
  if (out.qf2_data != b.qf2_data) out.qf2_data = 0;
  return out;
}

Predictor model_predictor(nn::DenseNetModel& model) {
  return [&model](const std::vector<PatchRecord>& records, std::size_t first,
                  std::size_t count) {
    nn::TensorPtr x = nn::patches_to_tensor(records, first, count);
    nn::TensorPtr raw = nn::forward(model, nullptr, x, nn::Mode::eval);
    const int nc = model.cfg.nc;
    std::vector<std::vector<double>> rows(count);
    for (std::size_t b = 0; b < count; ++b)
      rows[b].assign(raw->data.begin() + b * nc, raw->data.begin() + (b + 1) * nc);
    return rows;
  };
}

EvalTable evaluate_records(const std::vector<PatchRecord>& records, const Predictor& predict,
                           int nc, int batch_size) {
  EvalTable table;
  table.nc = nc;
  table.coeff_hits[0].assign(nc, 0);
  table.coeff_hits[1].assign(nc, 0);
  int qf2 = records.empty() ? 0 : records.front().qf2;
  for (std::size_t ofs = 0; ofs < records.size(); ofs += batch_size) {
    const std::size_t n = std::min<std::size_t>(batch_size, records.size() - ofs);
    const auto rows = predict(records, ofs, n);
    if (rows.size() != n) throw std::runtime_error("predictor returned wrong row count");
    for (std::size_t b = 0; b < n; ++b) {
      if (static_cast<int>(rows[b].size()) != nc)
        throw std::runtime_error("predictor returned wrong row width");
      table.add(records[ofs + b], estimate_from_raw(rows[b]));
      if (records[ofs + b].qf2 != qf2) qf2 = 0;
    }
  }
  table.qf2_data = qf2;
  return table;
}

namespace {

EvalTable evaluate_impl(const ExperimentConfig& config) {
  nn::LoadedCheckpoint ckpt = nn::load_checkpoint(config.checkpoint);
  const std::vector<std::string> paths = resolve_shard_paths(config.shard_paths);
  if (paths.empty()) throw std::runtime_error("evaluate: no shard files found");
  for (const std::string& p : paths)
    if (shard_nc(p) != ckpt.model.cfg.nc)
      throw std::runtime_error("evaluate: shard nc does not match checkpoint nc: " + p);

  const std::vector<PatchRecord> records = load_records(paths);
  QMAT_LOG_INFO("evaluating " << records.size() << " patches from " << paths.size()
                              << " shard(s)");
  EvalTable table = evaluate_records(records, model_predictor(ckpt.model),
                                     ckpt.model.cfg.nc, config.batch_size);
  table.qf2_model = ckpt.meta.qf2_hint;
  return table;
}

}  // namespace

EvalTable evaluate(const ExperimentConfig& config) { return evaluate_impl(config); }

EvalTable mismatch_eval(const ExperimentConfig& config) {
  EvalTable table = evaluate_impl(config);
  if (table.qf2_model != 0 && table.qf2_model != table.qf2_data)
    QMAT_LOG_INFO("qf2 mismatch: model trained for " << table.qf2_model
                                                     << ", data uses " << table.qf2_data);
  return table;
}

namespace {

std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

std::string render_eval_csv(const EvalTable& table) {
  std::string out = "qf1,alignment,mse,acc,n\n";
  for (const auto& [key, cell] : table.cells) {
    out += std::to_string(key.qf1);
    out += key.aligned ? ",aligned," : ",non-aligned,";
    out += fmt6(cell.mean_mse());
    out += ',';
    out += fmt6(cell.mean_acc());
    out += ',';
    out += std::to_string(cell.count);
    out += '\n';
  }
  return out;
}

std::string render_per_coeff_csv(const EvalTable& table) {
  const auto aligned = table.per_coeff_acc(1);
  const auto non_aligned = table.per_coeff_acc(0);
  const auto overall = table.per_coeff_acc_overall();
  std::string out = "coefficient,acc_aligned,acc_non_aligned,acc_overall\n";
  for (int i = 0; i < table.nc; ++i) {
    out += std::to_string(i + 1);
    out += ',';
    out += fmt6(aligned[i]);
    out += ',';
    out += fmt6(non_aligned[i]);
    out += ',';
    out += fmt6(overall[i]);
    out += '\n';
  }
  return out;
}

void emit_outputs(const EvalTable& table, const std::string& dir) {
  if (table.cells.empty()) throw std::runtime_error("emit_outputs: empty table");
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (!fs::is_directory(dir))
    throw std::runtime_error("emit_outputs: cannot create directory " + dir);

  auto write = [&](const std::string& name, const std::string& content) {
    const std::string path = (fs::path(dir) / name).string();
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("emit_outputs: cannot write " + path);
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
  };
  write("eval.csv", render_eval_csv(table));
  write("per_coeff.csv", render_per_coeff_csv(table));

  LinePlot plot;
  plot.y_min = 0.0;
  plot.y_max = 1.0;
  plot.series.push_back({table.per_coeff_acc(0), {208, 64, 48}});   // non-aligned
  plot.series.push_back({table.per_coeff_acc(1), {48, 80, 208}});   // aligned
  render_line_plot(plot, (fs::path(dir) / "per_coeff.png").string());
}

std::vector<std::string> resolve_shard_paths(const std::vector<std::string>& paths) {
  namespace fs = std::filesystem;
  std::vector<std::string> out;
  for (const std::string& p : paths) {
    if (fs::is_directory(p)) {
      std::vector<std::string> dir_files;
      for (const auto& entry : fs::directory_iterator(p))
        if (entry.is_regular_file() && entry.path().extension() == ".qmds")
          dir_files.push_back(entry.path().string());
      std::sort(dir_files.begin(), dir_files.end());
      out.insert(out.end(), dir_files.begin(), dir_files.end());
    } else if (fs::is_regular_file(p)) {
      out.push_back(p);
    } else {
      throw std::runtime_error("shard path does not exist: " + p);
    }
  }
  return out;
}

std::vector<PatchRecord> load_records(const std::vector<std::string>& paths) {
  std::vector<PatchRecord> records;
  for (const std::string& p : paths) {
    std::vector<PatchRecord> part = read_shard(p);
    records.insert(records.end(), std::make_move_iterator(part.begin()),
                   std::make_move_iterator(part.end()));
  }
  return records;
}

}  // namespace qmat
