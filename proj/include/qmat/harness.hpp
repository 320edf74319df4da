#pragma once

#include <array>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "qmat/estimator.hpp"
#include "qmat/shard.hpp"

namespace qmat {

struct ExperimentConfig {
  std::string checkpoint;
  std::vector<std::string> shard_paths;  // files or directories of *.qmds
  std::string output_dir;
  int batch_size = 32;
};

struct EvalKey {
  int qf1 = 0;
  bool aligned = false;

  auto operator<=>(const EvalKey&) const = default;
};

// Sums rather than means are stored so tables merge exactly.
struct EvalCell {
  double mse_sum = 0.0;
  double acc_sum = 0.0;
  std::uint64_t count = 0;

  double mean_mse() const { return count ? mse_sum / static_cast<double>(count) : 0.0; }
  double mean_acc() const { return count ? acc_sum / static_cast<double>(count) : 0.0; }
};

struct EvalTable {
  std::map<EvalKey, EvalCell> cells;
  // Exact-match counters per coefficient, split by alignment (index 1 = aligned).
  std::array<std::vector<std::uint64_t>, 2> coeff_hits;
  std::array<std::uint64_t, 2> patch_counts{0, 0};
  int nc = 0;
  int qf2_model = 0;  // qf2 the model was trained for (0 = unknown)
  int qf2_data = 0;   // qf2 of the evaluated records (0 = mixed)

  void add(const PatchRecord& rec, const Estimate& est);
  std::uint64_t total_count() const;
  std::vector<double> per_coeff_acc(int alignment) const;  // alignment 0/1
  std::vector<double> per_coeff_acc_overall() const;
};

EvalTable merge(const EvalTable& a, const EvalTable& b);

// Raw predictions for a batch of records; rows are nc wide. Lets tests swap
// the network for synthetic predictors.
using Predictor =
    std::function<std::vector<std::vector<double>>(const std::vector<PatchRecord>&,
                                                   std::size_t first, std::size_t count)>;

Predictor model_predictor(nn::DenseNetModel& model);

EvalTable evaluate_records(const std::vector<PatchRecord>& records, const Predictor& predict,
                           int nc, int batch_size = 32);

// Loads checkpoint and shards, runs the estimator over every patch, groups
// by (qf1, alignment).
EvalTable evaluate(const ExperimentConfig& config);

// Same aggregation with an explicit model-vs-data qf2 annotation for
// mismatched-condition tests.
EvalTable mismatch_eval(const ExperimentConfig& config);

// eval.csv, per_coeff.csv and per_coeff.png in dir. Deterministic bytes:
// fixed 6-decimal formatting, rows sorted by key.
void emit_outputs(const EvalTable& table, const std::string& dir);

std::string render_eval_csv(const EvalTable& table);
std::string render_per_coeff_csv(const EvalTable& table);

// Shard discovery: each path is a .qmds file or a directory scanned
// (sorted) for *.qmds.
std::vector<std::string> resolve_shard_paths(const std::vector<std::string>& paths);
std::vector<PatchRecord> load_records(const std::vector<std::string>& paths);

}  // namespace qmat
