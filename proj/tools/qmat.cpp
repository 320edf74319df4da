#include <omp.h>

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>

#include "qmat/generate.hpp"
#include "qmat/harness.hpp"
#include "qmat/image_io.hpp"
#include "qmat/log.hpp"
#include "qmat/nn/checkpoint.hpp"
#include "qmat/nn/train.hpp"

namespace fs = std::filesystem;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void cap_threads(int threads) {
  if (threads > 0) omp_set_num_threads(threads);
}

// ---------------------------------------------------------------- generate

struct GenerateArgs {
  std::string input_dir;
  std::string split = "train";
  int qf2 = 90;
  std::vector<int> qf1_grid;
  int cap = 100;
  int test_cap = 5;
  int nc = 15;
  std::uint64_t seed = 0;
  std::string out_dir;
  int threads = 0;
};

int run_generate(const GenerateArgs& args) {
  cap_threads(args.threads);
  qmat::DatasetManifest manifest;
  manifest.split = qmat::split_from_name(args.split);
  manifest.qf2 = args.qf2;
  manifest.qf1_grid = args.qf1_grid;
  manifest.patches_per_image_cap = args.cap;
  manifest.patches_per_image_test = args.test_cap;
  manifest.nc = args.nc;
  manifest.seed = args.seed;
  try {
    qmat::validate(manifest);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(args.input_dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    for (char& c : ext) c = static_cast<char>(std::tolower(c));
    if (ext == ".png" || ext == ".tif" || ext == ".tiff")
      files.push_back(entry.path().string());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw UsageError("no PNG/TIFF files in " + args.input_dir);
  QMAT_LOG_INFO("generating from " << files.size() << " source image(s)");

  // Each image's pipeline is independent; outputs are concatenated in the
  // sorted file order so results do not depend on scheduling.
  std::vector<std::vector<qmat::PatchRecord>> per_image(files.size());
  std::vector<std::string> errors(files.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < files.size(); ++i) {
    try {
      const qmat::PixelImage img = qmat::ingest_image(files[i]);
      per_image[i] =
          qmat::generate_patches(img, fs::path(files[i]).stem().string(), manifest);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  }
  for (const std::string& err : errors)
    if (!err.empty()) throw std::runtime_error(err);

  std::vector<qmat::PatchRecord> records;
  for (auto& part : per_image)
    records.insert(records.end(), std::make_move_iterator(part.begin()),
                   std::make_move_iterator(part.end()));
  if (records.empty()) throw std::runtime_error("no patches were generated");

  fs::create_directories(args.out_dir);
  const std::string path =
      (fs::path(args.out_dir) /
       (args.split + "_qf2" + std::to_string(args.qf2) + ".qmds"))
          .string();
  qmat::write_shard(records, path);
  std::cout << "wrote " << records.size() << " records to " << path << "\n";
  return 0;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::vector<std::string> shards;
  std::vector<std::string> val_shards;
  std::string out;
  std::string warm_start;
  bool resume_optimizer = false;
  int epochs = 1;
  double lr = 1e-5;
  int batch = 32;
  std::string loss = "logcosh";
  std::uint64_t seed = 0;
  int depth = 40;
  int blocks = 3;
  int growth = 12;
  double dropout = 0.2;
  int nc = 15;
  int threads = 0;
};

int run_train(const TrainArgs& args) {
  cap_threads(args.threads);
  const auto train_paths = qmat::resolve_shard_paths(args.shards);
  if (train_paths.empty()) throw UsageError("no training shards found");
  std::vector<qmat::PatchRecord> train_records = qmat::load_records(train_paths);
  std::vector<qmat::PatchRecord> val_records =
      qmat::load_records(qmat::resolve_shard_paths(args.val_shards));

  qmat::nn::DenseNetModel model;
  qmat::nn::AdamState opt;
  if (!args.warm_start.empty()) {
    // Topology comes from the checkpoint; flags only steer the run.
    qmat::nn::LoadedCheckpoint ckpt = qmat::nn::load_checkpoint(args.warm_start);
    model = std::move(ckpt.model);
    if (args.resume_optimizer && ckpt.optimizer)
      opt = std::move(*ckpt.optimizer);
    else
      opt = qmat::nn::AdamState::init(model.parameters());
    QMAT_LOG_INFO("warm start from " << args.warm_start << " (epoch "
                                     << ckpt.meta.epoch << ")");
  } else {
    qmat::nn::DenseNetConfig cfg;
    try {
      cfg = qmat::nn::DenseNetConfig::make(args.depth, args.blocks, args.growth, args.nc,
                                           args.dropout);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    model = qmat::nn::DenseNetModel::init(cfg, args.seed);
    opt = qmat::nn::AdamState::init(model.parameters());
  }

  int qf2_hint = train_records.empty() ? 0 : train_records.front().qf2;
  for (const auto& rec : train_records)
    if (rec.qf2 != qf2_hint) qf2_hint = 0;

  qmat::nn::TrainConfig cfg;
  cfg.lr = args.lr;
  cfg.batch_size = args.batch;
  cfg.epochs = args.epochs;
  cfg.loss = args.loss == "l2" ? qmat::nn::TrainConfig::Loss::l2
                               : qmat::nn::TrainConfig::Loss::logcosh;
  cfg.seed = args.seed;
  cfg.checkpoint_path = args.out;
  cfg.qf2_hint = qf2_hint;

  const qmat::nn::TrainResult result = qmat::nn::train(model, opt, train_records,
                                                       val_records, cfg);
  std::cout << "trained " << result.steps << " steps; final train loss "
            << result.history.back().train_loss << "; checkpoint " << args.out << "\n";
  return 0;
}

// ---------------------------------------------------------------- estimate

int run_estimate(const std::string& model_path, const std::string& patch_path) {
  qmat::nn::LoadedCheckpoint ckpt = qmat::nn::load_checkpoint(model_path);
  qmat::PixelImage img = qmat::read_png(patch_path);
  if (img.height != qmat::kPatchSide || img.width != qmat::kPatchSide)
    throw UsageError("patch must be exactly 64x64 (got " + std::to_string(img.width) +
                     "x" + std::to_string(img.height) + ")");
  if (img.channels == 1) {
    qmat::PixelImage rgb(img.height, img.width, 3);
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x)
        rgb.at(y, x, 0) = rgb.at(y, x, 1) = rgb.at(y, x, 2) = img.at(y, x, 0);
    img = std::move(rgb);
  }

  const qmat::Estimate est = qmat::estimate(ckpt.model, img.samples.data());
  // Machine-parseable first: the integer steps in zig-zag order.
  for (std::size_t i = 0; i < est.rounded.size(); ++i)
    std::cout << (i ? " " : "") << est.rounded[i];
  std::cout << "\n" << "raw:";
  char buf[32];
  for (double v : est.raw) {
    std::snprintf(buf, sizeof(buf), " %.4f", v);
    std::cout << buf;
  }
  std::cout << "\n";
  return 0;
}

// ---------------------------------------------------------------- evaluate

struct EvaluateArgs {
  std::string model;
  std::vector<std::string> shards;
  std::string out_dir;
  int batch = 32;
  int threads = 0;
};

int run_evaluate(const EvaluateArgs& args) {
  cap_threads(args.threads);
  qmat::ExperimentConfig config;
  config.checkpoint = args.model;
  config.shard_paths = args.shards;
  config.output_dir = args.out_dir;
  config.batch_size = args.batch;

  const qmat::EvalTable table = qmat::mismatch_eval(config);
  qmat::emit_outputs(table, args.out_dir);
  std::cout << qmat::render_eval_csv(table);
  if (table.qf2_model != 0 && table.qf2_data != 0 && table.qf2_model != table.qf2_data)
    std::cout << "# note: model qf2 " << table.qf2_model << " vs data qf2 "
              << table.qf2_data << "\n";
  std::cout << "outputs written to " << args.out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"double-JPEG primary quantization step estimation toolkit"};
  app.require_subcommand(1);

  GenerateArgs gen;
  CLI::App* cgen = app.add_subcommand("generate", "synthesize labeled patch shards");
  cgen->add_option("--input-dir", gen.input_dir, "directory of PNG/TIFF sources")
      ->required()
      ->check(CLI::ExistingDirectory);
  cgen->add_option("--split", gen.split, "train|val|test")
      ->check(CLI::IsMember({"train", "val", "test"}));
  cgen->add_option("--qf2", gen.qf2, "second-compression quality factor")
      ->check(CLI::Range(1, 100));
  cgen->add_option("--qf1-grid", gen.qf1_grid, "first-compression quality factors")
      ->required()
      ->delimiter(',');
  cgen->add_option("--cap", gen.cap, "max patches per (image, qf1)");
  cgen->add_option("--test-cap", gen.test_cap, "patches per image for the test split");
  cgen->add_option("--nc", gen.nc, "label length")->check(CLI::Range(1, 64));
  cgen->add_option("--seed", gen.seed, "dataset seed");
  cgen->add_option("--out", gen.out_dir, "output shard directory")->required();
  cgen->add_option("--threads", gen.threads, "worker thread cap");

  TrainArgs tr;
  CLI::App* ctrain = app.add_subcommand("train", "train the dense CNN regressor");
  ctrain->add_option("--shards", tr.shards, "training shard files/dirs")->required();
  ctrain->add_option("--val-shards", tr.val_shards, "validation shard files/dirs");
  ctrain->add_option("--out", tr.out, "checkpoint output path")->required();
  ctrain->add_option("--warm-start", tr.warm_start, "initialize from checkpoint");
  ctrain->add_flag("--resume-optimizer", tr.resume_optimizer,
                   "also restore Adam state from the warm-start checkpoint");
  ctrain->add_option("--epochs", tr.epochs)->check(CLI::PositiveNumber);
  ctrain->add_option("--lr", tr.lr, "learning rate");
  ctrain->add_option("--batch", tr.batch)->check(CLI::PositiveNumber);
  ctrain->add_option("--loss", tr.loss)->check(CLI::IsMember({"logcosh", "l2"}));
  ctrain->add_option("--seed", tr.seed);
  ctrain->add_option("--depth", tr.depth, "network depth");
  ctrain->add_option("--blocks", tr.blocks, "dense block count");
  ctrain->add_option("--growth", tr.growth, "growth rate k");
  ctrain->add_option("--dropout", tr.dropout);
  ctrain->add_option("--nc", tr.nc, "output width")->check(CLI::Range(1, 64));
  ctrain->add_option("--threads", tr.threads);

  std::string est_model, est_patch;
  CLI::App* cest = app.add_subcommand("estimate", "estimate steps for one 64x64 patch");
  cest->add_option("--model", est_model)->required()->check(CLI::ExistingFile);
  cest->add_option("--patch", est_patch, "64x64 PNG")->required()->check(CLI::ExistingFile);

  EvaluateArgs ev;
  CLI::App* ceval = app.add_subcommand("evaluate", "aggregate MSE/Acc over shards");
  ceval->add_option("--model", ev.model)->required()->check(CLI::ExistingFile);
  ceval->add_option("--shards", ev.shards)->required();
  ceval->add_option("--out", ev.out_dir, "output directory")->required();
  ceval->add_option("--batch", ev.batch)->check(CLI::PositiveNumber);
  ceval->add_option("--threads", ev.threads);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // --help exits 0; bad flags exit 2
  }

  try {
    if (cgen->parsed()) return run_generate(gen);
    if (ctrain->parsed()) return run_train(tr);
    if (cest->parsed()) return run_estimate(est_model, est_patch);
    if (ceval->parsed()) return run_evaluate(ev);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
