// Command-line driver for the segmentation pipeline: dataset conversion and
// synthesis, augmentation, per-block training, prediction, evaluation and the
// finite-difference gradient checker.

#include <cstdio>
#include <cstdlib>
#include <string>

#include "CLI11.hpp"
#include "myops/myops.hpp"

namespace {

struct Cli {
  std::string config_path;
  std::string source_dir;  // convert only
  bool desk_scale = false;
  bool have_seed = false;
  uint64_t seed = 0;
  int block = -1;
  std::string arch;
  int epochs = -1;
  double lr = -1.0;
  int batch = -1;
  int warps = -1;
  int crop = -1;
};

myops::PipelineConfig effective_config(const Cli& cli) {
  myops::PipelineConfig cfg;
  if (!cli.config_path.empty()) cfg = myops::load_config(cli.config_path);
  if (cli.desk_scale) myops::apply_desk_scale(cfg);
  if (cli.have_seed) cfg.seed = cli.seed;
  if (cli.block >= 0) cfg.block_filter = cli.block;
  if (!cli.arch.empty()) {
    myops::arch_from_name(cli.arch);
    cfg.arch = cli.arch;
  }
  if (cli.epochs >= 0) cfg.epochs = cli.epochs;
  if (cli.lr >= 0.0) cfg.lr = cli.lr;
  if (cli.batch >= 0) cfg.batch_size = cli.batch;
  if (cli.warps >= 0) cfg.warps_per_slice = cli.warps;
  if (cli.crop >= 0) cfg.crop_size = cli.crop;
  if (const char* wd = std::getenv("MYOPS_WORKDIR"); wd != nullptr && wd[0] != '\0')
    cfg.work_dir = wd;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-sequence cardiac segmentation pipeline"};
  app.require_subcommand(1);
  app.fallthrough();  // accept global options after the subcommand too

  Cli cli;
  app.add_option("--config", cli.config_path, "key = value config file");
  app.add_flag("--desk-scale", cli.desk_scale, "small preset: 64px, 30 epochs, 5 warps");
  auto* seed_opt = app.add_option("--seed", cli.seed, "master seed");
  app.add_option("--block", cli.block, "restrict training to one block (0..4)");
  app.add_option("--arch", cli.arch, "unet or unetpp (single-model blocks)");
  app.add_option("--epochs", cli.epochs, "epochs per model");
  app.add_option("--lr", cli.lr, "learning rate");
  app.add_option("--batch", cli.batch, "batch size");
  app.add_option("--warps", cli.warps, "warped copies per slice");
  app.add_option("--crop", cli.crop, "center crop size");

  CLI::App* convert = app.add_subcommand("convert", "rewrite a foreign dataset into case dirs");
  convert->add_option("source", cli.source_dir, "directory of <case>_{C0,DE,T2,gd}.nii files")
      ->required();
  CLI::App* synth = app.add_subcommand("synth", "generate synthetic phantom cases");
  CLI::App* augment = app.add_subcommand("augment", "warp and rotate the training slices");
  CLI::App* train = app.add_subcommand("train", "train the per-block networks");
  CLI::App* predict = app.add_subcommand("predict", "segment the held-out cases");
  CLI::App* evaluate = app.add_subcommand("evaluate", "score predictions against the truth");
  CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient check");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  cli.have_seed = seed_opt->count() > 0;

  try {
    const myops::PipelineConfig cfg = effective_config(cli);
    if (convert->parsed()) {
      myops::run_convert(cfg, cli.source_dir);
    } else if (synth->parsed()) {
      myops::run_synth(cfg);
    } else if (augment->parsed()) {
      myops::run_augment(cfg);
    } else if (train->parsed()) {
      myops::run_train(cfg);
    } else if (predict->parsed()) {
      myops::run_predict(cfg);
    } else if (evaluate->parsed()) {
      myops::run_evaluate(cfg);
    } else if (gradcheck->parsed()) {
      return myops::run_gradcheck(cfg.seed);
    } else {
      std::fprintf(stderr, "error: UnknownCommand: no subcommand given\n");
      return 2;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
