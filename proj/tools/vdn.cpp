// vdn: dataset generation, training, evaluation and analysis runs.

#include "vdn/app/run.hpp"
#include "vdn/util/error.hpp"

#include <iostream>

#include "CLI11.hpp"

namespace {

struct Flags {
  std::string config;
  std::uint64_t seed = 0;
  std::string out, data, ckpt, arch, occlusion;
  std::vector<double> clutter;
  int views = 0, split_stage = 0, iterations = 0, k = 0, max_shapes = 0;
  double contrastive_weight = 0;
  double train_occlusion = 0, test_occlusion = 0, train_clutter = 0, test_clutter = 0;
  bool pgm = false;
};

// Registers only the flags that make sense for `cmd`; values are applied
// afterwards for the ones actually given.
void add_flags(CLI::App& cmd, Flags& f, const std::string& name) {
  cmd.add_option("--config", f.config, "JSON run configuration (flags override its values)")->check(CLI::ExistingFile);
  cmd.add_option("--seed", f.seed, "run seed");
  cmd.add_option("--out", f.out, "output directory");
  if (name == "gen-data") {
    cmd.add_option("--train-occlusion", f.train_occlusion, "occluder size for every train shape")
        ->check(CLI::NonNegativeNumber);
    cmd.add_option("--test-occlusion", f.test_occlusion, "occluder size for every test shape")
        ->check(CLI::NonNegativeNumber);
    cmd.add_option("--train-clutter", f.train_clutter, "fraction of cluttered train views")->check(CLI::Range(0.0, 1.0));
    cmd.add_option("--test-clutter", f.test_clutter, "fraction of cluttered test views")->check(CLI::Range(0.0, 1.0));
    cmd.add_flag("--pgm", f.pgm, "also export 16-bit depth PGMs");
    return;
  }
  cmd.add_option("--data", f.data, "dataset directory")->check(CLI::ExistingDirectory);
  if (name == "train") {
    cmd.add_option("--arch", f.arch, "architecture")->check(CLI::IsMember(vdn::net::arch_names()));
    cmd.add_option("--split-stage", f.split_stage, "backbone stage whose output is scored")->check(CLI::Range(0, 3));
    cmd.add_option("--iterations", f.iterations, "training iterations")->check(CLI::NonNegativeNumber);
    cmd.add_option("--contrastive-weight", f.contrastive_weight, "weight of the contrastive loss")
        ->check(CLI::NonNegativeNumber);
    return;
  }
  cmd.add_option("--ckpt", f.ckpt, "model checkpoint")->check(CLI::ExistingFile);
  if (name == "eval" || name == "noise-sweep") cmd.add_option("--views", f.views, "use the first N views")->check(CLI::PositiveNumber);
  if (name == "noise-sweep") {
    cmd.add_option("--occlusion", f.occlusion, "occluder sizes a:b:step");
    cmd.add_option("--clutter", f.clutter, "clutter ratios r1,r2,...")->delimiter(',');
  }
  if (name == "score-maps") {
    cmd.add_option("--occlusion", f.occlusion, "render the test split with this occluder size");
    cmd.add_option("--max-shapes", f.max_shapes, "export at most N shapes")->check(CLI::NonNegativeNumber);
  }
  if (name == "view-analysis") cmd.add_option("--k", f.k, "views per mixture")->check(CLI::PositiveNumber);
}

bool given(const CLI::App& cmd, const std::string& flag) {
  try {
    return cmd.get_option(flag)->count() > 0;
  } catch (const CLI::OptionNotFound&) {
    return false;
  }
}

vdn::app::RunConfig resolve(const CLI::App& cmd, const Flags& f) {
  vdn::app::RunConfig c = f.config.empty() ? vdn::app::RunConfig{} : vdn::app::load_run_config(f.config);
  c.command = cmd.get_name();
  if (given(cmd, "--seed")) c.seed = f.seed;
  if (given(cmd, "--out")) c.out = f.out;
  if (given(cmd, "--data")) c.data = f.data;
  if (given(cmd, "--ckpt")) c.ckpt = f.ckpt;
  if (given(cmd, "--arch")) c.arch = f.arch;
  if (given(cmd, "--split-stage")) c.network.split_stage = f.split_stage;
  if (given(cmd, "--iterations")) c.train.iterations = f.iterations;
  if (given(cmd, "--contrastive-weight")) c.train.contrastive_weight = f.contrastive_weight;
  if (given(cmd, "--occlusion")) c.occlusion = f.occlusion;
  if (given(cmd, "--clutter")) c.clutter = f.clutter;
  if (given(cmd, "--views")) c.views = f.views;
  if (given(cmd, "--k")) c.k = f.k;
  if (given(cmd, "--max-shapes")) c.max_shapes = f.max_shapes;
  if (given(cmd, "--train-occlusion")) c.generator.train_noise.occluder_size = f.train_occlusion;
  if (given(cmd, "--test-occlusion")) c.generator.test_noise.occluder_size = f.test_occlusion;
  if (given(cmd, "--train-clutter")) c.generator.train_noise.clutter_ratio = f.train_clutter;
  if (given(cmd, "--test-clutter")) c.generator.test_noise.clutter_ratio = f.test_clutter;
  if (given(cmd, "--pgm")) c.pgm = f.pgm;
  c.resolve();
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"View-discerning multi-view shape descriptors: data, training and evaluation"};
  app.require_subcommand(1);
  Flags flags;
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"gen-data", "render the synthetic depth-view dataset"},
      {"train", "train a network on the train split"},
      {"eval", "retrieval metrics on the test split"},
      {"score-maps", "export per-view score heat maps"},
      {"view-analysis", "good/poor view mixtures"},
      {"noise-sweep", "retrieval under occlusion and clutter"}};
  for (const auto& [name, help] : commands) add_flags(*app.add_subcommand(name, help), flags, name);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const CLI::App* cmd = app.get_subcommands().front();
    vdn::app::run(resolve(*cmd, flags), std::cerr);
  } catch (const std::exception& e) {
    std::cerr << "vdn: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
