#pragma once

#include "vdn/eval/experiments.hpp"
#include "vdn/eval/score_maps.hpp"
#include "vdn/train/checkpoint.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>

#include "json.hpp"

namespace vdn::app {

/// Everything one command needs. Flags override file values, which override
/// these defaults; the resolved value is echoed to run_config.json.
struct RunConfig {
  std::string command;
  std::uint64_t seed = 1;
  std::filesystem::path out = "out";
  std::filesystem::path data;
  std::filesystem::path ckpt;
  std::string arch = "vdn-part";
  shapes::GeneratorConfig generator;
  net::NetworkConfig network;
  train::TrainConfig train;
  std::string occlusion;          // "a:b:step" (sweeps) or "a" (score maps)
  std::vector<double> clutter;    // clutter ratios for noise-sweep
  std::optional<int> views;       // first N views of every shape
  int k = 5;                      // view-analysis mixture size
  std::vector<double> proportions = {0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
  std::optional<int> max_shapes;  // score-maps: limit on exported shapes
  bool pgm = false;               // gen-data: also write 16-bit depth PGMs

  /// Applies arch to the network config and copies the seed into the
  /// training config.
  void resolve();
};

void to_json(nlohmann::json& j, const RunConfig& c);
/// Overlays the keys present in `j` onto `c`; unknown keys are errors.
void overlay(RunConfig& c, const nlohmann::json& j);

RunConfig load_run_config(const std::filesystem::path& path);

/// Parses "a:b:step" into occlusion sweep levels.
std::vector<eval::NoiseLevel> parse_occlusion_sweep(const std::string& spec);

/// Subcommands; each writes its artifacts into config.out, reports progress
/// on `log` and returns normally or throws a vdn::Error.
void gen_data(const RunConfig& config, std::ostream& log);
void train_model(const RunConfig& config, std::ostream& log);
void eval_model(const RunConfig& config, std::ostream& log);
void score_maps(const RunConfig& config, std::ostream& log);
void view_analysis(const RunConfig& config, std::ostream& log);
void noise_sweep(const RunConfig& config, std::ostream& log);

void run(const RunConfig& config, std::ostream& log);

const std::vector<std::string>& command_names();

}  // namespace vdn::app
