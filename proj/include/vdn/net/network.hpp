#pragma once

#include "vdn/autodiff/ops.hpp"
#include "vdn/shapes/render.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace vdn::net {

using ad::ParamStore;
using ad::Tape;
using ad::Tensor;
using ad::Var;

enum class ScoreUnit { none, channel, part, single };
enum class Aggregation { weighted_sum, max, avg, weighted_max };

std::string score_unit_name(ScoreUnit u);
ScoreUnit score_unit_from_name(const std::string& name);
std::string aggregation_name(Aggregation a);
Aggregation aggregation_from_name(const std::string& name);

struct FeatureGrid {
  int h = 0, w = 0, c = 0;
  bool operator==(const FeatureGrid&) const = default;
};

/// Backbone of conv3x3/stride-2/relu stages. Stages [0, split_stage] form the
/// per-view extractor; the rest plus global average pooling form the head.
struct NetworkConfig {
  int resolution = 32;
  std::vector<int> widths = {8, 16, 32, 64};
  int split_stage = 2;
  int classes = 8;
  ScoreUnit score_unit = ScoreUnit::part;
  Aggregation aggregation = Aggregation::weighted_sum;
  // Conv widths of the score branches and the part unit's map channels.
  std::vector<int> score_widths = {8, 16, 16};
  int part_channels = 8;

  FeatureGrid feature_grid() const;
  int descriptor_dim() const { return widths.back(); }
  bool weighted() const { return aggregation == Aggregation::weighted_sum || aggregation == Aggregation::weighted_max; }

  /// Throws ConfigError on inconsistent settings.
  void validate() const;
  bool operator==(const NetworkConfig&) const = default;
};

/// vdn-channel, vdn-part, vdn-single, vdn-max, cnn-max, cnn-avg.
NetworkConfig config_for_arch(const std::string& arch, NetworkConfig base = {});
std::string arch_name(const NetworkConfig& config);
const std::vector<std::string>& arch_names();

/// He-uniform weights, zero biases, in a fixed registration order.
ParamStore init_params(const NetworkConfig& config, std::uint64_t seed);

/// Depth image as an h x w x 1 tensor.
Tensor view_tensor(const shapes::DepthImage& view);

Var forward_backbone(Tape& tape, const ParamStore& params, const NetworkConfig& config, const Var& view);

/// Score branch output: `raw` is the sigmoid output before broadcasting
/// (channel: 1x1xc, part: hxwx1, single: 1x1x1); `block` is h x w x c.
struct ScoreOutput {
  Var raw;
  Var block;
};

ScoreOutput score_channelwise(Tape& tape, const ParamStore& params, const NetworkConfig& config, const Var& view);
ScoreOutput score_partwise(Tape& tape, const ParamStore& params, const NetworkConfig& config, const Var& view);
ScoreOutput score_single(Tape& tape, const ParamStore& params, const NetworkConfig& config, const Var& view);
ScoreOutput score_view(Tape& tape, const ParamStore& params, const NetworkConfig& config, const Var& view);

/// Scores are required exactly for the weighted kinds.
Var aggregate(Aggregation kind, std::span<const Var> features, std::span<const Var> scores = {});

struct HeadOutput {
  Var descriptor;  // length descriptor_dim
  Var logits;      // length classes
};

HeadOutput forward_head(Tape& tape, const ParamStore& params, const NetworkConfig& config, const Var& aggregated);

struct ShapeOutput {
  Var descriptor;
  Var logits;
  Var aggregated;
  std::vector<Var> features;
  std::vector<ScoreOutput> scores;  // empty without a score unit
};

ShapeOutput shape_forward(Tape& tape, const ParamStore& params, const NetworkConfig& config,
                          std::span<const shapes::DepthImage> views);

/// Tape-free evaluation of one shape.
struct Inference {
  ad::Vector descriptor;
  ad::Vector logits;
  std::vector<Tensor> raw_scores;
};

Inference infer(const ParamStore& params, const NetworkConfig& config, std::span<const shapes::DepthImage> views);

/// Global-average-pooled backbone output of one view (length c).
ad::Vector pooled_view_feature(const ParamStore& params, const NetworkConfig& config, const shapes::DepthImage& view);

}  // namespace vdn::net
