#pragma once

#include "vdn/eval/retrieval.hpp"
#include "vdn/net/network.hpp"
#include "vdn/shapes/dataset.hpp"
#include "vdn/util/pgm.hpp"

#include <filesystem>

namespace vdn::eval {

using ScoreImage = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Nearest-neighbour upsampling of a pre-broadcast score tensor to a square
/// image. Part maps (h x w x 1) cover res/h x res/w pixel blocks; channel
/// vectors (1 x 1 x c) become vertical bars, one per channel, left to right;
/// single scores fill the image.
ScoreImage upsample_scores(const ad::Tensor& raw, int resolution);

io::GrayImage8 to_gray8(const ScoreImage& image);
io::GrayImage8 to_gray8(const shapes::DepthImage& view);

struct ScoreMapStats {
  double occluded_mean = 0, visible_mean = 0;
  long occluded_pixels = 0, visible_pixels = 0;
  double difference() const { return visible_mean - occluded_mean; }
};

/// Mean upsampled score over pixels showing the occluder and over pixels
/// showing the target. Needs shapes rendered with hit maps.
ScoreMapStats score_map_statistics(const ad::ParamStore& params, const net::NetworkConfig& config,
                                   std::span<const shapes::ViewSet> shapes);

/// Writes <shape>_<view>_score.pgm and <shape>_<view>_depth.pgm for every
/// view; returns the number of views written.
int export_score_maps(const ad::ParamStore& params, const net::NetworkConfig& config,
                      std::span<const shapes::ViewSet> shapes, const std::filesystem::path& dir);

struct TableRow {
  std::string arch;
  std::string protocol;  // clean, occlusion or clutter
  double level = 0;
  MetricsReport report;
};

/// Wide CSV, one row per (architecture, protocol, level); NaN cells blank.
std::string experiment_table(std::span<const TableRow> rows);

}  // namespace vdn::eval
