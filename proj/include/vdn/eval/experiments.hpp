#pragma once

#include "vdn/eval/retrieval.hpp"
#include "vdn/net/network.hpp"
#include "vdn/shapes/dataset.hpp"

#include <optional>

namespace vdn::eval {

/// The first `count` view indices of an n-view rig (all when count is unset).
std::vector<int> view_subset(int n_views, std::optional<int> count);

std::vector<Item> items_of(std::span<const shapes::ViewSet> shapes);

/// Shape descriptors, one per shape, computed from the selected views (all
/// views when `views` is empty).
std::vector<Vector> describe(const ad::ParamStore& params, const net::NetworkConfig& config,
                             std::span<const shapes::ViewSet> shapes, std::span<const int> views = {});

/// Each shape queried against the others.
MetricsReport evaluate_model(const ad::ParamStore& params, const net::NetworkConfig& config,
                             std::span<const shapes::ViewSet> shapes, const std::vector<std::string>& class_names,
                             nlohmann::json protocol = nlohmann::json::object(), std::span<const int> views = {});

struct ViewQualityRanking {
  std::vector<double> sibling_similarity;  // per view
  std::vector<int> good;                   // best first
  std::vector<int> poor;                   // worst first
};

/// Per view: mean cosine similarity to the other views of the same shape.
/// Ties resolve by ascending view index.
ViewQualityRanking rank_views(std::span<const Vector> view_features, int k);

struct ViewQualityResult {
  std::vector<ViewQualityRanking> rankings;
  std::vector<double> proportions;
  std::vector<double> map;  // per proportion
  double map_all_views = 0;
};

/// Builds k-view mixtures holding round(p k) good views (best first) and the
/// rest poor views (worst first), averages their features into one shape
/// descriptor and reports retrieval MAP per proportion.
ViewQualityResult view_quality_analysis(std::span<const std::vector<Vector>> view_features,
                                        std::span<const Item> items, int k, std::span<const double> proportions);

/// Same, with pooled backbone features of `params` as the per-view features.
ViewQualityResult view_quality_analysis(std::span<const shapes::ViewSet> shapes, const ad::ParamStore& params,
                                        const net::NetworkConfig& config, int k, std::span<const double> proportions);

struct NoiseLevel {
  std::string protocol;  // "occlusion" or "clutter"
  double value = 0;
  shapes::NoiseConfig noise;
};

/// Inclusive sweep a, a + step, ..., b.
std::vector<NoiseLevel> occlusion_levels(double first, double last, double step);
std::vector<NoiseLevel> clutter_levels(std::span<const double> ratios);

/// Regenerates the test split of `manifest` at every level and evaluates it.
std::vector<MetricsReport> noise_sweep(const shapes::DatasetManifest& manifest, const ad::ParamStore& params,
                                       const net::NetworkConfig& config, std::span<const NoiseLevel> levels,
                                       std::span<const int> views = {});

/// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> x, std::span<const double> y);

}  // namespace vdn::eval
