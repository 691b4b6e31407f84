#pragma once

#include "vdn/shapes/render.hpp"
#include "vdn/util/random.hpp"

#include <optional>

namespace vdn::shapes {

struct OccluderSpec {
  double relative_size = 1.2;
  // Drawn from the generator when unset (any family but the target's).
  std::optional<Category> category;
  std::optional<Vec3> offset;
};

struct ClutterSpec {
  std::uint64_t seed = 0;
  double amplitude = 1.0;  // in [0, 1]; 0 leaves the image untouched
};

struct NoiseSpec {
  std::optional<OccluderSpec> occluder;
  std::optional<ClutterSpec> clutter;
};

inline constexpr double kOccluderMinDistance = 1.0;
inline constexpr double kOccluderMaxDistance = 1.6;

/// Scene made of the target plus a distractor of another family scaled by
/// `relative_size`, centered 1.0 to 1.6 bounding radii from the target.
/// A non-positive size yields the target alone.
Scene inject_occluder(const ShapeSpec& target, const NoiseSpec& noise, Rng& rng);

/// Replaces background pixels with a smooth heightfield in [0.6, 1.0).
DepthImage inject_clutter(const DepthImage& image, const NoiseSpec& noise);

}  // namespace vdn::shapes
