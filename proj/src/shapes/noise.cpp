#include "vdn/shapes/noise.hpp"

#include "vdn/util/error.hpp"

#include <cmath>
#include <numbers>

namespace vdn::shapes {

Scene inject_occluder(const ShapeSpec& target, const NoiseSpec& noise, Rng& rng) {
  if (!noise.occluder) throw ConfigError("inject_occluder: noise spec has no occluder");
  const OccluderSpec& occ = *noise.occluder;

  // Draw everything up front so the stream does not depend on which fields
  // are overridden.
  const auto drawn_category = static_cast<int>(rng.below(kCategoryCount - 1));
  const std::uint64_t instance_seed = rng.next();
  const double z = rng.uniform(-1.0, 1.0), phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double dist = rng.uniform(kOccluderMinDistance, kOccluderMaxDistance);

  Scene scene = Scene::single(target);
  if (!(occ.relative_size > 0.0)) return scene;

  Category category = occ.category.value_or(static_cast<Category>(
      drawn_category >= static_cast<int>(target.category) ? drawn_category + 1 : drawn_category));
  const double rho = std::sqrt(1.0 - z * z);
  const Vec3 offset = occ.offset.value_or(dist * Vec3(rho * std::cos(phi), rho * std::sin(phi), z));
  scene.parts.push_back(PlacedShape{random_shape(category, instance_seed), offset, occ.relative_size});
  return scene;
}

namespace {
constexpr int kGrid = 5;

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }
}  // namespace

DepthImage inject_clutter(const DepthImage& image, const NoiseSpec& noise) {
  if (!noise.clutter) throw ConfigError("inject_clutter: noise spec has no clutter");
  const double amplitude = noise.clutter->amplitude;
  if (amplitude < 0.0 || amplitude > 1.0) throw ConfigError("inject_clutter: amplitude must lie in [0, 1]");

  if (amplitude == 0.0) return image;

  Rng rng(noise.clutter->seed);
  Eigen::Matrix<double, kGrid, kGrid> lattice;
  for (int i = 0; i < kGrid; ++i)
    for (int j = 0; j < kGrid; ++j) lattice(i, j) = rng.uniform();

  DepthImage out = image;
  const int h = image.height(), w = image.width();
  for (int row = 0; row < h; ++row) {
    const double gy = (row + 0.5) / h * (kGrid - 1);
    const int y0 = std::min(static_cast<int>(gy), kGrid - 2);
    const double ty = smoothstep(gy - y0);
    for (int col = 0; col < w; ++col) {
      if (image.depth(row, col) < 1.0f) continue;
      const double gx = (col + 0.5) / w * (kGrid - 1);
      const int x0 = std::min(static_cast<int>(gx), kGrid - 2);
      const double tx = smoothstep(gx - x0);
      const double s = (1 - ty) * ((1 - tx) * lattice(y0, x0) + tx * lattice(y0, x0 + 1)) +
                       ty * ((1 - tx) * lattice(y0 + 1, x0) + tx * lattice(y0 + 1, x0 + 1));
      // s in [0, 1] maps to [0.6, 0.98] at full amplitude
      const double value = 1.0 - amplitude * (0.02 + 0.38 * s);
      out.depth(row, col) = std::min(static_cast<float>(value), std::nextafter(1.0f, 0.0f));
    }
  }
  return out;
}

}  // namespace vdn::shapes
