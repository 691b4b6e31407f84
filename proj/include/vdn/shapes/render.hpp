#pragma once

#include "vdn/shapes/sdf.hpp"

#include <Eigen/Core>

#include <vector>

namespace vdn::shapes {

struct CameraPose {
  double azimuth = 0.0;    // degrees
  double elevation = 0.0;  // degrees, in [-90, 90]
  double distance = 3.0;   // in bounding radii, > 1

  Vec3 position() const;
  /// Unit viewing direction (towards the origin) and image-plane axes.
  Vec3 forward() const;
  Vec3 right() const;
  Vec3 up() const;
};

/// n_ring cameras on the equator at azimuth i * 360 / n_ring, then the two
/// poles (azimuth 0, elevation +90 and -90).
std::vector<CameraPose> camera_ring(int n_ring = 8, double distance = 3.0);

using DepthArray = Eigen::Array<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using HitArray = Eigen::Array<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Normalized depth image: 0 at the near plane, 1 at the far plane and on
/// background pixels.
struct DepthImage {
  DepthArray depth;

  int width() const { return static_cast<int>(depth.cols()); }
  int height() const { return static_cast<int>(depth.rows()); }

  static DepthImage background(int size) { return DepthImage{DepthArray::Ones(size, size)}; }
};

bool operator==(const DepthImage& a, const DepthImage& b);

struct RenderOptions {
  int max_steps = 128;
  double hit_tolerance = 1e-4;
  double clip_margin = 1.1;  // near/far planes at distance -/+ this
};

struct Render {
  DepthImage image;
  // Index of the scene part hit by each pixel's ray, -1 for background.
  HitArray hits;
};

/// Sphere-traces one perspective view of the scene. The field of view just
/// contains the unit sphere; misses and non-converged rays are background.
Render render_scene(const Scene& scene, const CameraPose& cam, int resolution, const RenderOptions& opts = {});

DepthImage render_depth(const ShapeSpec& spec, const CameraPose& cam, int resolution, const RenderOptions& opts = {});

}  // namespace vdn::shapes
