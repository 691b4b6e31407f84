#include "vdn/shapes/render.hpp"

#include "vdn/util/error.hpp"

#include <cmath>
#include <numbers>

namespace vdn::shapes {

namespace {
double radians(double deg) { return deg * std::numbers::pi / 180.0; }

// Scene with rotations folded into matrices once per render.
struct CompiledPart {
  ShapeSpec local;
  Mat3 world_to_local;
  Vec3 offset;
  double scale;
};

std::vector<CompiledPart> compile(const Scene& scene) {
  std::vector<CompiledPart> parts;
  for (const PlacedShape& p : scene.parts) {
    CompiledPart c{p.spec, rotation_matrix(p.spec.rotation).transpose(), p.offset, p.scale};
    c.local.rotation.setZero();
    parts.push_back(c);
  }
  return parts;
}

double distance(const std::vector<CompiledPart>& parts, const Vec3& p, int& nearest) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const CompiledPart& c = parts[i];
    const double d = c.scale * sdf_local(c.local, c.world_to_local * ((p - c.offset) / c.scale));
    if (d < best) {
      best = d;
      nearest = static_cast<int>(i);
    }
  }
  return best;
}
}  // namespace

Vec3 CameraPose::position() const {
  const double az = radians(azimuth), el = radians(elevation);
  return distance * Vec3(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
}

Vec3 CameraPose::forward() const { return -position().normalized(); }

Vec3 CameraPose::right() const {
  const double az = radians(azimuth);
  return Vec3(-std::sin(az), std::cos(az), 0.0);
}

Vec3 CameraPose::up() const { return right().cross(forward()); }

std::vector<CameraPose> camera_ring(int n_ring, double distance) {
  if (n_ring < 1) throw ConfigError("camera_ring: need at least one ring camera");
  if (!(distance > 1.0)) throw ConfigError("camera_ring: camera distance must exceed the bounding radius");
  std::vector<CameraPose> poses;
  for (int i = 0; i < n_ring; ++i) poses.push_back({i * (360.0 / n_ring), 0.0, distance});
  poses.push_back({0.0, 90.0, distance});
  poses.push_back({0.0, -90.0, distance});
  return poses;
}

bool operator==(const DepthImage& a, const DepthImage& b) {
  return a.depth.rows() == b.depth.rows() && a.depth.cols() == b.depth.cols() && (a.depth == b.depth).all();
}

Render render_scene(const Scene& scene, const CameraPose& cam, int resolution, const RenderOptions& opts) {
  if (resolution < 8) throw ConfigError("render: resolution must be at least 8");
  if (cam.elevation < -90.0 || cam.elevation > 90.0) throw ConfigError("render: elevation outside [-90, 90]");
  if (!(cam.distance > 1.0)) throw ConfigError("render: camera distance must exceed 1");

  const auto parts = compile(scene);
  const Vec3 origin = cam.position(), fwd = cam.forward(), right = cam.right(), up = cam.up();
  const double near = cam.distance - opts.clip_margin, far = cam.distance + opts.clip_margin;
  const double tan_half = 1.05 / std::sqrt(cam.distance * cam.distance - 1.0);

  Render out{DepthImage::background(resolution), HitArray::Constant(resolution, resolution, -1)};
  for (int row = 0; row < resolution; ++row) {
    const double v = (1.0 - 2.0 * (row + 0.5) / resolution) * tan_half;
    for (int col = 0; col < resolution; ++col) {
      const double u = (2.0 * (col + 0.5) / resolution - 1.0) * tan_half;
      const Vec3 dir = (fwd + u * right + v * up).normalized();
      const double cos_axis = dir.dot(fwd);
      // march from the near plane; geometry in front of it is clipped
      double t = std::max(near, 0.0) / cos_axis;
      const double t_far = far / cos_axis;
      for (int step = 0; step < opts.max_steps && t <= t_far; ++step) {
        int part = -1;
        const double d = distance(parts, origin + t * dir, part);
        if (d < opts.hit_tolerance) {
          const double z = t * cos_axis;
          out.image.depth(row, col) = static_cast<float>(std::clamp((z - near) / (far - near), 0.0, 1.0));
          out.hits(row, col) = part;
          break;
        }
        t += d;
      }
    }
  }
  return out;
}

DepthImage render_depth(const ShapeSpec& spec, const CameraPose& cam, int resolution, const RenderOptions& opts) {
  return render_scene(Scene::single(spec), cam, resolution, opts).image;
}

}  // namespace vdn::shapes
