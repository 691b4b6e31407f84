#include "vdn/shapes/sdf.hpp"

#include "vdn/util/error.hpp"
#include "vdn/util/random.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace vdn::shapes {

namespace {
constexpr std::array<std::string_view, kCategoryCount> kNames = {"sphere",  "box",     "cylinder",  "cone",
                                                                  "torus",   "capsule", "ellipsoid", "tee-block"};

double dot2(const Eigen::Vector2d& v) { return v.squaredNorm(); }

// Local-frame box pieces of a tee-block, already centered and normalized.
struct TeeGeometry {
  Vec3 bar_center, bar_half, stem_center, stem_half;
};

TeeGeometry tee_geometry(const Eigen::Vector3d& params) {
  const double s = params[0], w = params[1];
  // bar on top of a stem, both square in cross-section
  TeeGeometry g{Vec3(0, 0, s), Vec3(1, w, w), Vec3(0, 0, -w / 2), Vec3(w, w, s - w / 2)};
  const double shift = w / 2;  // centers the bounding box on z = 0
  g.bar_center.z() -= shift;
  g.stem_center.z() -= shift;
  double radius = 0.0;
  for (const auto& [c, h] : {std::pair{g.bar_center, g.bar_half}, std::pair{g.stem_center, g.stem_half}})
    for (int corner = 0; corner < 8; ++corner) {
      const Vec3 sign((corner & 1) ? 1 : -1, (corner & 2) ? 1 : -1, (corner & 4) ? 1 : -1);
      radius = std::max(radius, (c + h.cwiseProduct(sign)).norm());
    }
  g.bar_center /= radius;
  g.bar_half /= radius;
  g.stem_center /= radius;
  g.stem_half /= radius;
  return g;
}
}  // namespace

std::string_view category_name(Category c) { return kNames.at(static_cast<std::size_t>(c)); }

Category category_from_name(std::string_view name) {
  for (int i = 0; i < kCategoryCount; ++i)
    if (kNames[static_cast<std::size_t>(i)] == name) return static_cast<Category>(i);
  throw ConfigError("unknown shape category '" + std::string(name) + "'");
}

RatioRange primary_ratio_range(Category c) {
  switch (c) {
    case Category::sphere: return {0.55, 1.0};     // radius
    case Category::box: return {0.3, 0.8};         // second / first half extent
    case Category::cylinder: return {0.5, 2.0};    // half height / radius
    case Category::cone: return {1.2, 3.0};        // height / base radius
    case Category::torus: return {0.15, 0.45};     // minor / major radius
    case Category::capsule: return {0.5, 2.5};     // half segment / radius
    case Category::ellipsoid: return {0.35, 0.7};  // second / first semi-axis
    case Category::tee_block: return {0.5, 1.2};   // stem / bar half length
  }
  throw ConfigError("invalid category");
}

int subcategory_of(Category c, const Eigen::Vector3d& params) {
  const auto [lo, hi] = primary_ratio_range(c);
  const int bucket = static_cast<int>(std::floor(3.0 * (params[0] - lo) / (hi - lo)));
  return std::clamp(bucket, 0, 2);
}

Mat3 rotation_matrix(const Eigen::Vector3d& euler) {
  return (Eigen::AngleAxisd(euler[0], Vec3::UnitZ()) * Eigen::AngleAxisd(euler[1], Vec3::UnitY()) *
          Eigen::AngleAxisd(euler[2], Vec3::UnitX()))
      .toRotationMatrix();
}

ShapeSpec random_shape(Category category, std::uint64_t seed) {
  Rng rng(seed);
  ShapeSpec spec;
  spec.category = category;
  spec.seed = seed;
  const auto [lo, hi] = primary_ratio_range(category);
  spec.params[0] = rng.uniform(lo, hi);
  switch (category) {
    case Category::box: spec.params[1] = rng.uniform(0.3, 0.8); break;
    case Category::ellipsoid: spec.params[1] = rng.uniform(0.2, spec.params[0]); break;
    case Category::tee_block: spec.params[1] = rng.uniform(0.15, 0.3); break;
    default: break;
  }
  spec.subcategory = subcategory_of(category, spec.params);
  const double two_pi = 2.0 * std::numbers::pi;
  // upright instances: only the heading about the vertical axis varies
  spec.rotation = Eigen::Vector3d(rng.uniform(0, two_pi), 0.0, 0.0);
  return spec;
}

double sdf_cone(const Vec3& p, double radius, double height) {
  const double h = height / 2;
  const Eigen::Vector2d q(std::hypot(p.x(), p.y()), p.z());
  const Eigen::Vector2d k1(0.0, h);
  const Eigen::Vector2d k2(-radius, 2.0 * h);
  const Eigen::Vector2d ca(q.x() - std::min(q.x(), q.y() < 0.0 ? radius : 0.0), std::abs(q.y()) - h);
  const Eigen::Vector2d cb = q - k1 + k2 * std::clamp((k1 - q).dot(k2) / dot2(k2), 0.0, 1.0);
  const double s = (cb.x() < 0.0 && ca.y() < 0.0) ? -1.0 : 1.0;
  return s * std::sqrt(std::min(dot2(ca), dot2(cb)));
}

double sdf_ellipsoid(const Vec3& p, const Vec3& semi_axes) {
  const double k1 = p.cwiseQuotient(semi_axes.cwiseProduct(semi_axes)).norm();
  if (k1 == 0.0) return -semi_axes.minCoeff();
  const double k0 = p.cwiseQuotient(semi_axes).norm();
  return k0 * (k0 - 1.0) / k1;
}

double sdf_local(const ShapeSpec& spec, const Vec3& p) {
  const auto& a = spec.params;
  switch (spec.category) {
    case Category::sphere:
      return sdf_sphere(p, a[0]);
    case Category::box: {
      const Vec3 raw(1.0, a[0], a[1]);
      return sdf_box(p, raw / raw.norm());
    }
    case Category::cylinder: {
      const double r = 1.0 / std::sqrt(1.0 + a[0] * a[0]);
      return sdf_cylinder(p, r, a[0] * r);
    }
    case Category::cone: {
      const double r = 1.0 / std::sqrt(1.0 + a[0] * a[0] / 4.0);
      return sdf_cone(p, r, a[0] * r);
    }
    case Category::torus: {
      const double major = 1.0 / (1.0 + a[0]);
      return sdf_torus(p, major, a[0] * major);
    }
    case Category::capsule: {
      const double r = 1.0 / (1.0 + a[0]);
      return sdf_capsule(p, a[0] * r, r);
    }
    case Category::ellipsoid:
      return sdf_ellipsoid(p, Vec3(1.0, a[0], a[1]));
    case Category::tee_block: {
      const TeeGeometry g = tee_geometry(a);
      return std::min(sdf_box(p - g.bar_center, g.bar_half), sdf_box(p - g.stem_center, g.stem_half));
    }
  }
  throw ConfigError("invalid category");
}

double sdf_eval(const ShapeSpec& spec, const Vec3& p) {
  if (spec.rotation.isZero()) return sdf_local(spec, p);
  return sdf_local(spec, rotation_matrix(spec.rotation).transpose() * p);
}

double sdf_eval(const Scene& scene, const Vec3& p, int* nearest) {
  double best = std::numeric_limits<double>::infinity();
  int best_idx = -1;
  for (std::size_t i = 0; i < scene.parts.size(); ++i) {
    const PlacedShape& part = scene.parts[i];
    const double d = part.scale * sdf_eval(part.spec, (p - part.offset) / part.scale);
    if (d < best) {
      best = d;
      best_idx = static_cast<int>(i);
    }
  }
  if (nearest) *nearest = best_idx;
  return best;
}

}  // namespace vdn::shapes
