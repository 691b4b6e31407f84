#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace vdn::shapes {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

enum class Category : int { sphere, box, cylinder, cone, torus, capsule, ellipsoid, tee_block };
inline constexpr int kCategoryCount = 8;

std::string_view category_name(Category c);
Category category_from_name(std::string_view name);

/// One procedural primitive. `params` holds family-specific dimensionless
/// ratios; every instance fits inside the unit sphere.
struct ShapeSpec {
  Category category = Category::sphere;
  Eigen::Vector3d params = Eigen::Vector3d::Zero();
  int subcategory = 0;
  Eigen::Vector3d rotation = Eigen::Vector3d::Zero();  // z-y-x Euler angles, radians
  std::uint64_t seed = 0;
};

/// Primary ratio range per family; the subcategory is the tercile of
/// params[0] within it.
struct RatioRange {
  double lo, hi;
};
RatioRange primary_ratio_range(Category c);
int subcategory_of(Category c, const Eigen::Vector3d& params);

/// Draws a random instance of `category` (params, rotation) from `seed`.
ShapeSpec random_shape(Category category, std::uint64_t seed);

Mat3 rotation_matrix(const Eigen::Vector3d& euler);

// --- primitive distance functions ---------------------------------------

template <typename Derived>
typename Derived::Scalar sdf_sphere(const Eigen::MatrixBase<Derived>& p, typename Derived::Scalar radius) {
  return p.norm() - radius;
}

template <typename Derived, typename Extents>
typename Derived::Scalar sdf_box(const Eigen::MatrixBase<Derived>& p, const Eigen::MatrixBase<Extents>& half) {
  using Scalar = typename Derived::Scalar;
  const auto q = (p.cwiseAbs() - half).eval();
  return q.cwiseMax(Scalar(0)).norm() + std::min(q.maxCoeff(), Scalar(0));
}

template <typename Derived>
typename Derived::Scalar sdf_cylinder(const Eigen::MatrixBase<Derived>& p, typename Derived::Scalar radius,
                                      typename Derived::Scalar half_height) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Matrix<Scalar, 2, 1> d(std::hypot(p.x(), p.y()) - radius, std::abs(p.z()) - half_height);
  return std::min(d.maxCoeff(), Scalar(0)) + d.cwiseMax(Scalar(0)).norm();
}

template <typename Derived>
typename Derived::Scalar sdf_capsule(const Eigen::MatrixBase<Derived>& p, typename Derived::Scalar half_length,
                                     typename Derived::Scalar radius) {
  using Scalar = typename Derived::Scalar;
  const Scalar z = std::clamp(p.z(), -half_length, half_length);
  return Eigen::Matrix<Scalar, 3, 1>(p.x(), p.y(), p.z() - z).norm() - radius;
}

template <typename Derived>
typename Derived::Scalar sdf_torus(const Eigen::MatrixBase<Derived>& p, typename Derived::Scalar major,
                                   typename Derived::Scalar minor) {
  return std::hypot(std::hypot(p.x(), p.y()) - major, p.z()) - minor;
}

/// Exact distance to a solid cone with apex at z = +height/2 and base disk
/// of radius `radius` at z = -height/2.
double sdf_cone(const Vec3& p, double radius, double height);

/// Bound-preserving ellipsoid approximation (exact on the surface, conservative
/// enough for sphere tracing).
double sdf_ellipsoid(const Vec3& p, const Vec3& semi_axes);

/// Distance to the shape in its local frame (before rotation).
double sdf_local(const ShapeSpec& spec, const Vec3& p);

/// Signed distance of `spec` (rotated about the origin) at world point `p`.
double sdf_eval(const ShapeSpec& spec, const Vec3& p);

/// A shape placed in the world: rotated, uniformly scaled, translated.
struct PlacedShape {
  ShapeSpec spec;
  Vec3 offset = Vec3::Zero();
  double scale = 1.0;
};

/// Union of placed shapes. Component 0 is the target; later ones are
/// distractors (occluders).
struct Scene {
  std::vector<PlacedShape> parts;

  static Scene single(const ShapeSpec& spec) { return Scene{{PlacedShape{spec, Vec3::Zero(), 1.0}}}; }
};

/// Distance to the union; `nearest` receives the index of the closest part.
double sdf_eval(const Scene& scene, const Vec3& p, int* nearest = nullptr);

}  // namespace vdn::shapes
