#pragma once

#include <Eigen/Core>

#include <initializer_list>
#include <string>
#include <vector>

namespace vdn::ad {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Shape = std::vector<Index>;

Index shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major array of doubles. Rank-3 tensors use the h x w x c
/// (channel-last) layout throughout the library.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);
  Tensor(Shape shape, Vector data);
  Tensor(Shape shape, std::initializer_list<double> values);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor filled(Shape shape, double value);

  const Shape& shape() const { return shape_; }
  Index rank() const { return static_cast<Index>(shape_.size()); }
  Index dim(Index axis) const { return shape_.at(static_cast<std::size_t>(axis)); }
  Index size() const { return data_.size(); }

  const Vector& data() const { return data_; }
  Vector& data() { return data_; }

  double operator[](Index i) const { return data_[i]; }
  double& operator[](Index i) { return data_[i]; }

  // h x w x c accessors
  double at(Index y, Index x, Index c) const { return data_[(y * shape_[1] + x) * shape_[2] + c]; }
  double& at(Index y, Index x, Index c) { return data_[(y * shape_[1] + x) * shape_[2] + c]; }

  bool all_finite() const { return data_.allFinite(); }

  Tensor reshaped(Shape shape) const;

  bool requires_grad = false;

 private:
  Shape shape_;
  Vector data_;
};

bool operator==(const Tensor& a, const Tensor& b);

}  // namespace vdn::ad
