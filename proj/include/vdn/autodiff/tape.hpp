#pragma once

#include "vdn/autodiff/param_store.hpp"
#include "vdn/autodiff/tensor.hpp"

#include <deque>
#include <functional>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace vdn::ad {

class Tape;

/// Handle to a value recorded on a Tape.
class Var {
 public:
  Var() = default;

  bool valid() const { return tape_ != nullptr; }
  int id() const { return id_; }
  Tape& tape() const { return *tape_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  int id_ = -1;
};

/// Backward rule of a recorded op: receives the upstream gradient of the
/// op's output and pushes contributions into its inputs via Tape::add_grad.
using BackwardFn = std::function<void(Tape&, const Vector& upstream)>;

/// Reverse-mode tape. Nodes are appended in evaluation order, so the node
/// list is already topologically sorted; backward walks it once in reverse.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf tracking gradients iff `value.requires_grad`.
  Var leaf(Tensor value);
  Var constant(Tensor value);
  /// Leaf bound to a named parameter; repeated calls return the same Var so
  /// that every use contributes to one gradient.
  Var param(const ParamStore& store, const std::string& name);

  Var record(Tensor value, std::vector<Var> inputs, BackwardFn backward, const char* op);

  const Tensor& value(const Var& v) const { return nodes_.at(static_cast<std::size_t>(v.id())).value; }
  bool requires_grad(const Var& v) const { return nodes_.at(static_cast<std::size_t>(v.id())).requires_grad; }
  const char* op_name(const Var& v) const { return nodes_.at(static_cast<std::size_t>(v.id())).op; }

  /// Gradient of the last backward pass with respect to `v` (zeros when `v`
  /// did not influence the output).
  Tensor grad(const Var& v) const;

  void backward(const Var& loss);
  void backward(std::span<const Var> outputs, std::span<const Tensor> seeds);

  void add_grad(const Var& v, const Vector& g);
  void add_grad(const Var& v, Index i, double g);

  /// Adds the gradients of every param() leaf into the store's accumulators.
  void accumulate_into(ParamStore& store) const;

  std::size_t size() const { return nodes_.size(); }

  // Non-smooth ops report the distance of their arguments to the nearest
  // kink; finite-difference checks use it to reject unlucky instances.
  void note_kink(double margin) { kink_margin_ = std::min(kink_margin_, margin); }
  double kink_margin() const { return kink_margin_; }

 private:
  struct Node {
    Tensor value;
    std::vector<int> inputs;
    BackwardFn backward;
    bool requires_grad = false;
    const char* op = "leaf";
    std::string param_name;
  };

  void check_owned(const Var& v) const;
  void run_backward(int start);

  // deque: references returned by value() stay valid while recording
  std::deque<Node> nodes_;
  std::vector<Vector> grads_;
  std::map<std::string, int> param_ids_;
  double kink_margin_ = std::numeric_limits<double>::infinity();
};

}  // namespace vdn::ad
