#include "vdn/autodiff/tape.hpp"

#include "vdn/util/error.hpp"

namespace vdn::ad {

const Tensor& Var::value() const { return tape_->value(*this); }

Var Tape::leaf(Tensor value) {
  Node node;
  node.requires_grad = value.requires_grad;
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::constant(Tensor value) {
  value.requires_grad = false;
  return leaf(std::move(value));
}

Var Tape::param(const ParamStore& store, const std::string& name) {
  if (auto it = param_ids_.find(name); it != param_ids_.end()) return Var(this, it->second);
  Tensor value = store.get(name).value;
  value.requires_grad = true;
  Var v = leaf(std::move(value));
  nodes_.back().param_name = name;
  nodes_.back().op = "param";
  param_ids_.emplace(name, v.id());
  return v;
}

void Tape::check_owned(const Var& v) const {
  if (&v.tape() != this || v.id() < 0 || static_cast<std::size_t>(v.id()) >= nodes_.size())
    throw ConfigError("variable does not belong to this tape");
}

Var Tape::record(Tensor value, std::vector<Var> inputs, BackwardFn backward, const char* op) {
  Node node;
  node.op = op;
  for (const Var& in : inputs) {
    check_owned(in);
    node.inputs.push_back(in.id());
    node.requires_grad = node.requires_grad || nodes_[static_cast<std::size_t>(in.id())].requires_grad;
  }
  if (node.requires_grad) node.backward = std::move(backward);
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Tensor Tape::grad(const Var& v) const {
  check_owned(v);
  const auto idx = static_cast<std::size_t>(v.id());
  const Shape& shape = nodes_[idx].value.shape();
  if (idx < grads_.size() && grads_[idx].size() != 0) return Tensor(shape, grads_[idx]);
  return Tensor::zeros(shape);
}

void Tape::add_grad(const Var& v, const Vector& g) {
  const auto idx = static_cast<std::size_t>(v.id());
  if (!nodes_[idx].requires_grad) return;
  Vector& dst = grads_[idx];
  if (dst.size() == 0)
    dst = g;
  else
    dst += g;
}

void Tape::add_grad(const Var& v, Index i, double g) {
  const auto idx = static_cast<std::size_t>(v.id());
  if (!nodes_[idx].requires_grad) return;
  Vector& dst = grads_[idx];
  if (dst.size() == 0) dst = Vector::Zero(nodes_[idx].value.size());
  dst[i] += g;
}

void Tape::backward(const Var& loss) {
  check_owned(loss);
  if (loss.value().size() != 1)
    throw ConfigError("backward() needs a scalar loss, got shape " + shape_string(loss.shape()));
  const Tensor seed = Tensor::filled(loss.shape(), 1.0);
  backward(std::span<const Var>(&loss, 1), std::span<const Tensor>(&seed, 1));
}

void Tape::backward(std::span<const Var> outputs, std::span<const Tensor> seeds) {
  if (outputs.size() != seeds.size()) throw ConfigError("backward: one seed per output required");
  grads_.assign(nodes_.size(), Vector());
  int start = -1;
  for (std::size_t k = 0; k < outputs.size(); ++k) {
    check_owned(outputs[k]);
    if (seeds[k].shape() != outputs[k].shape())
      throw ConfigError("backward: seed shape " + shape_string(seeds[k].shape()) + " does not match output " +
                        shape_string(outputs[k].shape()));
    add_grad(outputs[k], seeds[k].data());
    start = std::max(start, outputs[k].id());
  }
  run_backward(start);
}

void Tape::run_backward(int start) {
  for (int id = start; id >= 0; --id) {
    const auto idx = static_cast<std::size_t>(id);
    Node& node = nodes_[idx];
    if (!node.requires_grad || !node.backward || grads_[idx].size() == 0) continue;
    // Copy: the backward rule may append to grads_ of inputs only, but keep
    // the upstream stable regardless of aliasing.
    const Vector upstream = grads_[idx];
    node.backward(*this, upstream);
  }
}

void Tape::accumulate_into(ParamStore& store) const {
  for (const auto& [name, id] : param_ids_) {
    const auto idx = static_cast<std::size_t>(id);
    if (idx >= grads_.size() || grads_[idx].size() == 0) continue;
    Parameter& p = store.get(name);
    if (p.grad.size() != grads_[idx].size()) throw ConfigError("gradient shape mismatch for '" + name + "'");
    p.grad.data() += grads_[idx];
  }
}

}  // namespace vdn::ad
