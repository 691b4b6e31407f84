#include "vdn/autodiff/param_store.hpp"

#include "vdn/util/error.hpp"

namespace vdn::ad {

Parameter& ParamStore::add(const std::string& name, Tensor value) {
  if (contains(name)) throw ConfigError("duplicate parameter name '" + name + "'");
  const Shape shape = value.shape();
  value.requires_grad = true;
  index_.emplace(name, params_.size());
  params_.push_back(Parameter{name, std::move(value), Tensor::zeros(shape), Tensor::zeros(shape)});
  return params_.back();
}

Parameter& ParamStore::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter '" + name + "'");
  return params_[it->second];
}

const Parameter& ParamStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter '" + name + "'");
  return params_[it->second];
}

Index ParamStore::scalar_count() const {
  Index n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& p : params_) p.grad.data().setZero();
}

void ParamStore::accumulate_grads_from(const ParamStore& other) {
  if (other.size() != size()) throw ConfigError("parameter stores differ in size");
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& src = other.params_[i];
    auto& dst = params_[i];
    if (src.name != dst.name || src.grad.shape() != dst.grad.shape())
      throw ConfigError("parameter stores disagree at '" + dst.name + "'");
    dst.grad.data() += src.grad.data();
  }
}

}  // namespace vdn::ad
