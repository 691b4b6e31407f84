#pragma once

#include "vdn/autodiff/tensor.hpp"

#include <map>
#include <string>
#include <vector>

namespace vdn::ad {

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  Tensor momentum;
};

/// Named trainable parameters in registration order. Each entry carries a
/// gradient accumulator and a momentum buffer of the same shape as the value.
class ParamStore {
 public:
  Parameter& add(const std::string& name, Tensor value);

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  Parameter& get(const std::string& name);
  const Parameter& get(const std::string& name) const;

  std::vector<Parameter>& entries() { return params_; }
  const std::vector<Parameter>& entries() const { return params_; }
  std::size_t size() const { return params_.size(); }
  Index scalar_count() const;

  void zero_grad();

  // Adds `other`'s gradient accumulators into ours; both stores must have
  // identical names and shapes.
  void accumulate_grads_from(const ParamStore& other);

 private:
  std::vector<Parameter> params_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace vdn::ad
