#pragma once

#include "vdn/autodiff/param_store.hpp"
#include "vdn/autodiff/tape.hpp"

#include <functional>
#include <span>
#include <vector>

namespace vdn::ad {

struct GradCheckReport {
  double max_rel_error = 0.0;
  // Location of the worst coordinate: input (or parameter) index and offset.
  std::size_t worst_input = 0;
  Index worst_coord = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  // Smallest distance to a non-smooth point seen while recording the
  // unperturbed program (infinity for smooth programs).
  double kink_margin = 0.0;
  Index coordinates = 0;
};

/// Scalar-valued program over leaf variables.
using ScalarProgram = std::function<Var(Tape&, std::span<const Var>)>;
/// Scalar-valued program reading its weights from a parameter store.
using ParamProgram = std::function<Var(Tape&, const ParamStore&)>;

/// Compares reverse-mode gradients against central differences with step h.
/// Relative error per coordinate: |a - c| / max(|a|, |c|, 1e-8).
GradCheckReport finite_diff_check(const ScalarProgram& program, const std::vector<Tensor>& inputs, double h = 1e-5);

/// Same check over every scalar of every parameter in `store`.
GradCheckReport finite_diff_check(const ParamProgram& program, const ParamStore& store, double h = 1e-5);

double relative_error(double analytic, double numeric);

}  // namespace vdn::ad
