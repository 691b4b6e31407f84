#include "vdn/autodiff/gradcheck.hpp"

#include "vdn/util/error.hpp"

#include <cmath>

namespace vdn::ad {

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

namespace {

double scalar_of(const Var& v) {
  if (v.value().size() != 1) throw ConfigError("gradient check: program must return a scalar");
  return v.value()[0];
}

double evaluate(const ScalarProgram& program, const std::vector<Tensor>& inputs) {
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(inputs.size());
  for (const Tensor& t : inputs) vars.push_back(tape.constant(t));
  return scalar_of(program(tape, vars));
}

void consider(GradCheckReport& report, std::size_t input, Index coord, double analytic, double numeric) {
  const double err = relative_error(analytic, numeric);
  ++report.coordinates;
  if (err >= report.max_rel_error) {
    report.max_rel_error = err;
    report.worst_input = input;
    report.worst_coord = coord;
    report.analytic = analytic;
    report.numeric = numeric;
  }
}

}  // namespace

GradCheckReport finite_diff_check(const ScalarProgram& program, const std::vector<Tensor>& inputs, double h) {
  GradCheckReport report;
  std::vector<Tensor> analytic;
  {
    Tape tape;
    std::vector<Var> vars;
    for (Tensor t : inputs) {
      t.requires_grad = true;
      vars.push_back(tape.leaf(std::move(t)));
    }
    Var loss = program(tape, vars);
    scalar_of(loss);
    tape.backward(loss);
    report.kink_margin = tape.kink_margin();
    for (const Var& v : vars) analytic.push_back(tape.grad(v));
  }

  std::vector<Tensor> probe = inputs;
  for (std::size_t k = 0; k < probe.size(); ++k) {
    for (Index i = 0; i < probe[k].size(); ++i) {
      const double orig = probe[k][i];
      const double up = orig + h, down = orig - h;
      probe[k][i] = up;
      const double plus = evaluate(program, probe);
      probe[k][i] = down;
      const double minus = evaluate(program, probe);
      probe[k][i] = orig;
      // realized step, not 2h: x +- h is rounded
      consider(report, k, i, analytic[k][i], (plus - minus) / (up - down));
    }
  }
  return report;
}

GradCheckReport finite_diff_check(const ParamProgram& program, const ParamStore& store, double h) {
  GradCheckReport report;
  ParamStore grads = store;
  grads.zero_grad();
  {
    Tape tape;
    Var loss = program(tape, store);
    scalar_of(loss);
    tape.backward(loss);
    report.kink_margin = tape.kink_margin();
    tape.accumulate_into(grads);
  }

  ParamStore probe = store;
  auto eval = [&] {
    Tape tape;
    return scalar_of(program(tape, probe));
  };
  for (std::size_t k = 0; k < probe.size(); ++k) {
    Tensor& value = probe.entries()[k].value;
    for (Index i = 0; i < value.size(); ++i) {
      const double orig = value[i];
      const double up = orig + h, down = orig - h;
      value[i] = up;
      const double plus = eval();
      value[i] = down;
      const double minus = eval();
      value[i] = orig;
      consider(report, k, i, grads.entries()[k].grad[i], (plus - minus) / (up - down));
    }
  }
  return report;
}

}  // namespace vdn::ad
