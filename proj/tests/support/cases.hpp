#pragma once

#include "vdn/autodiff/gradcheck.hpp"
#include "vdn/train/trainer.hpp"
#include "vdn/util/random.hpp"

#include <functional>
#include <string>
#include <vector>

// Shared fixtures for the unit tests and the acceptance harness.
namespace vdn::testing {

ad::Tensor random_tensor(ad::Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0);

// Pushes every coordinate at least `gap` away from zero (relu kinks).
ad::Tensor nudged(ad::Tensor t, double gap);

struct GradientCase {
  ad::ScalarProgram program;
  std::vector<ad::Tensor> inputs;
};

struct OpSuite {
  std::string name;
  std::function<GradientCase(int instance)> make;
};

/// One suite per differentiable operation family, each producing random
/// instances on demand.
const std::vector<OpSuite>& op_suites();

struct SuiteResult {
  double worst = 0;
  int accepted = 0;
  int skipped = 0;  // instances within the kink margin
};

/// Runs `count` accepted instances, skipping those whose non-smooth
/// arguments sit within `margin` of a kink.
SuiteResult run_suite(const OpSuite& suite, int count, double margin = 1e-4);

/// 8x8 inputs, widths {2,3,4}, split after stage 1, three classes.
net::NetworkConfig miniature(net::ScoreUnit unit, net::Aggregation agg);

/// Shapes with random depth views; labels cycle through `classes`.
std::vector<shapes::ViewSet> random_shapes(int count, int views, int resolution, int classes, Rng& rng);

/// He-initialized weights with biases uniform in [bias_lo, bias_hi).
ad::ParamStore random_params(const net::NetworkConfig& config, std::uint64_t seed, double bias_lo = -0.1,
                             double bias_hi = 0.1);

/// Joint loss of `batch` recorded on one tape.
ad::ParamProgram joint_program(const std::vector<shapes::ViewSet>& shapes, const train::PairBatch& batch,
                               const net::NetworkConfig& network, const train::TrainConfig& config);

}  // namespace vdn::testing
