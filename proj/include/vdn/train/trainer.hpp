#pragma once

#include "vdn/net/network.hpp"
#include "vdn/shapes/dataset.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace vdn::train {

using ad::ParamStore;
using ad::Tape;
using ad::Var;

struct TrainConfig {
  int iterations = 3000;
  double learning_rate = 2e-3;
  double momentum = 0.9;
  double weight_decay = 2e-4;
  double margin = 1.4;  // on squared distance between unit descriptors
  double softmax_weight = 1.0;
  double contrastive_weight = 1.0;
  int batch_shapes = 8;  // 2M, consecutive shapes form a pair
  double positive_fraction = 0.5;
  int plateau_window = 200;
  double plateau_threshold = 0.01;
  double min_learning_rate = 1e-5;
  std::uint64_t seed = 1;

  int pairs() const { return batch_shapes / 2; }
  int positive_pairs() const;
  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

/// Shapes (2i, 2i+1) form pair i; flags[i] = 1 iff the pair shares a label.
struct PairBatch {
  std::vector<int> members;  // indices into the sampler's label list
  std::vector<int> flags;
};

/// Seeded stream of pair batches over a labelled shape pool. Positive pairs
/// come first in each batch.
class PairSampler {
 public:
  PairSampler(std::vector<int> labels, const TrainConfig& config, std::uint64_t seed);
  PairBatch next();

 private:
  std::vector<int> labels_;
  std::vector<std::vector<int>> by_label_;
  std::vector<int> pos_labels_;  // labels with at least two shapes
  std::vector<int> present_;     // labels with at least one shape
  int pairs_, positives_;
  Rng rng_;
};

/// Sampler over the train split of a manifest (indices follow the order of
/// the train records).
PairSampler assemble_pair_batches(const shapes::DatasetManifest& manifest, const TrainConfig& config,
                                  std::uint64_t seed);

/// (1/2M) sum_i [s_i E_i + (1 - s_i) max(margin - E_i, 0)] over unit vectors,
/// E_i the squared distance within pair i. Throws ContractError when an input
/// is off the unit sphere by more than 1e-9.
Var contrastive_loss(std::span<const Var> normalized, std::span<const int> flags, double margin);

struct LossTerms {
  Var softmax;      // mean cross-entropy over the batch
  Var contrastive;  // contrastive_loss on the normalized descriptors
  Var total;
};

/// Normalizes the descriptors itself; shapes and flags follow PairBatch. With
/// a contrastive weight of 0 the term is not evaluated and reads 0.
LossTerms joint_loss(std::span<const Var> logits, std::span<const int> labels, std::span<const Var> descriptors,
                     std::span<const int> flags, const TrainConfig& config);

/// g += wd θ; v = momentum v - lr g; θ += v; then zeroes gradients.
void sgd_step(ParamStore& params, double lr, double momentum, double weight_decay);

struct LossReport {
  int iteration = 0;
  double softmax = 0, contrastive = 0, total = 0, lr = 0;
};

/// Halves the rate when the mean total loss of a completed window fails to
/// undercut the previous window's mean by the configured fraction.
class PlateauSchedule {
 public:
  explicit PlateauSchedule(const TrainConfig& config);
  double lr() const { return lr_; }
  /// Feeds one iteration's total loss; returns true when the rate halved.
  bool observe(double total);
  const std::vector<int>& halvings() const { return halvings_; }

 private:
  int window_;
  double threshold_, floor_, lr_;
  double current_sum_ = 0.0, previous_mean_ = 0.0;
  int in_window_ = 0, seen_ = 0;
  bool have_previous_ = false;
  std::vector<int> halvings_;
};

/// Learning rate in effect after the given history.
double plateau_schedule(std::span<const LossReport> history, const TrainConfig& config);

struct TrainResult {
  ParamStore params;
  std::vector<LossReport> log;
  std::vector<int> halvings;  // iterations after which the rate halved
};

using ProgressFn = std::function<void(const LossReport&)>;

/// Runs config.iterations steps on `shapes` (all treated as training data).
/// Throws DivergenceError naming the iteration when the loss is not finite.
TrainResult train(std::span<const shapes::ViewSet> shapes, const net::NetworkConfig& network,
                  const TrainConfig& config, const ProgressFn& progress = {});

/// Train split of `dataset`.
TrainResult train(const shapes::Dataset& dataset, const net::NetworkConfig& network, const TrainConfig& config,
                  const ProgressFn& progress = {});

/// One optimization step: returns the report and leaves updated parameters.
LossReport train_step(ParamStore& params, std::span<const shapes::ViewSet> shapes, const PairBatch& batch,
                      const net::NetworkConfig& network, const TrainConfig& config, double lr);

std::string loss_csv(std::span<const LossReport> log);

}  // namespace vdn::train
