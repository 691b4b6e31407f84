#include "vdn/train/trainer.hpp"

#include "vdn/util/error.hpp"
#include "vdn/util/parallel.hpp"

#include <cmath>
#include <iomanip>
#include <memory>
#include <sstream>

namespace vdn::train {

namespace {
constexpr double kUnitTolerance = 1e-9;
}

int TrainConfig::positive_pairs() const {
  return static_cast<int>(std::ceil(pairs() * positive_fraction - 1e-9));
}

void TrainConfig::validate() const {
  if (iterations < 0) throw ConfigError("train: iterations must be non-negative");
  if (!(learning_rate > 0)) throw ConfigError("train: learning rate must be positive");
  if (momentum < 0 || momentum >= 1) throw ConfigError("train: momentum must lie in [0, 1)");
  if (weight_decay < 0) throw ConfigError("train: weight decay must be non-negative");
  if (!(margin > 0)) throw ConfigError("train: contrastive margin must be positive");
  if (softmax_weight < 0 || contrastive_weight < 0) throw ConfigError("train: loss weights must be non-negative");
  if (batch_shapes < 2 || batch_shapes % 2 != 0)
    throw ConfigError("train: shapes per batch must be even and at least 2, got " + std::to_string(batch_shapes));
  if (positive_fraction < 0 || positive_fraction > 1)
    throw ConfigError("train: positive-pair fraction must lie in [0, 1]");
  if (plateau_window < 1) throw ConfigError("train: plateau window must be at least 1");
  if (plateau_threshold < 0 || plateau_threshold >= 1) throw ConfigError("train: plateau threshold must lie in [0, 1)");
  if (!(min_learning_rate > 0)) throw ConfigError("train: learning-rate floor must be positive");
}

PairSampler::PairSampler(std::vector<int> labels, const TrainConfig& config, std::uint64_t seed)
    : labels_(std::move(labels)), pairs_(config.pairs()), positives_(config.positive_pairs()), rng_(seed) {
  config.validate();
  int max_label = -1;
  for (int l : labels_) {
    if (l < 0) throw ConfigError("pair sampler: negative label");
    max_label = std::max(max_label, l);
  }
  by_label_.resize(static_cast<std::size_t>(max_label + 1));
  for (std::size_t i = 0; i < labels_.size(); ++i) by_label_[std::size_t(labels_[i])].push_back(int(i));
  for (std::size_t l = 0; l < by_label_.size(); ++l) {
    if (!by_label_[l].empty()) present_.push_back(int(l));
    if (by_label_[l].size() >= 2) pos_labels_.push_back(int(l));
  }
  if (positives_ > 0 && pos_labels_.empty())
    throw ConfigError("pair sampler: positive pairs requested but no category has two shapes");
  if (positives_ < pairs_ && present_.size() < 2)
    throw ConfigError("pair sampler: negative pairs requested but fewer than two categories are present");
}

PairBatch PairSampler::next() {
  PairBatch batch;
  auto pick = [&](const std::vector<int>& v) { return v[rng_.below(v.size())]; };
  for (int i = 0; i < pairs_; ++i) {
    if (i < positives_) {
      const auto& pool = by_label_[std::size_t(pick(pos_labels_))];
      const auto a = rng_.below(pool.size());
      auto b = rng_.below(pool.size() - 1);
      if (b >= a) ++b;
      batch.members.push_back(pool[a]);
      batch.members.push_back(pool[b]);
      batch.flags.push_back(1);
    } else {
      const auto a = rng_.below(present_.size());
      auto b = rng_.below(present_.size() - 1);
      if (b >= a) ++b;
      batch.members.push_back(pick(by_label_[std::size_t(present_[a])]));
      batch.members.push_back(pick(by_label_[std::size_t(present_[b])]));
      batch.flags.push_back(0);
    }
  }
  return batch;
}

PairSampler assemble_pair_batches(const shapes::DatasetManifest& manifest, const TrainConfig& config,
                                  std::uint64_t seed) {
  std::vector<int> labels;
  for (const auto& r : manifest.shapes)
    if (r.split == shapes::Split::train) labels.push_back(r.label);
  return PairSampler(std::move(labels), config, seed);
}

Var contrastive_loss(std::span<const Var> normalized, std::span<const int> flags, double margin) {
  if (normalized.empty() || normalized.size() != 2 * flags.size())
    throw ConfigError("contrastive_loss: expected 2M descriptors for M flags, got " +
                      std::to_string(normalized.size()) + " and " + std::to_string(flags.size()));
  for (std::size_t i = 0; i < normalized.size(); ++i) {
    const double n = normalized[i].value().data().norm();
    if (std::abs(n - 1.0) > kUnitTolerance)
      throw ContractError("contrastive_loss: descriptor " + std::to_string(i) + " has norm " + std::to_string(n) +
                          ", expected unit length");
  }
  const double inv = 1.0 / static_cast<double>(normalized.size());
  Tape& tape = normalized.front().tape();
  double loss = 0.0;
  std::vector<double> coef(flags.size());
  for (std::size_t i = 0; i < flags.size(); ++i) {
    const ad::Vector d = normalized[2 * i].value().data() - normalized[2 * i + 1].value().data();
    const double e = d.squaredNorm();
    if (flags[i]) {
      loss += e;
      coef[i] = inv;
    } else {
      tape.note_kink(std::abs(margin - e));
      const bool active = margin - e > 0.0;
      loss += active ? margin - e : 0.0;
      coef[i] = active ? -inv : 0.0;
    }
  }
  std::vector<Var> ins(normalized.begin(), normalized.end());
  return tape.record(
      ad::Tensor({1}, {loss * inv}), ins,
      [ins, coef](Tape& t, const ad::Vector& up) {
        for (std::size_t i = 0; i < coef.size(); ++i) {
          if (coef[i] == 0.0) continue;
          const ad::Vector g = 2.0 * coef[i] * up[0] * (ins[2 * i].value().data() - ins[2 * i + 1].value().data());
          t.add_grad(ins[2 * i], g);
          t.add_grad(ins[2 * i + 1], -g);
        }
      },
      "contrastive_loss");
}

LossTerms joint_loss(std::span<const Var> logits, std::span<const int> labels, std::span<const Var> descriptors,
                     std::span<const int> flags, const TrainConfig& config) {
  if (logits.empty() || logits.size() != labels.size() || logits.size() != descriptors.size())
    throw ConfigError("joint_loss: logits, labels and descriptors must have the same non-zero count");
  std::vector<Var> ce;
  for (std::size_t j = 0; j < logits.size(); ++j) ce.push_back(ad::softmax_cross_entropy(logits[j], labels[j]));
  LossTerms t;
  t.softmax = ad::scale(ad::sum_n(ce), 1.0 / static_cast<double>(ce.size()));
  if (config.contrastive_weight == 0.0) {
    // switched off: the descriptors are not normalized, so a zero descriptor is harmless
    t.contrastive = logits.front().tape().constant(ad::Tensor({1}, {0.0}));
  } else {
    std::vector<Var> unit;
    for (const Var& d : descriptors) unit.push_back(ad::l2_normalize(d));
    t.contrastive = contrastive_loss(unit, flags, config.margin);
  }
  t.total = ad::add(ad::scale(t.softmax, config.softmax_weight), ad::scale(t.contrastive, config.contrastive_weight));
  return t;
}

void sgd_step(ParamStore& params, double lr, double momentum, double weight_decay) {
  for (auto& p : params.entries()) {
    ad::Vector& theta = p.value.data();
    ad::Vector g = p.grad.data() + weight_decay * theta;
    p.momentum.data() = momentum * p.momentum.data() - lr * g;
    theta += p.momentum.data();
  }
  params.zero_grad();
}

PlateauSchedule::PlateauSchedule(const TrainConfig& config)
    : window_(config.plateau_window),
      threshold_(config.plateau_threshold),
      floor_(config.min_learning_rate),
      lr_(std::max(config.learning_rate, config.min_learning_rate)) {}

bool PlateauSchedule::observe(double total) {
  ++seen_;
  current_sum_ += total;
  if (++in_window_ < window_) return false;
  const double mean = current_sum_ / window_;
  current_sum_ = 0.0;
  in_window_ = 0;
  bool halved = false;
  if (have_previous_ && !(mean <= (1.0 - threshold_) * previous_mean_)) {
    const double next = std::max(lr_ * 0.5, floor_);
    if (next < lr_) {
      lr_ = next;
      halvings_.push_back(seen_);
      halved = true;
    }
  }
  previous_mean_ = mean;
  have_previous_ = true;
  return halved;
}

double plateau_schedule(std::span<const LossReport> history, const TrainConfig& config) {
  PlateauSchedule s(config);
  for (const auto& r : history) s.observe(r.total);
  return s.lr();
}

LossReport train_step(ParamStore& params, std::span<const shapes::ViewSet> shapes, const PairBatch& batch,
                      const net::NetworkConfig& network, const TrainConfig& config, double lr) {
  const std::size_t n = batch.members.size();
  std::vector<std::unique_ptr<Tape>> tapes(n);
  std::vector<net::ShapeOutput> outs(n);
  parallel_for(n, [&](std::size_t j) {
    tapes[j] = std::make_unique<Tape>();
    const auto& views = shapes[std::size_t(batch.members[j])].views;
    outs[j] = net::shape_forward(*tapes[j], params, network, views);
  });

  // The joint objective lives on a small tape over per-shape outputs; its
  // gradients seed each shape's own backward pass.
  Tape head;
  std::vector<Var> desc, logits;
  std::vector<int> labels;
  for (std::size_t j = 0; j < n; ++j) {
    ad::Tensor d = outs[j].descriptor.value(), l = outs[j].logits.value();
    d.requires_grad = l.requires_grad = true;
    desc.push_back(head.leaf(std::move(d)));
    logits.push_back(head.leaf(std::move(l)));
    labels.push_back(shapes[std::size_t(batch.members[j])].label);
  }
  const LossTerms terms = joint_loss(logits, labels, desc, batch.flags, config);
  LossReport report{0, terms.softmax.value()[0], terms.contrastive.value()[0], terms.total.value()[0], lr};
  if (!std::isfinite(report.total)) return report;
  head.backward(terms.total);

  parallel_for(n, [&](std::size_t j) {
    const Var outputs[] = {outs[j].descriptor, outs[j].logits};
    const ad::Tensor seeds[] = {head.grad(desc[j]), head.grad(logits[j])};
    tapes[j]->backward(outputs, seeds);
  });
  for (std::size_t j = 0; j < n; ++j) tapes[j]->accumulate_into(params);
  sgd_step(params, lr, config.momentum, config.weight_decay);
  return report;
}

TrainResult train(std::span<const shapes::ViewSet> shapes, const net::NetworkConfig& network,
                  const TrainConfig& config, const ProgressFn& progress) {
  config.validate();
  network.validate();
  for (const auto& s : shapes) {
    if (s.label < 0 || s.label >= network.classes)
      throw ConfigError("train: shape " + std::to_string(s.shape_id) + " has label " + std::to_string(s.label) +
                        " outside the network's " + std::to_string(network.classes) + " classes");
  }
  TrainResult result{net::init_params(network, derive_seed(config.seed, 1)), {}, {}};
  if (config.iterations == 0) return result;
  if (shapes.empty()) throw ConfigError("train: no training shapes");

  std::vector<int> labels;
  for (const auto& s : shapes) labels.push_back(s.label);
  PairSampler sampler(std::move(labels), config, derive_seed(config.seed, 2));
  PlateauSchedule schedule(config);

  result.log.reserve(std::size_t(config.iterations));
  for (int it = 1; it <= config.iterations; ++it) {
    const PairBatch batch = sampler.next();
    LossReport r;
    try {
      r = train_step(result.params, shapes, batch, network, config, schedule.lr());
    } catch (const DegenerateInputError& e) {
      throw DivergenceError("training diverged at iteration " + std::to_string(it) + ": " + e.what());
    }
    r.iteration = it;
    if (!std::isfinite(r.total))
      throw DivergenceError("training diverged at iteration " + std::to_string(it) + ": loss is " +
                            std::to_string(r.total));
    result.log.push_back(r);
    schedule.observe(r.total);
    if (progress) progress(r);
  }
  result.halvings = schedule.halvings();
  return result;
}

TrainResult train(const shapes::Dataset& dataset, const net::NetworkConfig& network, const TrainConfig& config,
                  const ProgressFn& progress) {
  std::vector<shapes::ViewSet> pool;
  for (const auto* s : dataset.split(shapes::Split::train)) pool.push_back(*s);
  if (pool.empty() && config.iterations > 0) throw ConfigError("train: dataset has no train split");
  return train(pool, network, config, progress);
}

std::string loss_csv(std::span<const LossReport> log) {
  std::ostringstream out;
  out << "iteration,softmax,contrastive,total,lr\n" << std::setprecision(17);
  for (const auto& r : log)
    out << r.iteration << ',' << r.softmax << ',' << r.contrastive << ',' << r.total << ',' << r.lr << '\n';
  return out.str();
}

}  // namespace vdn::train
