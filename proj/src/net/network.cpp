#include "vdn/net/network.hpp"

#include "vdn/util/error.hpp"
#include "vdn/util/random.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

namespace vdn::net {

namespace {

struct NamePair {
  const char* name;
  int value;
};

constexpr NamePair kScoreUnits[] = {{"none", 0}, {"channel", 1}, {"part", 2}, {"single", 3}};
constexpr NamePair kAggregations[] = {{"weighted_sum", 0}, {"max", 1}, {"avg", 2}, {"weighted_max", 3}};

template <std::size_t N>
int lookup(const NamePair (&table)[N], const std::string& name, const char* what) {
  for (const auto& e : table)
    if (name == e.name) return e.value;
  throw ConfigError(std::string("unknown ") + what + " '" + name + "'");
}

std::string conv_name(int stage, const char* suffix) { return "cnn." + std::to_string(stage) + "." + suffix; }
std::string score_name(const std::string& layer, const char* suffix) { return "score." + layer + "." + suffix; }

Tensor he_uniform(ad::Shape shape, ad::Index fan_in, Rng& rng) {
  Tensor t(std::move(shape));
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (ad::Index i = 0; i < t.size(); ++i) t[i] = rng.uniform(-limit, limit);
  return t;
}

void add_conv(ParamStore& store, const std::string& w, const std::string& b, int k, int cin, int cout, Rng& rng) {
  store.add(w, he_uniform({k, k, cin, cout}, k * k * cin, rng));
  store.add(b, Tensor::zeros({cout}));
}

void add_dense(ParamStore& store, const std::string& w, const std::string& b, ad::Index m, int k, Rng& rng) {
  store.add(w, he_uniform({m, k}, m, rng));
  store.add(b, Tensor::zeros({k}));
}

Var conv(Tape& tape, const ParamStore& params, const std::string& w, const std::string& b, const Var& x, int stride,
         int pad) {
  return ad::conv2d(x, tape.param(params, w), tape.param(params, b), stride, pad);
}

// Number of stride-2 convolutions the part unit needs to reach 2h x 2w.
int part_downsamples(const NetworkConfig& config) {
  const int target = 2 * config.feature_grid().h;
  if (target <= 0 || config.resolution % target != 0 || !std::has_single_bit(unsigned(config.resolution / target)))
    return -1;
  return std::countr_zero(unsigned(config.resolution / target));
}

int score_spatial(const NetworkConfig& config) {
  int s = config.resolution;
  for (std::size_t i = 0; i < config.score_widths.size(); ++i) s = (s + 1) / 2;
  return s;
}

Var score_trunk(Tape& tape, const ParamStore& params, const NetworkConfig& config, const Var& view) {
  Var x = view;
  for (std::size_t i = 0; i < config.score_widths.size(); ++i) {
    const std::string layer = "conv" + std::to_string(i);
    x = ad::relu(conv(tape, params, score_name(layer, "w"), score_name(layer, "b"), x, 2, 1));
  }
  return x;
}

}  // namespace

std::string score_unit_name(ScoreUnit u) { return kScoreUnits[static_cast<int>(u)].name; }
ScoreUnit score_unit_from_name(const std::string& name) {
  return static_cast<ScoreUnit>(lookup(kScoreUnits, name, "score unit"));
}
std::string aggregation_name(Aggregation a) { return kAggregations[static_cast<int>(a)].name; }
Aggregation aggregation_from_name(const std::string& name) {
  return static_cast<Aggregation>(lookup(kAggregations, name, "aggregation"));
}

FeatureGrid NetworkConfig::feature_grid() const {
  if (split_stage < 0 || split_stage >= static_cast<int>(widths.size())) return {};
  const int side = resolution >> (split_stage + 1);
  return {side, side, widths[static_cast<std::size_t>(split_stage)]};
}

void NetworkConfig::validate() const {
  if (widths.empty()) throw ConfigError("network: at least one backbone stage required");
  for (int w : widths)
    if (w <= 0) throw ConfigError("network: backbone widths must be positive");
  if (split_stage < 0 || split_stage >= static_cast<int>(widths.size()))
    throw ConfigError("network: split_stage " + std::to_string(split_stage) + " outside [0, " +
                      std::to_string(widths.size() - 1) + "]");
  const int stages = static_cast<int>(widths.size());
  if (resolution < 2 || resolution % (1 << stages) != 0)
    throw ConfigError("network: resolution " + std::to_string(resolution) + " must be a multiple of " +
                      std::to_string(1 << stages));
  if (classes < 2) throw ConfigError("network: at least two classes required");
  if (score_unit == ScoreUnit::none && weighted())
    throw ConfigError("network: aggregation '" + aggregation_name(aggregation) + "' needs a score unit");
  if (score_unit != ScoreUnit::none) {
    if (score_widths.size() != 3) throw ConfigError("network: score branches use exactly three conv stages");
    for (int w : score_widths)
      if (w <= 0) throw ConfigError("network: score widths must be positive");
  }
  if (score_unit == ScoreUnit::part) {
    if (part_channels <= 0) throw ConfigError("network: part_channels must be positive");
    const int down = part_downsamples(*this);
    if (down < 0 || down > 3)
      throw ConfigError("network: part unit cannot reach a " + std::to_string(2 * feature_grid().h) +
                        " map from resolution " + std::to_string(resolution) + " in three conv stages");
  }
}

NetworkConfig config_for_arch(const std::string& arch, NetworkConfig base) {
  if (arch == "vdn-channel") {
    base.score_unit = ScoreUnit::channel;
    base.aggregation = Aggregation::weighted_sum;
  } else if (arch == "vdn-part") {
    base.score_unit = ScoreUnit::part;
    base.aggregation = Aggregation::weighted_sum;
  } else if (arch == "vdn-single") {
    base.score_unit = ScoreUnit::single;
    base.aggregation = Aggregation::weighted_sum;
  } else if (arch == "vdn-max") {
    base.score_unit = ScoreUnit::part;
    base.aggregation = Aggregation::weighted_max;
  } else if (arch == "cnn-max") {
    base.score_unit = ScoreUnit::none;
    base.aggregation = Aggregation::max;
  } else if (arch == "cnn-avg") {
    base.score_unit = ScoreUnit::none;
    base.aggregation = Aggregation::avg;
  } else {
    throw ConfigError("unknown architecture '" + arch + "'");
  }
  return base;
}

std::string arch_name(const NetworkConfig& c) {
  switch (c.aggregation) {
    case Aggregation::max: return "cnn-max";
    case Aggregation::avg: return "cnn-avg";
    case Aggregation::weighted_max: return "vdn-max";
    case Aggregation::weighted_sum: break;
  }
  switch (c.score_unit) {
    case ScoreUnit::channel: return "vdn-channel";
    case ScoreUnit::part: return "vdn-part";
    case ScoreUnit::single: return "vdn-single";
    case ScoreUnit::none: break;
  }
  return "custom";
}

const std::vector<std::string>& arch_names() {
  static const std::vector<std::string> names = {"vdn-channel", "vdn-part", "vdn-single",
                                                 "vdn-max",     "cnn-max",  "cnn-avg"};
  return names;
}

ParamStore init_params(const NetworkConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  ParamStore store;
  int cin = 1;
  for (std::size_t i = 0; i < config.widths.size(); ++i) {
    add_conv(store, conv_name(int(i), "w"), conv_name(int(i), "b"), 3, cin, config.widths[i], rng);
    cin = config.widths[i];
  }
  add_dense(store, "fc.w", "fc.b", config.descriptor_dim(), config.classes, rng);

  if (config.score_unit == ScoreUnit::none) return store;
  const FeatureGrid grid = config.feature_grid();
  cin = 1;
  if (config.score_unit == ScoreUnit::part) {
    for (int i = 0; i < 3; ++i) {
      const int cout = i < 2 ? config.score_widths[std::size_t(i)] : config.part_channels;
      const std::string layer = "conv" + std::to_string(i);
      add_conv(store, score_name(layer, "w"), score_name(layer, "b"), 3, cin, cout, rng);
      cin = cout;
    }
    add_conv(store, score_name("out", "w"), score_name("out", "b"), 2, cin, 1, rng);
    return store;
  }
  for (std::size_t i = 0; i < config.score_widths.size(); ++i) {
    const std::string layer = "conv" + std::to_string(i);
    add_conv(store, score_name(layer, "w"), score_name(layer, "b"), 3, cin, config.score_widths[i], rng);
    cin = config.score_widths[i];
  }
  const int side = score_spatial(config);
  const int outputs = config.score_unit == ScoreUnit::channel ? grid.c : 1;
  add_dense(store, score_name("out", "w"), score_name("out", "b"), ad::Index{side} * side * cin, outputs, rng);
  return store;
}

Tensor view_tensor(const shapes::DepthImage& view) {
  Tensor t({view.height(), view.width(), 1});
  for (int y = 0; y < view.height(); ++y)
    for (int x = 0; x < view.width(); ++x) t.at(y, x, 0) = view.depth(y, x);
  return t;
}

Var forward_backbone(Tape& tape, const ParamStore& params, const NetworkConfig& config, const Var& view) {
  const auto& s = view.shape();
  if (s.size() != 3 || s[0] != config.resolution || s[1] != config.resolution || s[2] != 1)
    throw ConfigError("forward_backbone: view " + ad::shape_string(s) + " does not match resolution " +
                      std::to_string(config.resolution));
  Var x = view;
  for (int i = 0; i <= config.split_stage; ++i)
    x = ad::relu(conv(tape, params, conv_name(i, "w"), conv_name(i, "b"), x, 2, 1));
  return x;
}

ScoreOutput score_channelwise(Tape& tape, const ParamStore& params, const NetworkConfig& config, const Var& view) {
  const FeatureGrid g = config.feature_grid();
  const Var trunk = score_trunk(tape, params, config, view);
  const Var logits = ad::dense(trunk, tape.param(params, score_name("out", "w")), tape.param(params, score_name("out", "b")));
  const Var raw = ad::reshape(ad::sigmoid(logits), {1, 1, g.c});
  return {raw, ad::broadcast_to(raw, {g.h, g.w, g.c})};
}

ScoreOutput score_partwise(Tape& tape, const ParamStore& params, const NetworkConfig& config, const Var& view) {
  const FeatureGrid g = config.feature_grid();
  const int down = part_downsamples(config);
  Var x = view;
  for (int i = 0; i < 3; ++i) {
    const std::string layer = "conv" + std::to_string(i);
    x = ad::relu(conv(tape, params, score_name(layer, "w"), score_name(layer, "b"), x, i < down ? 2 : 1, 1));
  }
  const Var raw = ad::sigmoid(conv(tape, params, score_name("out", "w"), score_name("out", "b"), x, 2, 0));
  return {raw, ad::broadcast_to(raw, {g.h, g.w, g.c})};
}

ScoreOutput score_single(Tape& tape, const ParamStore& params, const NetworkConfig& config, const Var& view) {
  const FeatureGrid g = config.feature_grid();
  const Var trunk = score_trunk(tape, params, config, view);
  const Var logit = ad::dense(trunk, tape.param(params, score_name("out", "w")), tape.param(params, score_name("out", "b")));
  const Var raw = ad::reshape(ad::sigmoid(logit), {1, 1, 1});
  return {raw, ad::broadcast_to(raw, {g.h, g.w, g.c})};
}

ScoreOutput score_view(Tape& tape, const ParamStore& params, const NetworkConfig& config, const Var& view) {
  switch (config.score_unit) {
    case ScoreUnit::channel: return score_channelwise(tape, params, config, view);
    case ScoreUnit::part: return score_partwise(tape, params, config, view);
    case ScoreUnit::single: return score_single(tape, params, config, view);
    case ScoreUnit::none: break;
  }
  throw ConfigError("score_view: network has no score unit");
}

Var aggregate(Aggregation kind, std::span<const Var> features, std::span<const Var> scores) {
  if (features.empty()) throw ConfigError("aggregate: at least one view required");
  const bool weighted = kind == Aggregation::weighted_sum || kind == Aggregation::weighted_max;
  if (!weighted) {
    if (!scores.empty()) throw ConfigError("aggregate: '" + aggregation_name(kind) + "' takes no scores");
    return kind == Aggregation::max ? ad::max_n(features) : ad::mean_n(features);
  }
  if (scores.size() != features.size())
    throw ConfigError("aggregate: '" + aggregation_name(kind) + "' needs one score block per view (got " +
                      std::to_string(scores.size()) + " for " + std::to_string(features.size()) + ")");
  std::vector<Var> weighted_blocks;
  weighted_blocks.reserve(features.size());
  for (std::size_t i = 0; i < features.size(); ++i) weighted_blocks.push_back(ad::hadamard(scores[i], features[i]));
  return kind == Aggregation::weighted_sum ? ad::sum_n(weighted_blocks) : ad::max_n(weighted_blocks);
}

HeadOutput forward_head(Tape& tape, const ParamStore& params, const NetworkConfig& config, const Var& aggregated) {
  const FeatureGrid g = config.feature_grid();
  if (aggregated.shape() != ad::Shape{g.h, g.w, g.c})
    throw ConfigError("forward_head: expected " + ad::shape_string({g.h, g.w, g.c}) + " block, got " +
                      ad::shape_string(aggregated.shape()));
  Var x = aggregated;
  for (int i = config.split_stage + 1; i < static_cast<int>(config.widths.size()); ++i)
    x = ad::relu(conv(tape, params, conv_name(i, "w"), conv_name(i, "b"), x, 2, 1));
  const Var descriptor = ad::reshape(ad::global_avg_pool(x), {config.descriptor_dim()});
  const Var logits = ad::dense(descriptor, tape.param(params, "fc.w"), tape.param(params, "fc.b"));
  return {descriptor, logits};
}

ShapeOutput shape_forward(Tape& tape, const ParamStore& params, const NetworkConfig& config,
                          std::span<const shapes::DepthImage> views) {
  if (views.empty()) throw ConfigError("shape_forward: no views");
  ShapeOutput out;
  std::vector<Var> blocks;
  for (const auto& view : views) {
    const Var input = tape.constant(view_tensor(view));
    out.features.push_back(forward_backbone(tape, params, config, input));
    if (config.score_unit != ScoreUnit::none) {
      out.scores.push_back(score_view(tape, params, config, input));
      blocks.push_back(out.scores.back().block);
    }
  }
  // Unweighted baselines may still carry a score branch; it is then unused.
  if (!config.weighted()) blocks.clear();
  out.aggregated = aggregate(config.aggregation, out.features, blocks);
  const HeadOutput head = forward_head(tape, params, config, out.aggregated);
  out.descriptor = head.descriptor;
  out.logits = head.logits;
  return out;
}

Inference infer(const ParamStore& params, const NetworkConfig& config, std::span<const shapes::DepthImage> views) {
  Tape tape;
  const ShapeOutput out = shape_forward(tape, params, config, views);
  Inference r{out.descriptor.value().data(), out.logits.value().data(), {}};
  for (const auto& s : out.scores) r.raw_scores.push_back(s.raw.value());
  return r;
}

ad::Vector pooled_view_feature(const ParamStore& params, const NetworkConfig& config, const shapes::DepthImage& view) {
  Tape tape;
  const Var features = forward_backbone(tape, params, config, tape.constant(view_tensor(view)));
  return ad::global_avg_pool(features).value().data();
}

}  // namespace vdn::net
