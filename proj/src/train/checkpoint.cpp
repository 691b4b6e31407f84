#include "vdn/train/checkpoint.hpp"

#include "vdn/util/binary_io.hpp"
#include "vdn/util/error.hpp"

#include <set>

using nlohmann::json;

namespace {

// Only keys present in `j` override the current value; unknown keys are errors
// so that misspelt settings do not pass silently.
void check_keys(const json& j, std::initializer_list<const char*> known, const char* what) {
  if (!j.is_object()) throw vdn::ConfigError(std::string(what) + ": expected a JSON object");
  const std::set<std::string> allowed(known.begin(), known.end());
  for (const auto& [key, value] : j.items())
    if (!allowed.count(key)) throw vdn::ConfigError(std::string(what) + ": unknown key '" + key + "'");
}

template <typename T>
void overlay(const json& j, const char* key, T& field) {
  if (auto it = j.find(key); it != j.end()) field = it->get<T>();
}

}  // namespace

namespace vdn::net {

void to_json(json& j, const NetworkConfig& c) {
  j = json{{"resolution", c.resolution},
           {"widths", c.widths},
           {"split_stage", c.split_stage},
           {"classes", c.classes},
           {"score_unit", score_unit_name(c.score_unit)},
           {"aggregation", aggregation_name(c.aggregation)},
           {"score_widths", c.score_widths},
           {"part_channels", c.part_channels}};
}

void from_json(const json& j, NetworkConfig& c) {
  check_keys(j,
             {"resolution", "widths", "split_stage", "classes", "score_unit", "aggregation", "score_widths",
              "part_channels"},
             "network config");
  overlay(j, "resolution", c.resolution);
  overlay(j, "widths", c.widths);
  overlay(j, "split_stage", c.split_stage);
  overlay(j, "classes", c.classes);
  overlay(j, "score_widths", c.score_widths);
  overlay(j, "part_channels", c.part_channels);
  if (j.contains("score_unit")) c.score_unit = score_unit_from_name(j.at("score_unit").get<std::string>());
  if (j.contains("aggregation")) c.aggregation = aggregation_from_name(j.at("aggregation").get<std::string>());
}

}  // namespace vdn::net

namespace vdn::train {

void to_json(json& j, const TrainConfig& c) {
  j = json{{"iterations", c.iterations},
           {"learning_rate", c.learning_rate},
           {"momentum", c.momentum},
           {"weight_decay", c.weight_decay},
           {"margin", c.margin},
           {"softmax_weight", c.softmax_weight},
           {"contrastive_weight", c.contrastive_weight},
           {"batch_shapes", c.batch_shapes},
           {"positive_fraction", c.positive_fraction},
           {"plateau_window", c.plateau_window},
           {"plateau_threshold", c.plateau_threshold},
           {"min_learning_rate", c.min_learning_rate},
           {"seed", c.seed}};
}

void from_json(const json& j, TrainConfig& c) {
  check_keys(j,
             {"iterations", "learning_rate", "momentum", "weight_decay", "margin", "softmax_weight",
              "contrastive_weight", "batch_shapes", "positive_fraction", "plateau_window", "plateau_threshold",
              "min_learning_rate", "seed"},
             "train config");
  overlay(j, "iterations", c.iterations);
  overlay(j, "learning_rate", c.learning_rate);
  overlay(j, "momentum", c.momentum);
  overlay(j, "weight_decay", c.weight_decay);
  overlay(j, "margin", c.margin);
  overlay(j, "softmax_weight", c.softmax_weight);
  overlay(j, "contrastive_weight", c.contrastive_weight);
  overlay(j, "batch_shapes", c.batch_shapes);
  overlay(j, "positive_fraction", c.positive_fraction);
  overlay(j, "plateau_window", c.plateau_window);
  overlay(j, "plateau_threshold", c.plateau_threshold);
  overlay(j, "min_learning_rate", c.min_learning_rate);
  overlay(j, "seed", c.seed);
}

std::vector<char> encode_checkpoint(const Checkpoint& ckpt) {
  json params = json::array();
  for (const auto& p : ckpt.params.entries()) params.push_back({{"name", p.name}, {"shape", p.value.shape()}});
  const json header{{"network", ckpt.network}, {"train", ckpt.train}, {"iteration", ckpt.iteration}, {"parameters", params}};
  const std::string text = header.dump();

  io::ByteWriter w;
  w.bytes(std::string_view(kCheckpointMagic, 4));
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(text.size()));
  w.bytes(text);
  for (const auto& p : ckpt.params.entries())
    for (ad::Index i = 0; i < p.value.size(); ++i) w.f64(p.value[i]);
  return w.buffer();
}

Checkpoint decode_checkpoint(const std::vector<char>& bytes, const std::string& source) {
  io::ByteReader r(bytes, source);
  if (r.bytes(4, "magic") != std::string_view(kCheckpointMagic, 4)) r.fail("bad checkpoint magic (expected VDNC)");
  const std::uint32_t version = r.u32("version");
  if (version != kCheckpointVersion)
    r.fail("unsupported checkpoint version " + std::to_string(version) + " (expected " +
           std::to_string(kCheckpointVersion) + ")");
  const std::uint32_t header_len = r.u32("header length");
  const std::size_t header_offset = r.offset();
  const std::string text = r.bytes(header_len, "JSON header");

  Checkpoint ckpt;
  std::vector<std::pair<std::string, ad::Shape>> layout;
  try {
    const json header = json::parse(text);
    ckpt.network = header.at("network").get<net::NetworkConfig>();
    ckpt.train = header.at("train").get<TrainConfig>();
    ckpt.iteration = header.at("iteration").get<int>();
    for (const auto& p : header.at("parameters"))
      layout.emplace_back(p.at("name").get<std::string>(), p.at("shape").get<ad::Shape>());
  } catch (const json::exception& e) {
    throw FormatError(source + ": malformed checkpoint header at offset " + std::to_string(header_offset) + ": " +
                      e.what());
  } catch (const ConfigError& e) {
    throw FormatError(source + ": invalid checkpoint header at offset " + std::to_string(header_offset) + ": " +
                      e.what());
  }

  std::uint64_t scalars = 0;
  for (const auto& [name, shape] : layout) {
    for (ad::Index d : shape)
      if (d < 0) throw FormatError(source + ": negative dimension in parameter '" + name + "'");
    scalars += static_cast<std::uint64_t>(ad::shape_size(shape));
  }
  if (scalars * sizeof(double) != r.remaining())
    r.fail("parameter payload holds " + std::to_string(r.remaining()) + " bytes, header declares " +
           std::to_string(scalars * sizeof(double)));
  for (const auto& [name, shape] : layout) {
    ad::Tensor t(shape);
    for (ad::Index i = 0; i < t.size(); ++i) t[i] = r.f64("parameter payload");
    try {
      ckpt.params.add(name, std::move(t));
    } catch (const ConfigError& e) {
      throw FormatError(source + ": " + e.what());
    }
  }
  try {
    check_params_match(ckpt.params, ckpt.network, source);
  } catch (const ConfigError& e) {
    throw FormatError(source + ": header describes an invalid network: " + e.what());
  }
  return ckpt;
}

void checkpoint_save(const Checkpoint& ckpt, const std::filesystem::path& path) {
  io::write_file(path, encode_checkpoint(ckpt));
}

Checkpoint checkpoint_load(const std::filesystem::path& path) {
  return decode_checkpoint(io::read_file(path), path.string());
}

void check_params_match(const ParamStore& params, const net::NetworkConfig& expected, const std::string& source) {
  const ParamStore reference = net::init_params(expected, 0);
  for (const auto& want : reference.entries()) {
    if (!params.contains(want.name))
      throw FormatError(source + ": parameter '" + want.name + "' missing for the requested network");
    const auto& have = params.get(want.name);
    if (have.value.shape() != want.value.shape())
      throw FormatError(source + ": parameter '" + want.name + "' has shape " + ad::shape_string(have.value.shape()) +
                        ", network expects " + ad::shape_string(want.value.shape()));
  }
  for (const auto& have : params.entries())
    if (!reference.contains(have.name))
      throw FormatError(source + ": parameter '" + have.name + "' is not part of the requested network");
}

Checkpoint checkpoint_load(const std::filesystem::path& path, const net::NetworkConfig& expected) {
  Checkpoint ckpt = checkpoint_load(path);
  check_params_match(ckpt.params, expected, path.string());
  return ckpt;
}

}  // namespace vdn::train
