#include "vdn/app/run.hpp"

#include "vdn/util/binary_io.hpp"
#include "vdn/util/error.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>

using nlohmann::json;

namespace vdn::app {

namespace {

void check_keys(const json& j, const std::set<std::string>& known, const std::string& what) {
  if (!j.is_object()) throw ConfigError(what + ": expected a JSON object");
  for (const auto& [key, value] : j.items())
    if (!known.count(key)) throw ConfigError(what + ": unknown key '" + key + "'");
}

template <typename T>
void take(const json& j, const char* key, T& field) {
  if (auto it = j.find(key); it != j.end()) field = it->get<T>();
}

json noise_json(const shapes::NoiseConfig& n) {
  return {{"occluder_size", n.occluder_size ? json(*n.occluder_size) : json(nullptr)},
          {"clutter_ratio", n.clutter_ratio},
          {"clutter_amplitude", n.clutter_amplitude}};
}

void overlay_noise(shapes::NoiseConfig& n, const json& j, const std::string& what) {
  check_keys(j, {"occluder_size", "clutter_ratio", "clutter_amplitude"}, what);
  if (auto it = j.find("occluder_size"); it != j.end()) {
    if (it->is_null())
      n.occluder_size.reset();
    else
      n.occluder_size = it->get<double>();
  }
  take(j, "clutter_ratio", n.clutter_ratio);
  take(j, "clutter_amplitude", n.clutter_amplitude);
}

json generator_json(const shapes::GeneratorConfig& g) {
  json classes = json::array();
  for (auto c : g.classes) classes.push_back(std::string(shapes::category_name(c)));
  return {{"classes", classes},
          {"train_per_class", g.train_per_class},
          {"test_per_class", g.test_per_class},
          {"n_ring", g.n_ring},
          {"resolution", g.resolution},
          {"camera_distance", g.camera_distance},
          {"train_noise", noise_json(g.train_noise)},
          {"test_noise", noise_json(g.test_noise)}};
}

void overlay_generator(shapes::GeneratorConfig& g, const json& j) {
  check_keys(j,
             {"classes", "train_per_class", "test_per_class", "n_ring", "resolution", "camera_distance",
              "train_noise", "test_noise"},
             "generator config");
  if (j.contains("classes")) {
    g.classes.clear();
    for (const auto& c : j.at("classes")) g.classes.push_back(shapes::category_from_name(c.get<std::string>()));
  }
  take(j, "train_per_class", g.train_per_class);
  take(j, "test_per_class", g.test_per_class);
  take(j, "n_ring", g.n_ring);
  take(j, "resolution", g.resolution);
  take(j, "camera_distance", g.camera_distance);
  if (j.contains("train_noise")) overlay_noise(g.train_noise, j.at("train_noise"), "train noise");
  if (j.contains("test_noise")) overlay_noise(g.test_noise, j.at("test_noise"), "test noise");
}

std::vector<shapes::ViewSet> test_split(const shapes::Dataset& ds) {
  std::vector<shapes::ViewSet> out;
  for (const auto* s : ds.split(shapes::Split::test)) out.push_back(*s);
  if (out.empty()) throw ConfigError("dataset has no test split");
  return out;
}

train::Checkpoint load_checkpoint(const RunConfig& c) {
  if (c.ckpt.empty()) throw ConfigError(c.command + ": --ckpt is required");
  return train::checkpoint_load(c.ckpt);
}

shapes::Dataset load_dataset(const RunConfig& c) {
  if (c.data.empty()) throw ConfigError(c.command + ": --data is required");
  return shapes::read_dataset(c.data);
}

void check_compatible(const net::NetworkConfig& net, const shapes::DatasetManifest& m) {
  if (net.resolution != m.resolution)
    throw ConfigError("network expects " + std::to_string(net.resolution) + "x" + std::to_string(net.resolution) +
                      " views, dataset has " + std::to_string(m.resolution) + "x" + std::to_string(m.resolution));
  if (net.classes != static_cast<int>(m.class_names.size()))
    throw ConfigError("network has " + std::to_string(net.classes) + " classes, dataset has " +
                      std::to_string(m.class_names.size()));
}

std::vector<int> selected_views(const RunConfig& c, const shapes::DatasetManifest& m) {
  if (!c.views) return {};
  return eval::view_subset(m.generator.views_per_shape(), c.views);
}

json base_protocol(const train::Checkpoint& ckpt, const std::vector<int>& views) {
  json p{{"split", "test"},
         {"arch", net::arch_name(ckpt.network)},
         {"split_stage", ckpt.network.split_stage},
         {"contrastive_weight", ckpt.train.contrastive_weight},
         {"softmax_weight", ckpt.train.softmax_weight},
         {"train_seed", ckpt.train.seed},
         {"iterations", ckpt.iteration}};
  p["views"] = views.empty() ? json("all") : json(views);
  return p;
}

void write_run_config(const RunConfig& c) {
  std::filesystem::create_directories(c.out);
  io::write_text(c.out / "run_config.json", json(c).dump(2) + "\n");
}

double parse_number(const std::string& s, const std::string& what) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty()) throw ConfigError(what + ": '" + s + "' is not a number");
  return v;
}

}  // namespace

void RunConfig::resolve() {
  network = net::config_for_arch(arch, network);
  train.seed = seed;
}

void to_json(json& j, const RunConfig& c) {
  j = json{{"seed", c.seed},
           {"out", c.out.string()},
           {"data", c.data.string()},
           {"ckpt", c.ckpt.string()},
           {"arch", c.arch},
           {"generator", generator_json(c.generator)},
           {"network", c.network},
           {"train", c.train},
           {"occlusion", c.occlusion},
           {"clutter", c.clutter},
           {"views", c.views ? json(*c.views) : json(nullptr)},
           {"k", c.k},
           {"proportions", c.proportions},
           {"max_shapes", c.max_shapes ? json(*c.max_shapes) : json(nullptr)},
           {"pgm", c.pgm}};
  if (!c.command.empty()) j["command"] = c.command;
}

void overlay(RunConfig& c, const json& j) {
  try {
    check_keys(j,
               {"command", "seed", "out", "data", "ckpt", "arch", "generator", "network", "train", "occlusion",
                "clutter", "views", "k", "proportions", "max_shapes", "pgm"},
               "run config");
    // the command comes from the command line; a stored one is informational
    take(j, "seed", c.seed);
    if (j.contains("out")) c.out = j.at("out").get<std::string>();
    if (j.contains("data")) c.data = j.at("data").get<std::string>();
    if (j.contains("ckpt")) c.ckpt = j.at("ckpt").get<std::string>();
    take(j, "arch", c.arch);
    if (j.contains("generator")) overlay_generator(c.generator, j.at("generator"));
    if (j.contains("network")) net::from_json(j.at("network"), c.network);
    if (j.contains("train")) train::from_json(j.at("train"), c.train);
    take(j, "occlusion", c.occlusion);
    take(j, "clutter", c.clutter);
    if (j.contains("views")) {
      if (j.at("views").is_null())
        c.views.reset();
      else
        c.views = j.at("views").get<int>();
    }
    take(j, "k", c.k);
    take(j, "proportions", c.proportions);
    if (j.contains("max_shapes")) {
      if (j.at("max_shapes").is_null())
        c.max_shapes.reset();
      else
        c.max_shapes = j.at("max_shapes").get<int>();
    }
    take(j, "pgm", c.pgm);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("run config: ") + e.what());
  }
}

RunConfig load_run_config(const std::filesystem::path& path) {
  RunConfig c;
  json j;
  try {
    j = json::parse(io::read_text(path));
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  overlay(c, j);
  return c;
}

std::vector<eval::NoiseLevel> parse_occlusion_sweep(const std::string& spec) {
  std::vector<std::string> parts;
  std::stringstream ss(spec);
  for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
  if (parts.size() == 1) {
    const double v = parse_number(parts[0], "--occlusion");
    return eval::occlusion_levels(v, v, 1.0);
  }
  if (parts.size() != 3) throw ConfigError("--occlusion: expected a:b:step, got '" + spec + "'");
  return eval::occlusion_levels(parse_number(parts[0], "--occlusion"), parse_number(parts[1], "--occlusion"),
                                parse_number(parts[2], "--occlusion"));
}

void gen_data(const RunConfig& c, std::ostream& log) {
  const shapes::Dataset ds = shapes::build_dataset(c.generator, c.seed);
  shapes::write_dataset(ds, c.out);
  if (c.pgm) shapes::export_pgm(ds, c.out / "pgm");
  write_run_config(c);
  log << "gen-data: " << ds.split(shapes::Split::train).size() << " train and "
      << ds.split(shapes::Split::test).size() << " test shapes, " << ds.manifest.view_count() << " views -> "
      << c.out.string() << "\n";
}

void train_model(const RunConfig& c, std::ostream& log) {
  const shapes::Dataset ds = load_dataset(c);
  check_compatible(c.network, ds.manifest);
  c.network.validate();
  write_run_config(c);
  log << "train: " << net::arch_name(c.network) << ", " << c.train.iterations << " iterations\n";
  const auto progress = [&](const train::LossReport& r) {
    if (r.iteration % 100 == 0 || r.iteration == c.train.iterations)
      log << "  iteration " << r.iteration << "  loss " << r.total << "  (softmax " << r.softmax << ", contrastive "
          << r.contrastive << ")  lr " << r.lr << "\n";
  };
  const train::TrainResult result = train::train(ds, c.network, c.train, progress);
  train::checkpoint_save({c.network, c.train, c.train.iterations, result.params}, c.out / "model.vdnc");
  io::write_text(c.out / "loss.csv", train::loss_csv(result.log));
  log << "train: learning rate halved " << result.halvings.size() << " times; wrote "
      << (c.out / "model.vdnc").string() << "\n";
}

void eval_model(const RunConfig& c, std::ostream& log) {
  const train::Checkpoint ckpt = load_checkpoint(c);
  const shapes::Dataset ds = load_dataset(c);
  check_compatible(ckpt.network, ds.manifest);
  write_run_config(c);
  const auto views = selected_views(c, ds.manifest);
  const auto test = test_split(ds);
  const eval::MetricsReport r =
      eval::evaluate_model(ckpt.params, ckpt.network, test, ds.manifest.class_names, base_protocol(ckpt, views), views);
  io::write_text(c.out / "metrics.json", eval::metrics_json(r));
  io::write_text(c.out / "pr_curve.csv", eval::pr_curve_csv(r.curve));
  const eval::TableRow row{net::arch_name(ckpt.network), "clean", 0.0, r};
  io::write_text(c.out / "tables.csv", eval::experiment_table(std::span(&row, 1)));
  log << std::setprecision(4) << "eval: MAP " << r.map.micro << " (macro " << r.map.macro << "), NDCG "
      << r.ndcg.micro << ", F " << r.f_measure.micro << ", AUC " << r.auc.micro << " over " << r.queries
      << " queries\n";
}

void score_maps(const RunConfig& c, std::ostream& log) {
  const train::Checkpoint ckpt = load_checkpoint(c);
  const shapes::Dataset ds = load_dataset(c);
  check_compatible(ckpt.network, ds.manifest);
  write_run_config(c);
  shapes::NoiseConfig noise = ds.manifest.generator.test_noise;
  if (!c.occlusion.empty()) {
    const auto levels = parse_occlusion_sweep(c.occlusion);
    if (levels.size() != 1) throw ConfigError("score-maps: --occlusion takes a single size");
    noise.occluder_size = levels.front().value;
  }
  const auto shapes = shapes::regenerate_split(ds.manifest, shapes::Split::test, noise, true);
  std::size_t limit = shapes.size();
  if (c.max_shapes) {
    if (*c.max_shapes < 0) throw ConfigError("score-maps: --max-shapes must be non-negative");
    limit = std::min(limit, std::size_t(*c.max_shapes));
  }
  const int written = eval::export_score_maps(ckpt.params, ckpt.network, std::span(shapes).first(limit), c.out);
  const eval::ScoreMapStats st = eval::score_map_statistics(ckpt.params, ckpt.network, shapes);
  auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  const json stats{{"arch", net::arch_name(ckpt.network)},
                   {"occluder_size", noise.occluder_size ? json(*noise.occluder_size) : json(nullptr)},
                   {"shapes", shapes.size()},
                   {"occluded_mean", num(st.occluded_mean)},
                   {"visible_mean", num(st.visible_mean)},
                   {"difference", num(st.difference())},
                   {"occluded_pixels", st.occluded_pixels},
                   {"visible_pixels", st.visible_pixels}};
  io::write_text(c.out / "score_stats.json", stats.dump(2) + "\n");
  log << "score-maps: wrote " << written << " score/depth pairs; mean score visible " << st.visible_mean
      << ", occluded " << st.occluded_mean << "\n";
}

void view_analysis(const RunConfig& c, std::ostream& log) {
  const train::Checkpoint ckpt = load_checkpoint(c);
  const shapes::Dataset ds = load_dataset(c);
  check_compatible(ckpt.network, ds.manifest);
  write_run_config(c);
  const auto test = test_split(ds);
  const eval::ViewQualityResult r = eval::view_quality_analysis(test, ckpt.params, ckpt.network, c.k, c.proportions);
  std::ostringstream csv;
  csv << "proportion,good_views,map\n" << std::setprecision(17);
  for (std::size_t i = 0; i < r.proportions.size(); ++i)
    csv << r.proportions[i] << ',' << std::lround(r.proportions[i] * c.k) << ',' << r.map[i] << '\n';
  io::write_text(c.out / "view_analysis.csv", csv.str());
  const json j{{"arch", net::arch_name(ckpt.network)},
               {"k", c.k},
               {"proportions", r.proportions},
               {"map", r.map},
               {"map_all_views", r.map_all_views},
               {"spearman", r.proportions.size() >= 2 ? json(eval::spearman(r.proportions, r.map)) : json(nullptr)}};
  io::write_text(c.out / "view_analysis.json", j.dump(2) + "\n");
  log << "view-analysis: MAP with only good views " << r.map.back() << ", all views " << r.map_all_views << "\n";
}

void noise_sweep(const RunConfig& c, std::ostream& log) {
  const train::Checkpoint ckpt = load_checkpoint(c);
  const shapes::Dataset ds = load_dataset(c);
  check_compatible(ckpt.network, ds.manifest);
  if (c.occlusion.empty() && c.clutter.empty())
    throw ConfigError("noise-sweep: give --occlusion a:b:step and/or --clutter r1,r2,...");
  write_run_config(c);
  std::vector<eval::NoiseLevel> levels = {{"clean", 0.0, {}}};
  if (!c.occlusion.empty())
    for (auto& l : parse_occlusion_sweep(c.occlusion)) levels.push_back(l);
  for (auto& l : eval::clutter_levels(c.clutter)) levels.push_back(l);

  const auto views = selected_views(c, ds.manifest);
  std::vector<eval::TableRow> rows;
  json all = json::array();
  for (const auto& level : levels) {
    json protocol = base_protocol(ckpt, views);
    protocol["noise"] = level.protocol;
    protocol["level"] = level.value;
    const auto test = shapes::regenerate_split(ds.manifest, shapes::Split::test, level.noise);
    const auto r = eval::evaluate_model(ckpt.params, ckpt.network, test, ds.manifest.class_names, protocol, views);
    rows.push_back({net::arch_name(ckpt.network), level.protocol, level.value, r});
    all.push_back(json::parse(eval::metrics_json(r)));
    log << "noise-sweep: " << level.protocol << " " << level.value << "  MAP " << r.map.micro << "\n";
  }
  io::write_text(c.out / "tables.csv", eval::experiment_table(rows));
  io::write_text(c.out / "sweep_metrics.json", all.dump(2) + "\n");
}

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {"gen-data",      "train",      "eval", "score-maps",
                                                 "view-analysis", "noise-sweep"};
  return names;
}

void run(const RunConfig& c, std::ostream& log) {
  if (c.command == "gen-data") return gen_data(c, log);
  if (c.command == "train") return train_model(c, log);
  if (c.command == "eval") return eval_model(c, log);
  if (c.command == "score-maps") return score_maps(c, log);
  if (c.command == "view-analysis") return view_analysis(c, log);
  if (c.command == "noise-sweep") return noise_sweep(c, log);
  throw ConfigError("unknown command '" + c.command + "'");
}

}  // namespace vdn::app
