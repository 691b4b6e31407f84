#include "vdn/shapes/dataset.hpp"

#include "vdn/util/binary_io.hpp"
#include "vdn/util/error.hpp"
#include "vdn/util/parallel.hpp"
#include "vdn/util/pgm.hpp"
#include "vdn/util/random.hpp"

#include "json.hpp"

#include <cstring>
#include <set>

namespace vdn::shapes {

using nlohmann::json;

namespace {
// Stream tags for derive_seed.
constexpr std::uint64_t kInstanceStream = 0, kOccluderStream = 1, kClutterPick = 2, kClutterField = 3;

void validate(const GeneratorConfig& c) {
  if (c.classes.empty()) throw ConfigError("generator: at least one class required");
  if (c.train_per_class < 0 || c.test_per_class < 0 || c.train_per_class + c.test_per_class < 1)
    throw ConfigError("generator: per-class shape counts must be >= 1");
  if (c.n_ring < 1) throw ConfigError("generator: n_ring must be >= 1");
  if (c.resolution < 8) throw ConfigError("generator: resolution must be >= 8");
  for (const NoiseConfig* n : {&c.train_noise, &c.test_noise}) {
    if (n->clutter_ratio < 0.0 || n->clutter_ratio > 1.0) throw ConfigError("generator: clutter ratio outside [0, 1]");
    if (n->occluder_size && *n->occluder_size < 0.0) throw ConfigError("generator: negative occluder size");
  }
}
}  // namespace

std::string split_name(Split s) { return s == Split::train ? "train" : "test"; }

std::size_t DatasetManifest::view_count() const {
  std::size_t n = 0;
  for (const auto& s : shapes) n += static_cast<std::size_t>(s.views);
  return n;
}

std::vector<const ViewSet*> Dataset::split(Split s) const {
  std::vector<const ViewSet*> out;
  for (std::size_t i = 0; i < shapes.size(); ++i)
    if (manifest.shapes[i].split == s) out.push_back(&shapes[i]);
  return out;
}

ViewSet render_shape(const DatasetManifest& manifest, const ShapeRecord& base, const NoiseConfig& noise,
                     bool keep_hits, ShapeRecord* record) {
  const auto id = static_cast<std::uint64_t>(base.id);
  const ShapeSpec spec = random_shape(base.category, derive_seed(manifest.seed, id, kInstanceStream));

  Scene scene = Scene::single(spec);
  if (noise.occluder_size) {
    Rng rng(derive_seed(manifest.seed, id, kOccluderStream));
    scene = inject_occluder(spec, NoiseSpec{OccluderSpec{*noise.occluder_size, {}, {}}, {}}, rng);
  }

  ViewSet out{base.id, base.label, spec.subcategory, {}, {}};
  std::vector<int> cluttered;
  for (std::size_t v = 0; v < manifest.cameras.size(); ++v) {
    Render r = render_scene(scene, manifest.cameras[v], manifest.resolution);
    if (noise.clutter_ratio > 0.0) {
      Rng pick(derive_seed(manifest.seed, id, kClutterPick, v));
      if (pick.uniform() < noise.clutter_ratio) {
        NoiseSpec ns{{}, ClutterSpec{derive_seed(manifest.seed, id, kClutterField, v), noise.clutter_amplitude}};
        r.image = inject_clutter(r.image, ns);
        cluttered.push_back(static_cast<int>(v));
      }
    }
    out.views.push_back(std::move(r.image));
    if (keep_hits) out.hits.push_back(std::move(r.hits));
  }

  if (record) {
    *record = base;
    record->subcategory = spec.subcategory;
    record->views = static_cast<int>(manifest.cameras.size());
    record->occluder_size = scene.parts.size() > 1 ? noise.occluder_size : std::nullopt;
    record->occluder_category =
        scene.parts.size() > 1 ? std::optional<Category>(scene.parts[1].spec.category) : std::nullopt;
    record->cluttered_views = cluttered;
  }
  return out;
}

Dataset build_dataset(const GeneratorConfig& config, std::uint64_t seed) {
  validate(config);
  Dataset ds;
  DatasetManifest& m = ds.manifest;
  m.seed = seed;
  m.generator = config;
  m.resolution = config.resolution;
  m.cameras = camera_ring(config.n_ring, config.camera_distance);
  for (Category c : config.classes) m.class_names.emplace_back(category_name(c));

  int next_id = 0;
  for (Split split : {Split::train, Split::test}) {
    const int per_class = split == Split::train ? config.train_per_class : config.test_per_class;
    for (std::size_t label = 0; label < config.classes.size(); ++label)
      for (int k = 0; k < per_class; ++k) {
        ShapeRecord r;
        r.id = next_id++;
        r.label = static_cast<int>(label);
        r.category = config.classes[label];
        r.split = split;
        m.shapes.push_back(r);
      }
  }

  ds.shapes.resize(m.shapes.size());
  std::vector<ShapeRecord> records(m.shapes.size());
  parallel_for(m.shapes.size(), [&](std::size_t i) {
    const NoiseConfig& noise = m.shapes[i].split == Split::train ? config.train_noise : config.test_noise;
    ds.shapes[i] = render_shape(m, m.shapes[i], noise, false, &records[i]);
  });
  m.shapes = std::move(records);
  return ds;
}

std::vector<ViewSet> regenerate_split(const DatasetManifest& manifest, Split split, const NoiseConfig& noise,
                                      bool keep_hits) {
  std::vector<const ShapeRecord*> picked;
  for (const auto& r : manifest.shapes)
    if (r.split == split) picked.push_back(&r);
  std::vector<ViewSet> out(picked.size());
  parallel_for(picked.size(), [&](std::size_t i) { out[i] = render_shape(manifest, *picked[i], noise, keep_hits); });
  return out;
}

// --- archive -------------------------------------------------------------------

std::vector<char> encode_archive(const std::vector<DepthImage>& views) {
  io::ByteWriter w;
  w.bytes(std::string_view(kArchiveMagic, 4));
  w.u32(kArchiveVersion);
  w.u32(static_cast<std::uint32_t>(views.size()));
  const int width = views.empty() ? 0 : views.front().width();
  const int height = views.empty() ? 0 : views.front().height();
  w.u32(static_cast<std::uint32_t>(width));
  w.u32(static_cast<std::uint32_t>(height));
  for (const DepthImage& v : views) {
    if (v.width() != width || v.height() != height) throw ConfigError("archive: views differ in size");
    for (Eigen::Index i = 0; i < v.depth.size(); ++i) w.f32(v.depth.data()[i]);
  }
  return w.buffer();
}

Archive decode_archive(std::vector<char> bytes, const std::string& source) {
  io::ByteReader r(std::move(bytes), source);
  if (r.bytes(4, "magic") != std::string_view(kArchiveMagic, 4)) r.fail("bad magic (expected VDS1)");
  const std::uint32_t version = r.u32("version");
  if (version != kArchiveVersion) r.fail("unsupported archive version " + std::to_string(version));
  const std::uint32_t count = r.u32("view count");
  Archive a;
  a.width = r.u32("width");
  a.height = r.u32("height");
  const std::uint64_t payload = std::uint64_t{count} * a.width * a.height * sizeof(float);
  if (payload > r.remaining())
    r.fail("truncated pixel block (need " + std::to_string(payload) + " bytes, have " + std::to_string(r.remaining()) +
           ")");
  a.views.reserve(count);
  for (std::uint32_t v = 0; v < count; ++v) {
    DepthImage img{DepthArray(a.height, a.width)};
    for (Eigen::Index i = 0; i < img.depth.size(); ++i) img.depth.data()[i] = r.f32("pixel block");
    a.views.push_back(std::move(img));
  }
  if (r.remaining() != 0) r.fail("trailing bytes after pixel data");
  return a;
}

// --- manifest ------------------------------------------------------------------

namespace {

json noise_to_json(const NoiseConfig& n) {
  json j{{"clutter_ratio", n.clutter_ratio}, {"clutter_amplitude", n.clutter_amplitude}};
  j["occluder_size"] = n.occluder_size ? json(*n.occluder_size) : json(nullptr);
  return j;
}

NoiseConfig noise_from_json(const json& j) {
  NoiseConfig n;
  n.clutter_ratio = j.at("clutter_ratio").get<double>();
  n.clutter_amplitude = j.at("clutter_amplitude").get<double>();
  if (!j.at("occluder_size").is_null()) n.occluder_size = j.at("occluder_size").get<double>();
  return n;
}

}  // namespace

std::string manifest_to_json(const DatasetManifest& m) {
  json j;
  j["format"] = "vdn-dataset";
  j["version"] = kArchiveVersion;
  j["archive"] = kArchiveName;
  j["class_names"] = m.class_names;
  j["resolution"] = m.resolution;
  j["seed"] = m.seed;
  json cams = json::array();
  for (const auto& c : m.cameras) cams.push_back({{"azimuth", c.azimuth}, {"elevation", c.elevation}, {"distance", c.distance}});
  j["cameras"] = cams;
  const GeneratorConfig& g = m.generator;
  json classes = json::array();
  for (Category c : g.classes) classes.push_back(std::string(category_name(c)));
  j["generator"] = {{"classes", classes},
                    {"train_per_class", g.train_per_class},
                    {"test_per_class", g.test_per_class},
                    {"n_ring", g.n_ring},
                    {"resolution", g.resolution},
                    {"camera_distance", g.camera_distance},
                    {"train_noise", noise_to_json(g.train_noise)},
                    {"test_noise", noise_to_json(g.test_noise)}};
  json shapes = json::array();
  for (const auto& s : m.shapes) {
    json r{{"id", s.id},
           {"label", s.label},
           {"category", std::string(category_name(s.category))},
           {"subcategory", s.subcategory},
           {"split", split_name(s.split)},
           {"views", s.views}};
    r["noise"] = {{"occluder_size", s.occluder_size ? json(*s.occluder_size) : json(nullptr)},
                  {"occluder_category",
                   s.occluder_category ? json(std::string(category_name(*s.occluder_category))) : json(nullptr)},
                  {"cluttered_views", s.cluttered_views}};
    shapes.push_back(r);
  }
  j["shapes"] = shapes;
  return j.dump(2) + "\n";
}

DatasetManifest manifest_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    if (j.at("format") != "vdn-dataset") throw FormatError("manifest: not a vdn-dataset manifest");
    DatasetManifest m;
    m.class_names = j.at("class_names").get<std::vector<std::string>>();
    m.resolution = j.at("resolution").get<int>();
    m.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& c : j.at("cameras"))
      m.cameras.push_back({c.at("azimuth").get<double>(), c.at("elevation").get<double>(), c.at("distance").get<double>()});
    const json& g = j.at("generator");
    m.generator.classes.clear();
    for (const auto& c : g.at("classes")) m.generator.classes.push_back(category_from_name(c.get<std::string>()));
    m.generator.train_per_class = g.at("train_per_class").get<int>();
    m.generator.test_per_class = g.at("test_per_class").get<int>();
    m.generator.n_ring = g.at("n_ring").get<int>();
    m.generator.resolution = g.at("resolution").get<int>();
    m.generator.camera_distance = g.at("camera_distance").get<double>();
    m.generator.train_noise = noise_from_json(g.at("train_noise"));
    m.generator.test_noise = noise_from_json(g.at("test_noise"));
    std::set<int> ids;
    for (const auto& r : j.at("shapes")) {
      ShapeRecord s;
      s.id = r.at("id").get<int>();
      if (!ids.insert(s.id).second) throw FormatError("manifest: duplicate shape id " + std::to_string(s.id));
      s.label = r.at("label").get<int>();
      s.category = category_from_name(r.at("category").get<std::string>());
      s.subcategory = r.at("subcategory").get<int>();
      const std::string split = r.at("split").get<std::string>();
      if (split != "train" && split != "test") throw FormatError("manifest: unknown split '" + split + "'");
      s.split = split == "train" ? Split::train : Split::test;
      s.views = r.at("views").get<int>();
      const json& n = r.at("noise");
      if (!n.at("occluder_size").is_null()) s.occluder_size = n.at("occluder_size").get<double>();
      if (!n.at("occluder_category").is_null())
        s.occluder_category = category_from_name(n.at("occluder_category").get<std::string>());
      s.cluttered_views = n.at("cluttered_views").get<std::vector<int>>();
      m.shapes.push_back(std::move(s));
    }
    return m;
  } catch (const json::exception& e) {
    throw FormatError(std::string("manifest: ") + e.what());
  }
}

void write_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<DepthImage> flat;
  flat.reserve(dataset.manifest.view_count());
  for (const auto& s : dataset.shapes) flat.insert(flat.end(), s.views.begin(), s.views.end());
  io::write_file(dir / kArchiveName, encode_archive(flat));
  io::write_text(dir / kManifestName, manifest_to_json(dataset.manifest));
}

Dataset read_dataset(const std::filesystem::path& dir) {
  Dataset ds;
  ds.manifest = manifest_from_json(io::read_text(dir / kManifestName));
  const std::string archive_path = (dir / kArchiveName).string();
  Archive a = decode_archive(io::read_file(dir / kArchiveName), archive_path);
  if (a.views.size() != ds.manifest.view_count())
    throw FormatError(archive_path + ": archive holds " + std::to_string(a.views.size()) + " views, manifest lists " +
                      std::to_string(ds.manifest.view_count()));
  if (static_cast<int>(a.width) != ds.manifest.resolution || static_cast<int>(a.height) != ds.manifest.resolution)
    throw FormatError(archive_path + ": archive resolution disagrees with the manifest");
  std::size_t next = 0;
  for (const auto& r : ds.manifest.shapes) {
    ViewSet vs{r.id, r.label, r.subcategory, {}, {}};
    for (int v = 0; v < r.views; ++v) vs.views.push_back(std::move(a.views[next++]));
    ds.shapes.push_back(std::move(vs));
  }
  return ds;
}

void export_pgm(const Dataset& dataset, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& s : dataset.shapes)
    for (std::size_t v = 0; v < s.views.size(); ++v) {
      const DepthImage& img = s.views[v];
      io::GrayImage16 px(img.height(), img.width());
      for (Eigen::Index i = 0; i < px.size(); ++i) px.data()[i] = io::quantize_unit(img.depth.data()[i], 65535);
      io::write_pgm(dir / (std::to_string(s.shape_id) + "_" + std::to_string(v) + "_depth.pgm"), px);
    }
}

}  // namespace vdn::shapes
