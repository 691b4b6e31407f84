#pragma once

#include "vdn/shapes/noise.hpp"
#include "vdn/shapes/render.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace vdn::shapes {

enum class Split { train, test };

struct NoiseConfig {
  std::optional<double> occluder_size;  // relative size of the distractor shape
  double clutter_ratio = 0.0;           // fraction of views given background clutter
  double clutter_amplitude = 1.0;

  bool clean() const { return !occluder_size && clutter_ratio <= 0.0; }
};

struct GeneratorConfig {
  std::vector<Category> classes = {Category::sphere, Category::box,     Category::cylinder,  Category::cone,
                                   Category::torus,  Category::capsule, Category::ellipsoid, Category::tee_block};
  int train_per_class = 40;
  int test_per_class = 10;
  int n_ring = 8;
  int resolution = 32;
  double camera_distance = 3.0;
  NoiseConfig train_noise;
  NoiseConfig test_noise;

  int views_per_shape() const { return n_ring + 2; }
};

struct ShapeRecord {
  int id = 0;
  int label = 0;  // index into DatasetManifest::class_names
  Category category = Category::sphere;
  int subcategory = 0;
  Split split = Split::train;
  std::optional<double> occluder_size;
  std::optional<Category> occluder_category;
  std::vector<int> cluttered_views;
  int views = 0;
};

struct DatasetManifest {
  std::vector<std::string> class_names;
  std::vector<ShapeRecord> shapes;
  std::vector<CameraPose> cameras;
  int resolution = 32;
  std::uint64_t seed = 0;
  GeneratorConfig generator;

  std::size_t view_count() const;
  int views_per_shape() const { return static_cast<int>(cameras.size()); }
};

/// The n views of one shape with its labels.
struct ViewSet {
  int shape_id = 0;
  int label = 0;
  int subcategory = 0;
  std::vector<DepthImage> views;
  // Per-view part index of each pixel (-1 background, 0 target, 1 occluder);
  // only populated on request.
  std::vector<HitArray> hits;
};

struct Dataset {
  DatasetManifest manifest;
  std::vector<ViewSet> shapes;  // manifest order

  std::vector<const ViewSet*> split(Split s) const;
};

/// Deterministic in (config, seed): identical inputs give bit-identical views.
Dataset build_dataset(const GeneratorConfig& config, std::uint64_t seed);

/// Re-renders one split of an existing dataset under different noise,
/// reusing every shape's instance and occluder draws.
std::vector<ViewSet> regenerate_split(const DatasetManifest& manifest, Split split, const NoiseConfig& noise,
                                      bool keep_hits = false);

/// Renders one shape of the manifest under `noise` (also fills noise
/// metadata into `record` when non-null).
ViewSet render_shape(const DatasetManifest& manifest, const ShapeRecord& base, const NoiseConfig& noise,
                     bool keep_hits = false, ShapeRecord* record = nullptr);

// --- on-disk format ----------------------------------------------------------

inline constexpr char kArchiveMagic[4] = {'V', 'D', 'S', '1'};
inline constexpr std::uint32_t kArchiveVersion = 1;
inline constexpr const char* kArchiveName = "views.vds";
inline constexpr const char* kManifestName = "manifest.json";

struct Archive {
  std::uint32_t width = 0, height = 0;
  std::vector<DepthImage> views;
};

std::vector<char> encode_archive(const std::vector<DepthImage>& views);
Archive decode_archive(std::vector<char> bytes, const std::string& source);

std::string manifest_to_json(const DatasetManifest& manifest);
DatasetManifest manifest_from_json(const std::string& text);

void write_dataset(const Dataset& dataset, const std::filesystem::path& dir);
Dataset read_dataset(const std::filesystem::path& dir);

/// One 16-bit PGM per view: <dir>/<shape id>_<view>_depth.pgm.
void export_pgm(const Dataset& dataset, const std::filesystem::path& dir);

std::string split_name(Split s);

}  // namespace vdn::shapes
