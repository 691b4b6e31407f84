#include "doctest.h"

#include "vdn/app/run.hpp"
#include "vdn/util/binary_io.hpp"
#include "vdn/util/error.hpp"

#include <filesystem>
#include <sstream>

using namespace vdn;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("vdn_test_app_" + name);
  fs::remove_all(p);
  return p;
}

app::RunConfig tiny_run(const fs::path& root) {
  app::RunConfig c;
  c.seed = 3;
  c.generator.classes = {shapes::Category::sphere, shapes::Category::box, shapes::Category::torus};
  c.generator.train_per_class = 4;
  c.generator.test_per_class = 3;
  c.generator.n_ring = 4;
  c.generator.resolution = 16;
  c.network.resolution = 16;
  c.network.classes = 3;
  c.train.iterations = 4;
  c.train.batch_shapes = 4;
  c.k = 2;
  c.data = root / "data";
  return c;
}

bool same_bytes(const fs::path& a, const fs::path& b) { return io::read_file(a) == io::read_file(b); }

}  // namespace

TEST_CASE("score upsampling") {
  SUBCASE("part map: each 4x4 cell covers an 8x8 block at 32") {
    ad::Tensor raw({4, 4, 1});
    for (ad::Index i = 0; i < 16; ++i) raw[i] = double(i) / 16;
    const auto img = eval::upsample_scores(raw, 32);
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 32; ++x) CHECK(img(y, x) == raw.at(y / 8, x / 8, 0));
  }
  SUBCASE("channel vector: one vertical bar per channel") {
    ad::Tensor raw({1, 1, 8});
    for (ad::Index i = 0; i < 8; ++i) raw[i] = 0.1 * double(i);
    const auto img = eval::upsample_scores(raw, 32);
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 32; ++x) CHECK(img(y, x) == raw[x / 4]);
  }
  SUBCASE("single score fills the image, 0.5 maps to 128") {
    const auto img = eval::upsample_scores(ad::Tensor({1, 1, 1}, {0.5}), 16);
    const io::GrayImage8 g = eval::to_gray8(img);
    CHECK((g == 128).all());
    CHECK(eval::to_gray8(eval::upsample_scores(ad::Tensor({1, 1, 1}, {1.0}), 4))(0, 0) == 255);
    CHECK(eval::to_gray8(eval::upsample_scores(ad::Tensor({1, 1, 1}, {0.0}), 4))(0, 0) == 0);
  }
  SUBCASE("incompatible shapes") {
    CHECK_THROWS_AS(eval::upsample_scores(ad::Tensor({4, 4, 2}), 32), ConfigError);
    CHECK_THROWS_AS(eval::upsample_scores(ad::Tensor({3, 3, 1}), 32), ConfigError);
  }
}

TEST_CASE("8-bit PGM output") {
  const fs::path dir = scratch("pgm");
  fs::create_directories(dir);
  io::GrayImage8 img(3, 5);
  for (int i = 0; i < 15; ++i) img(i / 5, i % 5) = static_cast<std::uint8_t>(i * 17);
  io::write_pgm(dir / "a.pgm", img);
  const auto bytes = io::read_file(dir / "a.pgm");
  const std::string header(bytes.begin(), bytes.begin() + 11);
  CHECK(header == "P5\n5 3\n255\n");
  CHECK(bytes.size() == 11 + 15);
  const io::PgmImage back = io::read_pgm(dir / "a.pgm");
  CHECK(back.width == 5);
  CHECK(back.height == 3);
  CHECK(back.max_value == 255);
  for (int i = 0; i < 15; ++i) CHECK(back.samples[std::size_t(i)] == i * 17);
  fs::remove_all(dir);
}

TEST_CASE("experiment table") {
  eval::MetricsReport r;
  r.map = {0.5, 0.25, {}};
  r.auc = {0.4, std::nan(""), {}};
  r.f_measure = {0.3, 0.3, {}};
  r.ndcg = {0.9, 0.8, {}};
  r.queries = 10;
  std::vector<eval::TableRow> rows;
  for (const std::string arch : {"vdn-part", "cnn-avg"})
    for (const auto& level : eval::occlusion_levels(0.3, 2.1, 0.3)) rows.push_back({arch, "occlusion", level.value, r});
  const std::string csv = eval::experiment_table(rows);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 15);
  std::istringstream in(csv);
  std::string header, first;
  std::getline(in, header);
  std::getline(in, first);
  CHECK(header.rfind("arch,protocol,level,queries,map_micro,map_macro,auc_micro,auc_macro,", 0) == 0);
  CHECK(first == "vdn-part,occlusion,0.29999999999999999,10,0.5,0.25,0.40000000000000002,,"
                 "0.29999999999999999,0.29999999999999999,0.90000000000000002,0.80000000000000004");
}

TEST_CASE("run configuration") {
  app::RunConfig c;
  c.arch = "vdn-channel";
  c.views = 4;
  c.generator.train_noise.occluder_size = 1.2;
  c.clutter = {0, 0.5};
  c.resolve();
  CHECK(c.network.score_unit == net::ScoreUnit::channel);

  app::RunConfig back;
  app::overlay(back, nlohmann::json(c));
  back.resolve();
  CHECK(nlohmann::json(back).dump() == nlohmann::json(c).dump());

  app::RunConfig partial;
  app::overlay(partial, nlohmann::json::parse(R"({"train": {"margin": 0.5}, "generator": {"n_ring": 6}})"));
  CHECK(partial.train.margin == 0.5);
  CHECK(partial.train.iterations == train::TrainConfig{}.iterations);
  CHECK(partial.generator.n_ring == 6);
  CHECK(partial.generator.train_per_class == 40);

  CHECK_THROWS_AS(app::overlay(partial, nlohmann::json::parse(R"({"sed": 3})")), ConfigError);
  CHECK_THROWS_AS(app::overlay(partial, nlohmann::json::parse(R"({"seed": "x"})")), ConfigError);
  CHECK_THROWS_AS(app::overlay(partial, nlohmann::json::parse(R"({"network": {"depth": 3}})")), ConfigError);

  const auto levels = app::parse_occlusion_sweep("0.3:2.1:0.3");
  CHECK(levels.size() == 7);
  CHECK(app::parse_occlusion_sweep("1.2").size() == 1);
  CHECK_THROWS_AS(app::parse_occlusion_sweep("0.3:2.1"), ConfigError);
  CHECK_THROWS_AS(app::parse_occlusion_sweep("a:b:c"), ConfigError);
}

TEST_CASE("command pipeline is reproducible") {
  const fs::path root = scratch("pipeline");
  std::ostringstream log;
  app::RunConfig c = tiny_run(root);

  c.command = "gen-data";
  c.out = root / "data";
  c.generator.train_noise.occluder_size = 1.2;
  app::run(c, log);
  c.out = root / "data2";
  app::run(c, log);
  CHECK(same_bytes(root / "data" / "views.vds", root / "data2" / "views.vds"));
  CHECK(same_bytes(root / "data" / "manifest.json", root / "data2" / "manifest.json"));

  c.command = "train";
  c.out = root / "run";
  c.resolve();
  app::run(c, log);
  CHECK(fs::exists(root / "run" / "model.vdnc"));
  CHECK(io::read_text(root / "run" / "loss.csv").rfind("iteration,softmax,contrastive,total,lr\n", 0) == 0);

  // the echoed configuration alone reproduces the run
  app::RunConfig again = app::load_run_config(root / "run" / "run_config.json");
  again.command = "train";
  again.out = root / "run2";
  again.resolve();
  app::run(again, log);
  CHECK(same_bytes(root / "run" / "model.vdnc", root / "run2" / "model.vdnc"));
  CHECK(same_bytes(root / "run" / "loss.csv", root / "run2" / "loss.csv"));

  c.ckpt = root / "run" / "model.vdnc";
  c.command = "eval";
  c.out = root / "eval";
  app::run(c, log);
  c.out = root / "eval2";
  app::run(c, log);
  CHECK(same_bytes(root / "eval" / "metrics.json", root / "eval2" / "metrics.json"));
  const auto report = eval::metrics_from_json(io::read_text(root / "eval" / "metrics.json"));
  CHECK(report.queries == 9);
  CHECK(report.protocol.at("contrastive_weight") == 1.0);
  CHECK(fs::exists(root / "eval" / "pr_curve.csv"));

  c.command = "noise-sweep";
  c.out = root / "sweep";
  c.occlusion = "0.3:0.9:0.3";
  c.clutter = {0.0};
  app::run(c, log);
  std::istringstream rows(io::read_text(root / "sweep" / "tables.csv"));
  std::vector<std::string> lines;
  for (std::string l; std::getline(rows, l);) lines.push_back(l);
  REQUIRE(lines.size() == 6);
  std::istringstream single(io::read_text(root / "eval" / "tables.csv"));
  std::string header, clean;
  std::getline(single, header);
  std::getline(single, clean);
  CHECK(lines[1] == clean);                          // clean row equals standalone eval
  CHECK(lines[5].substr(lines[5].find(",0,")) == clean.substr(clean.find(",0,")));  // clutter 0 is a no-op

  c.command = "score-maps";
  c.out = root / "maps";
  c.occlusion = "1.2";
  c.max_shapes = 1;
  app::run(c, log);
  const int id = [&] {
    const auto ds = shapes::read_dataset(root / "data");
    return ds.split(shapes::Split::test).front()->shape_id;
  }();
  for (int v = 0; v < 6; ++v) {
    const auto score = io::read_pgm(root / "maps" / (std::to_string(id) + "_" + std::to_string(v) + "_score.pgm"));
    const auto depth = io::read_pgm(root / "maps" / (std::to_string(id) + "_" + std::to_string(v) + "_depth.pgm"));
    CHECK(score.width == 16);
    CHECK(score.max_value == 255);
    CHECK(depth.max_value == 255);
  }
  CHECK(!fs::exists(root / "maps" / (std::to_string(id + 1) + "_0_score.pgm")));
  CHECK(nlohmann::json::parse(io::read_text(root / "maps" / "score_stats.json")).at("shapes") == 9);

  c.command = "view-analysis";
  c.out = root / "views";
  app::run(c, log);
  const auto va = nlohmann::json::parse(io::read_text(root / "views" / "view_analysis.json"));
  CHECK(va.at("map").size() == 6);

  // architectures without a score unit have no maps
  c.command = "train";
  c.arch = "cnn-avg";
  c.out = root / "run_avg";
  c.resolve();
  app::run(c, log);
  c.ckpt = root / "run_avg" / "model.vdnc";
  c.command = "score-maps";
  c.out = root / "maps_avg";
  CHECK_THROWS_AS(app::run(c, log), ConfigError);

  c.command = "fly";
  CHECK_THROWS_AS(app::run(c, log), ConfigError);
  fs::remove_all(root);
}
