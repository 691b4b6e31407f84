#include "vdn/eval/score_maps.hpp"

#include "vdn/util/error.hpp"
#include "vdn/util/parallel.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

namespace vdn::eval {

ScoreImage upsample_scores(const ad::Tensor& raw, int resolution) {
  if (raw.rank() != 3) throw ConfigError("upsample_scores: expected an h x w x c score tensor");
  const ad::Index h = raw.dim(0), w = raw.dim(1), c = raw.dim(2);
  if (h != 1 && c != 1) throw ConfigError("upsample_scores: score tensor is neither a map nor a vector");
  if (resolution % h != 0 || resolution % w != 0)
    throw ConfigError("upsample_scores: resolution " + std::to_string(resolution) + " is not a multiple of the map");
  ScoreImage img(resolution, resolution);
  for (int y = 0; y < resolution; ++y)
    for (int x = 0; x < resolution; ++x) {
      if (c > 1)
        img(y, x) = raw.at(0, 0, x * c / resolution);
      else
        img(y, x) = raw.at(y * h / resolution, x * w / resolution, 0);
    }
  return img;
}

io::GrayImage8 to_gray8(const ScoreImage& image) {
  return image.unaryExpr([](double v) { return static_cast<std::uint8_t>(io::quantize_unit(v, 255)); });
}

io::GrayImage8 to_gray8(const shapes::DepthImage& view) {
  return view.depth.unaryExpr([](float v) { return static_cast<std::uint8_t>(io::quantize_unit(v, 255)); });
}

namespace {

void require_scores(const net::NetworkConfig& config) {
  if (!config.weighted())
    throw ConfigError("score maps: architecture '" + net::arch_name(config) + "' has no score unit");
}

}  // namespace

ScoreMapStats score_map_statistics(const ad::ParamStore& params, const net::NetworkConfig& config,
                                   std::span<const shapes::ViewSet> shapes) {
  require_scores(config);
  struct Partial {
    double occ = 0, vis = 0;
    long n_occ = 0, n_vis = 0;
  };
  std::vector<Partial> parts(shapes.size());
  parallel_for(shapes.size(), [&](std::size_t i) {
    const auto& s = shapes[i];
    if (s.hits.size() != s.views.size())
      throw ConfigError("score map statistics: shape " + std::to_string(s.shape_id) + " was rendered without hit maps");
    const net::Inference inf = net::infer(params, config, s.views);
    for (std::size_t v = 0; v < s.views.size(); ++v) {
      const ScoreImage img = upsample_scores(inf.raw_scores[v], s.views[v].width());
      const auto& hits = s.hits[v];
      for (Eigen::Index k = 0; k < hits.size(); ++k) {
        const double score = img(k / img.cols(), k % img.cols());
        const int hit = hits(k / hits.cols(), k % hits.cols());
        if (hit == 1) {
          parts[i].occ += score;
          ++parts[i].n_occ;
        } else if (hit == 0) {
          parts[i].vis += score;
          ++parts[i].n_vis;
        }
      }
    }
  });
  // reduced in shape order so the sums do not depend on scheduling
  double occ = 0, vis = 0;
  ScoreMapStats st;
  for (const auto& p : parts) {
    occ += p.occ;
    vis += p.vis;
    st.occluded_pixels += p.n_occ;
    st.visible_pixels += p.n_vis;
  }
  st.occluded_mean = st.occluded_pixels ? occ / double(st.occluded_pixels) : std::nan("");
  st.visible_mean = st.visible_pixels ? vis / double(st.visible_pixels) : std::nan("");
  return st;
}

int export_score_maps(const ad::ParamStore& params, const net::NetworkConfig& config,
                      std::span<const shapes::ViewSet> shapes, const std::filesystem::path& dir) {
  require_scores(config);
  std::filesystem::create_directories(dir);
  std::vector<int> written(shapes.size(), 0);
  parallel_for(shapes.size(), [&](std::size_t i) {
    const auto& s = shapes[i];
    const net::Inference inf = net::infer(params, config, s.views);
    for (std::size_t v = 0; v < s.views.size(); ++v) {
      const std::string stem = std::to_string(s.shape_id) + "_" + std::to_string(v);
      io::write_pgm(dir / (stem + "_score.pgm"), to_gray8(upsample_scores(inf.raw_scores[v], s.views[v].width())));
      io::write_pgm(dir / (stem + "_depth.pgm"), to_gray8(s.views[v]));
      ++written[i];
    }
  });
  int total = 0;
  for (int w : written) total += w;
  return total;
}

std::string experiment_table(std::span<const TableRow> rows) {
  std::ostringstream out;
  out << "arch,protocol,level,queries,map_micro,map_macro,auc_micro,auc_macro,f_measure_micro,f_measure_macro,"
         "ndcg_micro,ndcg_macro\n";
  out << std::setprecision(17);
  auto cell = [&](double v) {
    out << ',';
    if (std::isfinite(v)) out << v;
  };
  for (const auto& r : rows) {
    out << r.arch << ',' << r.protocol << ',' << r.level << ',' << r.report.queries;
    for (const MetricSummary* m : {&r.report.map, &r.report.auc, &r.report.f_measure, &r.report.ndcg}) {
      cell(m->micro);
      cell(m->macro);
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace vdn::eval
