#include "vdn/eval/experiments.hpp"

#include "vdn/util/error.hpp"
#include "vdn/util/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

using nlohmann::json;

namespace vdn::eval {

namespace {

std::vector<shapes::DepthImage> select(const shapes::ViewSet& s, std::span<const int> views) {
  if (views.empty()) return s.views;
  std::vector<shapes::DepthImage> out;
  for (int v : views) {
    if (v < 0 || std::size_t(v) >= s.views.size())
      throw ConfigError("view index " + std::to_string(v) + " outside shape " + std::to_string(s.shape_id) + "'s " +
                        std::to_string(s.views.size()) + " views");
    out.push_back(s.views[std::size_t(v)]);
  }
  return out;
}

std::vector<double> ranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double avg = (double(i) + double(j)) / 2.0 + 1.0;
    for (std::size_t t = i; t <= j; ++t) r[order[t]] = avg;
    i = j + 1;
  }
  return r;
}

double snap(double v) { return std::round(v * 1e9) / 1e9; }

}  // namespace

std::vector<int> view_subset(int n_views, std::optional<int> count) {
  const int n = count.value_or(n_views);
  if (n < 1 || n > n_views)
    throw ConfigError("view count " + std::to_string(n) + " outside [1, " + std::to_string(n_views) + "]");
  std::vector<int> v(static_cast<std::size_t>(n));
  std::iota(v.begin(), v.end(), 0);
  return v;
}

std::vector<Item> items_of(std::span<const shapes::ViewSet> shapes) {
  std::vector<Item> items;
  for (const auto& s : shapes) items.push_back({s.shape_id, s.label, s.subcategory});
  return items;
}

std::vector<Vector> describe(const ad::ParamStore& params, const net::NetworkConfig& config,
                             std::span<const shapes::ViewSet> shapes, std::span<const int> views) {
  std::vector<Vector> out(shapes.size());
  parallel_for(shapes.size(), [&](std::size_t i) {
    const auto selected = select(shapes[i], views);
    out[i] = net::infer(params, config, selected).descriptor;
  });
  return out;
}

MetricsReport evaluate_model(const ad::ParamStore& params, const net::NetworkConfig& config,
                             std::span<const shapes::ViewSet> shapes, const std::vector<std::string>& class_names,
                             json protocol, std::span<const int> views) {
  const auto descriptors = describe(params, config, shapes, views);
  const auto items = items_of(shapes);
  const auto lists = rank_all(descriptors, items);
  if (!views.empty()) protocol["views"] = std::vector<int>(views.begin(), views.end());
  return evaluate(lists, class_names, std::move(protocol));
}

ViewQualityRanking rank_views(std::span<const Vector> features, int k) {
  const int n = static_cast<int>(features.size());
  if (k < 1 || 2 * k > n)
    throw ConfigError("view quality: need 1 <= k <= n/2, got k=" + std::to_string(k) + " for n=" + std::to_string(n));
  ViewQualityRanking r;
  r.sibling_similarity.assign(std::size_t(n), 0.0);
  for (int i = 0; i < n; ++i) {
    double s = 0;
    for (int j = 0; j < n; ++j)
      if (j != i) s += cosine_similarity(features[std::size_t(i)], features[std::size_t(j)]);
    r.sibling_similarity[std::size_t(i)] = s / (n - 1);
  }
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return r.sibling_similarity[std::size_t(a)] > r.sibling_similarity[std::size_t(b)];
  });
  r.good.assign(order.begin(), order.begin() + k);
  r.poor.assign(order.rbegin(), order.rbegin() + k);
  return r;
}

ViewQualityResult view_quality_analysis(std::span<const std::vector<Vector>> view_features,
                                        std::span<const Item> items, int k, std::span<const double> proportions) {
  if (view_features.size() != items.size()) throw ConfigError("view quality: feature and item counts differ");
  ViewQualityResult result;
  for (const auto& f : view_features) result.rankings.push_back(rank_views(f, k));

  auto map_of = [&](auto&& pick) {
    std::vector<Vector> desc;
    for (std::size_t s = 0; s < view_features.size(); ++s) {
      Vector acc = Vector::Zero(view_features[s].front().size());
      const std::vector<int> chosen = pick(s);
      for (int v : chosen) acc += view_features[s][std::size_t(v)];
      desc.push_back(acc / double(chosen.size()));
    }
    return mean_average_precision(rank_all(desc, items));
  };

  for (double p : proportions) {
    if (p < 0 || p > 1) throw ConfigError("view quality: proportion " + std::to_string(p) + " outside [0, 1]");
    const int good = static_cast<int>(std::lround(p * k));
    result.proportions.push_back(p);
    result.map.push_back(map_of([&](std::size_t s) {
      const auto& r = result.rankings[s];
      std::vector<int> v(r.good.begin(), r.good.begin() + good);
      v.insert(v.end(), r.poor.begin(), r.poor.begin() + (k - good));
      return v;
    }));
  }
  result.map_all_views = map_of([&](std::size_t s) {
    std::vector<int> v(view_features[s].size());
    std::iota(v.begin(), v.end(), 0);
    return v;
  });
  return result;
}

ViewQualityResult view_quality_analysis(std::span<const shapes::ViewSet> shapes, const ad::ParamStore& params,
                                        const net::NetworkConfig& config, int k, std::span<const double> proportions) {
  std::vector<std::vector<Vector>> features(shapes.size());
  parallel_for(shapes.size(), [&](std::size_t i) {
    for (const auto& view : shapes[i].views) features[i].push_back(net::pooled_view_feature(params, config, view));
  });
  const auto items = items_of(shapes);
  return view_quality_analysis(features, items, k, proportions);
}

std::vector<NoiseLevel> occlusion_levels(double first, double last, double step) {
  if (!(step > 0) || last < first || first < 0)
    throw ConfigError("occlusion sweep: need 0 <= first <= last and step > 0");
  const int count = static_cast<int>(std::floor((last - first) / step + 1e-9)) + 1;
  std::vector<NoiseLevel> levels;
  for (int i = 0; i < count; ++i) {
    NoiseLevel l{"occlusion", snap(first + i * step), {}};
    l.noise.occluder_size = l.value;
    levels.push_back(l);
  }
  return levels;
}

std::vector<NoiseLevel> clutter_levels(std::span<const double> ratios) {
  std::vector<NoiseLevel> levels;
  for (double r : ratios) {
    if (r < 0 || r > 1) throw ConfigError("clutter sweep: ratio " + std::to_string(r) + " outside [0, 1]");
    NoiseLevel l{"clutter", r, {}};
    l.noise.clutter_ratio = r;
    levels.push_back(l);
  }
  return levels;
}

std::vector<MetricsReport> noise_sweep(const shapes::DatasetManifest& manifest, const ad::ParamStore& params,
                                       const net::NetworkConfig& config, std::span<const NoiseLevel> levels,
                                       std::span<const int> views) {
  std::vector<MetricsReport> reports;
  for (const auto& level : levels) {
    const auto test = shapes::regenerate_split(manifest, shapes::Split::test, level.noise);
    json protocol{{"split", "test"},
                  {"noise", level.protocol},
                  {"level", level.value},
                  {"occluder_size", level.noise.occluder_size ? json(*level.noise.occluder_size) : json(nullptr)},
                  {"clutter_ratio", level.noise.clutter_ratio},
                  {"clutter_amplitude", level.noise.clutter_amplitude}};
    reports.push_back(evaluate_model(params, config, test, manifest.class_names, std::move(protocol), views));
  }
  return reports;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw ConfigError("spearman: need two equally long series of length >= 2");
  const auto rx = ranks(x), ry = ranks(y);
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / double(rx.size());
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / double(ry.size());
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0 || syy == 0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace vdn::eval
