#include "vdn/eval/retrieval.hpp"

#include "vdn/util/error.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

using nlohmann::json;

namespace vdn::eval {

namespace {

constexpr double kNormEpsilon = 1e-12;
constexpr int kCurveSamples = 20;

bool included(const RankedList& list) { return list.relevant_count() > 0; }

template <typename Metric>
double mean_over(std::span<const RankedList> lists, Metric metric) {
  double sum = 0;
  int n = 0;
  for (const auto& l : lists) {
    if (!included(l)) continue;
    sum += metric(l);
    ++n;
  }
  return n ? sum / n : std::numeric_limits<double>::quiet_NaN();
}

template <typename Metric>
MetricSummary summarize(std::span<const RankedList> lists, std::size_t classes, Metric metric) {
  MetricSummary s;
  std::vector<double> sum(classes, 0.0);
  std::vector<int> count(classes, 0);
  double total = 0;
  int n = 0;
  for (const auto& l : lists) {
    if (!included(l)) continue;
    const double v = metric(l);
    total += v;
    ++n;
    if (l.query.label < 0 || std::size_t(l.query.label) >= classes)
      throw ConfigError("evaluate: query label " + std::to_string(l.query.label) + " has no class name");
    sum[std::size_t(l.query.label)] += v;
    ++count[std::size_t(l.query.label)];
  }
  s.micro = n ? total / n : std::numeric_limits<double>::quiet_NaN();
  double macro = 0;
  int populated = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    if (count[c] == 0) {
      s.per_class.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    s.per_class.push_back(sum[c] / count[c]);
    macro += s.per_class.back();
    ++populated;
  }
  s.macro = populated ? macro / populated : std::numeric_limits<double>::quiet_NaN();
  return s;
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double from_number_or_null(const json& j) {
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  const double v = j.get<double>();
  if (!(v >= 0.0 && v <= 1.0)) throw FormatError("metrics report: value " + std::to_string(v) + " outside [0, 1]");
  return v;
}

json summary_json(const MetricSummary& s, const std::vector<std::string>& names) {
  json per = json::object();
  for (std::size_t c = 0; c < s.per_class.size(); ++c) per[names.at(c)] = number_or_null(s.per_class[c]);
  return {{"micro", number_or_null(s.micro)}, {"macro", number_or_null(s.macro)}, {"per_class", per}};
}

MetricSummary summary_from_json(const json& j, const std::vector<std::string>& names) {
  MetricSummary s;
  s.micro = from_number_or_null(j.at("micro"));
  s.macro = from_number_or_null(j.at("macro"));
  for (const auto& n : names) s.per_class.push_back(from_number_or_null(j.at("per_class").at(n)));
  return s;
}

}  // namespace

int relevance_grade(const Item& query, const Item& candidate) {
  if (query.label != candidate.label) return 0;
  return query.subcategory == candidate.subcategory ? 3 : 1;
}

int RankedList::relevant_count() const {
  return static_cast<int>(std::count_if(grades.begin(), grades.end(), [](int g) { return g > 0; }));
}

std::vector<int> RankedList::binary() const {
  std::vector<int> b;
  for (int g : grades) b.push_back(g > 0 ? 1 : 0);
  return b;
}

double cosine_similarity(const Vector& a, const Vector& b) {
  if (a.size() != b.size())
    throw ConfigError("cosine_similarity: lengths " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
  const double na = a.norm(), nb = b.norm();
  if (!(na > kNormEpsilon) || !(nb > kNormEpsilon))
    throw DegenerateInputError("cosine_similarity: zero-length descriptor");
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

RankedList rank_gallery(const Vector& query, const Item& query_item, std::span<const Vector> gallery,
                        std::span<const Item> items) {
  if (gallery.size() != items.size()) throw ConfigError("rank_gallery: descriptor and item counts differ");
  std::vector<std::size_t> order;
  std::vector<double> sim(gallery.size());
  for (std::size_t i = 0; i < gallery.size(); ++i) {
    if (items[i].id == query_item.id) continue;
    sim[i] = cosine_similarity(query, gallery[i]);
    order.push_back(i);
  }
  if (order.empty()) throw ConfigError("rank_gallery: gallery is empty once the query is excluded");
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (sim[a] != sim[b]) return sim[a] > sim[b];
    return items[a].id < items[b].id;
  });
  RankedList list;
  list.query = query_item;
  for (std::size_t i : order) {
    list.ids.push_back(items[i].id);
    list.similarity.push_back(sim[i]);
    list.grades.push_back(relevance_grade(query_item, items[i]));
  }
  return list;
}

std::vector<RankedList> rank_all(std::span<const Vector> descriptors, std::span<const Item> items) {
  std::vector<RankedList> lists;
  lists.reserve(descriptors.size());
  for (std::size_t q = 0; q < descriptors.size(); ++q)
    lists.push_back(rank_gallery(descriptors[q], items[q], descriptors, items));
  return lists;
}

double average_precision(const RankedList& list) {
  double sum = 0;
  int hits = 0;
  for (std::size_t r = 0; r < list.grades.size(); ++r) {
    if (list.grades[r] <= 0) continue;
    ++hits;
    sum += double(hits) / double(r + 1);
  }
  return hits ? sum / hits : 0.0;
}

double f_measure(const RankedList& list) {
  const int k = list.relevant_count();
  if (k == 0) return 0.0;
  int hits = 0;
  for (int r = 0; r < k; ++r) hits += list.grades[std::size_t(r)] > 0;
  if (hits == 0) return 0.0;
  // cutoff equals the relevant count, so precision and recall coincide
  const double p = double(hits) / k, rc = double(hits) / k;
  return 2 * p * rc / (p + rc);
}

double ndcg(const RankedList& list) {
  auto dcg = [](const std::vector<int>& g) {
    double s = 0;
    for (std::size_t i = 0; i < g.size(); ++i) s += g[i] / std::log2(double(i) + 2.0);
    return s;
  };
  std::vector<int> ideal = list.grades;
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  const double idcg = dcg(ideal);
  return idcg > 0 ? dcg(list.grades) / idcg : 0.0;
}

PRCurve pr_points(const RankedList& list) {
  PRCurve c;
  const int relevant = list.relevant_count();
  int hits = 0;
  for (std::size_t r = 0; r < list.grades.size(); ++r) {
    hits += list.grades[r] > 0;
    c.recall.push_back(relevant ? double(hits) / relevant : 0.0);
    c.precision.push_back(double(hits) / double(r + 1));
  }
  return c;
}

double pr_area(const RankedList& list) {
  const PRCurve c = pr_points(list);
  if (c.recall.empty()) return 0.0;
  double area = 0, prev_r = 0, prev_p = c.precision.front();
  for (std::size_t i = 0; i < c.recall.size(); ++i) {
    area += (c.recall[i] - prev_r) * (c.precision[i] + prev_p) / 2;
    prev_r = c.recall[i];
    prev_p = c.precision[i];
  }
  return area;
}

PRCurve interpolated_curve(const RankedList& list) {
  const PRCurve pts = pr_points(list);
  PRCurve c;
  for (int s = 1; s <= kCurveSamples; ++s) {
    const double r = double(s) / kCurveSamples;
    double best = 0;
    for (std::size_t i = 0; i < pts.recall.size(); ++i)
      if (pts.recall[i] >= r - 1e-12) best = std::max(best, pts.precision[i]);
    c.recall.push_back(r);
    c.precision.push_back(best);
  }
  return c;
}

double mean_average_precision(std::span<const RankedList> lists) { return mean_over(lists, average_precision); }
double mean_f_measure(std::span<const RankedList> lists) { return mean_over(lists, f_measure); }
double mean_ndcg(std::span<const RankedList> lists) { return mean_over(lists, ndcg); }

PrAuc pr_auc(std::span<const RankedList> lists) {
  PrAuc out;
  out.auc = mean_over(lists, pr_area);
  std::vector<double> sum(kCurveSamples, 0.0);
  int n = 0;
  for (const auto& l : lists) {
    if (!included(l)) continue;
    const PRCurve c = interpolated_curve(l);
    for (int s = 0; s < kCurveSamples; ++s) sum[std::size_t(s)] += c.precision[std::size_t(s)];
    ++n;
  }
  for (int s = 0; s < kCurveSamples; ++s) {
    out.curve.recall.push_back(double(s + 1) / kCurveSamples);
    out.curve.precision.push_back(n ? sum[std::size_t(s)] / n : 0.0);
  }
  return out;
}

MetricsReport evaluate(std::span<const RankedList> lists, const std::vector<std::string>& class_names,
                       json protocol) {
  MetricsReport r;
  r.class_names = class_names;
  const std::size_t k = class_names.size();
  r.map = summarize(lists, k, average_precision);
  r.auc = summarize(lists, k, pr_area);
  r.f_measure = summarize(lists, k, f_measure);
  r.ndcg = summarize(lists, k, ndcg);
  r.curve = pr_auc(lists).curve;
  r.queries = static_cast<int>(lists.size());
  r.excluded_queries = static_cast<int>(std::count_if(lists.begin(), lists.end(), [](const RankedList& l) {
    return !included(l);
  }));
  r.protocol = std::move(protocol);
  r.protocol["f_measure_cutoff"] = "relevant_count";
  r.protocol["relevance_grades"] = {{"category_and_subcategory", 3}, {"category_only", 1}, {"other", 0}};
  r.protocol["auc"] = "per-query trapezoid over recall, anchored at (0, precision@1)";
  r.protocol["queries"] = r.queries;
  r.protocol["excluded_queries"] = r.excluded_queries;
  return r;
}

std::string metrics_json(const MetricsReport& r) {
  json j;
  j["map"] = summary_json(r.map, r.class_names);
  j["auc"] = summary_json(r.auc, r.class_names);
  j["f_measure"] = summary_json(r.f_measure, r.class_names);
  j["ndcg"] = summary_json(r.ndcg, r.class_names);
  j["class_names"] = r.class_names;
  j["protocol"] = r.protocol;
  return j.dump(2) + "\n";
}

MetricsReport metrics_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    MetricsReport r;
    r.class_names = j.at("class_names").get<std::vector<std::string>>();
    r.map = summary_from_json(j.at("map"), r.class_names);
    r.auc = summary_from_json(j.at("auc"), r.class_names);
    r.f_measure = summary_from_json(j.at("f_measure"), r.class_names);
    r.ndcg = summary_from_json(j.at("ndcg"), r.class_names);
    r.protocol = j.at("protocol");
    r.queries = r.protocol.value("queries", 0);
    r.excluded_queries = r.protocol.value("excluded_queries", 0);
    return r;
  } catch (const json::exception& e) {
    throw FormatError(std::string("metrics report: ") + e.what());
  }
}

std::string pr_curve_csv(const PRCurve& curve) {
  std::ostringstream out;
  out << "recall,precision\n" << std::setprecision(17);
  for (std::size_t i = 0; i < curve.recall.size(); ++i) out << curve.recall[i] << ',' << curve.precision[i] << '\n';
  return out.str();
}

}  // namespace vdn::eval
