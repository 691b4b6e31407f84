#pragma once

#include <Eigen/Core>

#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace vdn::eval {

using Vector = Eigen::VectorXd;

/// Identity of a retrieval item.
struct Item {
  int id = 0;
  int label = 0;
  int subcategory = 0;
};

/// Relevance grade of `candidate` for `query`: 3 same category and
/// subcategory, 1 same category only, 0 otherwise.
int relevance_grade(const Item& query, const Item& candidate);

struct RankedList {
  Item query;
  std::vector<int> ids;  // gallery ids, most similar first
  std::vector<double> similarity;
  std::vector<int> grades;

  int relevant_count() const;
  std::vector<int> binary() const;  // grades collapsed to {0, 1}
};

/// a.b / (|a| |b|); throws DegenerateInputError when a norm is <= 1e-12.
double cosine_similarity(const Vector& a, const Vector& b);

/// Ranks every gallery item whose id differs from the query's by descending
/// cosine similarity, ties by ascending id.
RankedList rank_gallery(const Vector& query, const Item& query_item, std::span<const Vector> gallery,
                        std::span<const Item> items);

/// Each item queried against all others.
std::vector<RankedList> rank_all(std::span<const Vector> descriptors, std::span<const Item> items);

// Per-list metrics; relevance means grade > 0.
double average_precision(const RankedList& list);
double f_measure(const RankedList& list);  // cutoff k = number of relevant items
double ndcg(const RankedList& list);       // graded; 0 when the ideal DCG is 0

struct PRCurve {
  std::vector<double> recall;
  std::vector<double> precision;
};

/// Precision/recall after every rank cutoff.
PRCurve pr_points(const RankedList& list);
/// Trapezoidal area over recall, starting from (0, precision at cutoff 1).
double pr_area(const RankedList& list);
/// Interpolated precision (max over recall >= r) at r = 0.05, 0.10, ..., 1.
PRCurve interpolated_curve(const RankedList& list);

// List-set aggregates over queries with at least one relevant item.
double mean_average_precision(std::span<const RankedList> lists);
struct PrAuc {
  PRCurve curve;  // interpolated curves averaged over queries
  double auc = 0;
};
PrAuc pr_auc(std::span<const RankedList> lists);
double mean_f_measure(std::span<const RankedList> lists);
double mean_ndcg(std::span<const RankedList> lists);

struct MetricSummary {
  double micro = 0;
  double macro = 0;
  std::vector<double> per_class;  // NaN for classes without queries
};

struct MetricsReport {
  MetricSummary map, auc, f_measure, ndcg;
  std::vector<std::string> class_names;
  PRCurve curve;
  int queries = 0;
  int excluded_queries = 0;  // no relevant gallery item
  nlohmann::json protocol = nlohmann::json::object();
};

MetricsReport evaluate(std::span<const RankedList> lists, const std::vector<std::string>& class_names,
                       nlohmann::json protocol = nlohmann::json::object());

std::string metrics_json(const MetricsReport& report);
MetricsReport metrics_from_json(const std::string& text);
std::string pr_curve_csv(const PRCurve& curve);

}  // namespace vdn::eval
