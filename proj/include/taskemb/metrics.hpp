#pragma once

#include "taskemb/common.hpp"
#include "taskemb/records.hpp"

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace taskemb {

/// DCG@k with gain 2^rel - 1 and discount log2(rank + 1), divided by the
/// ideal DCG over all judged documents. nullopt when nothing is relevant.
std::optional<double> ndcg_at_k(std::span<const std::string> ranking, const std::map<std::string, double>& relevance,
                                std::size_t k = 10);

/// Mean of precision@rank over the relevant documents; relevant documents
/// missing from the ranking contribute zero. nullopt for an empty set.
std::optional<double> average_precision(std::span<const std::string> ranking, const std::vector<std::string>& relevant);

struct MeanMetric {
  double mean = 0.0;
  std::size_t evaluated = 0;
  std::size_t excluded = 0;  ///< queries without any relevant document
};

/// Means over queries in sorted id order; rankings are keyed by query id.
MeanMetric mean_ndcg_at_k(const std::map<std::string, std::vector<std::string>>& rankings, const Qrels& qrels,
                          std::size_t k = 10);
/// Binary relevance: rel > 0.
MeanMetric mean_average_precision(const std::map<std::string, std::vector<std::string>>& rankings, const Qrels& qrels);

/// 1-based ranks with ties sharing their average rank.
std::vector<double> average_ranks(std::span<const double> values);

/// Pearson correlation of average ranks. Throws std::domain_error when either
/// input is constant.
double spearman(std::span<const double> x, std::span<const double> y);

/// Lloyd's algorithm from k-means++ seeds; stops after 100 iterations or when
/// no centroid moves by 1e-6. Empty clusters are re-seeded with the point
/// farthest from its centroid.
std::vector<int> kmeans(const RowMatrix& points, std::size_t k, std::uint64_t seed);

struct VMeasure {
  double homogeneity = 0.0;
  double completeness = 0.0;
  double v = 0.0;
};

VMeasure v_measure(std::span<const int> predicted, std::span<const int> gold);

/// Dense ids for string labels in first-seen order, extending `index`.
std::vector<int> encode_labels(std::span<const std::string> labels, std::map<std::string, int>& index);

struct ProbeResult {
  double accuracy = 0.0;
  std::size_t unseen_label_rows = 0;  ///< test rows whose class never occurs in training; counted wrong
};

/// Multinomial logistic regression, full-batch gradient descent: 500
/// iterations, learning rate 0.1, L2 1e-4.
ProbeResult logistic_probe(const RowMatrix& train_x, std::span<const int> train_y, const RowMatrix& test_x,
                           std::span<const int> test_y);

}  // namespace taskemb
