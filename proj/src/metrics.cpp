#include "taskemb/metrics.hpp"

#include "taskemb/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>

namespace taskemb {

std::optional<double> ndcg_at_k(std::span<const std::string> ranking, const std::map<std::string, double>& relevance,
                                std::size_t k) {
  if (k == 0) throw std::invalid_argument("ndcg_at_k: k must be positive");
  auto gain = [](double rel) { return std::exp2(rel) - 1.0; };
  std::vector<double> ideal;
  for (const auto& [doc, rel] : relevance) {
    if (rel < 0.0) throw std::invalid_argument("ndcg_at_k: negative relevance");
    if (rel > 0.0) ideal.push_back(rel);
  }
  if (ideal.empty()) return std::nullopt;
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  double idcg = 0.0;
  for (std::size_t i = 0; i < std::min(k, ideal.size()); ++i) idcg += gain(ideal[i]) / std::log2(static_cast<double>(i) + 2.0);
  double dcg = 0.0;
  std::set<std::string> seen;
  for (std::size_t i = 0; i < std::min(k, ranking.size()); ++i) {
    if (!seen.insert(ranking[i]).second) throw std::invalid_argument("ndcg_at_k: duplicate document " + ranking[i]);
    auto it = relevance.find(ranking[i]);
    if (it != relevance.end()) dcg += gain(it->second) / std::log2(static_cast<double>(i) + 2.0);
  }
  return dcg / idcg;
}

std::optional<double> average_precision(std::span<const std::string> ranking, const std::vector<std::string>& relevant) {
  const std::set<std::string> rel(relevant.begin(), relevant.end());
  if (rel.empty()) return std::nullopt;
  double total = 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < ranking.size(); ++i) {
    if (rel.count(ranking[i]) != 0) {
      ++hits;
      total += static_cast<double>(hits) / static_cast<double>(i + 1);
    }
  }
  return total / static_cast<double>(rel.size());
}

namespace {

template <typename Metric>
MeanMetric mean_over_queries(const std::map<std::string, std::vector<std::string>>& rankings, const Qrels& qrels,
                             Metric metric) {
  MeanMetric out;
  double total = 0.0;
  for (const auto& [qid, ranking] : rankings) {
    auto it = qrels.find(qid);
    std::optional<double> v;
    if (it != qrels.end()) v = metric(ranking, it->second);
    if (!v) {
      ++out.excluded;
      continue;
    }
    total += *v;
    ++out.evaluated;
  }
  out.mean = out.evaluated == 0 ? 0.0 : total / static_cast<double>(out.evaluated);
  return out;
}

}  // namespace

MeanMetric mean_ndcg_at_k(const std::map<std::string, std::vector<std::string>>& rankings, const Qrels& qrels,
                          std::size_t k) {
  return mean_over_queries(rankings, qrels, [k](const std::vector<std::string>& r, const auto& rel) {
    return ndcg_at_k(r, rel, k);
  });
}

MeanMetric mean_average_precision(const std::map<std::string, std::vector<std::string>>& rankings, const Qrels& qrels) {
  return mean_over_queries(rankings, qrels, [](const std::vector<std::string>& r, const auto& rel) {
    std::vector<std::string> relevant;
    for (const auto& [doc, g] : rel) {
      if (g > 0.0) relevant.push_back(doc);
    }
    return average_precision(r, relevant);
  });
}

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = avg;
    i = j + 1;
  }
  return ranks;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("spearman: need two equal-length inputs of size >= 2");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw std::domain_error("spearman: constant input has no rank correlation");
  return sxy / std::sqrt(sxx * syy);
}

std::vector<int> kmeans(const RowMatrix& points, std::size_t k, std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(points.rows());
  if (k == 0 || k > n) throw std::invalid_argument("kmeans: need 1 <= k <= number of points");
  Rng rng(seed);
  RowMatrix centroids(static_cast<Eigen::Index>(k), points.cols());
  centroids.row(0) = points.row(static_cast<Eigen::Index>(rng.index(n)));
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      d2[i] = std::min(d2[i], (points.row(ii) - centroids.row(static_cast<Eigen::Index>(c - 1))).squaredNorm());
      total += d2[i];
    }
    std::size_t pick = n - 1;
    if (total > 0.0) {
      double u = rng.uniform() * total;
      for (std::size_t i = 0; i < n; ++i) {
        if (u < d2[i]) {
          pick = i;
          break;
        }
        u -= d2[i];
      }
    } else {
      pick = rng.index(n);
    }
    centroids.row(static_cast<Eigen::Index>(c)) = points.row(static_cast<Eigen::Index>(pick));
  }

  std::vector<int> labels(n, 0);
  for (int iter = 0; iter < 100; ++iter) {
    for (std::size_t i = 0; i < n; ++i) {
      Eigen::Index best = 0;
      (centroids.rowwise() - points.row(static_cast<Eigen::Index>(i))).rowwise().squaredNorm().minCoeff(&best);
      labels[i] = static_cast<int>(best);
    }
    RowMatrix next = RowMatrix::Zero(centroids.rows(), centroids.cols());
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      next.row(labels[i]) += points.row(static_cast<Eigen::Index>(i));
      ++counts[static_cast<std::size_t>(labels[i])];
    }
    for (std::size_t c = 0; c < k; ++c) {
      const auto cc = static_cast<Eigen::Index>(c);
      if (counts[c] > 0) {
        next.row(cc) /= static_cast<double>(counts[c]);
        continue;
      }
      // Empty cluster: move it onto the point farthest from its own centroid.
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = (points.row(static_cast<Eigen::Index>(i)) - centroids.row(labels[i])).squaredNorm();
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      next.row(cc) = points.row(static_cast<Eigen::Index>(far));
      labels[far] = static_cast<int>(c);
    }
    const double movement = (next - centroids).rowwise().norm().maxCoeff();
    centroids = std::move(next);
    if (movement < 1e-6) break;
  }
  for (std::size_t i = 0; i < n; ++i) {
    Eigen::Index best = 0;
    (centroids.rowwise() - points.row(static_cast<Eigen::Index>(i))).rowwise().squaredNorm().minCoeff(&best);
    labels[i] = static_cast<int>(best);
  }
  return labels;
}

VMeasure v_measure(std::span<const int> predicted, std::span<const int> gold) {
  if (predicted.size() != gold.size() || predicted.empty()) throw std::invalid_argument("v_measure: label lists must align");
  const double n = static_cast<double>(gold.size());
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> pc, gc;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    joint[{gold[i], predicted[i]}] += 1.0;
    gc[gold[i]] += 1.0;
    pc[predicted[i]] += 1.0;
  }
  auto entropy = [n](const std::map<int, double>& counts) {
    double h = 0.0;
    for (const auto& [label, c] : counts) h -= c / n * std::log(c / n);
    return h;
  };
  const double h_gold = entropy(gc), h_pred = entropy(pc);
  double h_gold_given_pred = 0.0, h_pred_given_gold = 0.0;
  for (const auto& [key, c] : joint) {
    h_gold_given_pred -= c / n * std::log(c / pc[key.second]);
    h_pred_given_gold -= c / n * std::log(c / gc[key.first]);
  }
  VMeasure v;
  v.homogeneity = h_gold == 0.0 ? 1.0 : 1.0 - h_gold_given_pred / h_gold;
  v.completeness = h_pred == 0.0 ? 1.0 : 1.0 - h_pred_given_gold / h_pred;
  const double s = v.homogeneity + v.completeness;
  v.v = s == 0.0 ? 0.0 : 2.0 * v.homogeneity * v.completeness / s;
  return v;
}

std::vector<int> encode_labels(std::span<const std::string> labels, std::map<std::string, int>& index) {
  std::vector<int> out;
  out.reserve(labels.size());
  for (const auto& l : labels) {
    auto [it, inserted] = index.emplace(l, static_cast<int>(index.size()));
    out.push_back(it->second);
  }
  return out;
}

ProbeResult logistic_probe(const RowMatrix& train_x, std::span<const int> train_y, const RowMatrix& test_x,
                           std::span<const int> test_y) {
  if (static_cast<std::size_t>(train_x.rows()) != train_y.size() ||
      static_cast<std::size_t>(test_x.rows()) != test_y.size()) {
    throw std::invalid_argument("logistic_probe: one label per row required");
  }
  if (train_x.cols() != test_x.cols()) throw std::invalid_argument("logistic_probe: feature widths differ");
  std::map<int, Eigen::Index> classes;
  for (int y : train_y) classes.emplace(y, 0);
  if (classes.size() < 2) throw std::invalid_argument("logistic_probe: training data needs at least two classes");
  Eigen::Index next = 0;
  for (auto& [label, col] : classes) col = next++;

  const Eigen::Index n = train_x.rows(), d = train_x.cols(), c = next;
  RowMatrix onehot = RowMatrix::Zero(n, c);
  for (Eigen::Index i = 0; i < n; ++i) onehot(i, classes[train_y[static_cast<std::size_t>(i)]]) = 1.0;
  RowMatrix w = RowMatrix::Zero(d, c);
  Eigen::RowVectorXd b = Eigen::RowVectorXd::Zero(c);
  constexpr double lr = 0.1, l2 = 1e-4;
  for (int iter = 0; iter < 500; ++iter) {
    RowMatrix logits = (train_x * w).rowwise() + b;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double m = logits.row(i).maxCoeff();
      logits.row(i) = (logits.row(i).array() - m).exp();
      logits.row(i) /= logits.row(i).sum();
    }
    const RowMatrix delta = (logits - onehot) / static_cast<double>(n);
    w -= lr * (train_x.transpose() * delta + l2 * w);
    b -= lr * delta.colwise().sum();
  }

  ProbeResult r;
  if (test_y.empty()) return r;
  const RowMatrix scores = (test_x * w).rowwise() + b;
  std::size_t correct = 0;
  for (Eigen::Index i = 0; i < test_x.rows(); ++i) {
    auto it = classes.find(test_y[static_cast<std::size_t>(i)]);
    if (it == classes.end()) {
      ++r.unseen_label_rows;
      continue;
    }
    Eigen::Index best = 0;
    scores.row(i).maxCoeff(&best);
    correct += best == it->second ? 1 : 0;
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(test_y.size());
  return r;
}

}  // namespace taskemb
