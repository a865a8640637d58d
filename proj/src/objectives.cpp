#include "taskemb/objectives.hpp"

#include "taskemb/encoder.hpp"

#include <algorithm>
#include <stdexcept>

namespace taskemb {

namespace {

void require_tau(double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("temperature must be positive");
}

Tensor as_column(const Tensor& v) { return reshape(v, {v.numel(), 1}); }

/// Selects entries of a vector tensor by index, keeping the graph.
Tensor gather(const Tensor& v, std::span<const int> idx) { return reshape(embedding(as_column(v), idx), {idx.size()}); }

}  // namespace

Tensor mlm_loss(const Tensor& logits, std::span<const int> target_ids, std::span<const std::size_t> masked_positions) {
  if (masked_positions.empty()) throw std::invalid_argument("mlm_loss: no masked positions");
  const std::size_t vocab = logits.cols();
  const std::size_t rows = logits.rows();
  if (target_ids.size() != rows) throw std::invalid_argument("mlm_loss: one target id per logit row required");
  const Tensor flat = logits.rank() == 2 ? logits : reshape(logits, {rows, vocab});
  std::vector<int> pos;
  RowMatrix onehot = RowMatrix::Zero(static_cast<Eigen::Index>(masked_positions.size()), static_cast<Eigen::Index>(vocab));
  for (std::size_t i = 0; i < masked_positions.size(); ++i) {
    const std::size_t p = masked_positions[i];
    if (p >= rows) throw std::out_of_range("mlm_loss: masked position out of range");
    const int t = target_ids[p];
    if (t < 0 || static_cast<std::size_t>(t) >= vocab) throw std::out_of_range("mlm_loss: target id out of range");
    pos.push_back(static_cast<int>(p));
    onehot(static_cast<Eigen::Index>(i), t) = 1.0;
  }
  const Tensor picked = embedding(flat, pos);
  const Tensor target_logit = sum(picked * Tensor::from_matrix(onehot), 1);
  return mean(logsumexp_rows(picked) - target_logit);
}

Tensor info_nce(const Tensor& sim, double tau) {
  require_tau(tau);
  if (sim.rank() != 2 || sim.shape()[0] != sim.shape()[1]) throw std::invalid_argument("info_nce: similarity matrix must be square");
  const Tensor z = sim * (1.0 / tau);
  return sum(logsumexp_rows(z) - diagonal(z));
}

Tensor pair_loss_bidirectional(const Tensor& queries, const Tensor& passages, double tau) {
  if (queries.rows() != passages.rows()) throw std::invalid_argument("pair_loss_bidirectional: row count mismatch");
  const Tensor s = cosine_similarity_matrix(queries, passages);
  return info_nce(s, tau) + info_nce(transpose(s), tau);
}

Tensor triplet_loss(const Tensor& queries, const Tensor& positives, const Tensor& negatives, std::size_t m, double tau) {
  require_tau(tau);
  const std::size_t k = queries.rows();
  if (positives.rows() != k) throw std::invalid_argument("triplet_loss: query/positive count mismatch");
  if (m > 0 && (!negatives.defined() || negatives.rows() != k * m)) {
    throw std::invalid_argument("triplet_loss: every tuple must carry exactly m negatives");
  }
  const Tensor candidates = m == 0 ? positives : concat_rows(std::vector<Tensor>{positives, negatives});
  const Tensor forward = cosine_similarity_matrix(queries, candidates) * (1.0 / tau);
  const Tensor reverse = cosine_similarity_matrix(positives, queries) * (1.0 / tau);
  const Tensor fwd = mean(logsumexp_rows(forward) - diagonal(forward));
  const Tensor rev = mean(logsumexp_rows(reverse) - diagonal(reverse));
  return fwd + rev;
}

Tensor cosent_loss(const Tensor& scores, std::span<const double> zeta, double tau) {
  require_tau(tau);
  if (scores.numel() != zeta.size() || zeta.empty()) throw std::invalid_argument("cosent_loss: scores and zeta must align");
  std::vector<int> hi, lo;
  for (std::size_t i = 0; i < zeta.size(); ++i) {
    for (std::size_t j = 0; j < zeta.size(); ++j) {
      if (zeta[i] > zeta[j]) {
        hi.push_back(static_cast<int>(i));
        lo.push_back(static_cast<int>(j));
      }
    }
  }
  if (hi.empty()) return sum(scores) * 0.0;
  const Tensor diffs = (gather(scores, lo) - gather(scores, hi)) * (1.0 / tau);
  const Tensor with_zero = concat_cols(std::vector<Tensor>{Tensor::from({1, 1}, {0.0}), reshape(diffs, {1, hi.size()})});
  return logsumexp_rows(with_zero);
}

SeparationLoss separation_loss(const Tensor& embeddings, std::span<const std::string> labels, double tau) {
  const std::size_t n = embeddings.rows();
  if (n < 2) throw std::invalid_argument("separation_loss: at least two items required");
  if (labels.size() != n) throw std::invalid_argument("separation_loss: one label per embedding required");
  std::vector<int> idx;
  std::vector<double> zeta;
  bool same = false, cross = false;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      idx.push_back(static_cast<int>(i * n + j));
      const bool match = labels[i] == labels[j];
      zeta.push_back(match ? 1.0 : 0.0);
      same = same || match;
      cross = cross || !match;
    }
  }
  const Tensor sim = cosine_similarity_matrix(embeddings, embeddings);
  if (!same || !cross) return {sum(sim) * 0.0, true};
  const Tensor scores = gather(reshape(sim, {n * n}), idx);
  return {cosent_loss(scores, zeta, tau), false};
}

Tensor mrl_loss(const EmbeddingLoss& loss_fn, std::span<const Tensor> embeddings, std::span<const std::size_t> dims,
                std::span<const double> weights, std::span<const std::size_t> allowed_dims) {
  if (dims.empty() || dims.size() != weights.size()) throw std::invalid_argument("mrl_loss: dims and weights must align");
  Tensor total;
  for (std::size_t t = 0; t < dims.size(); ++t) {
    if (std::find(allowed_dims.begin(), allowed_dims.end(), dims[t]) == allowed_dims.end()) {
      throw std::invalid_argument("mrl_loss: dimension " + std::to_string(dims[t]) + " is not an MRL dim");
    }
    if (!(weights[t] > 0.0)) throw std::invalid_argument("mrl_loss: weights must be positive");
    std::vector<Tensor> truncated;
    truncated.reserve(embeddings.size());
    for (const auto& e : embeddings) {
      // The losses are cosine-based, so the full-width case needs no renormalisation.
      truncated.push_back(dims[t] == e.cols() ? e : truncate_embeddings(e, dims[t]));
    }
    const Tensor term = loss_fn(truncated) * weights[t];
    total = total.defined() ? total + term : term;
  }
  return total;
}

}  // namespace taskemb
