#pragma once

#include "taskemb/tensor.hpp"

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace taskemb {

/// Default temperatures per training regime.
namespace temperature {
inline constexpr double kPairShort = 0.05;
inline constexpr double kPairLong = 0.02;
inline constexpr double kTextMatching = 0.05;
inline constexpr double kClassification = 0.02;
inline constexpr double kSeparation = 0.02;
inline constexpr double kRetrieval = 0.05;
}  // namespace temperature

/// Mean cross-entropy over the masked positions. `logits` is
/// (batch*len) x vocab or batch x len x vocab; `target_ids` holds one id per
/// row and `masked_positions` are flat row indices.
Tensor mlm_loss(const Tensor& logits, std::span<const int> target_ids, std::span<const std::size_t> masked_positions);

/// -sum_i log softmax_i(sim / tau)[i] over a square similarity matrix.
Tensor info_nce(const Tensor& sim, double tau);

/// info_nce(S) + info_nce(S^T) with S the cosine matrix of queries vs passages.
Tensor pair_loss_bidirectional(const Tensor& queries, const Tensor& passages, double tau);

/// Multi-negative InfoNCE. `negatives` holds k*m rows, tuple i's negatives at
/// rows [i*m, (i+1)*m); pass m = 0 with an undefined tensor for none. Every
/// in-batch positive and every tuple's negatives are candidates for each
/// query; the reverse direction ranks in-batch queries for each positive.
/// Both directions are averaged over tuples.
Tensor triplet_loss(const Tensor& queries, const Tensor& positives, const Tensor& negatives, std::size_t m, double tau);

/// log(1 + sum over zeta_i > zeta_j of exp((s_j - s_i) / tau)). `scores` is a
/// vector tensor of s(q_i, p_i).
Tensor cosent_loss(const Tensor& scores, std::span<const double> zeta, double tau);

struct SeparationLoss {
  Tensor loss;
  /// Set when the batch lacks a same-label or a cross-label pair; loss is 0 then.
  bool degenerate = false;
};

/// CoSent over all unordered pairs with zeta = 1 for equal labels, 0 otherwise.
SeparationLoss separation_loss(const Tensor& embeddings, std::span<const std::string> labels, double tau);

using EmbeddingLoss = std::function<Tensor(std::span<const Tensor>)>;

/// sum_t weight_t * loss_fn(embeddings truncated to dims_t and renormalised).
/// Every dim must be one of `allowed_dims`.
Tensor mrl_loss(const EmbeddingLoss& loss_fn, std::span<const Tensor> embeddings, std::span<const std::size_t> dims,
                std::span<const double> weights, std::span<const std::size_t> allowed_dims);

}  // namespace taskemb
