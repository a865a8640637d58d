#pragma once

#include "taskemb/tensor.hpp"
#include "taskemb/text.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace taskemb {

struct ModelConfig {
  std::size_t vocab_size = 512;
  std::size_t d_model = 32;
  std::size_t n_layers = 2;
  std::size_t n_heads = 2;
  std::size_t d_ff = 64;
  std::size_t max_seq_len = 128;
  double rope_base_train = 10000.0;
  double rope_base_infer = 20000.0;
  std::size_t lora_rank = 4;
  double lora_alpha = 4.0;
  std::vector<std::size_t> mrl_dims{4, 8, 16, 32};
  std::uint64_t seed = 0;

  std::size_t head_dim() const { return d_model / n_heads; }
  double lora_scale() const { return lora_alpha / static_cast<double>(lora_rank); }
  /// Throws std::invalid_argument on a broken invariant.
  void validate() const;
};

/// Adapter identities; None is the bare base model.
enum class TaskKind { None, RetrievalQuery, RetrievalPassage, Separation, Classification, TextMatching };

inline constexpr TaskKind kAdapterTasks[] = {TaskKind::RetrievalQuery, TaskKind::RetrievalPassage, TaskKind::Separation,
                                             TaskKind::Classification, TaskKind::TextMatching};

/// "retrieval.query", "retrieval.passage", "separation", "classification",
/// "text-matching", or "none".
std::string to_string(TaskKind task);
/// Inverse of to_string; unknown names list the valid set in the message.
TaskKind parse_task(std::string_view name);

struct LoraPair {
  Tensor a;  ///< rank x d_in
  Tensor b;  ///< d_out x rank
};

/// Low-rank updates for the token embedding and the per-layer attention
/// projections. Keys are "embedding/token" and "layer<i>/{q,k,v,o}".
struct LoraAdapter {
  std::map<std::string, LoraPair> matrices;

  std::size_t parameter_count() const;
  std::vector<Tensor> parameters() const;
};

struct LayerWeights {
  Tensor ln1_gain, ln1_bias;
  Tensor wq, wk, wv, wo;  ///< d_out x d_in, no bias
  Tensor ln2_gain, ln2_bias;
  Tensor w1, b1, w2, b2;  ///< feed-forward, not adapted
};

/// Base weights, task adapters and the vocabulary the model was trained with.
class EncoderModel {
public:
  EncoderModel(ModelConfig config, Vocab vocab);

  const ModelConfig& config() const { return config_; }
  const Vocab& vocab() const { return vocab_; }

  Tensor& token_embedding() { return token_embedding_; }
  const Tensor& token_embedding() const { return token_embedding_; }
  std::vector<LayerWeights>& layers() { return layers_; }
  const std::vector<LayerWeights>& layers() const { return layers_; }
  const Tensor& final_gain() const { return final_gain_; }
  const Tensor& final_bias() const { return final_bias_; }
  const Tensor& mlm_bias() const { return mlm_bias_; }

  /// Named base tensors in a stable order (checkpoint names).
  std::vector<std::pair<std::string, Tensor>> named_base_parameters() const;
  std::vector<Tensor> base_parameters() const;

  bool has_adapter(TaskKind task) const { return adapters_.count(task) != 0; }
  const LoraAdapter& adapter(TaskKind task) const;
  LoraAdapter& adapter(TaskKind task);
  const std::map<TaskKind, LoraAdapter>& adapters() const { return adapters_; }
  /// Fresh adapter: A ~ N(0, 0.02), B = 0. Replaces any existing one.
  LoraAdapter& add_adapter(TaskKind task);
  void set_adapter(TaskKind task, LoraAdapter adapter);
  /// Named adapter tensors, "adapter/<task>/<layer>/<matrix>/{A,B}".
  std::vector<std::pair<std::string, Tensor>> named_adapter_parameters() const;

  void set_base_trainable(bool on);

  /// Deep copy; the result shares no tensor storage with this model.
  EncoderModel clone() const;

  /// Highest training stage completed (0 = untrained).
  int stage_completed = 0;

private:
  ModelConfig config_;
  Vocab vocab_;
  Tensor token_embedding_;
  std::vector<LayerWeights> layers_;
  Tensor final_gain_, final_bias_;
  Tensor mlm_bias_;
  std::map<TaskKind, LoraAdapter> adapters_;
};

/// Right-padded token ids with an attention mask (1 = real token).
struct TokenBatch {
  std::size_t batch = 0;
  std::size_t len = 0;
  std::vector<int> ids;
  std::vector<std::uint8_t> mask;

  static TokenBatch pad(const std::vector<std::vector<int>>& sequences, std::size_t min_len = 0);
};

struct RotatedPair {
  Tensor q;
  Tensor k;
};

/// Rotates each (2i, 2i+1) pair inside every head of q and k (rows x
/// n_heads*head_dim) by position * base^(-2i/head_dim).
RotatedPair apply_rope(const Tensor& q, const Tensor& k, std::span<const std::size_t> positions,
                       std::size_t head_dim, double base);

/// x W^T + scale (x A^T) B^T; the plain projection when `lora` is null.
Tensor lora_linear(const Tensor& x, const Tensor& w, const LoraPair* lora, double scale);

/// Pre-norm transformer stack. Returns batch x len x d_model. Padded keys are
/// never attended to.
Tensor encoder_forward(const EncoderModel& model, const TokenBatch& tokens, TaskKind task, double rope_base);

/// Average over unmasked positions: batch x d_model.
Tensor mean_pool(const Tensor& states, const TokenBatch& tokens);

/// First `dim` coordinates of each row, L2-renormalised.
Tensor truncate_embeddings(const Tensor& embeddings, std::size_t dim);

enum class InstructionRole { None, Query, Passage };

std::string with_instruction(std::string_view text, InstructionRole role);

/// Tokenizes (truncating to max_seq_len), encodes and mean-pools; keeps the
/// graph when gradients are enabled.
Tensor encode_texts(const EncoderModel& model, std::span<const std::string> texts, TaskKind task, double rope_base);

/// Inference embedding: forward, mean-pool, truncate to `target_dim`,
/// renormalise. Runs without building a graph.
Tensor embed(const EncoderModel& model, std::span<const std::string> texts, TaskKind task, std::size_t target_dim,
             std::optional<double> rope_base = std::nullopt);

struct ParameterCounts {
  std::size_t base = 0;
  std::map<TaskKind, std::size_t> adapters;

  /// Per-adapter share of the base count, in percent.
  double adapter_percent(TaskKind task) const;
};

ParameterCounts count_parameters(const EncoderModel& model);

/// r (d_in + d_out) summed over the adapted matrices of one adapter.
std::size_t lora_parameter_formula(const ModelConfig& config);

}  // namespace taskemb
