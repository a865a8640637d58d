#pragma once

#include "taskemb/encoder.hpp"
#include "taskemb/optimizer.hpp"
#include "taskemb/records.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace taskemb {

/// One sub-phase of a stage. Sequences are truncated to `seq_len` tokens;
/// `min_tokens` > 0 restricts the phase to texts at least that long.
struct PhasePlan {
  std::size_t steps = 0;
  std::size_t batch_size = 8;
  std::size_t seq_len = 64;
  /// 0 selects max(1, steps / 10).
  std::size_t warmup_steps = 0;
  double max_lr = 1e-3;
  double temperature = 0.05;
  std::size_t min_tokens = 0;
};

struct StagePlan {
  int stage = 1;
  /// Stages I and II: one phase, or short then long. Stage III: one phase.
  std::vector<PhasePlan> phases;
  /// Stage III only. Either retrieval kind selects joint retrieval training.
  TaskKind task = TaskKind::None;
  /// Empty: plain loss on full-width embeddings.
  std::vector<std::size_t> mrl_dims;
  /// Empty: uniform weights.
  std::vector<double> mrl_weights;
  double weight_decay = 0.01;
  double mask_ratio = 0.15;
  std::uint64_t seed = 0;
  /// Retrieval: false trains only the query adapter and uses it for both sides.
  bool two_retrieval_adapters = true;
  /// Retrieval: prepend "query: " / "passage: ".
  bool instructions = false;

  void validate() const;
};

struct StepRecord {
  std::size_t phase = 0;
  std::size_t step = 0;  ///< 1-based within the phase
  std::string dataset;
  double loss = 0.0;
  double lr = 0.0;
};

struct TrainLog {
  std::vector<StepRecord> steps;
  std::size_t reshuffles = 0;
  std::size_t skipped_batches = 0;
};

/// Inputs of a stage-III run; which fields are read depends on the task.
struct AdapterData {
  std::vector<TupleRecord> tuples;      ///< classification, retrieval
  std::vector<ScoredPairRecord> scored; ///< text-matching
  std::vector<PairRecord> pairs;        ///< text-matching, separation mixing
  std::vector<LabeledRecord> labeled;   ///< separation
};

/// Masked-language-model training of the base weights only.
TrainLog run_stage1(EncoderModel& model, std::span<const std::string> corpus, const StagePlan& plan);

/// Bidirectional pair training of the base weights, task none, single-dataset
/// batches.
TrainLog run_stage2(EncoderModel& model, const std::vector<PairRecord>& pairs, const StagePlan& plan);

/// Trains the task's adapter(s) with the base frozen. Base weights are hashed
/// before and after; any drift is a hard failure.
TrainLog run_stage3(EncoderModel& model, const AdapterData& data, const StagePlan& plan);

/// FNV-1a over the raw bytes of the given tensors, in order.
std::uint64_t hash_parameters(const std::vector<std::pair<std::string, Tensor>>& params);

/// Training-time encoding: truncate to `seq_len`, training rotary base, mean pool.
Tensor encode_for_training(const EncoderModel& model, std::span<const std::string> texts, TaskKind task,
                           std::size_t seq_len);

/// Share of masked positions whose original token is the arg-max prediction.
double masked_token_accuracy(const EncoderModel& model, std::span<const std::string> texts, double ratio, Rng& rng);

/// Loss values above this abort training.
inline constexpr double kDivergenceThreshold = 1e6;

}  // namespace taskemb
