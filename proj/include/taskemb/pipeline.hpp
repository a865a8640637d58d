#pragma once

#include "taskemb/evaluation.hpp"
#include "taskemb/trainer.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace taskemb {

/// Sizes of the generated eight-topic data.
struct ToyDataSpec {
  std::size_t corpus = 400;
  std::size_t pairs = 512;
  std::size_t eval_docs_per_topic = 8;
  std::size_t eval_queries_per_topic = 4;
  std::size_t labeled_per_topic = 24;
  std::size_t scored = 256;
  std::size_t threads = 96;
  std::size_t failures_per_case = 24;
};

/// Raw generated data, before filtering and tuple construction.
struct ToyData {
  std::vector<std::string> corpus;
  std::vector<PairRecord> pairs;
  RetrievalSet eval_set;
  std::vector<LabeledRecord> labeled;
  std::vector<LabeledRecord> labeled_eval;
  std::vector<ScoredPairRecord> scored;
  std::vector<ScoredPairRecord> scored_eval;
  std::vector<QualityThread> threads;
};

ToyData make_toy_data(const ToyDataSpec& spec, Rng& rng);

/// Either generated toy data or JSONL files; file paths are resolved against
/// the config file's directory.
struct DataSources {
  std::optional<ToyDataSpec> toy;
  std::filesystem::path corpus;        ///< {"id","text"}
  std::filesystem::path pairs;         ///< {"q","p","dataset"}
  std::filesystem::path labeled;       ///< {"text","label","dataset"}
  std::filesystem::path labeled_eval;
  std::filesystem::path scored;        ///< {"q","p","score","scale_max"}
  std::filesystem::path scored_eval;
  std::filesystem::path threads;       ///< {"query","answers":[...]}
  std::filesystem::path eval_queries;  ///< {"id","text"}
  std::filesystem::path eval_corpus;   ///< {"id","text"}
  std::filesystem::path eval_qrels;    ///< {"qid","did","rel"}
};

struct EvalSettings {
  std::size_t dim = 32;
  std::vector<std::size_t> sweep_dims{4, 8, 16, 32};
  bool instructions = false;
  bool failures = true;
  bool ablation = false;
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::filesystem::path output_dir;
  ModelConfig model;
  std::size_t max_vocab_words = 4096;
  DataSources data;
  std::size_t hard_negatives = 7;
  std::vector<StagePlan> stages;
  EvalSettings eval;

  /// Toy defaults for every field except seed and output_dir. Unknown keys
  /// are rejected; "seed" is mandatory.
  static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
  static RunConfig load(const std::filesystem::path& path);
  /// The default stage list: two-phase pre-training and pair training, then
  /// one adapter run per task.
  static std::vector<StagePlan> default_stages(std::uint64_t seed);
  /// Checks invariants and that referenced files exist.
  void validate() const;

  const StagePlan* find_stage(int stage, TaskKind task = TaskKind::None) const;
};

StagePlan stage_plan_from_json(const nlohmann::json& j, std::uint64_t default_seed);
nlohmann::json stage_plan_to_json(const StagePlan& plan);

/// All training and evaluation inputs after the data-preparation procedures.
struct PreparedData {
  std::vector<std::string> corpus;
  std::vector<PairRecord> pairs;  ///< after the overlap filter
  std::size_t pairs_dropped = 0;
  std::vector<TupleRecord> retrieval_tuples;  ///< mined pairs, quality tuples and F1-F3 tuples
  std::vector<TupleRecord> class_tuples;
  std::vector<LabeledRecord> labeled;
  std::vector<LabeledRecord> labeled_eval;
  std::vector<ScoredPairRecord> scored;
  std::vector<ScoredPairRecord> scored_eval;
  RetrievalSet eval_set;
  std::map<std::string, std::vector<FailureRecord>> failure_eval;  ///< "f1".."f4"

  std::vector<std::string> vocabulary_texts() const;
  AdapterData adapter_data(TaskKind task) const;
};

/// Loads or generates the data and runs the preparation procedures. When
/// `out_dir` is non-empty the prepared files are written under it.
PreparedData prepare_data(const RunConfig& config, const std::filesystem::path& out_dir = {});

/// Fresh model with a vocabulary built from the prepared training texts.
EncoderModel initial_model(const RunConfig& config, const PreparedData& data);

/// Runs every planned stage with the given number in order.
nlohmann::json run_stages(EncoderModel& model, const RunConfig& config, const PreparedData& data, int stage,
                          std::optional<TaskKind> only_task = std::nullopt);

/// Evaluation reports for a fully trained model.
nlohmann::json evaluate_model(const EncoderModel& model, const RunConfig& config, const PreparedData& data);

/// Trains the four retrieval variants (one or two adapters, with or without
/// instructions) from copies of a stage-II model and scores them on the
/// evaluation set.
AblationReport run_ablation(const EncoderModel& stage2, const RunConfig& config, const PreparedData& data);

/// Query and document adapters for retrieval: both retrieval adapters when
/// present, the query adapter for both sides when only it exists, otherwise
/// the base model.
EncodingSetup default_retrieval_setup(const EncoderModel& model, bool instructions);

/// `task` when the model has that adapter, otherwise TaskKind::None.
TaskKind task_or_base(const EncoderModel& model, TaskKind task);

struct PipelineResult {
  nlohmann::json reports;
  std::vector<std::filesystem::path> files;  ///< everything written, in order
};

/// prepare -> stage I -> stage II -> stage III -> evaluation, writing data,
/// checkpoints, training logs and reports under config.output_dir.
PipelineResult run_pipeline(const RunConfig& config);

}  // namespace taskemb
