#pragma once

#include "taskemb/encoder.hpp"
#include "taskemb/metrics.hpp"
#include "taskemb/records.hpp"
#include "taskemb/toy_data.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <string>
#include <vector>

namespace taskemb {

struct EvalReport {
  std::string run_id;
  std::string task;
  std::vector<std::string> adapters;  ///< task kinds used for encoding
  bool instructions = false;
  std::size_t dim = 0;
  std::map<std::string, double> metrics;
  std::uint64_t seed = 0;
  std::string timestamp;

  nlohmann::json to_json() const;
};

/// ISO-8601 UTC time from SOURCE_DATE_EPOCH, or the epoch when unset, so that
/// reports are reproducible.
std::string report_timestamp();

/// Which adapters encode queries and documents, and whether the instruction
/// prefixes are prepended.
struct EncodingSetup {
  TaskKind query_task = TaskKind::RetrievalQuery;
  TaskKind doc_task = TaskKind::RetrievalPassage;
  bool instructions = false;
};

/// Documents sorted by descending cosine, ties by ascending id.
std::map<std::string, std::vector<std::string>> rank_documents(const EncoderModel& model, const RetrievalSet& set,
                                                               std::size_t dim, const EncodingSetup& setup);

/// nDCG@10 and mAP over the set's queries.
EvalReport evaluate_retrieval(const EncoderModel& model, const RetrievalSet& set, std::size_t dim,
                              const EncodingSetup& setup, std::uint64_t seed = 0);

/// Spearman correlation between pair cosines and gold scores.
EvalReport evaluate_sts(const EncoderModel& model, const std::vector<ScoredPairRecord>& pairs, std::size_t dim,
                        TaskKind task = TaskKind::TextMatching, std::uint64_t seed = 0);

/// Logistic-probe accuracy on frozen embeddings.
EvalReport evaluate_classification(const EncoderModel& model, const std::vector<LabeledRecord>& train,
                                   const std::vector<LabeledRecord>& test, std::size_t dim,
                                   TaskKind task = TaskKind::Classification, std::uint64_t seed = 0);

/// k-means with k = number of gold labels, scored by v-measure.
EvalReport evaluate_clustering(const EncoderModel& model, const std::vector<LabeledRecord>& records, std::size_t dim,
                               TaskKind task = TaskKind::Separation, std::uint64_t seed = 0);

/// One retrieval report per dim, each carrying its delta to the smallest dim.
std::vector<EvalReport> mrl_sweep(const EncoderModel& model, const RetrievalSet& set, std::span<const std::size_t> dims,
                                  const EncodingSetup& setup, std::uint64_t seed = 0);

struct AblationVariant {
  const EncoderModel* model = nullptr;
  bool two_adapters = true;
  bool instructions = false;
};

/// nDCG@10 per retrieval set for each of the four adapter x instruction
/// cells, with cell, row and column averages.
struct AblationReport {
  struct Cell {
    bool two_adapters = false;
    bool instructions = false;
    std::map<std::string, double> scores;  ///< set name -> nDCG@10
    double average = 0.0;
  };
  std::vector<Cell> cells;  ///< (1, no), (1, yes), (2, no), (2, yes)
  double one_adapter_average = 0.0;
  double two_adapter_average = 0.0;
  double without_instructions_average = 0.0;
  double with_instructions_average = 0.0;

  nlohmann::json to_json() const;
  /// Plain-text grid: sets as rows, cells as columns.
  std::string render() const;
};

AblationReport adapter_ablation(std::span<const AblationVariant> variants, std::span<const RetrievalSet> sets,
                                std::size_t dim);

/// Ranks gold plus distractors by cosine to the query. Ties count against the
/// gold document. Reports mAP and nDCG@10.
EvalReport failure_eval(const EncoderModel& model, const std::vector<FailureRecord>& records, const std::string& kind,
                        std::size_t dim, const EncodingSetup& setup, std::uint64_t seed = 0);

}  // namespace taskemb
