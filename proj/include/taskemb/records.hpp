#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace taskemb {

struct PairRecord {
  std::string q;
  std::string p;
  std::string dataset;
};

struct TupleRecord {
  std::string q;
  std::string p;
  std::vector<std::string> negatives;
  std::string dataset;
};

struct ScoredPairRecord {
  std::string q;
  std::string p;
  double score = 0.0;
  double scale_max = 1.0;
  std::string dataset;

  /// Ground-truth similarity in [0, 1].
  double zeta() const { return score / scale_max; }
};

struct LabeledRecord {
  std::string text;
  std::string label;
  std::string dataset;
};

struct QualityAnswer {
  std::string text;
  double score = 0.0;
};

struct QualityThread {
  std::string query;
  std::vector<QualityAnswer> answers;
};

/// One query, its gold passage and seven distractors.
struct FailureRecord {
  std::string kind;
  std::string query;
  std::string gold;
  std::vector<std::string> distractors;
};

struct TextRecord {
  std::string id;
  std::string text;
};

struct QrelRecord {
  std::string qid;
  std::string did;
  double rel = 0.0;
};

/// qid -> did -> graded relevance.
using Qrels = std::map<std::string, std::map<std::string, double>>;

void from_json(const nlohmann::json& j, PairRecord& r);
void from_json(const nlohmann::json& j, TupleRecord& r);
void from_json(const nlohmann::json& j, ScoredPairRecord& r);
void from_json(const nlohmann::json& j, LabeledRecord& r);
void from_json(const nlohmann::json& j, QualityThread& r);
void from_json(const nlohmann::json& j, FailureRecord& r);
void from_json(const nlohmann::json& j, TextRecord& r);
void from_json(const nlohmann::json& j, QrelRecord& r);

void to_json(nlohmann::json& j, const PairRecord& r);
void to_json(nlohmann::json& j, const TupleRecord& r);
void to_json(nlohmann::json& j, const ScoredPairRecord& r);
void to_json(nlohmann::json& j, const LabeledRecord& r);
void to_json(nlohmann::json& j, const QualityThread& r);
void to_json(nlohmann::json& j, const FailureRecord& r);
void to_json(nlohmann::json& j, const TextRecord& r);
void to_json(nlohmann::json& j, const QrelRecord& r);

/// Parses one JSON object per non-empty line. Malformed lines and missing
/// required keys raise DataError naming the line; unknown keys are ignored.
template <typename Record>
std::vector<Record> parse_jsonl(std::istream& in, const std::string& source = "<stream>");

template <typename Record>
std::vector<Record> read_jsonl(const std::filesystem::path& path);

template <typename Record>
std::string to_jsonl(const std::vector<Record>& records);

/// Writes to a sibling temp file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

Qrels make_qrels(const std::vector<QrelRecord>& rows);

/// Groups records by their dataset field, preserving input order within a group.
template <typename Record>
std::map<std::string, std::vector<Record>> group_by_dataset(const std::vector<Record>& records) {
  std::map<std::string, std::vector<Record>> out;
  for (const auto& r : records) out[r.dataset].push_back(r);
  return out;
}

}  // namespace taskemb
