#pragma once

#include "taskemb/records.hpp"
#include "taskemb/rng.hpp"

#include <string>
#include <vector>

namespace taskemb {

/// Queries, documents and graded judgments of one retrieval set.
struct RetrievalSet {
  std::string name;
  std::vector<TextRecord> queries;
  std::vector<TextRecord> corpus;
  Qrels qrels;
};

/// Synthetic eight-topic world. Documents and queries of a topic draw on
/// disjoint word banks, so relating them has to be learned.
class ToyWorld {
public:
  static constexpr std::size_t kTopics = 8;

  const std::string& topic_name(std::size_t topic) const;
  std::string doc_text(std::size_t topic, Rng& rng) const;
  std::string query_text(std::size_t topic, Rng& rng) const;

  std::vector<std::string> pretraining_corpus(std::size_t n, Rng& rng) const;
  std::vector<PairRecord> pairs(std::size_t n, Rng& rng, const std::string& dataset) const;
  RetrievalSet retrieval_set(std::size_t docs_per_topic, std::size_t queries_per_topic, Rng& rng) const;
  /// Document-style texts labelled with their topic name.
  std::vector<LabeledRecord> labeled(std::size_t per_topic, Rng& rng, const std::string& dataset) const;
  /// Same-topic pairs score 4-5, cross-topic pairs 0-1, on a 0-5 scale.
  std::vector<ScoredPairRecord> scored(std::size_t n, Rng& rng, const std::string& dataset) const;
  /// Threads with one good answer, a middling one and short repetitive ones.
  std::vector<QualityThread> threads(std::size_t n, Rng& rng) const;
};

}  // namespace taskemb
