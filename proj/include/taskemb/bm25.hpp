#pragma once

#include "taskemb/records.hpp"
#include "taskemb/rng.hpp"

#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace taskemb {

/// Okapi BM25 over a fixed in-memory corpus. Terms are lowercased words.
///
///   score(q, d) = sum_{t in q} idf(t) * tf (k1 + 1) / (tf + k1 (1 - b + b |d| / avgdl))
///   idf(t)      = ln((N - df + 0.5) / (df + 0.5) + 1)
class Bm25Index {
public:
  explicit Bm25Index(std::vector<std::string> docs, double k1 = 1.2, double b = 0.75);

  double score(std::span<const std::string> query_terms, std::size_t doc) const;
  /// Scores of every document, in corpus order.
  std::vector<double> score_all(std::span<const std::string> query_terms) const;

  double idf(const std::string& term) const;
  std::size_t doc_freq(const std::string& term) const;
  std::size_t size() const { return docs_.size(); }
  double average_length() const { return avg_len_; }
  const std::string& doc(std::size_t i) const { return docs_.at(i); }
  const std::vector<std::string>& docs() const { return docs_; }
  double k1() const { return k1_; }
  double b() const { return b_; }

private:
  double term_weight(double tf, std::size_t doc_len) const;

  std::vector<std::string> docs_;
  std::vector<std::size_t> lengths_;
  std::vector<std::unordered_map<std::string, std::size_t>> term_freqs_;
  std::unordered_map<std::string, std::vector<std::size_t>> postings_;
  double avg_len_ = 0.0;
  double k1_;
  double b_;
};

std::vector<std::string> bm25_terms(std::string_view text);

/// Takes the m best BM25 hits for the query as negatives, skipping the
/// positive and any text identical to it; pads with uniformly drawn corpus
/// documents when fewer than m hits score above zero.
TupleRecord mine_hard_negatives(const PairRecord& pair, const Bm25Index& corpus, std::size_t m, Rng& rng);

}  // namespace taskemb
