#include "taskemb/bm25.hpp"

#include "taskemb/text.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace taskemb {

std::vector<std::string> bm25_terms(std::string_view text) { return split_words(lowercase(text)); }

Bm25Index::Bm25Index(std::vector<std::string> docs, double k1, double b) : docs_(std::move(docs)), k1_(k1), b_(b) {
  if (docs_.empty()) throw std::invalid_argument("BM25 needs a non-empty corpus");
  std::size_t total = 0;
  for (std::size_t i = 0; i < docs_.size(); ++i) {
    const auto terms = bm25_terms(docs_[i]);
    lengths_.push_back(terms.size());
    total += terms.size();
    auto& tf = term_freqs_.emplace_back();
    for (const auto& t : terms) ++tf[t];
    for (const auto& [t, n] : tf) postings_[t].push_back(i);
  }
  avg_len_ = static_cast<double>(total) / static_cast<double>(docs_.size());
}

std::size_t Bm25Index::doc_freq(const std::string& term) const {
  auto it = postings_.find(term);
  return it == postings_.end() ? 0 : it->second.size();
}

double Bm25Index::idf(const std::string& term) const {
  const auto n = static_cast<double>(docs_.size());
  const auto df = static_cast<double>(doc_freq(term));
  return std::log((n - df + 0.5) / (df + 0.5) + 1.0);
}

double Bm25Index::term_weight(double tf, std::size_t doc_len) const {
  const double norm = avg_len_ > 0.0 ? static_cast<double>(doc_len) / avg_len_ : 0.0;
  return tf * (k1_ + 1.0) / (tf + k1_ * (1.0 - b_ + b_ * norm));
}

double Bm25Index::score(std::span<const std::string> query_terms, std::size_t doc) const {
  const auto& tf = term_freqs_.at(doc);
  double s = 0.0;
  for (const auto& t : query_terms) {
    auto it = tf.find(t);
    if (it == tf.end()) continue;
    s += idf(t) * term_weight(static_cast<double>(it->second), lengths_[doc]);
  }
  return s;
}

std::vector<double> Bm25Index::score_all(std::span<const std::string> query_terms) const {
  std::vector<double> scores(docs_.size(), 0.0);
  for (const auto& t : query_terms) {
    auto it = postings_.find(t);
    if (it == postings_.end()) continue;
    const double w = idf(t);
    for (std::size_t d : it->second) {
      scores[d] += w * term_weight(static_cast<double>(term_freqs_[d].at(t)), lengths_[d]);
    }
  }
  return scores;
}

TupleRecord mine_hard_negatives(const PairRecord& pair, const Bm25Index& corpus, std::size_t m, Rng& rng) {
  TupleRecord out{pair.q, pair.p, {}, pair.dataset};
  if (m == 0) return out;
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (corpus.doc(i) != pair.p) eligible.push_back(i);
  }
  if (eligible.size() < m) {
    throw std::invalid_argument("corpus has fewer than " + std::to_string(m) + " documents besides the positive");
  }
  const auto terms = bm25_terms(pair.q);
  const auto scores = corpus.score_all(terms);
  std::vector<std::size_t> ranked = eligible;
  std::stable_sort(ranked.begin(), ranked.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<std::uint8_t> taken(corpus.size(), 0);
  for (std::size_t d : ranked) {
    if (out.negatives.size() == m || scores[d] <= 0.0) break;
    out.negatives.push_back(corpus.doc(d));
    taken[d] = 1;
  }
  std::vector<std::size_t> rest;
  for (std::size_t d : eligible) {
    if (!taken[d]) rest.push_back(d);
  }
  while (out.negatives.size() < m) {
    const std::size_t pick = rng.index(rest.size());
    out.negatives.push_back(corpus.doc(rest[pick]));
    rest.erase(rest.begin() + static_cast<std::ptrdiff_t>(pick));
  }
  return out;
}

}  // namespace taskemb
