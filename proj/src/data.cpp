#include "taskemb/data.hpp"

#include <algorithm>

namespace taskemb {

namespace {

std::vector<std::string> draw_negatives(const std::vector<std::string>& pool, std::size_t count, Rng& rng) {
  std::vector<std::string> out;
  out.reserve(count);
  if (pool.size() >= count) {
    std::vector<std::size_t> idx(pool.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (std::size_t i = 0; i < count; ++i) {
      std::swap(idx[i], idx[i + rng.index(idx.size() - i)]);
      out.push_back(pool[idx[i]]);
    }
  } else {
    for (std::size_t i = 0; i < count; ++i) out.push_back(pool[rng.index(pool.size())]);
  }
  return out;
}

}  // namespace

std::vector<TupleRecord> build_class_tuples(const std::vector<LabeledRecord>& labeled, Rng& rng) {
  std::vector<TupleRecord> tuples;
  for (const auto& [dataset, records] : group_by_dataset(labeled)) {
    std::map<std::string, std::vector<std::string>> classes;
    for (const auto& r : records) classes[r.label].push_back(r.text);
    if (classes.size() < 2) continue;
    for (const auto& [label, members] : classes) {
      if (members.size() < 2) continue;
      std::vector<std::string> pool;
      for (const auto& [other, texts] : classes) {
        if (other != label) pool.insert(pool.end(), texts.begin(), texts.end());
      }
      std::vector<std::string> shuffled = members;
      rng.shuffle(shuffled);
      for (std::size_t i = 0; i + 1 < shuffled.size(); i += 2) {
        tuples.push_back({shuffled[i], shuffled[i + 1], draw_negatives(pool, kTupleNegatives, rng), dataset});
      }
    }
  }
  if (tuples.empty()) {
    throw std::invalid_argument("cannot form classification tuples: need two classes and a class with two members");
  }
  return tuples;
}

TupleRecord append_unique_id(TupleRecord tuple, const std::string& id) {
  const std::string suffix = " " + id;
  tuple.q += suffix;
  tuple.p += suffix;
  for (auto& n : tuple.negatives) n += suffix;
  return tuple;
}

QualityConversion convert_quality_threads(const std::vector<QualityThread>& threads, Rng& rng, double min_gap) {
  QualityConversion out;
  std::vector<std::size_t> donors;
  for (std::size_t t = 0; t < threads.size(); ++t) {
    if (!threads[t].answers.empty()) donors.push_back(t);
  }
  for (std::size_t t = 0; t < threads.size(); ++t) {
    const auto& thread = threads[t];
    if (thread.answers.size() < 2) {
      ++out.skipped;
      continue;
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < thread.answers.size(); ++i) {
      if (thread.answers[i].score > thread.answers[best].score) best = i;
    }
    const double top = thread.answers[best].score;
    TupleRecord tuple{thread.query, thread.answers[best].text, {}, "quality"};
    std::vector<double> own;
    for (const auto& a : thread.answers) {
      if (tuple.negatives.size() == kTupleNegatives) break;
      if (top - a.score >= min_gap - 1e-12) {
        tuple.negatives.push_back(a.text);
        own.push_back(a.score);
      }
    }
    std::vector<std::size_t> others;
    for (std::size_t d : donors) {
      if (d != t) others.push_back(d);
    }
    if (tuple.negatives.size() < kTupleNegatives && others.empty()) {
      ++out.skipped;
      continue;
    }
    while (tuple.negatives.size() < kTupleNegatives) {
      const auto& donor = threads[others[rng.index(others.size())]];
      tuple.negatives.push_back(donor.answers[rng.index(donor.answers.size())].text);
    }
    out.tuples.push_back(std::move(tuple));
    out.positive_scores.push_back(top);
    out.own_negative_scores.push_back(std::move(own));
  }
  return out;
}

}  // namespace taskemb
