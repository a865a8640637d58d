#pragma once

#include "taskemb/records.hpp"
#include "taskemb/rng.hpp"

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace taskemb {

/// Draws batches that never mix datasets. A dataset is picked with
/// probability proportional to its records not yet served this epoch; records
/// are taken without replacement within the epoch.
template <typename Record>
class BatchSampler {
public:
  struct Batch {
    std::string dataset;
    std::vector<Record> records;
  };

  BatchSampler(const std::map<std::string, std::vector<Record>>& datasets, std::size_t batch_size, Rng rng)
      : batch_size_(batch_size), rng_(rng) {
    if (batch_size == 0) throw std::invalid_argument("batch size must be positive");
    if (datasets.empty()) throw std::invalid_argument("no datasets to sample from");
    for (const auto& [name, records] : datasets) {
      if (records.size() < batch_size) {
        throw std::invalid_argument("dataset '" + name + "' has fewer than " + std::to_string(batch_size) + " records");
      }
      State s{name, records, {}, 0};
      s.order.resize(records.size());
      for (std::size_t i = 0; i < s.order.size(); ++i) s.order[i] = i;
      rng_.shuffle(s.order);
      states_.push_back(std::move(s));
    }
  }

  Batch next() {
    std::size_t total = 0;
    for (const auto& s : states_) total += s.remaining();
    if (total == 0) {
      for (auto& s : states_) reset(s);
      ++epochs_;
      for (const auto& s : states_) total += s.remaining();
    }
    std::size_t pick = rng_.index(total);
    State* chosen = nullptr;
    for (auto& s : states_) {
      if (pick < s.remaining()) {
        chosen = &s;
        break;
      }
      pick -= s.remaining();
    }
    if (chosen->remaining() < batch_size_) {
      // Too few records left for a full batch: reshuffle this dataset early.
      reset(*chosen);
      ++reshuffles_;
    }
    Batch batch{chosen->name, {}};
    batch.records.reserve(batch_size_);
    for (std::size_t i = 0; i < batch_size_; ++i) batch.records.push_back(chosen->records[chosen->order[chosen->cursor++]]);
    return batch;
  }

  /// Early reshuffles caused by a dataset running short mid-epoch.
  std::size_t reshuffles() const { return reshuffles_; }
  std::size_t epochs() const { return epochs_; }
  std::size_t batch_size() const { return batch_size_; }

private:
  struct State {
    std::string name;
    std::vector<Record> records;
    std::vector<std::size_t> order;
    std::size_t cursor = 0;
    std::size_t remaining() const { return order.size() - cursor; }
  };

  void reset(State& s) {
    rng_.shuffle(s.order);
    s.cursor = 0;
  }

  std::size_t batch_size_;
  Rng rng_;
  std::vector<State> states_;
  std::size_t reshuffles_ = 0;
  std::size_t epochs_ = 0;
};

/// Sanctioned number of negatives in classification and failure-case tuples.
inline constexpr std::size_t kTupleNegatives = 7;

/// Per dataset: pairs up members of each class (q, p) and draws seven
/// negatives uniformly from other classes, with replacement only when fewer
/// than seven candidates exist.
std::vector<TupleRecord> build_class_tuples(const std::vector<LabeledRecord>& labeled, Rng& rng);

/// Appends " <id>" to q, p and every negative.
TupleRecord append_unique_id(TupleRecord tuple, const std::string& id);

struct QualityConversion {
  std::vector<TupleRecord> tuples;
  std::size_t skipped = 0;
  std::vector<double> positive_scores;  ///< source score of each tuple's positive
  std::vector<std::vector<double>> own_negative_scores;  ///< scores of negatives taken from the same thread
};

/// Keeps threads with at least two answers; the best answer (lowest index on
/// ties) is the positive, answers at least `min_gap` lower are negatives, and
/// answers from other threads pad the list to exactly seven.
QualityConversion convert_quality_threads(const std::vector<QualityThread>& threads, Rng& rng, double min_gap = 0.3);

}  // namespace taskemb
