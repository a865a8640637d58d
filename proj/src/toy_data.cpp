#include "taskemb/toy_data.hpp"

#include <array>
#include <cstdio>
#include <stdexcept>

namespace taskemb {

namespace {

struct Topic {
  std::string name;
  std::array<const char*, 10> doc_words;
  std::array<const char*, 6> query_words;
};

const std::array<Topic, ToyWorld::kTopics>& topics() {
  static const std::array<Topic, ToyWorld::kTopics> bank{{
      {"astronomy",
       {"telescope", "orbit", "comet", "nebula", "galaxy", "planet", "asteroid", "eclipse", "lunar", "stellar"},
       {"stars", "sky", "space", "cosmos", "skywatching", "universe"}},
      {"cooking",
       {"simmer", "saucepan", "garlic", "oven", "braise", "dough", "whisk", "skillet", "roast", "marinade"},
       {"recipe", "dinner", "meal", "kitchen", "chef", "food"}},
      {"sailing",
       {"hull", "mast", "keel", "rudder", "harbor", "anchor", "tide", "jib", "starboard", "regatta"},
       {"boat", "sea", "voyage", "ocean", "yacht", "sailor"}},
      {"music",
       {"chord", "melody", "tempo", "rhythm", "guitar", "piano", "harmony", "octave", "tuning", "concert"},
       {"song", "band", "listen", "musician", "tune", "playlist"}},
      {"gardening",
       {"compost", "seedling", "mulch", "pruning", "soil", "trowel", "perennial", "greenhouse", "watering", "fertilizer"},
       {"garden", "plants", "flowers", "yard", "grow", "backyard"}},
      {"medicine",
       {"diagnosis", "symptom", "dosage", "vaccine", "clinic", "therapy", "prescription", "infection", "physician",
        "antibiotic"},
       {"doctor", "health", "sick", "illness", "hospital", "treatment"}},
      {"finance",
       {"dividend", "portfolio", "equity", "bond", "inflation", "interest", "mortgage", "ledger", "audit", "budget"},
       {"money", "investing", "savings", "bank", "wealth", "finance"}},
      {"football",
       {"goalkeeper", "midfielder", "penalty", "striker", "offside", "tackle", "stadium", "league", "referee", "corner"},
       {"soccer", "match", "team", "goal", "player", "sport"}},
  }};
  return bank;
}

constexpr std::array<const char*, 8> kDocFillers{"the", "a", "of", "and", "with", "in", "for", "about"};
constexpr std::array<const char*, 6> kQueryFillers{"what", "how", "about", "best", "the", "tips"};

template <std::size_t N>
std::string draw(const std::array<const char*, N>& bank, Rng& rng) {
  return bank[rng.index(N)];
}

std::string numbered(char prefix, std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%c%03zu", prefix, i);
  return buf;
}

const Topic& topic_at(std::size_t t) {
  if (t >= ToyWorld::kTopics) throw std::out_of_range("toy topic index out of range");
  return topics()[t];
}

}  // namespace

const std::string& ToyWorld::topic_name(std::size_t topic) const { return topic_at(topic).name; }

std::string ToyWorld::doc_text(std::size_t topic, Rng& rng) const {
  const Topic& t = topic_at(topic);
  std::vector<std::string> words;
  for (int i = 0; i < 6; ++i) words.push_back(draw(t.doc_words, rng));
  for (int i = 0; i < 2; ++i) words.push_back(draw(kDocFillers, rng));
  rng.shuffle(words);
  std::string out;
  for (const auto& w : words) out += (out.empty() ? "" : " ") + w;
  return out;
}

std::string ToyWorld::query_text(std::size_t topic, Rng& rng) const {
  const Topic& t = topic_at(topic);
  std::vector<std::string> words;
  for (int i = 0; i < 3; ++i) words.push_back(draw(t.query_words, rng));
  words.push_back(draw(kQueryFillers, rng));
  rng.shuffle(words);
  std::string out;
  for (const auto& w : words) out += (out.empty() ? "" : " ") + w;
  return out;
}

std::vector<std::string> ToyWorld::pretraining_corpus(std::size_t n, Rng& rng) const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t t = rng.index(kTopics);
    out.push_back(rng.bernoulli(0.5) ? doc_text(t, rng) : query_text(t, rng) + " " + doc_text(t, rng));
  }
  return out;
}

std::vector<PairRecord> ToyWorld::pairs(std::size_t n, Rng& rng, const std::string& dataset) const {
  std::vector<PairRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t t = rng.index(kTopics);
    out.push_back({query_text(t, rng), doc_text(t, rng), dataset});
  }
  return out;
}

RetrievalSet ToyWorld::retrieval_set(std::size_t docs_per_topic, std::size_t queries_per_topic, Rng& rng) const {
  RetrievalSet set;
  set.name = "toy-topics";
  std::vector<std::vector<std::string>> docs_of(kTopics);
  std::size_t d = 0;
  for (std::size_t t = 0; t < kTopics; ++t) {
    for (std::size_t i = 0; i < docs_per_topic; ++i, ++d) {
      set.corpus.push_back({numbered('d', d), doc_text(t, rng)});
      docs_of[t].push_back(set.corpus.back().id);
    }
  }
  std::size_t q = 0;
  for (std::size_t t = 0; t < kTopics; ++t) {
    for (std::size_t i = 0; i < queries_per_topic; ++i, ++q) {
      set.queries.push_back({numbered('q', q), query_text(t, rng)});
      for (const auto& did : docs_of[t]) set.qrels[set.queries.back().id][did] = 1.0;
    }
  }
  return set;
}

std::vector<LabeledRecord> ToyWorld::labeled(std::size_t per_topic, Rng& rng, const std::string& dataset) const {
  std::vector<LabeledRecord> out;
  for (std::size_t t = 0; t < kTopics; ++t) {
    for (std::size_t i = 0; i < per_topic; ++i) out.push_back({doc_text(t, rng), topic_name(t), dataset});
  }
  rng.shuffle(out);
  return out;
}

std::vector<ScoredPairRecord> ToyWorld::scored(std::size_t n, Rng& rng, const std::string& dataset) const {
  std::vector<ScoredPairRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t a = rng.index(kTopics);
    const bool same = rng.bernoulli(0.5);
    std::size_t b = a;
    if (!same) {
      while (b == a) b = rng.index(kTopics);
    }
    const double score = same ? 4.0 + static_cast<double>(rng.index(2)) : static_cast<double>(rng.index(2));
    out.push_back({doc_text(a, rng), doc_text(b, rng), score, 5.0, dataset});
  }
  return out;
}

std::vector<QualityThread> ToyWorld::threads(std::size_t n, Rng& rng) const {
  std::vector<QualityThread> out;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t t = rng.index(kTopics);
    QualityThread thread;
    thread.query = query_text(t, rng);
    thread.answers.push_back({doc_text(t, rng), 0.8 + 0.2 * rng.uniform()});
    thread.answers.push_back({doc_text(t, rng), 0.6 + 0.1 * rng.uniform()});
    const std::size_t low = 1 + rng.index(3);
    for (std::size_t k = 0; k < low; ++k) {
      const std::string w = draw(topic_at(t).query_words, rng);
      thread.answers.push_back({w + " " + w + " " + w, 0.1 + 0.3 * rng.uniform()});
    }
    rng.shuffle(thread.answers);
    out.push_back(std::move(thread));
  }
  return out;
}

}  // namespace taskemb
