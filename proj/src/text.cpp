#include "taskemb/text.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>

namespace taskemb {

namespace {

/// Length in bytes of a whitespace sequence starting at `s[i]`, or 0.
std::size_t whitespace_len(std::string_view s, std::size_t i) {
  const auto c = static_cast<unsigned char>(s[i]);
  if (c == ' ' || (c >= '\t' && c <= '\r')) return 1;
  auto byte = [&](std::size_t k) -> unsigned {
    return i + k < s.size() ? static_cast<unsigned char>(s[i + k]) : 0u;
  };
  if (c == 0xC2 && (byte(1) == 0x85 || byte(1) == 0xA0)) return 2;
  if (c == 0xE1 && byte(1) == 0x9A && byte(2) == 0x80) return 3;  // U+1680
  if (c == 0xE2 && byte(1) == 0x80) {
    const unsigned b = byte(2);
    if ((b >= 0x80 && b <= 0x8A) || b == 0xA8 || b == 0xA9 || b == 0xAF) return 3;
  }
  if (c == 0xE2 && byte(1) == 0x81 && byte(2) == 0x9F) return 3;  // U+205F
  if (c == 0xE3 && byte(1) == 0x80 && byte(2) == 0x80) return 3;  // U+3000
  return 0;
}

const std::vector<std::string>& reserved_words() {
  static const std::vector<std::string> words = [] {
    std::vector<std::string> w{"[PAD]", "[UNK]", "[MASK]", "query:", "passage:"};
    for (std::size_t i = 0; i < Vocab::kTupleIdTokens; ++i) w.push_back(Vocab::tuple_id_token(i));
    return w;
  }();
  return words;
}

}  // namespace

std::string lowercase(std::string_view text) {
  std::string out(text);
  for (char& ch : out) {
    if (ch >= 'A' && ch <= 'Z') ch = static_cast<char>(ch - 'A' + 'a');
  }
  return out;
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::string current;
  for (std::size_t i = 0; i < text.size();) {
    if (const std::size_t n = whitespace_len(text, i)) {
      if (!current.empty()) words.push_back(std::move(current));
      current.clear();
      i += n;
    } else {
      current.push_back(text[i++]);
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

std::string Vocab::tuple_id_token(std::size_t index) {
  std::string digits = std::to_string(index);
  if (digits.size() < 2) digits.insert(0, "0");
  return "t" + digits;
}

Vocab Vocab::build(std::span<const std::string> texts, std::size_t max_words) {
  std::map<std::string, std::size_t> freq;
  for (const auto& t : texts) {
    for (auto& w : split_words(lowercase(t))) ++freq[w];
  }
  const auto& reserved = reserved_words();
  const std::set<std::string> reserved_set(reserved.begin(), reserved.end());
  std::vector<std::pair<std::string, std::size_t>> ranked;
  for (auto& [w, n] : freq) {
    if (!reserved_set.count(w)) ranked.emplace_back(w, n);
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  if (ranked.size() > max_words) ranked.resize(max_words);
  std::vector<std::string> words = reserved;
  for (auto& [w, n] : ranked) words.push_back(w);
  return from_words(std::move(words));
}

Vocab Vocab::from_words(std::vector<std::string> words) {
  if (words.size() < 3 || words[kPad] != "[PAD]" || words[kUnk] != "[UNK]" || words[kMask] != "[MASK]") {
    throw std::invalid_argument("vocabulary must start with [PAD], [UNK], [MASK]");
  }
  Vocab v;
  v.words_ = std::move(words);
  for (std::size_t i = 0; i < v.words_.size(); ++i) {
    if (!v.index_.emplace(v.words_[i], static_cast<int>(i)).second) {
      throw std::invalid_argument("duplicate vocabulary entry '" + v.words_[i] + "'");
    }
  }
  return v;
}

int Vocab::id(std::string_view word) const {
  auto it = index_.find(std::string(word));
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocab::word(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= words_.size()) throw std::out_of_range("token id out of range");
  return words_[static_cast<std::size_t>(id)];
}

std::vector<int> tokenize(std::string_view text, const Vocab& vocab, std::size_t max_len) {
  std::vector<int> ids;
  for (const auto& w : split_words(lowercase(text))) {
    if (max_len > 0 && ids.size() == max_len) break;
    ids.push_back(vocab.id(w));
  }
  return ids;
}

std::string detokenize(std::span<const int> ids, const Vocab& vocab) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out.push_back(' ');
    out += vocab.word(ids[i]);
  }
  return out;
}

MaskedSequence whole_word_mask(std::span<const int> ids, double ratio, const Vocab& vocab, Rng& rng) {
  if (ratio < 0.0 || ratio > 1.0) throw std::invalid_argument("mask ratio must lie in [0, 1]");
  MaskedSequence out;
  out.corrupted.assign(ids.begin(), ids.end());
  const auto first = static_cast<std::size_t>(vocab.first_regular_id());
  const std::size_t regular = vocab.size() > first ? vocab.size() - first : 0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (!rng.bernoulli(ratio)) continue;
    out.positions.push_back(i);
    out.targets.push_back(ids[i]);
    const double u = rng.uniform();
    if (u < 0.8) {
      out.corrupted[i] = Vocab::kMask;
    } else if (u < 0.9 && regular > 0) {
      out.corrupted[i] = static_cast<int>(first + rng.index(regular));
    }
  }
  return out;
}

namespace {

bool drops_against(const std::vector<std::string>& shorter_words, std::string_view longer_text) {
  const std::string haystack = lowercase(longer_text);
  std::size_t contained = 0;
  for (const auto& w : shorter_words) {
    if (haystack.find(w) != std::string::npos) ++contained;
  }
  const auto n = static_cast<double>(shorter_words.size());
  const std::size_t threshold = std::max<std::size_t>(static_cast<std::size_t>(std::ceil(0.8 * n - 1e-9)), 4);
  return contained >= threshold;
}

}  // namespace

FilterDecision overlap_filter(std::string_view a, std::string_view b) {
  const auto wa = split_words(lowercase(a));
  const auto wb = split_words(lowercase(b));
  bool drop = false;
  if (wa.size() < wb.size()) {
    drop = drops_against(wa, b);
  } else if (wb.size() < wa.size()) {
    drop = drops_against(wb, a);
  } else {
    drop = drops_against(wa, b) || drops_against(wb, a);
  }
  return drop ? FilterDecision::Drop : FilterDecision::Keep;
}

double word_overlap(std::string_view query, std::string_view text) {
  const auto q = split_words(lowercase(query));
  if (q.empty()) return 0.0;
  const auto t = split_words(lowercase(text));
  const std::set<std::string> tset(t.begin(), t.end());
  std::size_t hits = 0;
  for (const auto& w : q) hits += tset.count(w);
  return static_cast<double>(hits) / static_cast<double>(q.size());
}

}  // namespace taskemb
