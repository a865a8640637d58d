#pragma once

#include "taskemb/rng.hpp"

#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace taskemb {

/// ASCII case folding; bytes >= 0x80 are kept as-is.
std::string lowercase(std::string_view text);

/// Splits on ASCII and Unicode (UTF-8 encoded) whitespace.
std::vector<std::string> split_words(std::string_view text);

/// Word-level vocabulary. Ids 0..2 are PAD, UNK and MASK; they are followed by
/// the instruction words and the per-tuple id tokens, then corpus words by
/// descending frequency (ties in byte order).
class Vocab {
public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kMask = 2;
  static constexpr std::size_t kTupleIdTokens = 256;

  static Vocab build(std::span<const std::string> texts, std::size_t max_words = 4096);
  /// Restores a vocabulary from its full id-ordered word list.
  static Vocab from_words(std::vector<std::string> words);

  int id(std::string_view word) const;
  const std::string& word(int id) const;
  std::size_t size() const { return words_.size(); }
  const std::vector<std::string>& words() const { return words_; }
  /// First id that belongs to an ordinary word (random MLM replacements start here).
  int first_regular_id() const { return 3; }

  static std::string tuple_id_token(std::size_t index);

private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, int> index_;
};

/// Lowercase, whitespace split, one id per word (UNK when absent). At most
/// `max_len` ids are kept when max_len > 0.
std::vector<int> tokenize(std::string_view text, const Vocab& vocab, std::size_t max_len = 0);
std::string detokenize(std::span<const int> ids, const Vocab& vocab);

struct MaskedSequence {
  std::vector<int> corrupted;
  std::vector<std::size_t> positions;  ///< selected positions, ascending
  std::vector<int> targets;            ///< original id at each selected position
};

/// Selects each word with probability `ratio`; selected words become MASK
/// (80%), a random regular id (10%) or stay unchanged (10%). One word is one
/// token here, so whole-word masking is token masking.
MaskedSequence whole_word_mask(std::span<const int> ids, double ratio, const Vocab& vocab, Rng& rng);

enum class FilterDecision { Keep, Drop };

/// Drops a pair when at least max(ceil(0.8 n), 4) of the n words of the
/// shorter text occur (case-insensitively) as substrings of the longer text.
FilterDecision overlap_filter(std::string_view a, std::string_view b);

/// Fraction of the query's words that also occur as words of `text`.
double word_overlap(std::string_view query, std::string_view text);

}  // namespace taskemb
