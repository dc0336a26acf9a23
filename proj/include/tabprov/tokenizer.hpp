#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace tabprov {

enum class TokenizerKind { heuristic, vocabulary };

/// Throws ConfigError for anything other than "heuristic" / "vocabulary".
TokenizerKind parse_tokenizer_kind(std::string_view name);
const char* to_string(TokenizerKind kind) noexcept;

struct TokenizerSpec {
  TokenizerKind kind = TokenizerKind::heuristic;
  std::size_t chars_per_token = 4;  // heuristic divisor
  std::string vocab_path;           // vocabulary mode: one token per line
};

/// A positive token limit.
class TokenBudget {
 public:
  explicit TokenBudget(std::size_t limit);
  std::size_t limit() const noexcept { return limit_; }

 private:
  std::size_t limit_;
};

/// Deterministic token counter.
///
/// Text is split into pieces at whitespace and punctuation: every maximal
/// run of word characters (ASCII alphanumerics and any non-ASCII code point)
/// is one piece, every ASCII punctuation character is a piece of its own and
/// whitespace is dropped. In heuristic mode a word piece of `len` code points
/// costs max(1, ceil(len / chars_per_token)); in vocabulary mode it costs the
/// number of greedy longest-match segments against the vocabulary (unknown
/// code points cost one each). Punctuation pieces cost one.
///
/// Because pieces never span whitespace, the count of lines joined by '\n'
/// equals the sum of the line counts.
class Tokenizer {
 public:
  Tokenizer() : Tokenizer(TokenizerSpec{}) {}
  /// Loads the vocabulary file for vocabulary mode (IngestionError on failure).
  explicit Tokenizer(TokenizerSpec spec);

  static Tokenizer heuristic(std::size_t chars_per_token = 4);
  static Tokenizer with_vocabulary(std::vector<std::string> tokens);

  std::size_t count(std::string_view text) const;
  const TokenizerSpec& spec() const noexcept { return spec_; }

 private:
  struct Vocabulary {
    std::unordered_set<std::string> tokens;
    std::size_t max_bytes = 0;
  };

  std::size_t count_word(std::string_view word) const;

  TokenizerSpec spec_;
  std::shared_ptr<const Vocabulary> vocab_;
};

inline std::size_t count_tokens(std::string_view text, const Tokenizer& tokenizer) {
  return tokenizer.count(text);
}

}  // namespace tabprov
