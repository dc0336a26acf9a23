#include "tabprov/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include <fmt/format.h>

#include "tabprov/errors.hpp"

namespace tabprov {

TokenizerKind parse_tokenizer_kind(std::string_view name) {
  if (name == "heuristic") return TokenizerKind::heuristic;
  if (name == "vocabulary" || name == "external-vocabulary") return TokenizerKind::vocabulary;
  throw ConfigError(fmt::format("unknown tokenizer kind '{}'", name));
}

const char* to_string(TokenizerKind kind) noexcept {
  return kind == TokenizerKind::heuristic ? "heuristic" : "vocabulary";
}

TokenBudget::TokenBudget(std::size_t limit) : limit_(limit) {
  if (limit == 0) throw ConfigError("token budget must be at least 1");
}

namespace {

bool is_ascii_space(unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }
bool is_ascii_punct(unsigned char c) { return c < 0x80 && c > 0x20 && c != 0x7F && !std::isalnum(c); }
bool is_continuation(unsigned char c) { return (c & 0xC0) == 0x80; }

std::size_t utf8_length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xE) return 3;
  if ((lead >> 3) == 0x1E) return 4;
  return 1;
}

template <typename OnWord>
std::size_t for_each_piece(std::string_view text, OnWord&& on_word) {
  std::size_t total = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (is_ascii_space(c) || c < 0x20 || c == 0x7F) {
      ++i;
    } else if (is_ascii_punct(c)) {
      ++total;
      ++i;
    } else {
      const std::size_t start = i;
      while (i < text.size()) {
        const auto d = static_cast<unsigned char>(text[i]);
        if (is_ascii_space(d) || d < 0x20 || d == 0x7F || is_ascii_punct(d)) break;
        ++i;
      }
      total += on_word(text.substr(start, i - start));
    }
  }
  return total;
}

}  // namespace

Tokenizer::Tokenizer(TokenizerSpec spec) : spec_(std::move(spec)) {
  if (spec_.kind == TokenizerKind::heuristic) {
    if (spec_.chars_per_token == 0) throw ConfigError("tokenizer divisor must be positive");
    return;
  }
  if (spec_.vocab_path.empty()) throw ConfigError("vocabulary tokenizer requires tokenizer.vocab_path");
  std::ifstream in(spec_.vocab_path);
  if (!in) throw IngestionError(fmt::format("cannot open vocabulary '{}'", spec_.vocab_path));
  auto vocab = std::make_shared<Vocabulary>();
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    vocab->max_bytes = std::max(vocab->max_bytes, line.size());
    vocab->tokens.insert(std::move(line));
  }
  vocab_ = std::move(vocab);
}

Tokenizer Tokenizer::heuristic(std::size_t chars_per_token) {
  return Tokenizer(TokenizerSpec{TokenizerKind::heuristic, chars_per_token, {}});
}

Tokenizer Tokenizer::with_vocabulary(std::vector<std::string> tokens) {
  Tokenizer t;
  t.spec_.kind = TokenizerKind::vocabulary;
  auto vocab = std::make_shared<Vocabulary>();
  for (auto& tok : tokens) {
    if (tok.empty()) continue;
    vocab->max_bytes = std::max(vocab->max_bytes, tok.size());
    vocab->tokens.insert(std::move(tok));
  }
  t.vocab_ = std::move(vocab);
  return t;
}

std::size_t Tokenizer::count_word(std::string_view word) const {
  if (spec_.kind == TokenizerKind::heuristic) {
    std::size_t code_points = 0;
    for (char ch : word) code_points += is_continuation(static_cast<unsigned char>(ch)) ? 0 : 1;
    const std::size_t d = spec_.chars_per_token;
    return std::max<std::size_t>(1, (code_points + d - 1) / d);
  }
  std::size_t segments = 0;
  std::size_t i = 0;
  while (i < word.size()) {
    std::size_t matched = 0;
    const std::size_t longest = std::min(vocab_->max_bytes, word.size() - i);
    for (std::size_t len = longest; len > 0; --len) {
      if (vocab_->tokens.contains(std::string(word.substr(i, len)))) {
        matched = len;
        break;
      }
    }
    if (matched == 0) matched = std::min(utf8_length(static_cast<unsigned char>(word[i])), word.size() - i);
    i += matched;
    ++segments;
  }
  return segments;
}

std::size_t Tokenizer::count(std::string_view text) const {
  return for_each_piece(text, [this](std::string_view word) { return count_word(word); });
}

}  // namespace tabprov
