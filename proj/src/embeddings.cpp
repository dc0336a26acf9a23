#include "tabprov/embeddings.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include <fmt/format.h>

#include "tabprov/errors.hpp"

namespace tabprov {

double EmbeddingVector::norm() const {
  double sum = 0.0;
  for (double v : values) sum += v * v;
  return std::sqrt(sum);
}

bool EmbeddingVector::is_zero() const {
  for (double v : values) {
    if (v != 0.0) return false;
  }
  return true;
}

EmbedderKind parse_embedder_kind(std::string_view name) {
  if (name == "local" || name == "local-deterministic") return EmbedderKind::local;
  if (name == "remote") return EmbedderKind::remote;
  throw ConfigError(fmt::format("unknown embedder kind '{}'", name));
}

const char* to_string(EmbedderKind kind) noexcept {
  return kind == EmbedderKind::local ? "local" : "remote";
}

EmbeddingVector Embedder::embed(std::string_view text) const {
  std::string owned(text);
  return embed_batch(std::span<const std::string>(&owned, 1)).front();
}

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string normalize_for_embedding(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : ch);
  }
  return out;
}

}  // namespace

LocalEmbedder::LocalEmbedder(std::size_t dimension) : dimension_(dimension) {
  if (dimension == 0) throw ConfigError("embedding dimension must be positive");
}

EmbeddingVector LocalEmbedder::embed_one(std::string_view text) const {
  EmbeddingVector out{std::vector<double>(dimension_, 0.0)};
  const auto norm = normalize_for_embedding(text);
  if (norm.empty()) return out;
  if (norm.size() < 3) {
    out.values[fnv1a(norm) % dimension_] += 1.0;
  } else {
    for (std::size_t i = 0; i + 3 <= norm.size(); ++i) {
      out.values[fnv1a(std::string_view(norm).substr(i, 3)) % dimension_] += 1.0;
    }
  }
  const double n = out.norm();
  for (double& v : out.values) v /= n;
  return out;
}

std::vector<EmbeddingVector> LocalEmbedder::embed_batch(std::span<const std::string> texts) const {
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(embed_one(t));
  return out;
}

std::unique_ptr<Embedder> make_embedder(const EmbedderSpec& spec) {
  if (spec.kind == EmbedderKind::local) return std::make_unique<LocalEmbedder>(spec.dimension);
  return std::make_unique<RemoteEmbedder>(spec);
}

std::string flatten_row(const Table& table, std::size_t row) {
  const auto& cells = table.row(row);
  std::string out;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    if (c) out += " | ";
    out += table.column_label(c);
    out += ": ";
    out += cells[c].text();
  }
  return out;
}

std::string flatten_column(const Table& table, std::size_t col) {
  std::string out = table.column_label(col) + ":";
  for (std::size_t r = 0; r < table.row_count(); ++r) {
    out += r ? " | " : " ";
    out += table.cell(r, col).text();
  }
  return out;
}

EmbeddingVector embed_row(const Table& table, std::size_t row, const Embedder& embedder) {
  return embedder.embed(flatten_row(table, row));
}

EmbeddingVector embed_column(const Table& table, std::size_t col, const Embedder& embedder) {
  return embedder.embed(flatten_column(table, col));
}

std::vector<EmbeddingVector> embed_rows(const Table& table, const Embedder& embedder) {
  std::vector<std::string> texts;
  texts.reserve(table.row_count());
  for (std::size_t r = 0; r < table.row_count(); ++r) texts.push_back(flatten_row(table, r));
  return embedder.embed_batch(texts);
}

std::vector<EmbeddingVector> embed_columns(const Table& table, const Embedder& embedder) {
  std::vector<std::string> texts;
  texts.reserve(table.column_count());
  for (std::size_t c = 0; c < table.column_count(); ++c) texts.push_back(flatten_column(table, c));
  return embedder.embed_batch(texts);
}

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dim() != b.dim()) {
    throw ConfigError(fmt::format("embedding dimension mismatch: {} vs {}", a.dim(), b.dim()));
  }
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) {
    dot += a.values[i] * b.values[i];
    na += a.values[i] * a.values[i];
    nb += b.values[i] * b.values[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  const double cos = dot / (std::sqrt(na) * std::sqrt(nb));
  return std::clamp(cos, -1.0, 1.0);
}

}  // namespace tabprov
