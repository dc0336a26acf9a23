#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "tabprov/table.hpp"

namespace tabprov {

inline constexpr std::size_t kDefaultEmbeddingDim = 256;

/// Unit vector, or the zero vector for blank text.
struct EmbeddingVector {
  std::vector<double> values;

  std::size_t dim() const noexcept { return values.size(); }
  double norm() const;
  bool is_zero() const;

  friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;
};

enum class EmbedderKind { local, remote };

EmbedderKind parse_embedder_kind(std::string_view name);
const char* to_string(EmbedderKind kind) noexcept;

struct EmbedderSpec {
  EmbedderKind kind = EmbedderKind::local;
  std::size_t dimension = kDefaultEmbeddingDim;
  // Remote only.
  std::string endpoint;  // e.g. http://127.0.0.1:8080/v1/embeddings
  std::string model;
  std::string api_key_env = "TABPROV_API_KEY";
  int max_retries = 3;
  std::chrono::milliseconds backoff{200};
};

class Embedder {
 public:
  virtual ~Embedder() = default;

  /// One vector per input, in order.
  virtual std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) const = 0;
  virtual std::size_t dimension() const noexcept = 0;

  EmbeddingVector embed(std::string_view text) const;
};

/// Hashed bag of character trigrams over lowercased, whitespace-collapsed
/// text, term-frequency weighted and L2-normalised. Text shorter than three
/// bytes contributes itself as a single gram.
class LocalEmbedder final : public Embedder {
 public:
  explicit LocalEmbedder(std::size_t dimension = kDefaultEmbeddingDim);

  std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) const override;
  std::size_t dimension() const noexcept override { return dimension_; }

  EmbeddingVector embed_one(std::string_view text) const;

 private:
  std::size_t dimension_;
};

/// HTTP client for `{"model", "input": [..]}` -> `{"data": [{"embedding": [..]}]}`.
/// Batches of at most 64 texts per POST, exponential backoff on failure,
/// results cached by (model, text) digest.
class RemoteEmbedder final : public Embedder {
 public:
  explicit RemoteEmbedder(EmbedderSpec spec);

  std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) const override;
  std::size_t dimension() const noexcept override { return spec_.dimension; }

  /// Number of HTTP requests issued so far (including retries).
  std::size_t request_count() const;

 private:
  std::vector<EmbeddingVector> fetch(std::span<const std::string> texts) const;

  EmbedderSpec spec_;
  mutable std::mutex mutex_;
  mutable std::unordered_map<std::string, EmbeddingVector> cache_;
  mutable std::size_t requests_ = 0;
};

std::unique_ptr<Embedder> make_embedder(const EmbedderSpec& spec);

inline EmbeddingVector embed_text(std::string_view text, const Embedder& embedder) {
  return embedder.embed(text);
}

/// "h1: v1 | h2: v2 | ..." over leaf header labels.
std::string flatten_row(const Table& table, std::size_t row);
/// "h: v1 | v2 | ...".
std::string flatten_column(const Table& table, std::size_t col);

EmbeddingVector embed_row(const Table& table, std::size_t row, const Embedder& embedder);
EmbeddingVector embed_column(const Table& table, std::size_t col, const Embedder& embedder);

/// Embeddings for every row (resp. column), fetched as one batch.
std::vector<EmbeddingVector> embed_rows(const Table& table, const Embedder& embedder);
std::vector<EmbeddingVector> embed_columns(const Table& table, const Embedder& embedder);

/// Cosine in [-1, 1]; 0 when either side is the zero vector. Throws
/// ConfigError on a dimension mismatch.
double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

}  // namespace tabprov
