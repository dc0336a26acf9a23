#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tabprov/embeddings.hpp"
#include "tabprov/table.hpp"
#include "tabprov/tokenizer.hpp"

namespace tabprov {

enum class SamplingKind { random, evenly, content_snapshot, query_based, clustering };

SamplingKind parse_sampling_kind(std::string_view name);
const char* to_string(SamplingKind kind) noexcept;

struct SamplingMethod {
  SamplingKind kind = SamplingKind::evenly;
  std::optional<std::uint64_t> seed;  // required for random; k-means++ seed for clustering
  std::size_t k = 1;                  // content snapshot rows (1 = synthetic row)
  std::size_t ngram = 1;              // content snapshot n-gram order
  std::size_t n_clusters = 3;
  std::size_t per_cluster_k = 1;
  bool grounding = false;             // query-based column grounding
  std::size_t max_columns = 2;        // grounded column count

  /// Throws ConfigError when the parameters do not fit the kind.
  void validate() const;
  std::string describe() const;
};

/// Rows/columns picked out of a parent table, plus how they were chosen.
struct SubTable {
  Table table;
  std::vector<std::size_t> source_rows;  // parent row of each output row
  std::vector<std::size_t> source_cols;  // parent column of each output column
  /// Per output row, higher is better. Absent for rule-based methods.
  std::optional<std::vector<double>> scores;
  /// Output row positions from most to least preferred; truncation drops
  /// from the back.
  std::vector<std::size_t> rank_order;
  /// Content snapshot with K = 1: parent row that supplied each column of
  /// the synthetic row. source_rows then holds the row supplying the most
  /// columns (ties to the smaller index).
  std::optional<std::vector<std::size_t>> synthetic_provenance;
  SamplingMethod method;
  std::vector<std::string> warnings;
};

/// Tokens of the NL+Sep rendering of `table` restricted to the given rows.
/// Exact: equals count_tokens(serialize_nlsep(table.select(rows, all)), tokenizer).
class NlsepCost {
 public:
  NlsepCost(const Table& table, const Tokenizer& tokenizer);
  std::size_t header() const noexcept { return header_; }
  std::size_t row(std::size_t r) const { return rows_.at(r); }

 private:
  std::size_t header_;
  std::vector<std::size_t> rows_;
};

/// Dispatches on `method.kind`. `embedder` is required for query-based and
/// clustering sampling. Throws BudgetError when the header row alone does
/// not fit the budget.
SubTable sample(const Table& table, const Query& query, const SamplingMethod& method, TokenBudget budget,
                const Tokenizer& tokenizer, const Embedder* embedder);

SubTable random_sample(const Table& table, TokenBudget budget, std::uint64_t seed, const Tokenizer& tokenizer);

/// r1, rn, r2, rn-1, ... (0-based indices).
std::vector<std::size_t> evenly_order(std::size_t rows);
SubTable evenly_sample(const Table& table, TokenBudget budget, const Tokenizer& tokenizer);

/// |distinct cell n-grams shared with the query| / max(1, |distinct cell n-grams|).
/// When either side has fewer than n tokens, unigrams are used.
double ngram_overlap(std::string_view cell_text, const Query& query, std::size_t n);

SubTable content_snapshot(const Table& table, const Query& query, std::size_t k, std::size_t n,
                          TokenBudget budget, const Tokenizer& tokenizer);

SubTable query_based_sample(const Table& table, const Query& query, TokenBudget budget,
                            const Tokenizer& tokenizer, const Embedder& embedder, bool grounding,
                            std::size_t max_columns);

struct KMeansResult {
  std::vector<std::vector<double>> centroids;
  std::vector<std::size_t> assignment;  // cluster per point
  std::size_t iterations = 0;
  bool converged = false;
};

double squared_distance(std::span<const double> a, std::span<const double> b);

/// Lloyd's algorithm with k-means++ seeding. Assignment ties go to the lower
/// cluster index; an emptied cluster keeps its previous centroid.
KMeansResult kmeans(const std::vector<std::vector<double>>& points, std::size_t k, std::uint64_t seed,
                    std::size_t max_iterations = 100);

SubTable clustering_sample(const Table& table, TokenBudget budget, const Tokenizer& tokenizer,
                           const Embedder& embedder, std::size_t n_clusters, std::size_t per_cluster_k,
                           std::uint64_t seed = 0);

/// Uniform draw in [0, bound) by rejection; std distributions are
/// implementation-defined, the engine sequence is not.
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound);
/// Uniform in [0, 1) from the top 53 bits.
double uniform_unit(std::mt19937_64& rng);

}  // namespace tabprov
