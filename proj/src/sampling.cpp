#include "tabprov/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include <fmt/format.h>

#include "tabprov/errors.hpp"
#include "tabprov/serialize.hpp"

namespace tabprov {

SamplingKind parse_sampling_kind(std::string_view name) {
  if (name == "random") return SamplingKind::random;
  if (name == "evenly") return SamplingKind::evenly;
  if (name == "content-snapshot" || name == "content_snapshot") return SamplingKind::content_snapshot;
  if (name == "query-based" || name == "query_based") return SamplingKind::query_based;
  if (name == "clustering") return SamplingKind::clustering;
  throw ConfigError(fmt::format("unknown sampling kind '{}'", name));
}

const char* to_string(SamplingKind kind) noexcept {
  switch (kind) {
    case SamplingKind::random:
      return "random";
    case SamplingKind::evenly:
      return "evenly";
    case SamplingKind::content_snapshot:
      return "content-snapshot";
    case SamplingKind::query_based:
      return "query-based";
    case SamplingKind::clustering:
      return "clustering";
  }
  return "evenly";
}

void SamplingMethod::validate() const {
  switch (kind) {
    case SamplingKind::random:
      if (!seed) throw ConfigError("random sampling requires a seed");
      break;
    case SamplingKind::content_snapshot:
      if (k < 1) throw ConfigError("content snapshot requires K >= 1");
      if (ngram < 1) throw ConfigError("n-gram order must be >= 1");
      break;
    case SamplingKind::query_based:
      if (grounding && max_columns < 1) throw ConfigError("column grounding requires max_columns >= 1");
      break;
    case SamplingKind::clustering:
      if (n_clusters < 1) throw ConfigError("clustering requires n_clusters >= 1");
      if (per_cluster_k < 1) throw ConfigError("clustering requires per-cluster K >= 1");
      break;
    case SamplingKind::evenly:
      break;
  }
}

std::string SamplingMethod::describe() const {
  switch (kind) {
    case SamplingKind::random:
      return fmt::format("random(seed={})", seed.value_or(0));
    case SamplingKind::evenly:
      return "evenly";
    case SamplingKind::content_snapshot:
      return fmt::format("content-snapshot(k={},n={})", k, ngram);
    case SamplingKind::query_based:
      return grounding ? fmt::format("query-based(grounding,l={})", max_columns) : "query-based";
    case SamplingKind::clustering:
      return fmt::format("clustering(n={},k={},seed={})", n_clusters, per_cluster_k, seed.value_or(0));
  }
  return "";
}

std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound) {
  if (bound == 0) throw ConfigError("uniform_below requires a positive bound");
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x = rng();
  while (x >= limit) x = rng();
  return x % bound;
}

double uniform_unit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

NlsepCost::NlsepCost(const Table& table, const Tokenizer& tokenizer)
    : header_(tokenizer.count(nlsep_header_line(table))) {
  rows_.reserve(table.row_count());
  for (const auto& row : table.rows()) rows_.push_back(tokenizer.count(nlsep_row_line(row)));
}

namespace {

std::vector<std::size_t> all_columns(const Table& table) {
  std::vector<std::size_t> cols(table.column_count());
  std::iota(cols.begin(), cols.end(), 0);
  return cols;
}

void require_header_fits(const NlsepCost& cost, TokenBudget budget) {
  if (cost.header() > budget.limit()) {
    throw BudgetError(fmt::format("header row needs {} tokens but the budget is {}", cost.header(), budget.limit()));
  }
}

// Longest prefix of `candidates` (in order) whose rows fit next to the header.
std::vector<std::size_t> take_until_full(const std::vector<std::size_t>& candidates, const NlsepCost& cost,
                                         TokenBudget budget) {
  std::vector<std::size_t> taken;
  std::size_t used = cost.header();
  for (auto r : candidates) {
    if (used + cost.row(r) > budget.limit()) break;
    used += cost.row(r);
    taken.push_back(r);
  }
  return taken;
}

// Builds a SubTable whose rows are `rows` (parent indices, output order).
// `preference` lists the same parent rows best-first; `scores` maps parent
// row -> score when present.
SubTable make_subtable(const Table& parent, std::vector<std::size_t> rows, std::vector<std::size_t> cols,
                       const std::vector<std::size_t>& preference, const std::vector<double>* scores,
                       const SamplingMethod& method) {
  SubTable sub;
  sub.table = parent.select(rows, cols);
  std::vector<std::size_t> position(parent.row_count(), 0);
  for (std::size_t i = 0; i < rows.size(); ++i) position[rows[i]] = i;
  for (auto r : preference) sub.rank_order.push_back(position[r]);
  if (scores) {
    std::vector<double> out;
    out.reserve(rows.size());
    for (auto r : rows) out.push_back((*scores)[r]);
    sub.scores = std::move(out);
  }
  sub.source_rows = std::move(rows);
  std::sort(cols.begin(), cols.end());
  sub.source_cols = std::move(cols);
  sub.method = method;
  return sub;
}

SubTable original_order_subtable(const Table& parent, const std::vector<std::size_t>& preference,
                                 std::vector<std::size_t> cols, const std::vector<double>* scores,
                                 const SamplingMethod& method) {
  std::vector<std::size_t> rows = preference;
  std::sort(rows.begin(), rows.end());
  return make_subtable(parent, std::move(rows), std::move(cols), preference, scores, method);
}

// Indices sorted by score descending, ties to the smaller index.
std::vector<std::size_t> rank_desc(const std::vector<double>& scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

std::vector<std::string> ngrams(const std::vector<std::string>& tokens, std::size_t n) {
  std::vector<std::string> out;
  if (tokens.size() < n) return out;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    std::string gram = tokens[i];
    for (std::size_t k = 1; k < n; ++k) {
      gram.push_back(' ');
      gram += tokens[i + k];
    }
    out.push_back(std::move(gram));
  }
  return out;
}

}  // namespace

SubTable random_sample(const Table& table, TokenBudget budget, std::uint64_t seed, const Tokenizer& tokenizer) {
  const NlsepCost cost(table, tokenizer);
  require_header_fits(cost, budget);
  std::vector<std::size_t> pool(table.row_count());
  std::iota(pool.begin(), pool.end(), 0);
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> drawn;
  std::size_t used = cost.header();
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const std::size_t j = i + uniform_below(rng, pool.size() - i);
    std::swap(pool[i], pool[j]);
    const auto r = pool[i];
    if (used + cost.row(r) > budget.limit()) break;
    used += cost.row(r);
    drawn.push_back(r);
  }
  SamplingMethod method;
  method.kind = SamplingKind::random;
  method.seed = seed;
  return original_order_subtable(table, drawn, all_columns(table), nullptr, method);
}

std::vector<std::size_t> evenly_order(std::size_t rows) {
  std::vector<std::size_t> order;
  order.reserve(rows);
  if (rows == 0) return order;
  std::size_t lo = 0;
  std::size_t hi = rows - 1;
  while (lo <= hi) {
    order.push_back(lo);
    if (hi != lo) order.push_back(hi);
    ++lo;
    if (hi == 0) break;
    --hi;
  }
  return order;
}

SubTable evenly_sample(const Table& table, TokenBudget budget, const Tokenizer& tokenizer) {
  const NlsepCost cost(table, tokenizer);
  require_header_fits(cost, budget);
  const auto taken = take_until_full(evenly_order(table.row_count()), cost, budget);
  SamplingMethod method;
  method.kind = SamplingKind::evenly;
  return original_order_subtable(table, taken, all_columns(table), nullptr, method);
}

double ngram_overlap(std::string_view cell_text, const Query& query, std::size_t n) {
  if (n < 1) throw ConfigError("n-gram order must be >= 1");
  const auto cell_tokens = normalize_tokens(cell_text);
  if (cell_tokens.size() < n || query.tokens.size() < n) n = 1;
  const auto cell_grams = ngrams(cell_tokens, n);
  const auto query_grams = ngrams(query.tokens, n);
  const std::set<std::string> cell_set(cell_grams.begin(), cell_grams.end());
  const std::set<std::string> query_set(query_grams.begin(), query_grams.end());
  std::size_t shared = 0;
  for (const auto& g : cell_set) shared += query_set.contains(g) ? 1 : 0;
  return static_cast<double>(shared) / static_cast<double>(std::max<std::size_t>(1, cell_set.size()));
}

SubTable content_snapshot(const Table& table, const Query& query, std::size_t k, std::size_t n,
                          TokenBudget budget, const Tokenizer& tokenizer) {
  if (k < 1) throw ConfigError("content snapshot requires K >= 1");
  const NlsepCost cost(table, tokenizer);
  require_header_fits(cost, budget);
  SamplingMethod method;
  method.kind = SamplingKind::content_snapshot;
  method.k = k;
  method.ngram = n;

  const std::size_t rows = table.row_count();
  const std::size_t cols = table.column_count();
  std::vector<std::vector<double>> overlap(rows, std::vector<double>(cols, 0.0));
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) overlap[r][c] = ngram_overlap(table.cell(r, c).text(), query, n);
  }

  if (k > 1) {
    std::vector<double> row_score(rows, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
      double sum = 0.0;
      for (double v : overlap[r]) sum += v;
      row_score[r] = sum / static_cast<double>(cols);
    }
    auto ranked = rank_desc(row_score);
    if (ranked.size() > k) ranked.resize(k);
    auto taken = take_until_full(ranked, cost, budget);
    std::vector<std::size_t> preference = taken;
    return make_subtable(table, std::move(taken), all_columns(table), preference, &row_score, method);
  }

  // K = 1: one synthetic row built from each column's best cell.
  SubTable sub;
  sub.method = method;
  sub.source_cols = all_columns(table);
  if (rows == 0) {
    sub.table = table.select(std::vector<std::size_t>{}, sub.source_cols);
    return sub;
  }
  std::vector<std::size_t> provenance(cols, 0);
  Row synthetic;
  double score_sum = 0.0;
  for (std::size_t c = 0; c < cols; ++c) {
    std::size_t best = 0;
    for (std::size_t r = 1; r < rows; ++r) {
      if (overlap[r][c] > overlap[best][c]) best = r;
    }
    provenance[c] = best;
    synthetic.push_back(table.cell(best, c));
    score_sum += overlap[best][c];
  }
  const std::size_t row_cost = tokenizer.count(nlsep_row_line(synthetic));
  if (cost.header() + row_cost > budget.limit()) {
    sub.table = table.select(std::vector<std::size_t>{}, sub.source_cols);
    sub.warnings.push_back("synthetic row does not fit the budget; only the header is kept");
    return sub;
  }
  std::vector<std::size_t> supplied(rows, 0);
  for (auto r : provenance) ++supplied[r];
  const auto dominant = static_cast<std::size_t>(
      std::distance(supplied.begin(), std::max_element(supplied.begin(), supplied.end())));
  sub.table = Table(table.id(), table.title(), table.headers(), std::vector<Row>{std::move(synthetic)});
  sub.source_rows = {dominant};
  sub.scores = std::vector<double>{score_sum / static_cast<double>(cols)};
  sub.rank_order = {0};
  sub.synthetic_provenance = std::move(provenance);
  return sub;
}

SubTable query_based_sample(const Table& table, const Query& query, TokenBudget budget,
                            const Tokenizer& tokenizer, const Embedder& embedder, bool grounding,
                            std::size_t max_columns) {
  SamplingMethod method;
  method.kind = SamplingKind::query_based;
  method.grounding = grounding;
  method.max_columns = max_columns;
  method.validate();

  const auto query_vec = embedder.embed(query.text);
  std::vector<std::size_t> cols = all_columns(table);
  if (grounding && max_columns < table.column_count()) {
    const auto col_vecs = embed_columns(table, embedder);
    std::vector<double> col_scores;
    col_scores.reserve(col_vecs.size());
    for (const auto& v : col_vecs) col_scores.push_back(cosine_similarity(v, query_vec));
    auto ranked = rank_desc(col_scores);
    ranked.resize(max_columns);
    std::sort(ranked.begin(), ranked.end());
    cols = std::move(ranked);
  }
  const std::vector<std::size_t> every_row = [&] {
    std::vector<std::size_t> v(table.row_count());
    std::iota(v.begin(), v.end(), 0);
    return v;
  }();
  const Table working = table.select(every_row, cols);
  const NlsepCost cost(working, tokenizer);
  require_header_fits(cost, budget);

  const auto row_vecs = embed_rows(working, embedder);
  std::vector<double> scores;
  scores.reserve(row_vecs.size());
  for (const auto& v : row_vecs) scores.push_back(cosine_similarity(v, query_vec));
  const auto taken = take_until_full(rank_desc(scores), cost, budget);
  return original_order_subtable(table, taken, std::move(cols), &scores, method);
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return sum;
}

namespace {

std::size_t nearest(const std::vector<double>& point, const std::vector<std::vector<double>>& centroids) {
  std::size_t best = 0;
  double best_d = squared_distance(point, centroids[0]);
  for (std::size_t c = 1; c < centroids.size(); ++c) {
    const double d = squared_distance(point, centroids[c]);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

}  // namespace

KMeansResult kmeans(const std::vector<std::vector<double>>& points, std::size_t k, std::uint64_t seed,
                    std::size_t max_iterations) {
  const std::size_t n = points.size();
  if (n == 0) throw ConfigError("k-means needs at least one point");
  if (k < 1 || k > n) throw ConfigError(fmt::format("k-means needs 1 <= k <= {} (got {})", n, k));
  const std::size_t dim = points[0].size();

  // k-means++ seeding.
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> chosen{static_cast<std::size_t>(uniform_below(rng, n))};
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(points[i], points[chosen[0]]);
  while (chosen.size() < k) {
    double total = 0.0;
    for (double d : d2) total += d;
    std::size_t pick = n;
    if (total > 0.0) {
      const double target = uniform_unit(rng) * total;
      double cumulative = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (d2[i] <= 0.0) continue;
        cumulative += d2[i];
        pick = i;
        if (cumulative > target) break;
      }
    } else {
      // All remaining points coincide with a centroid; take the first unused index.
      for (std::size_t i = 0; i < n && pick == n; ++i) {
        if (std::find(chosen.begin(), chosen.end(), i) == chosen.end()) pick = i;
      }
    }
    chosen.push_back(pick);
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], squared_distance(points[i], points[pick]));
  }

  KMeansResult result;
  for (auto idx : chosen) result.centroids.push_back(points[idx]);
  result.assignment.resize(n);
  for (std::size_t i = 0; i < n; ++i) result.assignment[i] = nearest(points[i], result.centroids);

  for (std::size_t iter = 1; iter <= max_iterations; ++iter) {
    result.iterations = iter;
    std::vector<std::vector<double>> sums(k, std::vector<double>(dim, 0.0));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      auto& s = sums[result.assignment[i]];
      for (std::size_t d = 0; d < dim; ++d) s[d] += points[i][d];
      ++counts[result.assignment[i]];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      for (std::size_t d = 0; d < dim; ++d) result.centroids[c][d] = sums[c][d] / static_cast<double>(counts[c]);
    }
    std::vector<std::size_t> next(n);
    for (std::size_t i = 0; i < n; ++i) next[i] = nearest(points[i], result.centroids);
    if (next == result.assignment) {
      result.converged = true;
      break;
    }
    result.assignment = std::move(next);
  }
  return result;
}

SubTable clustering_sample(const Table& table, TokenBudget budget, const Tokenizer& tokenizer,
                           const Embedder& embedder, std::size_t n_clusters, std::size_t per_cluster_k,
                           std::uint64_t seed) {
  SamplingMethod method;
  method.kind = SamplingKind::clustering;
  method.n_clusters = n_clusters;
  method.per_cluster_k = per_cluster_k;
  method.seed = seed;
  method.validate();

  const NlsepCost cost(table, tokenizer);
  require_header_fits(cost, budget);
  const std::size_t rows = table.row_count();
  if (rows == 0) return original_order_subtable(table, {}, all_columns(table), nullptr, method);

  std::vector<std::string> warnings;
  std::size_t k = n_clusters;
  if (k > rows) {
    warnings.push_back(fmt::format("n_clusters {} exceeds row count {}; clamped", k, rows));
    k = rows;
  }
  const auto vecs = embed_rows(table, embedder);
  std::vector<std::vector<double>> points;
  points.reserve(rows);
  for (const auto& v : vecs) points.push_back(v.values);
  const auto clusters = kmeans(points, k, seed);
  if (!clusters.converged) warnings.push_back("k-means stopped at the iteration limit before converging");

  std::vector<double> distance(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    distance[i] = squared_distance(points[i], clusters.centroids[clusters.assignment[i]]);
  }
  std::vector<std::size_t> selected;
  for (std::size_t c = 0; c < k; ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < rows; ++i) {
      if (clusters.assignment[i] == c) members.push_back(i);
    }
    std::stable_sort(members.begin(), members.end(),
                     [&](std::size_t a, std::size_t b) { return distance[a] < distance[b]; });
    if (members.size() > per_cluster_k) members.resize(per_cluster_k);
    selected.insert(selected.end(), members.begin(), members.end());
  }
  // Closest to their centroid first; the budget drops from the far end.
  std::sort(selected.begin(), selected.end(), [&](std::size_t a, std::size_t b) {
    return distance[a] != distance[b] ? distance[a] < distance[b] : a < b;
  });
  const auto taken = take_until_full(selected, cost, budget);

  std::vector<double> scores(rows);
  for (std::size_t i = 0; i < rows; ++i) scores[i] = -std::sqrt(distance[i]);
  auto sub = original_order_subtable(table, taken, all_columns(table), &scores, method);
  sub.warnings = std::move(warnings);
  return sub;
}

SubTable sample(const Table& table, const Query& query, const SamplingMethod& method, TokenBudget budget,
                const Tokenizer& tokenizer, const Embedder* embedder) {
  method.validate();
  auto need_embedder = [&]() -> const Embedder& {
    if (!embedder) throw ConfigError(fmt::format("{} sampling requires an embedder", to_string(method.kind)));
    return *embedder;
  };
  SubTable sub;
  switch (method.kind) {
    case SamplingKind::random:
      sub = random_sample(table, budget, *method.seed, tokenizer);
      break;
    case SamplingKind::evenly:
      sub = evenly_sample(table, budget, tokenizer);
      break;
    case SamplingKind::content_snapshot:
      sub = content_snapshot(table, query, method.k, method.ngram, budget, tokenizer);
      break;
    case SamplingKind::query_based:
      sub = query_based_sample(table, query, budget, tokenizer, need_embedder(), method.grounding,
                               method.max_columns);
      break;
    case SamplingKind::clustering:
      sub = clustering_sample(table, budget, tokenizer, need_embedder(), method.n_clusters, method.per_cluster_k,
                              method.seed.value_or(0));
      break;
  }
  auto warnings = std::move(sub.warnings);
  sub.method = method;
  sub.warnings = std::move(warnings);
  return sub;
}

}  // namespace tabprov
