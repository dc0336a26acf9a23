#pragma once

#include <cstddef>
#include <optional>
#include <regex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tabprov/knowledge.hpp"
#include "tabprov/table.hpp"
#include "tabprov/tokenizer.hpp"

namespace tabprov {

enum class FieldRole { dimension, measure };

const char* to_string(FieldRole role) noexcept;

struct ColumnRole {
  FieldRole role = FieldRole::dimension;
  double confidence = 0.0;
};

/// Years and identifiers: every numeric cell a 4-digit integer in
/// [1000, 2100] with cardinality above 0.9, or a header containing a word
/// starting with year, id, code or rank.
bool is_identifier_like(const Table& table, std::size_t col);

/// Measure iff at least 80% of the non-empty cells are numeric and the
/// column is not identifier-like. An all-empty column is a dimension.
ColumnRole classify_dimension_measure(const Table& table, std::size_t col);

/// One predicate set. All present predicates must hold for a rule to match:
/// header_regex against the column label, and the cell predicates
/// (cell_regex, numeric, integer_only, min/max) on at least `min_fraction`
/// of the non-empty cells.
struct TaxonomyRule {
  std::string id;
  std::optional<std::string> cell_pattern;
  std::optional<std::string> header_pattern;
  bool numeric = false;
  bool integer_only = false;
  std::optional<double> min_value;
  std::optional<double> max_value;
  double min_fraction = 0.8;
  bool icase = true;

  bool has_cell_predicate() const noexcept;
};

struct TaxonomyEntry {
  std::string label;
  int priority = 0;
  std::vector<TaxonomyRule> rules;  // any rule may match
};

inline constexpr std::string_view kCategoryLabel = "Category";
inline constexpr std::string_view kFreeTextLabel = "FreeText";

/// Ordered label set. Entries are tried by ascending priority (document
/// order breaks ties). Category and FreeText are always members: they are
/// the fallbacks when no rule matches.
class Taxonomy {
 public:
  static Taxonomy defaults();
  /// JSON list of {label, priority?, rules: [{id?, cell_regex?, header_regex?,
  /// numeric?, integer_only?, min?, max?, min_fraction?, icase?}]}.
  static Taxonomy from_json(std::string_view document);
  static Taxonomy from_file(const std::string& path);

  explicit Taxonomy(std::vector<TaxonomyEntry> entries);

  const std::vector<TaxonomyEntry>& entries() const noexcept { return entries_; }
  bool contains(std::string_view label) const;

  struct Match {
    std::string label;
    std::vector<std::string> evidence;
  };
  std::optional<Match> match(const Table& table, std::size_t col) const;

 private:
  // compiled_[i][j] belongs to entries_[i].rules[j].
  struct CompiledRule {
    std::optional<std::regex> cell;
    std::optional<std::regex> header;
  };

  void compile();

  std::vector<TaxonomyEntry> entries_;
  std::vector<std::vector<CompiledRule>> compiled_;
};

struct SemanticFieldType {
  std::string label;
  std::vector<std::string> evidence;  // ids of the matched rules
};

SemanticFieldType infer_semantic_field_type(const Table& table, std::size_t col, const Taxonomy& taxonomy);

/// Per-column profile. Absent means undefined for the column, never NaN.
struct StatisticsFeatureSet {
  std::optional<double> change_rate;
  std::optional<double> partial_ordered;
  std::optional<double> ordered_confidence;
  std::optional<double> aggr_percent_formatted;
  std::optional<double> common_prefix;
  std::optional<double> common_suffix;
  std::optional<double> aggr_01_ranged;
  std::optional<double> aggr_0100_ranged;
  std::optional<double> aggr_integers;
  std::optional<double> aggr_negative;
  std::optional<double> variance;  // population standard deviation
  std::optional<double> range;
  std::optional<double> cardinality;
  std::optional<double> spread;
  std::optional<double> major;
  std::optional<double> benford;
  std::optional<double> skewness;
  std::optional<double> kurtosis;  // excess
  std::optional<double> gini;

  /// (name, value) in a fixed order, names as rendered.
  std::vector<std::pair<std::string_view, std::optional<double>>> entries() const;
};

/// Sum over d = 1..9 of |p[d-1] - log10(1 + 1/d)|.
double benford_distance(std::span<const double, 9> digit_frequencies);

/// Leading decimal digit of |x| for |x| >= 1; 0 otherwise.
int leading_digit(double x);

/// Statistics over one column. Text features use the non-empty cell texts
/// (m of them), numeric features the integer/real cells (n of them) and
/// are absent when n < 2.
StatisticsFeatureSet compute_statistics(const Table& table, std::size_t col);
/// Same, over a bare list of cell texts.
StatisticsFeatureSet compute_statistics(std::span<const Cell> cells);

/// "<label>: variance=.., range=.., cardinality=.., major=.., changeRate=.."
/// with absent features omitted.
std::string render_combined_statistics(const Table& table, std::size_t col);
KnowledgeItem combined_statistics(const Table& table, std::size_t col, const Tokenizer& tokenizer,
                                  std::size_t priority = 1);

/// "flat header, k columns: a, b, c" or an indented outline of the tree.
std::string render_header_hierarchy(const Table& table);
KnowledgeItem extract_header_hierarchy(const Table& table, const Tokenizer& tokenizer, std::size_t priority = 1);

/// "table has R rows, C columns".
std::string render_table_size(const Table& table);

/// One item per requested kind, priorities 1.. in request order. Throws
/// ConfigError for kinds that are not metadata kinds.
AugmentationBundle render_metadata_bundle(const Table& table, std::span<const KnowledgeKind> kinds,
                                          const Tokenizer& tokenizer, const Taxonomy& taxonomy);

}  // namespace tabprov
