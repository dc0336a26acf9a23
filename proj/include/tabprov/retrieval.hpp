#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tabprov/embeddings.hpp"
#include "tabprov/knowledge.hpp"
#include "tabprov/llm.hpp"
#include "tabprov/serialize.hpp"
#include "tabprov/table.hpp"
#include "tabprov/tokenizer.hpp"

namespace tabprov {

struct KnowledgeDoc {
  std::string id;
  std::string title;
  std::string body;
  std::string source;

  friend bool operator==(const KnowledgeDoc&, const KnowledgeDoc&) = default;
};

/// Immutable document collection with unique ids.
class Corpus {
 public:
  Corpus() = default;
  /// Throws IngestionError on a duplicate id.
  explicit Corpus(std::vector<KnowledgeDoc> docs);

  /// One {"id","title","body","source"} object per line; blank lines skipped.
  static Corpus from_jsonl(std::string_view text);
  static Corpus load(const std::string& path);

  const std::vector<KnowledgeDoc>& docs() const noexcept { return docs_; }
  std::size_t size() const noexcept { return docs_.size(); }
  bool empty() const noexcept { return docs_.empty(); }

 private:
  std::vector<KnowledgeDoc> docs_;
};

/// Title, a space, then the leaf labels joined by spaces. An empty title is
/// left out.
std::string build_doc_query(const Table& table);

inline constexpr std::size_t kBodyHeadBytes = 256;

/// Text a document is ranked on: title, a space, and the first
/// kBodyHeadBytes of the body (cut back to a UTF-8 boundary).
std::string doc_ranking_text(const KnowledgeDoc& doc);

struct ScoredDoc {
  KnowledgeDoc doc;
  double score = 0.0;
};

/// Documents by descending cosine against the query, ties by ascending id;
/// at most top_k of them. Throws ConfigError when top_k is 0.
std::vector<ScoredDoc> retrieve_docs(std::string_view query, const Corpus& corpus, std::size_t top_k,
                                     const Embedder& embedder);

/// First sentence of `text`: up to and including the first '.', '!' or '?'
/// that ends the text or is followed by whitespace. Whole text otherwise.
std::string first_sentence(std::string_view text);

/// "reference: <title> (<source>): <first sentence>" for each retrieved doc.
std::vector<KnowledgeItem> doc_reference_items(const Table& table, const Corpus& corpus, std::size_t top_k,
                                               const Embedder& embedder, const Tokenizer& tokenizer,
                                               std::size_t first_priority = 1);

enum class SelectionReason { explicit_mention, comparative, superlative, llm };

const char* to_string(SelectionReason reason) noexcept;

struct SelectedCell {
  std::size_t row = 0;
  std::size_t col = 0;
  SelectionReason reason = SelectionReason::explicit_mention;

  friend bool operator==(const SelectedCell&, const SelectedCell&) = default;
};

struct CellSelection {
  std::vector<SelectedCell> cells;
  std::vector<std::string> warnings;
};

inline constexpr std::array<std::string_view, 3> kGreaterCues = {"more", "greater", "over"};
inline constexpr std::array<std::string_view, 3> kLessCues = {"less", "fewer", "under"};
/// Comparative without a direction; selects both ways.
inline constexpr std::string_view kNeutralComparativeCue = "than";
inline constexpr std::array<std::string_view, 4> kMaxCues = {"most", "highest", "maximum", "best"};
inline constexpr std::array<std::string_view, 4> kMinCues = {"least", "lowest", "minimum", "worst"};

/// Union of three rules, each cell tagged with the first rule that picks it
/// (explicit mention, then comparative, then superlative). Cells come out in
/// row-major order.
///   explicit mention: the cell's normalized tokens occur contiguously in the
///     query tokens.
///   comparative: with a greater (less) cue, numeric cells strictly greater
///     (less) than some number in the query; "than" alone means both.
///   superlative: with a max (min) cue, every cell holding its column's
///     numeric maximum (minimum).
CellSelection select_cells_heuristic(const Table& table, const Query& query);

inline constexpr std::array<std::string_view, 5> kCellCriteria = {"Cell Position", "Cell Content", "Cell Formatting",
                                                                 "Cell Context", "Cell Properties"};

/// The table as a JSON object mapping each column label to its cell texts.
/// Repeated labels get a " (2)", " (3)" ... suffix.
std::string table_as_dictionary(const Table& table);

std::string cell_selection_prompt(const Table& table, std::span<const std::string_view> criteria);

/// Accepts only a bracketed list of double- or single-quoted strings,
/// surrounded by optional whitespace.
std::optional<std::vector<std::string>> parse_cell_name_list(std::string_view reply);

/// Names resolve to the first cell (row-major) whose text equals the name.
/// Unparseable replies and unknown names become warnings.
CellSelection select_cells_llm(const Table& table, std::span<const std::string_view> criteria,
                               const LlmClient& llm);

/// "term — first sentence (source)" for the best of the top per_term_top_k
/// documents that mention the term; "term — no reference found" otherwise.
std::vector<KnowledgeItem> explain_terms(const CellSelection& selection, const Table& table, const Corpus& corpus,
                                         const Embedder& embedder, std::size_t per_term_top_k,
                                         const Tokenizer& tokenizer, std::size_t first_priority = 1);

inline constexpr std::string_view kSelfPromptInstruction =
    "Identify critical values and ranges of the last table related to the statement";

/// Serialized table, the statement, then the instruction, separated by
/// blank lines. Throws ConfigError for a blank statement.
std::string self_prompt_request(const Table& table, std::string_view statement,
                                SerializationFormat format = SerializationFormat::nlsep);

KnowledgeItem self_prompt(const Table& table, std::string_view statement, const LlmClient& llm,
                          const Tokenizer& tokenizer, std::size_t priority = 1,
                          SerializationFormat format = SerializationFormat::nlsep);

}  // namespace tabprov
