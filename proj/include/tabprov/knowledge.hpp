#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "tabprov/tokenizer.hpp"

namespace tabprov {

enum class KnowledgeKind {
  dimension_measure,
  semantic_type,
  table_size,
  statistics,
  header_hierarchy,
  doc_reference,
  term_explanation,
  self_prompt,
};

inline constexpr std::array<KnowledgeKind, 5> kMetadataKinds = {
    KnowledgeKind::dimension_measure, KnowledgeKind::semantic_type, KnowledgeKind::table_size,
    KnowledgeKind::statistics, KnowledgeKind::header_hierarchy};

/// "dimension-measure", "semantic-type", "table-size", "statistics",
/// "header-hierarchy", "doc-reference", "term-explanation", "self-prompt".
KnowledgeKind parse_knowledge_kind(std::string_view name);
const char* to_string(KnowledgeKind kind) noexcept;
bool is_metadata_kind(KnowledgeKind kind) noexcept;

struct KnowledgeItem {
  KnowledgeKind kind = KnowledgeKind::table_size;
  std::string text;
  std::size_t token_cost = 0;  // tokens of `text`
  std::size_t priority = 0;    // 1 = packed first

  friend bool operator==(const KnowledgeItem&, const KnowledgeItem&) = default;
};

KnowledgeItem make_item(KnowledgeKind kind, std::string text, std::size_t priority, const Tokenizer& tokenizer);

struct AugmentationBundle {
  std::vector<KnowledgeItem> items;
  std::vector<std::string> warnings;
};

}  // namespace tabprov
