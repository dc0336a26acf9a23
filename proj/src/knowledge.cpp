#include "tabprov/knowledge.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "tabprov/errors.hpp"

namespace tabprov {

namespace {

constexpr std::array<std::pair<KnowledgeKind, std::string_view>, 8> kNames = {{
    {KnowledgeKind::dimension_measure, "dimension-measure"},
    {KnowledgeKind::semantic_type, "semantic-type"},
    {KnowledgeKind::table_size, "table-size"},
    {KnowledgeKind::statistics, "statistics"},
    {KnowledgeKind::header_hierarchy, "header-hierarchy"},
    {KnowledgeKind::doc_reference, "doc-reference"},
    {KnowledgeKind::term_explanation, "term-explanation"},
    {KnowledgeKind::self_prompt, "self-prompt"},
}};

}  // namespace

KnowledgeKind parse_knowledge_kind(std::string_view name) {
  for (const auto& [kind, label] : kNames) {
    if (label == name) return kind;
  }
  throw ConfigError(fmt::format("unknown augmentation kind '{}'", name));
}

const char* to_string(KnowledgeKind kind) noexcept {
  for (const auto& [k, label] : kNames) {
    if (k == kind) return label.data();
  }
  return "";
}

bool is_metadata_kind(KnowledgeKind kind) noexcept {
  return std::find(kMetadataKinds.begin(), kMetadataKinds.end(), kind) != kMetadataKinds.end();
}

KnowledgeItem make_item(KnowledgeKind kind, std::string text, std::size_t priority, const Tokenizer& tokenizer) {
  KnowledgeItem item;
  item.kind = kind;
  item.token_cost = tokenizer.count(text);
  item.text = std::move(text);
  item.priority = priority;
  return item;
}

}  // namespace tabprov
