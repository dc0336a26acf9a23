#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "tabprov/knowledge.hpp"
#include "tabprov/sampling.hpp"
#include "tabprov/serialize.hpp"
#include "tabprov/tokenizer.hpp"

namespace tabprov {

/// T:A split of the token budget between table and augmentation.
struct AllocationRatio {
  std::size_t table_share = 5;
  std::size_t aug_share = 5;

  /// Throws ConfigError when both shares are zero.
  AllocationRatio(std::size_t table, std::size_t aug);
  /// "t:a", e.g. "4:6".
  static AllocationRatio parse(std::string_view text);
  std::string str() const;

  friend bool operator==(const AllocationRatio&, const AllocationRatio&) = default;
};

struct Allocation {
  std::size_t table_budget = 0;
  std::size_t aug_budget = 0;

  friend bool operator==(const Allocation&, const Allocation&) = default;
};

/// table = floor(budget * t / (t + a)), aug = budget - table.
Allocation allocate_tokens(std::size_t budget, AllocationRatio ratio);

std::size_t serialized_tokens(const Table& table, SerializationFormat format, const Tokenizer& tokenizer);

struct Truncation {
  SubTable sub;
  std::vector<std::size_t> dropped_rows;  // parent row indices, least preferred first
};

/// Keeps the longest prefix of the ranking (rank_order, or row order when
/// unranked) whose rendering fits; kept rows stay in their output order.
/// Whole rows only. Throws BudgetError when the header alone does not fit.
Truncation truncate_rows_to_budget(const SubTable& sub, TokenBudget budget, const Tokenizer& tokenizer,
                                   SerializationFormat format);

enum class PromptLayout { augmentation_first, table_first };

PromptLayout parse_layout(std::string_view name);
const char* to_string(PromptLayout layout) noexcept;

/// "[kind] text".
std::string item_line(const KnowledgeItem& item);

struct PackManifest {
  SerializationFormat format = SerializationFormat::nlsep;
  std::size_t budget = 0;
  AllocationRatio ratio{5, 5};
  PromptLayout layout = PromptLayout::augmentation_first;
  std::size_t table_budget = 0;  // after any borrowing for the header
  std::size_t aug_budget = 0;
  std::size_t table_tokens_used = 0;
  std::size_t aug_tokens_used = 0;
  std::vector<std::size_t> dropped_rows;  // parent row indices
  std::vector<KnowledgeKind> dropped_items;
  std::size_t rows_included = 0;
  std::size_t items_included = 0;
  std::vector<std::size_t> included_rows;  // parent row indices, output order
  std::string sampling_method;
  std::vector<KnowledgeKind> augmentation_kinds;
  std::vector<std::string> warnings;
};

struct PackedPrompt {
  std::string text;
  std::string table_text;                // serialized table segment
  std::vector<std::string> item_lines;   // included augmentation lines
  PackManifest manifest;

  friend bool operator==(const PackedPrompt& a, const PackedPrompt& b) { return a.text == b.text; }
};

/// Splits the budget, truncates the table to its share and adds bundle items
/// in priority order until the next one would overflow the augmentation
/// share. When the header alone needs more than the table share, the
/// difference is taken from the augmentation share. Layout: item lines,
/// blank line, table (or the reverse); with no items the prompt is the table.
PackedPrompt pack(const SubTable& sub, const AugmentationBundle& bundle, SerializationFormat format,
                  TokenBudget budget, AllocationRatio ratio, const Tokenizer& tokenizer,
                  PromptLayout layout = PromptLayout::augmentation_first);

/// Manifest as a JSON object.
std::string manifest_json(const PackManifest& manifest);

}  // namespace tabprov
