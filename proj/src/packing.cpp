#include "tabprov/packing.hpp"

#include <algorithm>
#include <charconv>
#include <numeric>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "tabprov/errors.hpp"

namespace tabprov {

AllocationRatio::AllocationRatio(std::size_t table, std::size_t aug) : table_share(table), aug_share(aug) {
  if (table == 0 && aug == 0) throw ConfigError("allocation ratio 0:0 has no shares");
}

AllocationRatio AllocationRatio::parse(std::string_view text) {
  const auto colon = text.find(':');
  auto number = [&](std::string_view part) {
    std::size_t v = 0;
    const auto res = std::from_chars(part.data(), part.data() + part.size(), v);
    if (part.empty() || res.ec != std::errc{} || res.ptr != part.data() + part.size()) {
      throw ConfigError(fmt::format("ratio '{}' is not of the form t:a", text));
    }
    return v;
  };
  if (colon == std::string_view::npos) throw ConfigError(fmt::format("ratio '{}' is not of the form t:a", text));
  return AllocationRatio(number(text.substr(0, colon)), number(text.substr(colon + 1)));
}

std::string AllocationRatio::str() const { return fmt::format("{}:{}", table_share, aug_share); }

Allocation allocate_tokens(std::size_t budget, AllocationRatio ratio) {
  if (budget == 0) throw ConfigError("budget must be at least 1");
  const std::size_t total = ratio.table_share + ratio.aug_share;
  const std::size_t table = (budget / total) * ratio.table_share + (budget % total) * ratio.table_share / total;
  return {table, budget - table};
}

std::size_t serialized_tokens(const Table& table, SerializationFormat format, const Tokenizer& tokenizer) {
  return tokenizer.count(serialize(table, format));
}

namespace {

// Sub-table restricted to the output positions in `keep` (ascending).
SubTable restrict_rows(const SubTable& sub, const std::vector<std::size_t>& keep) {
  SubTable out;
  std::vector<std::size_t> all_cols(sub.table.column_count());
  std::iota(all_cols.begin(), all_cols.end(), 0);
  out.table = sub.table.select(keep, all_cols);
  std::vector<std::size_t> new_pos(sub.table.row_count(), static_cast<std::size_t>(-1));
  for (std::size_t i = 0; i < keep.size(); ++i) new_pos[keep[i]] = i;
  for (auto p : keep) {
    if (p < sub.source_rows.size()) out.source_rows.push_back(sub.source_rows[p]);
  }
  if (sub.scores) {
    std::vector<double> scores;
    for (auto p : keep) scores.push_back((*sub.scores)[p]);
    out.scores = std::move(scores);
  }
  for (auto p : sub.rank_order) {
    if (p < new_pos.size() && new_pos[p] != static_cast<std::size_t>(-1)) out.rank_order.push_back(new_pos[p]);
  }
  if (!keep.empty()) out.synthetic_provenance = sub.synthetic_provenance;
  out.source_cols = sub.source_cols;
  out.method = sub.method;
  out.warnings = sub.warnings;
  return out;
}

std::vector<std::size_t> preference_order(const SubTable& sub) {
  const std::size_t n = sub.table.row_count();
  std::vector<std::size_t> order;
  std::vector<bool> seen(n, false);
  for (auto p : sub.rank_order) {
    if (p < n && !seen[p]) {
      seen[p] = true;
      order.push_back(p);
    }
  }
  // Rows missing from the ranking rank last, in row order.
  for (std::size_t p = 0; p < n; ++p) {
    if (!seen[p]) order.push_back(p);
  }
  return order;
}

std::vector<std::size_t> sorted_prefix(const std::vector<std::size_t>& order, std::size_t len) {
  std::vector<std::size_t> keep(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(len));
  std::sort(keep.begin(), keep.end());
  return keep;
}

}  // namespace

Truncation truncate_rows_to_budget(const SubTable& sub, TokenBudget budget, const Tokenizer& tokenizer,
                                   SerializationFormat format) {
  const auto order = preference_order(sub);
  auto cost_of = [&](std::size_t len) {
    return serialized_tokens(restrict_rows(sub, sorted_prefix(order, len)).table, format, tokenizer);
  };
  const std::size_t header = cost_of(0);
  if (header > budget.limit()) {
    throw BudgetError(fmt::format("{} header needs {} tokens but the budget is {}", to_string(format), header,
                                  budget.limit()));
  }
  std::size_t len = order.size();
  if (cost_of(len) > budget.limit()) {
    // Largest fitting prefix, assuming cost grows with the prefix...
    std::size_t lo = 0;
    std::size_t hi = order.size();
    while (hi - lo > 1) {
      const std::size_t mid = lo + (hi - lo) / 2;
      (cost_of(mid) <= budget.limit() ? lo : hi) = mid;
    }
    len = lo;
    // ...and stepping back if a tokenizer breaks that assumption.
    while (len > 0 && cost_of(len) > budget.limit()) --len;
  }
  Truncation out;
  out.sub = restrict_rows(sub, sorted_prefix(order, len));
  for (std::size_t i = order.size(); i > len; --i) {
    const auto p = order[i - 1];
    out.dropped_rows.push_back(p < sub.source_rows.size() ? sub.source_rows[p] : p);
  }
  return out;
}

PromptLayout parse_layout(std::string_view name) {
  if (name == "augmentation-first" || name == "before") return PromptLayout::augmentation_first;
  if (name == "table-first" || name == "after") return PromptLayout::table_first;
  throw ConfigError(fmt::format("unknown prompt layout '{}'", name));
}

const char* to_string(PromptLayout layout) noexcept {
  return layout == PromptLayout::table_first ? "table-first" : "augmentation-first";
}

std::string item_line(const KnowledgeItem& item) { return fmt::format("[{}] {}", to_string(item.kind), item.text); }

namespace {

std::string join_lines(const std::vector<std::string>& lines) {
  std::string out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (i) out.push_back('\n');
    out += lines[i];
  }
  return out;
}

std::string assemble(const std::string& table_text, const std::vector<std::string>& lines, PromptLayout layout) {
  if (lines.empty()) return table_text;
  const auto aug = join_lines(lines);
  return layout == PromptLayout::augmentation_first ? aug + "\n\n" + table_text : table_text + "\n\n" + aug;
}

}  // namespace

PackedPrompt pack(const SubTable& sub, const AugmentationBundle& bundle, SerializationFormat format,
                  TokenBudget budget, AllocationRatio ratio, const Tokenizer& tokenizer, PromptLayout layout) {
  const auto alloc = allocate_tokens(budget.limit(), ratio);
  const std::size_t header = serialized_tokens(restrict_rows(sub, {}).table, format, tokenizer);
  if (header > budget.limit()) {
    throw BudgetError(fmt::format("{} header needs {} tokens but the budget is {}", to_string(format), header,
                                  budget.limit()));
  }
  PackedPrompt out;
  auto& m = out.manifest;
  m.format = format;
  m.budget = budget.limit();
  m.ratio = ratio;
  m.layout = layout;
  m.table_budget = std::max({alloc.table_budget, header, std::size_t{1}});
  m.aug_budget = budget.limit() - m.table_budget;
  if (m.table_budget != alloc.table_budget) {
    m.warnings.push_back(fmt::format("header needs {} tokens; {} borrowed from the augmentation share", header,
                                     m.table_budget - alloc.table_budget));
  }
  m.sampling_method = sub.method.describe();
  m.warnings.insert(m.warnings.end(), sub.warnings.begin(), sub.warnings.end());
  m.warnings.insert(m.warnings.end(), bundle.warnings.begin(), bundle.warnings.end());

  auto truncated = truncate_rows_to_budget(sub, TokenBudget(m.table_budget), tokenizer, format);
  out.table_text = serialize(truncated.sub.table, format);

  std::vector<const KnowledgeItem*> items;
  for (const auto& item : bundle.items) items.push_back(&item);
  std::stable_sort(items.begin(), items.end(),
                   [](const KnowledgeItem* a, const KnowledgeItem* b) { return a->priority < b->priority; });
  for (const auto* item : items) m.augmentation_kinds.push_back(item->kind);
  std::size_t used = 0;
  std::size_t next = 0;
  for (; next < items.size(); ++next) {
    auto line = item_line(*items[next]);
    const std::size_t cost = tokenizer.count(line);
    if (used + cost > m.aug_budget) break;
    used += cost;
    out.item_lines.push_back(std::move(line));
  }
  for (std::size_t i = next; i < items.size(); ++i) m.dropped_items.push_back(items[i]->kind);

  out.text = assemble(out.table_text, out.item_lines, layout);
  // Counts are additive over lines, so this only trips for exotic tokenizers.
  while (tokenizer.count(out.text) > budget.limit()) {
    if (!out.item_lines.empty()) {
      out.item_lines.pop_back();
      m.dropped_items.insert(m.dropped_items.begin(), items[out.item_lines.size()]->kind);
    } else if (truncated.sub.table.row_count() > 0) {
      const auto shrink = tokenizer.count(out.table_text) - 1;
      truncated = truncate_rows_to_budget(truncated.sub, TokenBudget(std::max<std::size_t>(1, shrink)), tokenizer,
                                          format);
      out.table_text = serialize(truncated.sub.table, format);
    } else {
      throw BudgetError("packed prompt does not fit the budget");
    }
    out.text = assemble(out.table_text, out.item_lines, layout);
  }

  std::vector<std::size_t> kept = truncated.sub.source_rows;
  std::sort(kept.begin(), kept.end());
  const auto order = preference_order(sub);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const auto parent = *it < sub.source_rows.size() ? sub.source_rows[*it] : *it;
    if (!std::binary_search(kept.begin(), kept.end(), parent)) m.dropped_rows.push_back(parent);
  }
  m.table_tokens_used = tokenizer.count(out.table_text);
  m.aug_tokens_used = tokenizer.count(join_lines(out.item_lines));
  m.rows_included = truncated.sub.table.row_count();
  m.items_included = out.item_lines.size();
  m.included_rows = truncated.sub.source_rows;
  return out;
}

std::string manifest_json(const PackManifest& m) {
  nlohmann::ordered_json j;
  j["format"] = to_string(m.format);
  j["budget"] = m.budget;
  j["ratio"] = m.ratio.str();
  j["layout"] = to_string(m.layout);
  j["table_budget"] = m.table_budget;
  j["aug_budget"] = m.aug_budget;
  j["table_tokens_used"] = m.table_tokens_used;
  j["aug_tokens_used"] = m.aug_tokens_used;
  j["rows_included"] = m.rows_included;
  j["items_included"] = m.items_included;
  j["included_rows"] = m.included_rows;
  j["dropped_rows"] = m.dropped_rows;
  auto kinds = [](const std::vector<KnowledgeKind>& v) {
    auto arr = nlohmann::ordered_json::array();
    for (auto k : v) arr.push_back(to_string(k));
    return arr;
  };
  j["dropped_items"] = kinds(m.dropped_items);
  j["sampling_method"] = m.sampling_method;
  j["augmentation_kinds"] = kinds(m.augmentation_kinds);
  j["warnings"] = m.warnings;
  return j.dump();
}

}  // namespace tabprov
