#include "tabprov/retrieval.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "tabprov/errors.hpp"

namespace tabprov {

Corpus::Corpus(std::vector<KnowledgeDoc> docs) : docs_(std::move(docs)) {
  std::set<std::string> seen;
  for (const auto& doc : docs_) {
    if (!seen.insert(doc.id).second) throw IngestionError(fmt::format("corpus has duplicate doc id '{}'", doc.id));
  }
}

Corpus Corpus::from_jsonl(std::string_view text) {
  std::vector<KnowledgeDoc> docs;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto end = std::min(text.find('\n', pos), text.size());
    const auto line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      docs.push_back({j.at("id").get<std::string>(), j.value("title", ""), j.value("body", ""),
                      j.value("source", "")});
    } catch (const nlohmann::json::exception& e) {
      throw IngestionError(fmt::format("corpus line {}: {}", line_no, e.what()));
    }
  }
  return Corpus(std::move(docs));
}

Corpus Corpus::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError(fmt::format("cannot open corpus '{}'", path));
  std::stringstream buf;
  buf << in.rdbuf();
  return from_jsonl(buf.str());
}

std::string build_doc_query(const Table& table) {
  std::string out = table.title();
  for (const auto& label : table.column_labels()) {
    if (!out.empty()) out.push_back(' ');
    out += label;
  }
  return out;
}

std::string doc_ranking_text(const KnowledgeDoc& doc) {
  std::size_t cut = std::min(doc.body.size(), kBodyHeadBytes);
  while (cut > 0 && cut < doc.body.size() && (static_cast<unsigned char>(doc.body[cut]) & 0xC0) == 0x80) --cut;
  return doc.title + " " + doc.body.substr(0, cut);
}

std::vector<ScoredDoc> retrieve_docs(std::string_view query, const Corpus& corpus, std::size_t top_k,
                                     const Embedder& embedder) {
  if (top_k == 0) throw ConfigError("retrieval needs top_k >= 1");
  if (corpus.empty()) return {};
  std::vector<std::string> texts;
  texts.reserve(corpus.size());
  for (const auto& doc : corpus.docs()) texts.push_back(doc_ranking_text(doc));
  const auto vecs = embedder.embed_batch(texts);
  const auto q = embedder.embed(query);
  std::vector<ScoredDoc> scored;
  scored.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    scored.push_back({corpus.docs()[i], cosine_similarity(vecs[i], q)});
  }
  std::sort(scored.begin(), scored.end(), [](const ScoredDoc& a, const ScoredDoc& b) {
    return a.score != b.score ? a.score > b.score : a.doc.id < b.doc.id;
  });
  if (scored.size() > top_k) scored.resize(top_k);
  return scored;
}

std::string first_sentence(std::string_view text) {
  const auto start = text.find_first_not_of(" \t\r\n");
  if (start == std::string_view::npos) return "";
  text.remove_prefix(start);
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c != '.' && c != '!' && c != '?') continue;
    if (i + 1 == text.size() || std::string_view(" \t\r\n").find(text[i + 1]) != std::string_view::npos) {
      return std::string(text.substr(0, i + 1));
    }
  }
  const auto end = text.find_last_not_of(" \t\r\n");
  return std::string(text.substr(0, end + 1));
}

std::vector<KnowledgeItem> doc_reference_items(const Table& table, const Corpus& corpus, std::size_t top_k,
                                               const Embedder& embedder, const Tokenizer& tokenizer,
                                               std::size_t first_priority) {
  std::vector<KnowledgeItem> items;
  std::size_t priority = first_priority;
  for (const auto& hit : retrieve_docs(build_doc_query(table), corpus, top_k, embedder)) {
    auto text = fmt::format("reference: {} ({}): {}", hit.doc.title, hit.doc.source, first_sentence(hit.doc.body));
    items.push_back(make_item(KnowledgeKind::doc_reference, std::move(text), priority++, tokenizer));
  }
  return items;
}

const char* to_string(SelectionReason reason) noexcept {
  switch (reason) {
    case SelectionReason::explicit_mention:
      return "explicit-mention";
    case SelectionReason::comparative:
      return "comparative";
    case SelectionReason::superlative:
      return "superlative";
    case SelectionReason::llm:
      return "llm";
  }
  return "";
}

namespace {

bool contains_run(const std::vector<std::string>& haystack, const std::vector<std::string>& needle) {
  if (needle.empty() || needle.size() > haystack.size()) return false;
  return std::search(haystack.begin(), haystack.end(), needle.begin(), needle.end()) != haystack.end();
}

template <std::size_t N>
bool has_any(const std::vector<std::string>& tokens, const std::array<std::string_view, N>& cues) {
  return std::any_of(tokens.begin(), tokens.end(), [&](const std::string& t) {
    return std::find(cues.begin(), cues.end(), t) != cues.end();
  });
}

}  // namespace

CellSelection select_cells_heuristic(const Table& table, const Query& query) {
  const std::size_t rows = table.row_count();
  const std::size_t cols = table.column_count();
  std::vector<std::optional<SelectionReason>> tag(rows * cols);
  auto mark = [&](std::size_t r, std::size_t c, SelectionReason reason) {
    auto& slot = tag[r * cols + c];
    if (!slot) slot = reason;
  };

  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      if (contains_run(query.tokens, normalize_tokens(table.cell(r, c).text()))) {
        mark(r, c, SelectionReason::explicit_mention);
      }
    }
  }

  const bool neutral = std::find(query.tokens.begin(), query.tokens.end(), kNeutralComparativeCue) != query.tokens.end();
  bool greater = has_any(query.tokens, kGreaterCues);
  bool less = has_any(query.tokens, kLessCues);
  if (neutral && !greater && !less) greater = less = true;
  if (greater || less) {
    std::vector<double> numbers;
    for (const auto& t : query.tokens) {
      const Cell probe(t);
      if (probe.is_numeric()) numbers.push_back(*probe.numeric());
    }
    if (!numbers.empty()) {
      const double lo = *std::min_element(numbers.begin(), numbers.end());
      const double hi = *std::max_element(numbers.begin(), numbers.end());
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
          const auto& cell = table.cell(r, c);
          if (!cell.is_numeric()) continue;
          const double v = *cell.numeric();
          // "greater than some query number" is "greater than the smallest".
          if ((greater && v > lo) || (less && v < hi)) mark(r, c, SelectionReason::comparative);
        }
      }
    }
  }

  const bool want_max = has_any(query.tokens, kMaxCues);
  const bool want_min = has_any(query.tokens, kMinCues);
  if (want_max || want_min) {
    for (std::size_t c = 0; c < cols; ++c) {
      double lo = std::numeric_limits<double>::infinity();
      double hi = -std::numeric_limits<double>::infinity();
      bool any = false;
      for (std::size_t r = 0; r < rows; ++r) {
        const auto& cell = table.cell(r, c);
        if (!cell.is_numeric()) continue;
        any = true;
        lo = std::min(lo, *cell.numeric());
        hi = std::max(hi, *cell.numeric());
      }
      if (!any) continue;
      for (std::size_t r = 0; r < rows; ++r) {
        const auto& cell = table.cell(r, c);
        if (!cell.is_numeric()) continue;
        const double v = *cell.numeric();
        if ((want_max && v == hi) || (want_min && v == lo)) mark(r, c, SelectionReason::superlative);
      }
    }
  }

  CellSelection selection;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      if (const auto& slot = tag[r * cols + c]) selection.cells.push_back({r, c, *slot});
    }
  }
  return selection;
}

std::string table_as_dictionary(const Table& table) {
  nlohmann::ordered_json doc = nlohmann::ordered_json::object();
  std::map<std::string, std::size_t> seen;
  for (std::size_t c = 0; c < table.column_count(); ++c) {
    std::string key = table.column_label(c);
    if (const auto n = ++seen[key]; n > 1) key += fmt::format(" ({})", n);
    auto values = nlohmann::ordered_json::array();
    for (const auto& row : table.rows()) values.push_back(row[c].text());
    doc[key] = std::move(values);
  }
  return doc.dump();
}

std::string cell_selection_prompt(const Table& table, std::span<const std::string_view> criteria) {
  std::string names;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (i) names += ", ";
    names += criteria[i];
  }
  return fmt::format(
      "You will be given a parsed table {} in python dictionary format, extract the cells that need to be "
      "explained. The extraction rule should be based on the following criteria: {}. Only return the cells name "
      "in a python List[str].",
      table_as_dictionary(table), names);
}

std::optional<std::vector<std::string>> parse_cell_name_list(std::string_view reply) {
  const auto ws = std::string_view(" \t\r\n");
  const auto first = reply.find_first_not_of(ws);
  if (first == std::string_view::npos) return std::nullopt;
  const auto last = reply.find_last_not_of(ws);
  const auto body = reply.substr(first, last - first + 1);
  if (body.size() < 2 || body.front() != '[' || body.back() != ']') return std::nullopt;

  std::vector<std::string> names;
  std::size_t i = 1;
  const std::size_t end = body.size() - 1;
  auto skip_ws = [&] {
    while (i < end && ws.find(body[i]) != std::string_view::npos) ++i;
  };
  skip_ws();
  if (i == end) return names;
  while (true) {
    skip_ws();
    if (i >= end || (body[i] != '"' && body[i] != '\'')) return std::nullopt;
    const char quote = body[i++];
    std::string name;
    bool closed = false;
    while (i < end) {
      const char c = body[i++];
      if (c == '\\' && i < end) {
        name.push_back(body[i++]);
      } else if (c == quote) {
        closed = true;
        break;
      } else {
        name.push_back(c);
      }
    }
    if (!closed) return std::nullopt;
    names.push_back(std::move(name));
    skip_ws();
    if (i == end) return names;
    if (body[i] != ',') return std::nullopt;
    ++i;
  }
}

CellSelection select_cells_llm(const Table& table, std::span<const std::string_view> criteria,
                               const LlmClient& llm) {
  const auto reply = llm.complete(cell_selection_prompt(table, criteria));
  CellSelection selection;
  const auto names = parse_cell_name_list(reply);
  if (!names) {
    selection.warnings.push_back("cell selection reply is not a quoted-string list; nothing selected");
    return selection;
  }
  std::set<std::pair<std::size_t, std::size_t>> taken;
  for (const auto& name : *names) {
    bool found = false;
    for (std::size_t r = 0; r < table.row_count() && !found; ++r) {
      for (std::size_t c = 0; c < table.column_count() && !found; ++c) {
        if (table.cell(r, c).text() != name) continue;
        found = true;
        if (taken.emplace(r, c).second) selection.cells.push_back({r, c, SelectionReason::llm});
      }
    }
    if (!found) selection.warnings.push_back(fmt::format("cell '{}' not found in the table; dropped", name));
  }
  return selection;
}

std::vector<KnowledgeItem> explain_terms(const CellSelection& selection, const Table& table, const Corpus& corpus,
                                         const Embedder& embedder, std::size_t per_term_top_k,
                                         const Tokenizer& tokenizer, std::size_t first_priority) {
  std::vector<KnowledgeItem> items;
  std::size_t priority = first_priority;
  for (const auto& sel : selection.cells) {
    const auto& term = table.cell(sel.row, sel.col).text();
    const auto term_tokens = normalize_tokens(term);
    std::optional<ScoredDoc> best;
    if (!term_tokens.empty()) {
      for (auto& hit : retrieve_docs(term, corpus, per_term_top_k, embedder)) {
        if (contains_run(normalize_tokens(hit.doc.title + " " + hit.doc.body), term_tokens)) {
          best = std::move(hit);
          break;
        }
      }
    }
    auto text = best ? fmt::format("{} — {} ({})", term, first_sentence(best->doc.body), best->doc.source)
                     : fmt::format("{} — no reference found", term);
    items.push_back(make_item(KnowledgeKind::term_explanation, std::move(text), priority++, tokenizer));
  }
  return items;
}

std::string self_prompt_request(const Table& table, std::string_view statement, SerializationFormat format) {
  if (statement.find_first_not_of(" \t\r\n") == std::string_view::npos) {
    throw ConfigError("self-prompting requires a statement");
  }
  return fmt::format("{}\n\nStatement: {}\n\n{}", serialize(table, format), statement, kSelfPromptInstruction);
}

KnowledgeItem self_prompt(const Table& table, std::string_view statement, const LlmClient& llm,
                          const Tokenizer& tokenizer, std::size_t priority, SerializationFormat format) {
  auto reply = llm.complete(self_prompt_request(table, statement, format));
  return make_item(KnowledgeKind::self_prompt, std::move(reply), priority, tokenizer);
}

}  // namespace tabprov
