#include "tabprov/metadata.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "tabprov/errors.hpp"

namespace tabprov {

const char* to_string(FieldRole role) noexcept {
  return role == FieldRole::measure ? "measure" : "dimension";
}

namespace {

void check_column(const Table& table, std::size_t col) {
  if (col >= table.column_count()) {
    throw IndexError(fmt::format("column {} out of range ({} columns)", col, table.column_count()));
  }
}

std::vector<Cell> column_cells(const Table& table, std::size_t col) {
  check_column(table, col);
  std::vector<Cell> out;
  out.reserve(table.row_count());
  for (const auto& row : table.rows()) out.push_back(row[col]);
  return out;
}

const std::regex& identifier_header() {
  static const std::regex re("(^|[^a-z])(year|id|code|rank)s?([^a-z]|$)", std::regex::ECMAScript | std::regex::icase);
  return re;
}

}  // namespace

bool is_identifier_like(const Table& table, std::size_t col) {
  check_column(table, col);
  if (std::regex_search(table.column_label(col), identifier_header())) return true;
  std::vector<double> values;
  for (const auto& row : table.rows()) {
    const auto& cell = row[col];
    if (!cell.is_numeric()) continue;
    if (cell.type() != CellType::integer) return false;
    const double v = *cell.numeric();
    if (v < 1000 || v > 2100) return false;
    values.push_back(v);
  }
  if (values.empty()) return false;
  const std::set<double> distinct(values.begin(), values.end());
  return static_cast<double>(distinct.size()) / static_cast<double>(values.size()) > 0.9;
}

ColumnRole classify_dimension_measure(const Table& table, std::size_t col) {
  check_column(table, col);
  std::size_t filled = 0;
  std::size_t numeric = 0;
  for (const auto& row : table.rows()) {
    if (row[col].is_empty()) continue;
    ++filled;
    if (row[col].is_numeric()) ++numeric;
  }
  const double fraction = filled ? static_cast<double>(numeric) / static_cast<double>(filled) : 0.0;
  if (filled && fraction >= 0.8 && !is_identifier_like(table, col)) return {FieldRole::measure, fraction};
  return {FieldRole::dimension, 1.0 - fraction};
}

// ---- taxonomy ----

bool TaxonomyRule::has_cell_predicate() const noexcept {
  return cell_pattern || numeric || integer_only || min_value || max_value;
}

Taxonomy::Taxonomy(std::vector<TaxonomyEntry> entries) : entries_(std::move(entries)) {
  if (entries_.empty()) throw ConfigError("taxonomy has no entries");
  std::stable_sort(entries_.begin(), entries_.end(),
                   [](const TaxonomyEntry& a, const TaxonomyEntry& b) { return a.priority < b.priority; });
  const int last = entries_.back().priority;
  for (auto label : {kCategoryLabel, kFreeTextLabel}) {
    if (!contains(label)) entries_.push_back({std::string(label), last + 1, {}});
  }
  compile();
}

bool Taxonomy::contains(std::string_view label) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const TaxonomyEntry& e) { return e.label == label; });
}

void Taxonomy::compile() {
  compiled_.clear();
  for (const auto& entry : entries_) {
    auto& rules = compiled_.emplace_back();
    for (const auto& rule : entry.rules) {
      const auto flags = rule.icase ? std::regex::ECMAScript | std::regex::icase : std::regex::ECMAScript;
      CompiledRule c;
      try {
        if (rule.cell_pattern) c.cell.emplace(*rule.cell_pattern, flags);
        if (rule.header_pattern) c.header.emplace(*rule.header_pattern, flags);
      } catch (const std::regex_error& e) {
        throw ConfigError(fmt::format("taxonomy rule '{}' of '{}': bad regex: {}", rule.id, entry.label, e.what()));
      }
      rules.push_back(std::move(c));
    }
  }
}

std::optional<Taxonomy::Match> Taxonomy::match(const Table& table, std::size_t col) const {
  check_column(table, col);
  const auto& label = table.column_label(col);
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    Match found{entries_[i].label, {}};
    for (std::size_t j = 0; j < entries_[i].rules.size(); ++j) {
      const auto& rule = entries_[i].rules[j];
      const auto& compiled = compiled_[i][j];
      if (compiled.header && !std::regex_search(label, *compiled.header)) continue;
      if (rule.has_cell_predicate()) {
        std::size_t filled = 0;
        std::size_t hits = 0;
        for (const auto& row : table.rows()) {
          const auto& cell = row[col];
          if (cell.is_empty()) continue;
          ++filled;
          if (compiled.cell && !std::regex_search(cell.text(), *compiled.cell)) continue;
          const bool wants_number = rule.numeric || rule.integer_only || rule.min_value || rule.max_value;
          if (wants_number) {
            if (!cell.is_numeric()) continue;
            if (rule.integer_only && cell.type() != CellType::integer) continue;
            const double v = *cell.numeric();
            if (rule.min_value && v < *rule.min_value) continue;
            if (rule.max_value && v > *rule.max_value) continue;
          }
          ++hits;
        }
        if (filled == 0 || static_cast<double>(hits) < rule.min_fraction * static_cast<double>(filled)) continue;
      } else if (!compiled.header) {
        continue;  // a rule without predicates never matches
      }
      found.evidence.push_back(rule.id.empty() ? fmt::format("{}#{}", entries_[i].label, j) : rule.id);
    }
    if (!found.evidence.empty()) return found;
  }
  return std::nullopt;
}

Taxonomy Taxonomy::defaults() {
  auto cell = [](std::string id, std::string pattern) {
    TaxonomyRule r;
    r.id = std::move(id);
    r.cell_pattern = std::move(pattern);
    return r;
  };
  auto header = [](std::string id, std::string pattern) {
    TaxonomyRule r;
    r.id = std::move(id);
    r.header_pattern = std::move(pattern);
    return r;
  };
  auto header_numeric = [&](std::string id, std::string pattern) {
    auto r = header(std::move(id), std::move(pattern));
    r.numeric = true;
    return r;
  };
  TaxonomyRule year_range;
  year_range.id = "year-range";
  year_range.integer_only = true;
  year_range.min_value = 1000;
  year_range.max_value = 2100;
  year_range.min_fraction = 1.0;
  TaxonomyRule count_range;
  count_range.id = "count-nonnegative-integer";
  count_range.integer_only = true;
  count_range.min_value = 0;
  count_range.min_fraction = 1.0;

  std::vector<TaxonomyEntry> entries = {
      {"Money", 1,
       {cell("money-symbol", R"(^\s*[-+]?(\$|€|£|¥)\s?\d[\d,]*(\.\d+)?\s*[kmb]?\s*$)"),
        cell("money-code", R"(^\s*[-+]?\d[\d,]*(\.\d+)?\s?(usd|eur|gbp|jpy|cny)\s*$)"),
        header_numeric("money-header", R"((price|cost|revenue|salary|income|profit|budget|usd|dollars?|\$))")}},
      {"Ratio/Percent", 2,
       {cell("percent-sign", R"(^\s*[-+]?\d+(\.\d+)?\s?%\s*$)"),
        header_numeric("ratio-header", R"((percent|ratio|rate|share|%))")}},
      {"Year", 3, {header_numeric("year-header", R"((^|[^a-z])year)"), year_range}},
      {"Identifier", 4,
       {header("identifier-header", R"((^|[^a-z])(id|code|no\.?)([^a-z]|$))"),
        cell("identifier-code", R"(^[A-Z]{1,4}-?\d{2,}$)")}},
      {"Count", 5, {count_range}},
      {"Location", 6,
       {header("location-header",
               R"((city|country|location|place|venue|state|region|nation|province|capital|host))")}},
      {"PersonName", 7,
       {header("person-header",
               R"((player|person|author|director|athlete|winner|driver|actor|actress|candidate|coach|president))")}},
      {std::string(kCategoryLabel), 8, {}},
      {std::string(kFreeTextLabel), 9, {}},
  };
  // "identifier-code" relies on case.
  entries[3].rules[1].icase = false;
  return Taxonomy(std::move(entries));
}

Taxonomy Taxonomy::from_json(std::string_view document) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(document);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(fmt::format("taxonomy does not parse: {}", e.what()));
  }
  if (!doc.is_array()) throw ConfigError("taxonomy must be a JSON list");
  if (doc.empty()) throw ConfigError("taxonomy has no entries");
  std::vector<TaxonomyEntry> entries;
  try {
    for (std::size_t i = 0; i < doc.size(); ++i) {
      const auto& e = doc[i];
      TaxonomyEntry entry;
      entry.label = e.at("label").get<std::string>();
      entry.priority = e.value("priority", static_cast<int>(i));
      for (const auto& r : e.value("rules", nlohmann::json::array())) {
        TaxonomyRule rule;
        rule.id = r.value("id", "");
        if (r.contains("cell_regex")) rule.cell_pattern = r["cell_regex"].get<std::string>();
        if (r.contains("header_regex")) rule.header_pattern = r["header_regex"].get<std::string>();
        rule.numeric = r.value("numeric", false);
        rule.integer_only = r.value("integer_only", false);
        if (r.contains("min")) rule.min_value = r["min"].get<double>();
        if (r.contains("max")) rule.max_value = r["max"].get<double>();
        rule.min_fraction = r.value("min_fraction", 0.8);
        rule.icase = r.value("icase", true);
        entry.rules.push_back(std::move(rule));
      }
      entries.push_back(std::move(entry));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("taxonomy entry is malformed: {}", e.what()));
  }
  return Taxonomy(std::move(entries));
}

Taxonomy Taxonomy::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open taxonomy '{}'", path));
  std::stringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

SemanticFieldType infer_semantic_field_type(const Table& table, std::size_t col, const Taxonomy& taxonomy) {
  if (auto m = taxonomy.match(table, col)) return {std::move(m->label), std::move(m->evidence)};
  std::vector<std::string> texts;
  for (const auto& row : table.rows()) {
    if (!row[col].is_empty()) texts.push_back(row[col].text());
  }
  const std::set<std::string> distinct(texts.begin(), texts.end());
  const double cardinality =
      texts.empty() ? 0.0 : static_cast<double>(distinct.size()) / static_cast<double>(texts.size());
  if (cardinality < 0.5) return {std::string(kCategoryLabel), {"fallback-low-cardinality"}};
  return {std::string(kFreeTextLabel), {"fallback"}};
}

// ---- statistics ----

double benford_distance(std::span<const double, 9> digit_frequencies) {
  double sum = 0.0;
  for (int d = 1; d <= 9; ++d) sum += std::abs(digit_frequencies[d - 1] - std::log10(1.0 + 1.0 / d));
  return sum;
}

int leading_digit(double x) {
  x = std::abs(x);
  if (!(x >= 1.0) || !std::isfinite(x)) return 0;
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::scientific);
  if (res.ec != std::errc{}) return 0;
  return buf[0] - '0';
}

std::vector<std::pair<std::string_view, std::optional<double>>> StatisticsFeatureSet::entries() const {
  return {{"changeRate", change_rate},
          {"partialOrdered", partial_ordered},
          {"orderedConfidence", ordered_confidence},
          {"aggrPercentFormatted", aggr_percent_formatted},
          {"commonPrefix", common_prefix},
          {"commonSuffix", common_suffix},
          {"aggr01Ranged", aggr_01_ranged},
          {"aggr0100Ranged", aggr_0100_ranged},
          {"aggrIntegers", aggr_integers},
          {"aggrNegative", aggr_negative},
          {"variance", variance},
          {"range", range},
          {"cardinality", cardinality},
          {"spread", spread},
          {"major", major},
          {"benford", benford},
          {"skewness", skewness},
          {"kurtosis", kurtosis},
          {"gini", gini}};
}

namespace {

double modal_share(const std::map<std::string, std::size_t>& counts, std::size_t total) {
  std::size_t best = 0;
  for (const auto& [_, c] : counts) best = std::max(best, c);
  return static_cast<double>(best) / static_cast<double>(total);
}

}  // namespace

StatisticsFeatureSet compute_statistics(std::span<const Cell> cells) {
  StatisticsFeatureSet s;
  std::vector<const std::string*> texts;
  std::vector<double> xs;
  std::size_t integers = 0;
  for (const auto& cell : cells) {
    if (cell.is_empty()) continue;
    texts.push_back(&cell.text());
    if (cell.is_numeric()) {
      xs.push_back(*cell.numeric());
      if (cell.type() == CellType::integer) ++integers;
    }
  }

  const std::size_t m = texts.size();
  if (m >= 1) {
    const double md = static_cast<double>(m);
    std::map<std::string, std::size_t> values;
    std::map<std::string, std::size_t> firsts;
    std::map<std::string, std::size_t> lasts;
    std::size_t percent = 0;
    for (const auto* t : texts) {
      ++values[*t];
      ++firsts[t->substr(0, 1)];
      ++lasts[t->substr(t->size() - 1)];
      if (t->back() == '%') ++percent;
    }
    s.aggr_percent_formatted = static_cast<double>(percent) / md;
    s.common_prefix = modal_share(firsts, m);
    s.common_suffix = modal_share(lasts, m);
    s.cardinality = static_cast<double>(values.size()) / md;
    s.major = modal_share(values, m);
  }
  if (m >= 2) {
    std::size_t changes = 0;
    for (std::size_t i = 0; i + 1 < m; ++i) changes += (*texts[i] != *texts[i + 1]) ? 1 : 0;
    s.change_rate = static_cast<double>(changes) / static_cast<double>(m - 1);
  }

  const std::size_t n = xs.size();
  if (n < 2) return s;
  const double nd = static_cast<double>(n);

  std::size_t up = 0;
  std::size_t down = 0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (xs[i + 1] > xs[i]) ++up;
    if (xs[i + 1] < xs[i]) ++down;
  }
  const double pairs = static_cast<double>(n - 1);
  s.partial_ordered = std::max(static_cast<double>(up), static_cast<double>(down)) / pairs;
  const bool strictly_monotone = up == n - 1 || down == n - 1;
  s.ordered_confidence = strictly_monotone ? 1.0 : *s.partial_ordered;

  std::size_t in01 = 0;
  std::size_t in0100 = 0;
  std::size_t negative = 0;
  for (double x : xs) {
    in01 += (x >= 0.0 && x <= 1.0) ? 1 : 0;
    in0100 += (x >= 0.0 && x <= 100.0) ? 1 : 0;
    negative += x < 0.0 ? 1 : 0;
  }
  s.aggr_01_ranged = static_cast<double>(in01) / nd;
  s.aggr_0100_ranged = static_cast<double>(in0100) / nd;
  s.aggr_integers = static_cast<double>(integers) / nd;
  s.aggr_negative = static_cast<double>(negative) / nd;

  const auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
  double sum = 0.0;
  for (double x : xs) sum += x;
  // A constant column has zero spread even when sum / n rounds away from x.
  const double mean = *lo == *hi ? *lo : sum / nd;
  double m2 = 0.0;
  double m3 = 0.0;
  double m4 = 0.0;
  for (double x : xs) {
    const double d = x - mean;
    const double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  m2 /= nd;
  m3 /= nd;
  m4 /= nd;
  s.variance = std::sqrt(m2);
  if (m2 > 0.0) {
    s.skewness = m3 / (m2 * std::sqrt(m2));
    s.kurtosis = m4 / (m2 * m2) - 3.0;
  }

  s.range = *hi - *lo;
  if (*s.range > 0.0 && s.cardinality) s.spread = *s.cardinality / *s.range;

  std::array<double, 9> digits{};
  std::size_t counted = 0;
  for (double x : xs) {
    if (const int d = leading_digit(x); d > 0) {
      digits[d - 1] += 1.0;
      ++counted;
    }
  }
  if (counted > 0) {
    for (double& f : digits) f /= static_cast<double>(counted);
    s.benford = benford_distance(digits);
  }

  if (*lo >= 0.0 && sum > 0.0) {
    std::vector<double> sorted = xs;
    std::sort(sorted.begin(), sorted.end());
    double weighted = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      weighted += (2.0 * static_cast<double>(i + 1) - nd - 1.0) * sorted[i];
    }
    s.gini = weighted / (nd * sum);
  }
  return s;
}

StatisticsFeatureSet compute_statistics(const Table& table, std::size_t col) {
  const auto cells = column_cells(table, col);
  return compute_statistics(std::span<const Cell>(cells));
}

// ---- rendering ----

namespace {

std::string number(double v) { return fmt::format("{:.6g}", v); }

void outline(const HeaderNode& node, std::size_t level, std::string& out) {
  out += '\n';
  out.append(2 * level, ' ');
  out += node.label;
  for (const auto& child : node.children) outline(child, level + 1, out);
}

std::string joined(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

}  // namespace

std::string render_combined_statistics(const Table& table, std::size_t col) {
  const auto s = compute_statistics(table, col);
  std::vector<std::string> parts;
  const std::pair<const char*, std::optional<double>> chosen[] = {{"variance", s.variance},
                                                                  {"range", s.range},
                                                                  {"cardinality", s.cardinality},
                                                                  {"major", s.major},
                                                                  {"changeRate", s.change_rate}};
  for (const auto& [name, value] : chosen) {
    if (value) parts.push_back(fmt::format("{}={}", name, number(*value)));
  }
  if (parts.empty()) return fmt::format("{}: no statistics", table.column_label(col));
  return fmt::format("{}: {}", table.column_label(col), joined(parts, ", "));
}

KnowledgeItem combined_statistics(const Table& table, std::size_t col, const Tokenizer& tokenizer,
                                  std::size_t priority) {
  return make_item(KnowledgeKind::statistics, render_combined_statistics(table, col), priority, tokenizer);
}

std::string render_header_hierarchy(const Table& table) {
  const auto& headers = table.headers();
  if (headers.is_flat()) {
    return fmt::format("flat header, {} columns: {}", table.column_count(), joined(table.column_labels(), ", "));
  }
  std::string out =
      fmt::format("hierarchical header, {} levels, {} columns:", headers.depth(), table.column_count());
  for (const auto& root : headers.roots()) outline(root, 1, out);
  return out;
}

KnowledgeItem extract_header_hierarchy(const Table& table, const Tokenizer& tokenizer, std::size_t priority) {
  return make_item(KnowledgeKind::header_hierarchy, render_header_hierarchy(table), priority, tokenizer);
}

std::string render_table_size(const Table& table) {
  const auto size = table_size(table);
  return fmt::format("table has {} rows, {} columns", size.rows, size.cols);
}

AugmentationBundle render_metadata_bundle(const Table& table, std::span<const KnowledgeKind> kinds,
                                          const Tokenizer& tokenizer, const Taxonomy& taxonomy) {
  AugmentationBundle bundle;
  std::size_t priority = 0;
  for (auto kind : kinds) {
    if (!is_metadata_kind(kind)) {
      throw ConfigError(fmt::format("'{}' is not a metadata augmentation kind", to_string(kind)));
    }
    ++priority;
    std::vector<std::string> parts;
    std::string text;
    switch (kind) {
      case KnowledgeKind::dimension_measure:
        for (std::size_t c = 0; c < table.column_count(); ++c) {
          parts.push_back(fmt::format("{}={}", table.column_label(c),
                                      to_string(classify_dimension_measure(table, c).role)));
        }
        text = "dimension/measure: " + joined(parts, ", ");
        break;
      case KnowledgeKind::semantic_type:
        for (std::size_t c = 0; c < table.column_count(); ++c) {
          parts.push_back(
              fmt::format("{}={}", table.column_label(c), infer_semantic_field_type(table, c, taxonomy).label));
        }
        text = "semantic field types: " + joined(parts, ", ");
        break;
      case KnowledgeKind::table_size:
        text = render_table_size(table);
        break;
      case KnowledgeKind::statistics:
        for (std::size_t c = 0; c < table.column_count(); ++c) parts.push_back(render_combined_statistics(table, c));
        text = "statistics: " + joined(parts, "; ");
        break;
      case KnowledgeKind::header_hierarchy:
        text = render_header_hierarchy(table);
        break;
      default:
        break;
    }
    bundle.items.push_back(make_item(kind, std::move(text), priority, tokenizer));
  }
  return bundle;
}

}  // namespace tabprov
