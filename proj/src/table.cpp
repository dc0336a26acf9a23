#include "tabprov/table.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "tabprov/errors.hpp"

namespace tabprov {

const char* to_string(Stage stage) noexcept {
  switch (stage) {
    case Stage::sampling:
      return "sampling";
    case Stage::augmentation:
      return "augmentation";
    case Stage::packing:
      return "packing";
  }
  return "unknown";
}

const char* to_string(CellType type) noexcept {
  switch (type) {
    case CellType::empty:
      return "empty";
    case CellType::integer:
      return "integer";
    case CellType::real:
      return "real";
    case CellType::date:
      return "date";
    case CellType::text:
      return "text";
  }
  return "text";
}

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), is_digit);
}

bool is_integer_text(std::string_view s) {
  if (!s.empty() && (s.front() == '+' || s.front() == '-')) s.remove_prefix(1);
  return all_digits(s);
}

bool is_real_text(std::string_view s) {
  if (!s.empty() && (s.front() == '+' || s.front() == '-')) s.remove_prefix(1);
  std::size_t i = 0;
  std::size_t int_digits = 0;
  while (i < s.size() && is_digit(s[i])) ++i, ++int_digits;
  std::size_t frac_digits = 0;
  if (i < s.size() && s[i] == '.') {
    ++i;
    while (i < s.size() && is_digit(s[i])) ++i, ++frac_digits;
  }
  if (int_digits + frac_digits == 0) return false;
  if (i < s.size() && (s[i] == 'e' || s[i] == 'E')) {
    ++i;
    if (i < s.size() && (s[i] == '+' || s[i] == '-')) ++i;
    std::size_t exp_digits = 0;
    while (i < s.size() && is_digit(s[i])) ++i, ++exp_digits;
    if (exp_digits == 0) return false;
  }
  return i == s.size();
}

int two_digits(std::string_view s) { return (s[0] - '0') * 10 + (s[1] - '0'); }

bool is_date_text(std::string_view s) {
  // YYYY-MM or YYYY-MM-DD; bare YYYY is claimed by the integer grammar.
  if (s.size() != 7 && s.size() != 10) return false;
  if (!all_digits(s.substr(0, 4)) || s[4] != '-' || !all_digits(s.substr(5, 2))) return false;
  const int month = two_digits(s.substr(5, 2));
  if (month < 1 || month > 12) return false;
  if (s.size() == 7) return true;
  if (s[7] != '-' || !all_digits(s.substr(8, 2))) return false;
  const int year = std::stoi(std::string(s.substr(0, 4)));
  const int day = two_digits(s.substr(8, 2));
  static constexpr int kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  int max_day = kDays[month - 1];
  const bool leap = (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
  if (month == 2 && leap) max_day = 29;
  return day >= 1 && day <= max_day;
}

}  // namespace

CellType classify_cell_text(std::string_view text) noexcept {
  const auto s = trim(text);
  if (s.empty()) return CellType::empty;
  if (is_integer_text(s)) return CellType::integer;
  if (is_real_text(s)) return CellType::real;
  if (is_date_text(s)) return CellType::date;
  return CellType::text;
}

Cell::Cell(std::string text) : text_(std::move(text)), type_(classify_cell_text(text_)) {}

std::optional<double> Cell::numeric() const {
  if (!is_numeric()) return std::nullopt;
  auto s = trim(text_);
  if (s.front() == '+') s.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec == std::errc::result_out_of_range) {
    // Saturate; the grammar already guarantees a well-formed number.
    return (s.front() == '-') ? -HUGE_VAL : HUGE_VAL;
  }
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

std::size_t HeaderNode::leaf_count() const noexcept {
  if (is_leaf()) return 1;
  std::size_t n = 0;
  for (const auto& child : children) n += child.leaf_count();
  return n;
}

std::size_t HeaderNode::depth() const noexcept {
  std::size_t d = 0;
  for (const auto& child : children) d = std::max(d, child.depth());
  return d + 1;
}

HeaderTree::HeaderTree(std::vector<HeaderNode> roots) : roots_(std::move(roots)) {}

HeaderTree HeaderTree::flat(std::vector<std::string> labels) {
  std::vector<HeaderNode> roots;
  roots.reserve(labels.size());
  for (auto& label : labels) roots.push_back(HeaderNode{std::move(label), {}});
  return HeaderTree(std::move(roots));
}

std::size_t HeaderTree::leaf_count() const noexcept {
  std::size_t n = 0;
  for (const auto& root : roots_) n += root.leaf_count();
  return n;
}

std::size_t HeaderTree::depth() const noexcept {
  std::size_t d = 0;
  for (const auto& root : roots_) d = std::max(d, root.depth());
  return d;
}

namespace {

void collect_leaves(const HeaderNode& node, std::vector<std::string>& out) {
  if (node.is_leaf()) {
    out.push_back(node.label);
    return;
  }
  for (const auto& child : node.children) collect_leaves(child, out);
}

// Returns false when the node lost all of its leaves.
bool restrict_node(const HeaderNode& node, const std::vector<bool>& keep, std::size_t& next_leaf,
                   HeaderNode& out) {
  if (node.is_leaf()) {
    const bool kept = keep[next_leaf++];
    if (kept) out = HeaderNode{node.label, {}};
    return kept;
  }
  HeaderNode copy{node.label, {}};
  for (const auto& child : node.children) {
    HeaderNode restricted;
    if (restrict_node(child, keep, next_leaf, restricted)) copy.children.push_back(std::move(restricted));
  }
  if (copy.children.empty()) return false;
  out = std::move(copy);
  return true;
}

}  // namespace

std::vector<std::string> HeaderTree::leaf_labels() const {
  std::vector<std::string> out;
  for (const auto& root : roots_) collect_leaves(root, out);
  return out;
}

HeaderTree HeaderTree::restricted(std::span<const std::size_t> leaves) const {
  const std::size_t n = leaf_count();
  std::vector<bool> keep(n, false);
  for (auto leaf : leaves) {
    if (leaf >= n) throw IndexError(fmt::format("column {} out of range ({} columns)", leaf, n));
    keep[leaf] = true;
  }
  std::vector<HeaderNode> roots;
  std::size_t next_leaf = 0;
  for (const auto& root : roots_) {
    HeaderNode restricted;
    if (restrict_node(root, keep, next_leaf, restricted)) roots.push_back(std::move(restricted));
  }
  return HeaderTree(std::move(roots));
}

Table::Table(std::string id, std::string title, HeaderTree headers, std::vector<Row> rows)
    : id_(std::move(id)),
      title_(std::move(title)),
      headers_(std::move(headers)),
      rows_(std::move(rows)),
      leaf_labels_(headers_.leaf_labels()) {
  if (leaf_labels_.empty()) throw SchemaError("table has no columns");
  for (std::size_t r = 0; r < rows_.size(); ++r) {
    if (rows_[r].size() != leaf_labels_.size()) {
      throw SchemaError(fmt::format("row {} has {} cells but the header has {} leaves", r,
                                    rows_[r].size(), leaf_labels_.size()));
    }
  }
}

const Row& Table::row(std::size_t r) const {
  if (r >= rows_.size()) throw IndexError(fmt::format("row {} out of range ({} rows)", r, rows_.size()));
  return rows_[r];
}

const Cell& Table::cell(std::size_t r, std::size_t c) const {
  const auto& cells = row(r);
  if (c >= cells.size()) throw IndexError(fmt::format("column {} out of range ({} columns)", c, cells.size()));
  return cells[c];
}

const std::string& Table::column_label(std::size_t c) const {
  if (c >= leaf_labels_.size())
    throw IndexError(fmt::format("column {} out of range ({} columns)", c, leaf_labels_.size()));
  return leaf_labels_[c];
}

Table Table::with_id(std::string id) const {
  Table copy = *this;
  copy.id_ = std::move(id);
  return copy;
}

Table Table::select(std::span<const std::size_t> rows, std::span<const std::size_t> cols) const {
  std::vector<std::size_t> sorted_cols(cols.begin(), cols.end());
  std::sort(sorted_cols.begin(), sorted_cols.end());
  sorted_cols.erase(std::unique(sorted_cols.begin(), sorted_cols.end()), sorted_cols.end());
  std::vector<Row> out;
  out.reserve(rows.size());
  for (auto r : rows) {
    const auto& src = row(r);
    Row picked;
    picked.reserve(sorted_cols.size());
    for (auto c : sorted_cols) {
      if (c >= src.size()) throw IndexError(fmt::format("column {} out of range", c));
      picked.push_back(src[c]);
    }
    out.push_back(std::move(picked));
  }
  return Table(id_, title_, headers_.restricted(sorted_cols), std::move(out));
}

TableSize table_size(const Table& table) noexcept {
  return TableSize{table.row_count(), table.column_count()};
}

std::string Digest::hex() const {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (auto b : bytes) {
    out.push_back(kHex[b >> 4]);
    out.push_back(kHex[b & 0xF]);
  }
  return out;
}

Digest sha256(std::string_view data) {
  Digest digest;
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest.bytes.data(), &len, EVP_sha256(), nullptr) != 1 ||
      len != digest.bytes.size()) {
    throw Error("SHA-256 computation failed");
  }
  return digest;
}

namespace {

// Length-prefixed fields so that no two distinct tables share an encoding.
void put_field(std::string& out, char tag, std::string_view value) {
  out.push_back(tag);
  out += std::to_string(value.size());
  out.push_back(':');
  out += value;
}

void encode_header(std::string& out, const HeaderNode& node) {
  put_field(out, 'h', node.label);
  out += std::to_string(node.children.size());
  out.push_back('(');
  for (const auto& child : node.children) encode_header(out, child);
  out.push_back(')');
}

}  // namespace

Digest content_hash(const Table& table) {
  std::string buf;
  put_field(buf, 't', table.title());
  buf += std::to_string(table.headers().roots().size());
  for (const auto& root : table.headers().roots()) encode_header(buf, root);
  buf += std::to_string(table.row_count());
  for (const auto& row : table.rows()) {
    buf.push_back('r');
    for (const auto& cell : row) put_field(buf, 'c', cell.text());
  }
  return sha256(buf);
}

std::vector<std::string> normalize_tokens(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  auto is_word = [](unsigned char c) { return std::isalnum(c) || c >= 0x80; };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (is_word(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
      continue;
    }
    const bool numeric_joint = (c == '.' || c == ',') && !current.empty() && is_digit(current.back()) &&
                               i + 1 < text.size() && is_digit(text[i + 1]);
    if (numeric_joint) {
      // "1,000" -> "1000", "3.5" stays "3.5".
      if (c == '.') current.push_back('.');
      continue;
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    current.clear();
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

Query::Query(std::string text_) : text(std::move(text_)), tokens(normalize_tokens(text)) {}

namespace {

bool valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t extra = 0;
    if (c < 0x80) extra = 0;
    else if ((c >> 5) == 0x6) extra = 1;
    else if ((c >> 4) == 0xE) extra = 2;
    else if ((c >> 3) == 0x1E) extra = 3;
    else return false;
    if (extra > 0 && i + extra >= s.size()) return false;
    for (std::size_t k = 1; k <= extra; ++k) {
      if ((static_cast<unsigned char>(s[i + k]) >> 6) != 0x2) return false;
    }
    i += extra + 1;
  }
  return true;
}

struct CsvRecord {
  std::vector<std::string> fields;
  std::size_t line = 0;
  bool blank = false;
};

std::vector<CsvRecord> split_csv(std::string_view s) {
  std::vector<CsvRecord> records;
  CsvRecord rec;
  std::string field;
  std::size_t line = 1;
  rec.line = line;
  bool in_quotes = false;
  bool field_was_quoted = false;
  bool record_has_content = false;

  auto end_field = [&] {
    rec.fields.push_back(std::move(field));
    field.clear();
    field_was_quoted = false;
  };
  auto end_record = [&] {
    end_field();
    rec.blank = !record_has_content;
    records.push_back(std::move(rec));
    rec = CsvRecord{};
    rec.line = line;
    record_has_content = false;
  };

  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < s.size() && s[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    if (c == '"' && field.empty() && !field_was_quoted) {
      in_quotes = true;
      field_was_quoted = true;
      record_has_content = true;
    } else if (c == ',') {
      record_has_content = true;
      end_field();
    } else if (c == '\r' && i + 1 < s.size() && s[i + 1] == '\n') {
      // CRLF handled on the '\n'.
    } else if (c == '\n' || c == '\r') {
      ++line;
      end_record();
    } else {
      record_has_content = true;
      field.push_back(c);
    }
  }
  if (in_quotes) throw IngestionError(fmt::format("unterminated quoted field starting near line {}", rec.line));
  if (record_has_content || !field.empty() || !rec.fields.empty()) end_record();
  return records;
}

}  // namespace

CsvResult parse_csv(std::string_view bytes, bool has_title) {
  if (bytes.size() >= 3 && bytes.substr(0, 3) == "\xEF\xBB\xBF") bytes.remove_prefix(3);
  if (trim(bytes).empty()) throw IngestionError("empty CSV input");
  if (!valid_utf8(bytes)) throw IngestionError("CSV input is not valid UTF-8");

  auto records = split_csv(bytes);
  std::erase_if(records, [](const CsvRecord& r) { return r.blank; });

  std::string title;
  std::size_t next = 0;
  if (has_title && next < records.size()) {
    const auto& fields = records[next++].fields;
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) title.push_back(',');
      title += fields[i];
    }
  }
  if (next >= records.size()) throw IngestionError("CSV has no header row (zero columns)");

  std::vector<std::string> labels = records[next++].fields;
  const std::size_t width = labels.size();

  CsvResult result;
  std::vector<Row> rows;
  for (; next < records.size(); ++next) {
    auto& rec = records[next];
    auto& fields = rec.fields;
    if (fields.size() < width) {
      result.warnings.push_back(fmt::format("line {}: row has {} cells, padded to {}", rec.line,
                                            fields.size(), width));
      fields.resize(width);
    } else if (fields.size() > width) {
      const bool extras_empty =
          std::all_of(fields.begin() + static_cast<std::ptrdiff_t>(width), fields.end(),
                      [](const std::string& f) { return f.empty(); });
      if (!extras_empty) {
        throw IngestionError(fmt::format("line {}: row has {} cells but the header has {}", rec.line,
                                         fields.size(), width));
      }
      result.warnings.push_back(
          fmt::format("line {}: dropped {} trailing empty cells", rec.line, fields.size() - width));
      fields.resize(width);
    }
    Row row;
    row.reserve(width);
    for (auto& f : fields) row.emplace_back(std::move(f));
    rows.push_back(std::move(row));
  }
  result.table = Table("", std::move(title), HeaderTree::flat(std::move(labels)), std::move(rows));
  return result;
}

namespace {

using nlohmann::json;

HeaderNode parse_header_spec(const json& spec, const std::string& where) {
  if (spec.is_string()) return HeaderNode{spec.get<std::string>(), {}};
  if (spec.is_array() && spec.size() == 2 && spec[0].is_string() && spec[1].is_array()) {
    HeaderNode node{spec[0].get<std::string>(), {}};
    for (std::size_t i = 0; i < spec[1].size(); ++i) {
      node.children.push_back(parse_header_spec(spec[1][i], where + "/" + std::to_string(i)));
    }
    return node;
  }
  throw SchemaError(fmt::format("header {} must be a string or [label, [children]]", where));
}

}  // namespace

Table parse_table_json(std::string_view bytes) {
  json doc;
  try {
    doc = json::parse(bytes);
  } catch (const json::parse_error& e) {
    throw SchemaError(fmt::format("table JSON does not parse: {}", e.what()));
  }
  if (!doc.is_object()) throw SchemaError("table JSON must be an object");

  std::string id;
  if (auto it = doc.find("id"); it != doc.end() && !it->is_null()) {
    if (!it->is_string()) throw SchemaError("\"id\" must be a string");
    id = it->get<std::string>();
  }
  std::string title;
  if (auto it = doc.find("title"); it != doc.end()) {
    if (!it->is_string()) throw SchemaError("\"title\" must be a string");
    title = it->get<std::string>();
  }
  auto headers_it = doc.find("headers");
  if (headers_it == doc.end() || !headers_it->is_array()) throw SchemaError("\"headers\" must be an array");
  std::vector<HeaderNode> roots;
  for (std::size_t i = 0; i < headers_it->size(); ++i) {
    roots.push_back(parse_header_spec((*headers_it)[i], std::to_string(i)));
  }

  auto rows_it = doc.find("rows");
  if (rows_it == doc.end() || !rows_it->is_array()) throw SchemaError("\"rows\" must be an array");
  std::vector<Row> rows;
  rows.reserve(rows_it->size());
  for (std::size_t r = 0; r < rows_it->size(); ++r) {
    const auto& cells = (*rows_it)[r];
    if (!cells.is_array()) throw SchemaError(fmt::format("row {} must be an array", r));
    Row row;
    row.reserve(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (!cells[c].is_string()) throw SchemaError(fmt::format("row {} cell {} must be a string", r, c));
      row.emplace_back(cells[c].get<std::string>());
    }
    rows.push_back(std::move(row));
  }
  return Table(std::move(id), std::move(title), HeaderTree(std::move(roots)), std::move(rows));
}

CsvResult load_table_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError(fmt::format("cannot open table file '{}'", path));
  std::stringstream buf;
  buf << in.rdbuf();
  const auto data = buf.str();
  const bool is_json = path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0;
  if (is_json) return CsvResult{parse_table_json(data), {}};
  return parse_csv(data);
}

}  // namespace tabprov
