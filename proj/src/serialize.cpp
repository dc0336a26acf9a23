#include "tabprov/serialize.hpp"

#include <algorithm>
#include <cctype>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "tabprov/errors.hpp"

namespace tabprov {

SerializationFormat parse_format(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "html") return SerializationFormat::html;
  if (lower == "xml") return SerializationFormat::xml;
  if (lower == "json") return SerializationFormat::json;
  if (lower == "csv") return SerializationFormat::csv;
  if (lower == "markdown" || lower == "md") return SerializationFormat::markdown;
  if (lower == "nlsep" || lower == "nl+sep" || lower == "nl-sep") return SerializationFormat::nlsep;
  throw ConfigError(fmt::format("unknown serialization format '{}'", name));
}

const char* to_string(SerializationFormat format) noexcept {
  switch (format) {
    case SerializationFormat::html:
      return "html";
    case SerializationFormat::xml:
      return "xml";
    case SerializationFormat::json:
      return "json";
    case SerializationFormat::csv:
      return "csv";
    case SerializationFormat::markdown:
      return "markdown";
    case SerializationFormat::nlsep:
      return "nlsep";
  }
  return "nlsep";
}

namespace {

std::string one_line(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return out;
}

std::string markdown_cell(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (c == '|') out += "\\|";
    else if (c == '\n' || c == '\r') out.push_back(' ');
    else out.push_back(c);
  }
  return out;
}

std::string markup_escape(std::string_view s, bool xml) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&':
        out += "&amp;";
        break;
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '"':
        out += "&quot;";
        break;
      case '\'':
        out += xml ? "&apos;" : "'";
        break;
      default:
        out.push_back(c);
    }
  }
  return out;
}

std::string csv_field(std::string_view s, bool sole_field) {
  const bool needs_quotes = s.find_first_of(",\"\r\n") != std::string_view::npos || (sole_field && s.empty());
  if (!needs_quotes) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

void append_csv_record(std::string& out, const std::vector<std::string_view>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out.push_back(',');
    out += csv_field(fields[i], fields.size() == 1);
  }
  out.push_back('\n');
}

std::vector<std::string_view> row_texts(const Row& row) {
  std::vector<std::string_view> out;
  out.reserve(row.size());
  for (const auto& cell : row) out.push_back(cell.text());
  return out;
}

nlohmann::ordered_json header_json(const HeaderNode& node) {
  if (node.is_leaf()) return node.label;
  auto children = nlohmann::ordered_json::array();
  for (const auto& child : node.children) children.push_back(header_json(child));
  return nlohmann::ordered_json::array({node.label, children});
}

// Nodes at `level` (0 = roots), paired with the depth of the subtree above them.
void nodes_at_level(const HeaderNode& node, std::size_t level, std::size_t target,
                    std::vector<std::pair<const HeaderNode*, std::size_t>>& out) {
  if (level == target) {
    out.emplace_back(&node, level);
    return;
  }
  for (const auto& child : node.children) nodes_at_level(child, level + 1, target, out);
}

void xml_header(const HeaderNode& node, std::string& out) {
  if (node.is_leaf()) {
    out += "<cell>" + markup_escape(node.label, true) + "</cell>";
    return;
  }
  out += "<group label=\"" + markup_escape(node.label, true) + "\">";
  for (const auto& child : node.children) xml_header(child, out);
  out += "</group>";
}

}  // namespace

std::string nlsep_header_line(const Table& table) {
  std::string out;
  const auto& labels = table.column_labels();
  for (std::size_t c = 0; c < labels.size(); ++c) {
    if (c) out += " | ";
    out += one_line(labels[c]);
  }
  return out;
}

std::string nlsep_row_line(const Row& row) {
  std::string out;
  for (std::size_t c = 0; c < row.size(); ++c) {
    if (c) out += " | ";
    out += one_line(row[c].text());
  }
  return out;
}

std::string serialize_nlsep(const Table& table) {
  std::string out = nlsep_header_line(table);
  for (const auto& row : table.rows()) {
    out.push_back('\n');
    out += nlsep_row_line(row);
  }
  return out;
}

std::string serialize_csv(const Table& table) {
  std::string out;
  std::vector<std::string_view> labels(table.column_labels().begin(), table.column_labels().end());
  append_csv_record(out, labels);
  for (const auto& row : table.rows()) append_csv_record(out, row_texts(row));
  return out;
}

std::string serialize_markdown(const Table& table) {
  std::string out = "|";
  for (const auto& label : table.column_labels()) out += " " + markdown_cell(label) + " |";
  out += "\n|";
  for (std::size_t c = 0; c < table.column_count(); ++c) out += " --- |";
  for (const auto& row : table.rows()) {
    out += "\n|";
    for (const auto& cell : row) out += " " + markdown_cell(cell.text()) + " |";
  }
  return out;
}

std::string serialize_json(const Table& table) {
  nlohmann::ordered_json doc;
  if (!table.id().empty()) doc["id"] = table.id();
  doc["title"] = table.title();
  auto headers = nlohmann::ordered_json::array();
  for (const auto& root : table.headers().roots()) headers.push_back(header_json(root));
  doc["headers"] = std::move(headers);
  auto rows = nlohmann::ordered_json::array();
  for (const auto& row : table.rows()) {
    auto cells = nlohmann::ordered_json::array();
    for (const auto& cell : row) cells.push_back(cell.text());
    rows.push_back(std::move(cells));
  }
  doc["rows"] = std::move(rows);
  return doc.dump();
}

std::string serialize_html(const Table& table) {
  std::string out = "<table>";
  const std::size_t depth = table.headers().depth();
  for (std::size_t level = 0; level < depth; ++level) {
    std::vector<std::pair<const HeaderNode*, std::size_t>> nodes;
    for (const auto& root : table.headers().roots()) nodes_at_level(root, 0, level, nodes);
    out += "<tr>";
    for (const auto& [node, lvl] : nodes) {
      out += "<th";
      if (!node->is_leaf() && node->leaf_count() > 1) out += fmt::format(" colspan=\"{}\"", node->leaf_count());
      if (node->is_leaf() && depth - lvl > 1) out += fmt::format(" rowspan=\"{}\"", depth - lvl);
      out += ">" + markup_escape(node->label, false) + "</th>";
    }
    out += "</tr>";
  }
  for (const auto& row : table.rows()) {
    out += "<tr>";
    for (const auto& cell : row) out += "<td>" + markup_escape(cell.text(), false) + "</td>";
    out += "</tr>";
  }
  out += "</table>";
  return out;
}

std::string serialize_xml(const Table& table) {
  std::string out = "<table><header>";
  for (const auto& root : table.headers().roots()) xml_header(root, out);
  out += "</header>";
  for (const auto& row : table.rows()) {
    out += "<row>";
    for (const auto& cell : row) out += "<cell>" + markup_escape(cell.text(), true) + "</cell>";
    out += "</row>";
  }
  out += "</table>";
  return out;
}

std::string serialize(const Table& table, SerializationFormat format) {
  switch (format) {
    case SerializationFormat::html:
      return serialize_html(table);
    case SerializationFormat::xml:
      return serialize_xml(table);
    case SerializationFormat::json:
      return serialize_json(table);
    case SerializationFormat::csv:
      return serialize_csv(table);
    case SerializationFormat::markdown:
      return serialize_markdown(table);
    case SerializationFormat::nlsep:
      return serialize_nlsep(table);
  }
  return serialize_nlsep(table);
}

namespace {

std::size_t count_occurrences(std::string_view text, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string_view::npos; pos = text.find(needle, pos + needle.size())) ++n;
  return n;
}

}  // namespace

std::size_t count_serialized_rows(std::string_view text, SerializationFormat format) {
  switch (format) {
    case SerializationFormat::html:
      return count_occurrences(text, "<tr><td");
    case SerializationFormat::xml:
      return count_occurrences(text, "<row>");
    case SerializationFormat::json:
      return parse_table_json(text).row_count();
    case SerializationFormat::csv:
      return parse_csv(text).table.row_count();
    case SerializationFormat::markdown:
      return count_occurrences(text, "\n") - 1;
    case SerializationFormat::nlsep:
      return count_occurrences(text, "\n");
  }
  return 0;
}

}  // namespace tabprov
