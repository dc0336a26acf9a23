#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tabprov {

/// Parsed-value tag of a cell. Always a pure function of the cell text.
enum class CellType { empty, integer, real, date, text };

const char* to_string(CellType type) noexcept;

/// Tags `text` by the value grammar: integer (optional sign + digits), real
/// (decimal or scientific), date (YYYY-MM or YYYY-MM-DD; a bare YYYY is an
/// integer), empty for blank text, text otherwise. Surrounding ASCII
/// whitespace is ignored.
CellType classify_cell_text(std::string_view text) noexcept;

class Cell {
 public:
  Cell() = default;
  explicit Cell(std::string text);

  const std::string& text() const noexcept { return text_; }
  CellType type() const noexcept { return type_; }
  bool is_numeric() const noexcept {
    return type_ == CellType::integer || type_ == CellType::real;
  }
  bool is_empty() const noexcept { return type_ == CellType::empty; }

  /// Numeric value for integer/real cells.
  std::optional<double> numeric() const;

  friend bool operator==(const Cell&, const Cell&) = default;

 private:
  std::string text_;
  CellType type_ = CellType::empty;
};

using Row = std::vector<Cell>;

struct HeaderNode {
  std::string label;
  std::vector<HeaderNode> children;

  bool is_leaf() const noexcept { return children.empty(); }
  std::size_t leaf_count() const noexcept;
  std::size_t depth() const noexcept;

  friend bool operator==(const HeaderNode&, const HeaderNode&) = default;
};

/// Ordered forest of header nodes; every leaf is one column.
class HeaderTree {
 public:
  HeaderTree() = default;
  explicit HeaderTree(std::vector<HeaderNode> roots);

  static HeaderTree flat(std::vector<std::string> labels);

  const std::vector<HeaderNode>& roots() const noexcept { return roots_; }
  std::size_t leaf_count() const noexcept;
  /// 1 for a flat header, 0 for an empty forest.
  std::size_t depth() const noexcept;
  bool is_flat() const noexcept { return depth() <= 1; }

  /// Leaf labels in column order (depth-first, document order).
  std::vector<std::string> leaf_labels() const;

  /// Keeps only the given leaves (column indices, any order); groups that
  /// lose all their leaves are removed. Column order is preserved.
  HeaderTree restricted(std::span<const std::size_t> leaves) const;

  friend bool operator==(const HeaderTree&, const HeaderTree&) = default;

 private:
  std::vector<HeaderNode> roots_;
};

/// Immutable titled grid of cells. Construction validates the row widths.
class Table {
 public:
  Table() = default;
  /// Throws SchemaError naming the first row whose width differs from the
  /// header leaf count, or when there are no columns.
  Table(std::string id, std::string title, HeaderTree headers, std::vector<Row> rows);

  const std::string& id() const noexcept { return id_; }
  const std::string& title() const noexcept { return title_; }
  const HeaderTree& headers() const noexcept { return headers_; }
  const std::vector<Row>& rows() const noexcept { return rows_; }
  const Row& row(std::size_t r) const;
  const Cell& cell(std::size_t r, std::size_t c) const;

  std::size_t row_count() const noexcept { return rows_.size(); }
  std::size_t column_count() const noexcept { return leaf_labels_.size(); }
  const std::vector<std::string>& column_labels() const noexcept { return leaf_labels_; }
  const std::string& column_label(std::size_t c) const;

  Table with_id(std::string id) const;

  /// Sub-grid of the given rows (in the given order) and columns (in the
  /// given order; header groups are pruned, leaf order follows `cols`
  /// sorted ascending).
  Table select(std::span<const std::size_t> rows, std::span<const std::size_t> cols) const;

  friend bool operator==(const Table&, const Table&) = default;

 private:
  std::string id_;
  std::string title_;
  HeaderTree headers_;
  std::vector<Row> rows_;
  std::vector<std::string> leaf_labels_;
};

struct TableSize {
  std::size_t rows = 0;
  std::size_t cols = 0;
  friend bool operator==(const TableSize&, const TableSize&) = default;
};

TableSize table_size(const Table& table) noexcept;

/// SHA-256 digest.
struct Digest {
  std::array<std::uint8_t, 32> bytes{};

  std::string hex() const;
  friend bool operator==(const Digest&, const Digest&) = default;
};

Digest sha256(std::string_view data);

/// Digest over title, header tree and cell texts (the id is not part of it).
Digest content_hash(const Table& table);

/// Lowercased word tokens with punctuation stripped. A '.' or ',' between
/// two digits stays inside the token so "3.5" survives as one token.
std::vector<std::string> normalize_tokens(std::string_view text);

struct Query {
  std::string text;
  std::vector<std::string> tokens;

  Query() = default;
  explicit Query(std::string text);
};

struct CsvResult {
  Table table;
  std::vector<std::string> warnings;
};

/// RFC-4180 CSV. Blank lines are skipped, short rows are padded with empty
/// cells (one warning per padded row), trailing empty overflow cells are
/// dropped with a warning. With `has_title` the first record is the title.
CsvResult parse_csv(std::string_view bytes, bool has_title = false);

/// Canonical table JSON: {"id"?, "title", "headers": [HeaderSpec], "rows": [[str]]}
/// where HeaderSpec = str | [str, [HeaderSpec]].
Table parse_table_json(std::string_view bytes);

/// Loads a table from a .csv or .json file (by extension).
CsvResult load_table_file(const std::string& path);

}  // namespace tabprov
