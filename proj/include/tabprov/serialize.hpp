#pragma once

#include <array>
#include <string>
#include <string_view>

#include "tabprov/table.hpp"

namespace tabprov {

enum class SerializationFormat { html, xml, json, csv, markdown, nlsep };

inline constexpr std::array<SerializationFormat, 6> kAllFormats = {
    SerializationFormat::html, SerializationFormat::xml,      SerializationFormat::json,
    SerializationFormat::csv,  SerializationFormat::markdown, SerializationFormat::nlsep};

/// Accepts html, xml, json, csv, markdown (md), nlsep (nl+sep); case-insensitive.
SerializationFormat parse_format(std::string_view name);
const char* to_string(SerializationFormat format) noexcept;

/// Canonical renderings (no trailing newline except CSV):
///   nlsep     leaf labels then rows, cells joined by " | ", rows by '\n'
///   csv       RFC-4180, '\n' line ends, trailing newline
///   markdown  "| a | b |", "| --- | --- |", one pipe row per table row
///   json      {"id"?,"title","headers","rows"} compact, keys in that order
///   html      <table><tr><th>..</th></tr><tr><td>..</td></tr></table>,
///             one header row per level, groups spanning their leaves via colspan
///   xml       <table><header><cell>..</cell></header><row><cell>..</cell></row></table>,
///             header groups as <group label="..">
/// Titles are only carried by JSON.
std::string serialize(const Table& table, SerializationFormat format);

std::string serialize_nlsep(const Table& table);
/// The individual NL+Sep lines (header and one data row), without '\n'.
std::string nlsep_header_line(const Table& table);
std::string nlsep_row_line(const Row& row);
std::string serialize_csv(const Table& table);
std::string serialize_markdown(const Table& table);
std::string serialize_json(const Table& table);
std::string serialize_html(const Table& table);
std::string serialize_xml(const Table& table);

/// Number of data rows in a serialized table, recovered from the text
/// alone. Used to check that truncation never cut through a row.
std::size_t count_serialized_rows(std::string_view text, SerializationFormat format);

}  // namespace tabprov
