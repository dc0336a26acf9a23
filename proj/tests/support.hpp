#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include "tabprov/table.hpp"

#ifndef TABPROV_TEST_DATA
#error "TABPROV_TEST_DATA must point at tests/"
#endif

namespace support {

inline std::string data_path(const std::string& rel) { return std::string(TABPROV_TEST_DATA) + "/" + rel; }

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string fixture_text(const std::string& name) { return read_file(data_path("fixtures/" + name)); }

inline tabprov::Table fixture_table(const std::string& name) { return tabprov::parse_table_json(fixture_text(name)); }

}  // namespace support
