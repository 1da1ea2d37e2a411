#pragma once

#include <optional>
#include <string>
#include <vector>

namespace riskbench {

// Minimal RFC-4180 style table: quoted fields with embedded commas/quotes are
// supported, lines starting with '#' outside any record are skipped (artifact
// headers use them for provenance comments).
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Column index by name; throws with the name when absent.
  size_t column(const std::string& name) const;
  std::optional<size_t> find_column(const std::string& name) const;
};

CsvTable parse_csv(const std::string& text, const std::string& origin);
CsvTable load_csv(const std::string& path);

std::string csv_escape(const std::string& field);

// Parses a numeric cell; empty means missing. Throws naming origin, 1-based
// row and the column header on malformed input.
std::optional<double> parse_cell_double(const std::string& cell, const std::string& origin,
                                        size_t row, const std::string& column);

}  // namespace riskbench
