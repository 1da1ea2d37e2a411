#include "riskbench/csv.hpp"

#include <cstdlib>
#include <stdexcept>

#include "riskbench/common.hpp"

namespace riskbench {

namespace {

// Splits one logical CSV record. `pos` sits at the start of a line on entry
// and past its terminator on exit. Quoted fields may span newlines.
std::vector<std::string> read_record(const std::string& text, size_t& pos,
                                     const std::string& origin, size_t line_no) {
  std::vector<std::string> fields;
  std::string field;
  bool in_quotes = false;
  bool done = false;
  while (!done) {
    if (pos >= text.size()) {
      if (in_quotes)
        throw std::runtime_error(origin + ": unterminated quoted field starting near line " +
                                 std::to_string(line_no));
      break;
    }
    char c = text[pos++];
    if (in_quotes) {
      if (c == '"') {
        if (pos < text.size() && text[pos] == '"') {
          field.push_back('"');
          ++pos;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
    } else {
      switch (c) {
        case '"': in_quotes = true; break;
        case ',': fields.push_back(std::move(field)); field.clear(); break;
        case '\r':
          if (pos < text.size() && text[pos] == '\n') ++pos;
          done = true;
          break;
        case '\n': done = true; break;
        default: field.push_back(c);
      }
    }
  }
  fields.push_back(std::move(field));
  return fields;
}

}  // namespace

size_t CsvTable::column(const std::string& name) const {
  auto idx = find_column(name);
  if (!idx) throw std::runtime_error("missing required column: " + name);
  return *idx;
}

std::optional<size_t> CsvTable::find_column(const std::string& name) const {
  for (size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  return std::nullopt;
}

CsvTable parse_csv(const std::string& text, const std::string& origin) {
  CsvTable table;
  size_t pos = 0;
  size_t line_no = 0;
  bool have_header = false;
  while (pos < text.size()) {
    ++line_no;
    if (text[pos] == '#') {
      while (pos < text.size() && text[pos] != '\n') ++pos;
      if (pos < text.size()) ++pos;
      continue;
    }
    if (text[pos] == '\n') { ++pos; continue; }
    if (text[pos] == '\r') {
      ++pos;
      if (pos < text.size() && text[pos] == '\n') ++pos;
      continue;
    }
    auto fields = read_record(text, pos, origin, line_no);
    if (!have_header) {
      table.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != table.header.size())
      throw std::runtime_error(origin + ": line " + std::to_string(line_no) + " has " +
                               std::to_string(fields.size()) + " fields, expected " +
                               std::to_string(table.header.size()));
    table.rows.push_back(std::move(fields));
  }
  if (!have_header) throw std::runtime_error(origin + ": no header row found");
  return table;
}

CsvTable load_csv(const std::string& path) {
  return parse_csv(read_file(path), path);
}

std::string csv_escape(const std::string& field) {
  bool needs = false;
  for (char c : field)
    if (c == ',' || c == '"' || c == '\n' || c == '\r') { needs = true; break; }
  if (!needs) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += "\"";
  return out;
}

std::optional<double> parse_cell_double(const std::string& cell, const std::string& origin,
                                        size_t row, const std::string& column) {
  if (cell.empty()) return std::nullopt;
  const char* begin = cell.c_str();
  char* end = nullptr;
  double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0')
    throw std::runtime_error(origin + ": row " + std::to_string(row) + ", column '" + column +
                             "': cannot parse '" + cell + "' as a number");
  return v;
}

}  // namespace riskbench
