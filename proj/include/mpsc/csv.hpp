#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace mpsc::csv {

struct Row {
  std::size_t line = 0;  // 1-based line where the record starts
  std::vector<std::string> fields;
};

// RFC 4180 records: quoted fields may hold delimiters, doubled quotes and newlines.
// Blank lines are skipped.
std::vector<Row> parse(std::string_view text, char delimiter = ',');

// Plain delimiter split per line, no quoting (LIAR-style TSV).
std::vector<Row> split_lines(std::string_view text, char delimiter = '\t');

}  // namespace mpsc::csv
