#include "mpsc/csv.hpp"

namespace mpsc::csv {

std::vector<Row> parse(std::string_view text, char delimiter) {
  std::vector<Row> rows;
  Row row;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  std::size_t line = 1;
  row.line = 1;

  auto end_field = [&] {
    row.fields.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    const bool blank = row.fields.size() == 1 && row.fields[0].empty();
    if (!blank) rows.push_back(std::move(row));
    row = Row{};
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
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
    if (c == '"' && !field_started) {
      in_quotes = true;
      field_started = true;
    } else if (c == delimiter) {
      end_field();
    } else if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
      continue;
    } else if (c == '\n') {
      end_row();
      ++line;
      row.line = line;
    } else {
      field.push_back(c);
      field_started = true;
    }
  }
  if (field_started || !field.empty() || !row.fields.empty()) end_row();
  return rows;
}

std::vector<Row> split_lines(std::string_view text, char delimiter) {
  std::vector<Row> rows;
  std::size_t line = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    std::string_view ln = text.substr(pos, nl == std::string_view::npos ? text.npos : nl - pos);
    ++line;
    if (!ln.empty() && ln.back() == '\r') ln.remove_suffix(1);
    if (!ln.empty()) {
      Row row;
      row.line = line;
      std::size_t start = 0;
      while (true) {
        const std::size_t d = ln.find(delimiter, start);
        row.fields.emplace_back(ln.substr(start, d == std::string_view::npos ? ln.npos : d - start));
        if (d == std::string_view::npos) break;
        start = d + 1;
      }
      rows.push_back(std::move(row));
    }
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  return rows;
}

}  // namespace mpsc::csv
