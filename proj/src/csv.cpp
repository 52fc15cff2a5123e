#include "csv.hpp"

#include "ksg/error.hpp"

namespace ksg::detail {

std::vector<CsvRow> parse_csv(std::string_view text)
{
  if (text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);

  std::vector<CsvRow> rows;
  CsvRow row;
  std::string field;
  std::size_t line = 1;
  row.line = 1;
  bool in_quotes = false;
  bool after_quote = false;  // just closed a quoted field
  bool row_has_content = false;

  auto end_field = [&] {
    row.cells.push_back(std::move(field));
    field.clear();
    after_quote = false;
  };
  auto end_row = [&] {
    end_field();
    // Blank lines are skipped.
    if (row_has_content || row.cells.size() > 1 || !row.cells.front().empty()) rows.push_back(std::move(row));
    row = CsvRow{};
    row.line = line;
    row_has_content = false;
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
          after_quote = true;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    if (c == ',') {
      end_field();
      row_has_content = true;
    } else if (c == '\r' || c == '\n') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      ++line;
      end_row();
    } else if (c == '"') {
      if (!field.empty() || after_quote) {
        throw Error(ErrorCode::Parse, "CSV line " + std::to_string(line) + ": unexpected quote inside field");
      }
      in_quotes = true;
      row_has_content = true;
    } else {
      if (after_quote) {
        throw Error(ErrorCode::Parse,
                    "CSV line " + std::to_string(line) + ": characters after closing quote");
      }
      field.push_back(c);
    }
  }
  if (in_quotes) {
    throw Error(ErrorCode::Parse, "CSV record starting at line " + std::to_string(row.line) +
                                      ": unterminated quoted field");
  }
  if (!field.empty() || !row.cells.empty() || row_has_content) end_row();
  return rows;
}

std::string csv_field(std::string_view value)
{
  if (value.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(value);
  std::string out = "\"";
  for (char c : value) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string csv_line(const std::vector<std::string>& cells)
{
  std::string out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out.push_back(',');
    out += csv_field(cells[i]);
  }
  out += "\r\n";
  return out;
}

}  // namespace ksg::detail
