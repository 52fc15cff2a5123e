#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace ksg::detail {

struct CsvRow {
  std::size_t line = 0;  // 1-based line where the record starts
  std::vector<std::string> cells;
};

/// RFC 4180 reader: quoted fields may hold commas, CRLF and doubled quotes.
/// A UTF-8 BOM is skipped. Throws ksg::Error(Parse) on an unterminated quote
/// or stray characters after a closing quote.
std::vector<CsvRow> parse_csv(std::string_view text);

/// Quotes a field when it holds a comma, quote, CR or LF.
std::string csv_field(std::string_view value);

std::string csv_line(const std::vector<std::string>& cells);

}  // namespace ksg::detail
