#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace biasbench::csv {

struct Record {
  std::vector<std::string> fields;
  /// 1-based line on which the record starts.
  std::size_t line = 0;
};

/// Parses RFC 4180 text: comma separator, double-quote quoting with "" escapes,
/// CRLF or LF record terminators, quoted fields may contain newlines.
/// Throws FormatError on an unterminated quote or stray quote inside an
/// unquoted field.
std::vector<Record> parse(std::string_view text);

/// Quotes a field only when it contains a comma, quote, CR or LF.
std::string escape(std::string_view field);

}  // namespace biasbench::csv
