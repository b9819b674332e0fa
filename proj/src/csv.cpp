#include "biasbench/csv.hpp"

#include "biasbench/errors.hpp"

namespace biasbench::csv {

std::vector<Record> parse(std::string_view text) {
  std::vector<Record> records;
  if (text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);

  Record current;
  std::string field;
  std::size_t line = 1;
  current.line = 1;
  bool in_quotes = false;
  bool field_was_quoted = false;
  bool record_has_content = false;

  auto end_field = [&] {
    current.fields.push_back(std::move(field));
    field.clear();
    field_was_quoted = false;
  };
  auto end_record = [&] {
    end_field();
    records.push_back(std::move(current));
    current = Record{};
    record_has_content = false;
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
    switch (c) {
      case '"':
        if (!field.empty() || field_was_quoted)
          throw FormatError("csv line " + std::to_string(line) + ": unexpected quote in unquoted field");
        in_quotes = true;
        field_was_quoted = true;
        record_has_content = true;
        break;
      case ',':
        end_field();
        record_has_content = true;
        break;
      case '\r':
        if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
        [[fallthrough]];
      case '\n':
        if (record_has_content || !field.empty()) end_record();
        ++line;
        current.line = line;
        break;
      default:
        if (field_was_quoted)
          throw FormatError("csv line " + std::to_string(line) + ": text after closing quote");
        field.push_back(c);
        record_has_content = true;
    }
  }
  if (in_quotes) throw FormatError("csv: unterminated quoted field starting before line " + std::to_string(line));
  if (record_has_content || !field.empty()) end_record();
  return records;
}

std::string escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace biasbench::csv
