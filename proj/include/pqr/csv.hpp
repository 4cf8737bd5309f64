#pragma once

#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "pqr/error.hpp"

namespace pqr::csv {

using Row = std::vector<std::string>;

// RFC 4180 reader: quoted fields may contain commas, doubled quotes and newlines.
// Returns rows with their 1-based line number of the first physical line.
struct Record {
  Row fields;
  std::size_t line = 0;
};

inline std::vector<Record> read(std::istream& in) {
  std::vector<Record> out;
  std::string field;
  Record rec;
  bool in_quotes = false;
  bool was_quoted = false;
  bool any = false;
  std::size_t line = 1;
  rec.line = 1;
  char c;
  auto end_field = [&] {
    rec.fields.push_back(std::move(field));
    field.clear();
    was_quoted = false;
  };
  auto end_record = [&] {
    end_field();
    bool blank = rec.fields.size() == 1 && rec.fields[0].empty();
    if (!blank) out.push_back(std::move(rec));
    rec = Record{};
    any = false;
  };
  while (in.get(c)) {
    if (in_quotes) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field.push_back('"');
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    if (!any) {
      rec.line = line;
      any = true;
    }
    switch (c) {
      case '"':
        if (!field.empty() || was_quoted)
          throw ParseError("malformed CSV: stray quote", line);
        in_quotes = true;
        was_quoted = true;
        break;
      case ',':
        end_field();
        break;
      case '\r':
        break;
      case '\n':
        end_record();
        ++line;
        break;
      default:
        if (was_quoted) throw ParseError("malformed CSV: text after closing quote", line);
        field.push_back(c);
    }
  }
  if (in_quotes) throw ParseError("malformed CSV: unterminated quote", rec.line);
  if (any || !field.empty()) end_record();
  return out;
}

inline std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q.push_back('"');
    q.push_back(c);
  }
  q.push_back('"');
  return q;
}

inline void write_row(std::ostream& out, const Row& row) {
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) out << ',';
    out << quote(row[i]);
  }
  out << '\n';
}

}  // namespace pqr::csv
