#pragma once

#include <string>
#include <vector>

namespace compass::util {

/// Parses CSV text: quoted fields, embedded commas/quotes/newlines, CRLF
/// tolerated. A trailing newline does not produce an empty row.
std::vector<std::vector<std::string>> parse_csv(const std::string& text);

std::vector<std::vector<std::string>> read_csv_file(const std::string& path);

/// Quotes a field only when it needs it (comma, quote, or newline present).
std::string csv_escape(const std::string& field);

std::string write_csv(const std::vector<std::vector<std::string>>& rows);

} // namespace compass::util
