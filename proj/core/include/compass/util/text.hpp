#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace compass::util {

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);

// Splits into maximal runs of [A-Za-z0-9]. Everything else is a boundary.
std::vector<std::string> tokenize_alnum(std::string_view s);

// Case-insensitive whole-token containment.
bool contains_token(std::string_view text, std::string_view token);

// Removes a leading ```...``` fence (with optional language tag) and any
// prose before the first '{' / '[' or after the matching close. Returns the
// best-effort JSON body; callers still have to parse it.
std::string extract_json_body(std::string_view raw);

// Crude token estimate for budget checks: ceil(bytes / 4).
std::size_t estimate_tokens(std::string_view s);

std::vector<std::string> split(std::string_view s, char sep);

bool starts_with_ci(std::string_view s, std::string_view prefix);

} // namespace compass::util
