#include "compass/util/text.hpp"

#include <algorithm>
#include <cctype>

namespace compass::util {

namespace {

bool is_alnum(unsigned char c) {
    return std::isalnum(c) != 0;
}

} // namespace

std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::vector<std::string> tokenize_alnum(std::string_view s) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && !is_alnum(static_cast<unsigned char>(s[i]))) ++i;
        std::size_t j = i;
        while (j < s.size() && is_alnum(static_cast<unsigned char>(s[j]))) ++j;
        if (j > i) out.emplace_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

bool contains_token(std::string_view text, std::string_view token) {
    if (token.empty()) return false;
    const std::string needle = to_lower(token);
    for (const auto& t : tokenize_alnum(text)) {
        if (to_lower(t) == needle) return true;
    }
    return false;
}

std::string extract_json_body(std::string_view raw) {
    std::string s = trim(raw);

    // Strip a fenced block if present; prefer its interior.
    const std::size_t fence = s.find("```");
    if (fence != std::string::npos) {
        std::size_t body_start = s.find('\n', fence);
        if (body_start != std::string::npos) {
            ++body_start;
            const std::size_t fence_end = s.find("```", body_start);
            if (fence_end != std::string::npos) {
                s = trim(std::string_view(s).substr(body_start, fence_end - body_start));
            }
        }
    }

    // Trim prose around the outermost JSON value.
    const std::size_t obj = s.find_first_of("{[");
    if (obj == std::string::npos) return s;
    const char open = s[obj];
    const char close = (open == '{') ? '}' : ']';
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = obj; i < s.size(); ++i) {
        const char c = s[i];
        if (in_string) {
            if (escaped) {
                escaped = false;
            } else if (c == '\\') {
                escaped = true;
            } else if (c == '"') {
                in_string = false;
            }
            continue;
        }
        if (c == '"') {
            in_string = true;
        } else if (c == open) {
            ++depth;
        } else if (c == close) {
            --depth;
            if (depth == 0) return s.substr(obj, i - obj + 1);
        }
    }
    return s.substr(obj);
}

std::size_t estimate_tokens(std::string_view s) {
    return (s.size() + 3) / 4;
}

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || s[i] == sep) {
            out.emplace_back(s.substr(start, i - start));
            start = i + 1;
        }
    }
    return out;
}

bool starts_with_ci(std::string_view s, std::string_view prefix) {
    if (s.size() < prefix.size()) return false;
    for (std::size_t i = 0; i < prefix.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(s[i])) !=
            std::tolower(static_cast<unsigned char>(prefix[i]))) {
            return false;
        }
    }
    return true;
}

} // namespace compass::util
