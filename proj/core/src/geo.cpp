#include "compass/geo.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>

#include "compass/errors.hpp"
#include "compass/util/text.hpp"

namespace compass::geo {

namespace {

bool is_digit(char c) { return c >= '0' && c <= '9'; }

// Consumes an unsigned decimal number at pos; returns false if none.
bool read_number(const std::string& s, std::size_t& pos, double& out) {
    std::size_t start = pos;
    while (pos < s.size() && is_digit(s[pos])) ++pos;
    if (pos < s.size() && s[pos] == '.') {
        ++pos;
        while (pos < s.size() && is_digit(s[pos])) ++pos;
    }
    if (pos == start || (pos == start + 1 && s[start] == '.')) {
        pos = start;
        return false;
    }
    auto [ptr, ec] = std::from_chars(s.data() + start, s.data() + pos, out);
    (void)ptr;
    return ec == std::errc{};
}

void skip_spaces(const std::string& s, std::size_t& pos) {
    while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t')) ++pos;
}

// Degree sign: '°' (UTF-8 C2 B0) or the literal word is not accepted.
bool read_degree_sign(const std::string& s, std::size_t& pos) {
    if (pos + 1 < s.size() && static_cast<unsigned char>(s[pos]) == 0xC2 &&
        static_cast<unsigned char>(s[pos + 1]) == 0xB0) {
        pos += 2;
        return true;
    }
    return false;
}

// Minutes mark: ASCII ' or prime U+2032 (E2 80 B2).
bool read_minute_sign(const std::string& s, std::size_t& pos) {
    if (pos < s.size() && s[pos] == '\'') {
        ++pos;
        return true;
    }
    if (pos + 2 < s.size() && static_cast<unsigned char>(s[pos]) == 0xE2 &&
        static_cast<unsigned char>(s[pos + 1]) == 0x80 &&
        static_cast<unsigned char>(s[pos + 2]) == 0xB2) {
        pos += 3;
        return true;
    }
    return false;
}

// Seconds mark: ASCII " or double prime U+2033 (E2 80 B3).
bool read_second_sign(const std::string& s, std::size_t& pos) {
    if (pos < s.size() && s[pos] == '"') {
        ++pos;
        return true;
    }
    if (pos + 2 < s.size() && static_cast<unsigned char>(s[pos]) == 0xE2 &&
        static_cast<unsigned char>(s[pos + 1]) == 0x80 &&
        static_cast<unsigned char>(s[pos + 2]) == 0xB3) {
        pos += 3;
        return true;
    }
    return false;
}

std::optional<char> read_hemisphere(const std::string& s, std::size_t& pos) {
    if (pos >= s.size()) return std::nullopt;
    char c = static_cast<char>(std::toupper(static_cast<unsigned char>(s[pos])));
    if (c != 'N' && c != 'S' && c != 'E' && c != 'W') return std::nullopt;
    // Must be a standalone letter, not the start of a word ("North" is fine
    // to reject; prose coordinates in the corpus use the letter form).
    if (pos + 1 < s.size() &&
        std::isalnum(static_cast<unsigned char>(s[pos + 1]))) {
        return std::nullopt;
    }
    ++pos;
    return c;
}

// Tries to parse one coordinate starting at `pos` (which must point at a
// digit). On success returns the match and advances pos past it; on failure
// leaves pos unchanged.
std::optional<CoordinateMatch> try_parse_at(const std::string& s, std::size_t& pos) {
    std::size_t start = pos;
    std::size_t p = pos;
    double degrees = 0.0;
    if (!read_number(s, p, degrees)) return std::nullopt;

    double minutes = 0.0;
    double seconds = 0.0;
    bool had_deg_sign = false;

    std::size_t after_deg = p;
    if (read_degree_sign(s, p)) {
        had_deg_sign = true;
        std::size_t q = p;
        skip_spaces(s, q);
        double m = 0.0;
        std::size_t m_start = q;
        if (read_number(s, q, m)) {
            std::size_t after_m = q;
            if (read_minute_sign(s, q)) {
                minutes = m;
                std::size_t r = q;
                skip_spaces(s, r);
                double sec = 0.0;
                if (read_number(s, r, sec)) {
                    std::size_t after_s = r;
                    if (read_second_sign(s, r)) {
                        seconds = sec;
                        p = r;
                    } else {
                        p = q;
                        (void)after_s;
                    }
                } else {
                    p = q;
                }
            } else {
                // number after ° without a minutes mark: not minutes
                p = after_deg + 2; // keep just the degree sign
                (void)m_start;
                (void)after_m;
            }
        }
    }

    std::size_t h = p;
    skip_spaces(s, h);
    auto hemi = read_hemisphere(s, h);
    if (!hemi) return std::nullopt;
    // A bare number with no degree sign must sit right next to its
    // hemisphere letter or one space away; that is already guaranteed by
    // skip_spaces. Require at least a degree sign OR a decimal/integer
    // directly tagged: both covered.
    (void)had_deg_sign;

    if (minutes >= 60.0 || seconds >= 60.0) return std::nullopt;

    double magnitude = degrees + minutes / 60.0 + seconds / 3600.0;
    bool is_lat = (*hemi == 'N' || *hemi == 'S');
    bool negative = (*hemi == 'S' || *hemi == 'W');
    double limit = is_lat ? 90.0 : 180.0;

    CoordinateMatch match;
    match.raw = s.substr(start, h - start);
    match.offset = start;
    match.is_latitude = is_lat;
    match.degrees = negative ? -magnitude : magnitude;

    if (magnitude > limit) {
        throw Error("OutOfRange", match.raw,
                    "coordinate magnitude exceeds " + std::to_string(static_cast<int>(limit)) +
                        " degrees");
    }
    pos = h;
    return match;
}

} // namespace

std::vector<CoordinateMatch> scan_coordinates(const std::string& text) {
    std::vector<CoordinateMatch> out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        if (!is_digit(text[pos])) {
            ++pos;
            continue;
        }
        // Don't start inside a larger alphanumeric token ("A1", "SRM981").
        if (pos > 0 && std::isalnum(static_cast<unsigned char>(text[pos - 1]))) {
            while (pos < text.size() && std::isalnum(static_cast<unsigned char>(text[pos]))) ++pos;
            continue;
        }
        std::size_t next = pos;
        if (auto m = try_parse_at(text, next)) {
            out.push_back(std::move(*m));
            pos = next;
        } else {
            while (pos < text.size() &&
                   (is_digit(text[pos]) || text[pos] == '.')) ++pos;
        }
    }
    return out;
}

CoordinatePair parse_coordinate(const std::string& text) {
    CoordinatePair pair;
    for (const auto& m : scan_coordinates(text)) {
        if (m.is_latitude && !pair.latitude) pair.latitude = m.degrees;
        if (!m.is_latitude && !pair.longitude) pair.longitude = m.degrees;
        if (pair.latitude && pair.longitude) break;
    }
    return pair;
}

std::optional<double> parse_coordinate_cell(const std::string& cell, bool is_latitude) {
    const std::string t = util::trim(cell);
    if (t.empty()) return std::nullopt;

    // Hemisphere-tagged forms take priority and settle the sign themselves.
    auto matches = scan_coordinates(t);
    for (const auto& m : matches) {
        if (m.is_latitude == is_latitude) return m.degrees;
    }
    if (!matches.empty()) return std::nullopt; // tagged with the other axis

    // Signed decimal, optionally with a trailing degree sign.
    std::string body = t;
    double sign = 1.0;
    std::size_t pos = 0;
    if (!body.empty() && (body[0] == '-' || body[0] == '+')) {
        if (body[0] == '-') sign = -1.0;
        pos = 1;
    } else if (body.size() >= 3 && static_cast<unsigned char>(body[0]) == 0xE2 &&
               static_cast<unsigned char>(body[1]) == 0x88 &&
               static_cast<unsigned char>(body[2]) == 0x92) {
        sign = -1.0; // U+2212 minus
        pos = 3;
    }
    double value = 0.0;
    if (!read_number(body, pos, value)) return std::nullopt;
    read_degree_sign(body, pos);
    skip_spaces(body, pos);
    if (pos != body.size()) return std::nullopt;

    double limit = is_latitude ? 90.0 : 180.0;
    if (value > limit) {
        throw Error("OutOfRange", util::trim(cell),
                    "coordinate magnitude exceeds " + std::to_string(static_cast<int>(limit)) +
                        " degrees");
    }
    return sign * value;
}

namespace {

bool token_boundary(const std::string& s, std::size_t pos) {
    return pos >= s.size() || !std::isalnum(static_cast<unsigned char>(s[pos]));
}

} // namespace

std::optional<double> parse_depth(const std::string& text) {
    // Unit-tagged number: "2000 m", "1.5km". Unit must end at a token
    // boundary so "m3", "mBq", "mol" never match.
    std::size_t pos = 0;
    while (pos < text.size()) {
        if (!is_digit(text[pos]) ||
            (pos > 0 && std::isalnum(static_cast<unsigned char>(text[pos - 1])))) {
            ++pos;
            continue;
        }
        std::size_t start = pos;
        double value = 0.0;
        std::size_t p = pos;
        if (!read_number(text, p, value)) {
            ++pos;
            continue;
        }
        std::size_t q = p;
        skip_spaces(text, q);
        bool negative = start > 0 && (text[start - 1] == '-' ||
                                      (start >= 3 &&
                                       static_cast<unsigned char>(text[start - 3]) == 0xE2 &&
                                       static_cast<unsigned char>(text[start - 2]) == 0x88 &&
                                       static_cast<unsigned char>(text[start - 1]) == 0x92));
        double scale = 0.0;
        std::size_t unit_end = q;
        if (q + 1 < text.size() && (text[q] == 'k' || text[q] == 'K') &&
            (text[q + 1] == 'm' || text[q + 1] == 'M') && token_boundary(text, q + 2)) {
            scale = 1000.0;
            unit_end = q + 2;
        } else if (q < text.size() && (text[q] == 'm' || text[q] == 'M') &&
                   token_boundary(text, q + 1)) {
            scale = 1.0;
            unit_end = q + 1;
        }
        if (scale > 0.0) {
            if (negative) {
                throw Error("NegativeDepth", text.substr(start - 1, unit_end - start + 1),
                            "depth below zero meters");
            }
            return value * scale;
        }
        pos = p;
    }
    if (util::contains_token(text, "surface") || util::contains_token(text, "surf")) {
        return 0.0;
    }
    return std::nullopt;
}

std::optional<double> parse_depth_cell(const std::string& cell, const std::string& unit_hint) {
    const std::string t = util::trim(cell);
    if (t.empty()) return std::nullopt;
    if (auto tagged = parse_depth(t)) return tagged;

    double sign = 1.0;
    std::size_t pos = 0;
    if (t[0] == '-' || t[0] == '+') {
        if (t[0] == '-') sign = -1.0;
        pos = 1;
    }
    double value = 0.0;
    if (!read_number(t, pos, value)) return std::nullopt;
    skip_spaces(t, pos);
    if (pos != t.size()) return std::nullopt;

    const std::string hint = util::to_lower(util::trim(unit_hint));
    double scale = 1.0;
    if (hint == "km") scale = 1000.0;
    double depth = sign * value * scale;
    if (depth < 0.0) {
        throw Error("NegativeDepth", t, "depth below zero meters");
    }
    return depth;
}

std::string format_dms(double degrees, bool is_latitude) {
    const char hemi = degrees < 0.0 ? (is_latitude ? 'S' : 'W') : (is_latitude ? 'N' : 'E');
    double mag = std::fabs(degrees);
    int d = static_cast<int>(mag);
    double rem_minutes = (mag - d) * 60.0;
    int m = static_cast<int>(rem_minutes);
    double s = (rem_minutes - m) * 3600.0 / 60.0;
    // Round seconds to the printed precision first so carries propagate.
    s = std::round(s * 1e9) / 1e9;
    if (s >= 60.0) {
        s -= 60.0;
        ++m;
    }
    if (m >= 60) {
        m -= 60;
        ++d;
    }
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%d\xC2\xB0%02d'%012.9f\"%c", d, m, s, hemi);
    return buf;
}

} // namespace compass::geo
