#pragma once

#include <optional>
#include <string>
#include <vector>

namespace compass::geo {

struct CoordinatePair {
    std::optional<double> latitude;
    std::optional<double> longitude;
};

/// One hemisphere-tagged coordinate located in free text.
struct CoordinateMatch {
    double degrees = 0.0;      // signed: S and W are negative
    bool is_latitude = false;  // N/S vs E/W
    std::string raw;           // the matched substring, verbatim
    std::size_t offset = 0;    // byte offset into the scanned text
};

/// Finds every hemisphere-tagged coordinate in the text. Accepted forms:
/// decimal degrees ("36.5N", "36.5°N"), degrees-minutes ("36°30'N"),
/// degrees-decimal-minutes ("123°15.6'E"), and full DMS ("49°30'15\"N").
/// Throws Error("OutOfRange", raw, ...) when a match exceeds 90° (lat)
/// or 180° (lon). Unicode ° ′ ″ and their ASCII stand-ins both work.
std::vector<CoordinateMatch> scan_coordinates(const std::string& text);

/// First latitude and first longitude found in the text; either side may
/// stay unset. Never guesses: text without hemisphere letters yields an
/// empty pair.
CoordinatePair parse_coordinate(const std::string& text);

/// Parses one table cell whose axis is already known from its column:
/// signed decimal degrees ("−64.0", "36.5", "36.5°") or any hemisphere
/// form. Throws OutOfRange beyond ±90/±180; returns unset when the cell
/// is not a coordinate.
std::optional<double> parse_coordinate_cell(const std::string& cell, bool is_latitude);

/// Depth in meters from free text: "2000 m" → 2000, "2 km" → 2000,
/// "surface"/"surf." → 0. Unset when nothing matches. Throws
/// Error("NegativeDepth", raw, ...) on a negative depth mention.
std::optional<double> parse_depth(const std::string& text);

/// Depth from a bare-number cell plus the unit named by the column header
/// ("m" or "km"; empty hint defaults to meters). Same errors as parse_depth.
std::optional<double> parse_depth_cell(const std::string& cell, const std::string& unit_hint);

/// Fixed-format DMS rendering (seconds to 9 decimal places), suitable for
/// round-tripping through scan_coordinates within 1e-9 degrees.
std::string format_dms(double degrees, bool is_latitude);

} // namespace compass::geo
