#include "compass/extract.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>
#include <stdexcept>

#include "compass/errors.hpp"
#include "compass/geo.hpp"
#include "compass/util/digest.hpp"
#include "compass/util/text.hpp"

namespace compass::extract {

CellValue classify_cell(const std::string& raw) {
    const std::string trimmed = util::trim(raw);
    if (trimmed.empty()) return {CellKind::Empty, 0.0};
    if (trimmed.front() == '<') return {CellKind::BelowDetection, 0.0};

    const std::string lowered = util::to_lower(trimmed);
    static const std::set<std::string> bdl_markers = {
        "n.d.", "n.d", "nd", "bdl", "b.d.l.", "b.d.l", "below detection", "not detected",
    };
    if (bdl_markers.count(lowered)) return {CellKind::BelowDetection, 0.0};

    try {
        std::size_t used = 0;
        const double value = std::stod(trimmed, &used);
        if (!std::isfinite(value)) return {CellKind::NonNumeric, 0.0};
        std::string tail = util::trim(trimmed.substr(used));
        if (tail.empty() || tail.rfind("\xC2\xB1", 0) == 0 || tail.rfind("+/-", 0) == 0 ||
            tail.rfind("+-", 0) == 0)
            return {CellKind::Numeric, value};
        return {CellKind::NonNumeric, 0.0};
    } catch (const std::exception&) {
        return {CellKind::NonNumeric, 0.0};
    }
}

std::vector<std::string> composite_headers(const TableBlock& table) {
    std::vector<std::string> headers(table.width());
    for (const auto& header_row : table.header_rows) {
        for (std::size_t c = 0; c < headers.size() && c < header_row.size(); ++c) {
            const std::string cell = util::trim(header_row[c]);
            if (cell.empty()) continue;
            if (!headers[c].empty()) headers[c] += ' ';
            headers[c] += cell;
        }
    }
    return headers;
}

namespace {

bool looks_like_iso_date(const std::string& text) {
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') return false;
    for (std::size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u})
        if (!std::isdigit(static_cast<unsigned char>(text[i]))) return false;
    const int month = std::stoi(text.substr(5, 2));
    const int day = std::stoi(text.substr(8, 2));
    return month >= 1 && month <= 12 && day >= 1 && day <= 31;
}

std::optional<std::string> find_iso_date(const std::string& text) {
    for (std::size_t i = 0; i + 10 <= text.size(); ++i) {
        const bool boundary_before =
            i == 0 || !std::isalnum(static_cast<unsigned char>(text[i - 1]));
        const bool boundary_after =
            i + 10 == text.size() || !std::isalnum(static_cast<unsigned char>(text[i + 10]));
        if (!boundary_before || !boundary_after) continue;
        const std::string slice = text.substr(i, 10);
        if (looks_like_iso_date(slice)) return slice;
    }
    return std::nullopt;
}

json mappings_to_json(const std::vector<harmonize::HeaderMapping>& mappings) {
    json arr = json::array();
    for (const auto& mapping : mappings) {
        json item = {{"header", mapping.source_header},
                     {"field", harmonize::to_string(mapping.canonical_field)},
                     {"note", mapping.confidence_note}};
        if (mapping.measurement_type) item["measurement_type"] = to_string(*mapping.measurement_type);
        if (mapping.phase) item["phase"] = to_string(*mapping.phase);
        if (mapping.unit) item["unit"] = *mapping.unit;
        arr.push_back(item);
    }
    return arr;
}

const std::string& cell_at(const std::vector<std::string>& row, std::size_t index) {
    static const std::string empty;
    return index < row.size() ? row[index] : empty;
}

} // namespace

ExtractionResult extract_table_records(const ParsedPaper& paper, const TableBlock& table,
                                       classify::TableCategory category,
                                       const harmonize::HeaderAliasTable& aliases,
                                       const tree::KnowledgeTree* tree,
                                       gateway::LlmGateway* gateway,
                                       const ExtractOptions& options) {
    const std::string subject_id = paper.paper_id + ":" + table.table_id;
    if (!classify::is_target(category))
        throw Error("NonTargetTable", subject_id, "extraction only runs on target tables");

    const std::vector<std::string> headers = composite_headers(table);

    ExtractionResult result;
    validate::PipelineState local_state;
    validate::PipelineState& state = options.state ? *options.state : local_state;
    std::string headers_joined;
    for (const auto& header : headers) headers_joined += header + "\x1f";

    auto normalized = validate::execute_with_rollback(
        "normalize_headers", subject_id, util::digest_hex(headers_joined),
        [&]() -> json {
            result.mappings = harmonize::normalize_headers(headers, aliases, tree, gateway);
            return mappings_to_json(result.mappings);
        },
        state, options.max_attempts);
    if (!normalized)
        throw Error("QuarantinedSubject", subject_id,
                    "header normalization stayed unusable after " +
                        std::to_string(options.max_attempts) + " attempts");

    std::vector<std::size_t> value_cols;
    std::optional<std::size_t> lat_col, lon_col, depth_col, phase_col, date_col, station_col,
        unit_col;
    for (std::size_t c = 0; c < result.mappings.size(); ++c) {
        const auto& mapping = result.mappings[c];
        switch (mapping.canonical_field) {
        case harmonize::CanonicalField::MeasurementValue:
            if (mapping.measurement_type) value_cols.push_back(c);
            break;
        case harmonize::CanonicalField::Latitude:
            if (!lat_col) lat_col = c;
            break;
        case harmonize::CanonicalField::Longitude:
            if (!lon_col) lon_col = c;
            break;
        case harmonize::CanonicalField::DepthM:
            if (!depth_col) depth_col = c;
            break;
        case harmonize::CanonicalField::Phase:
            if (!phase_col) phase_col = c;
            break;
        case harmonize::CanonicalField::SampleDate:
            if (!date_col) date_col = c;
            break;
        case harmonize::CanonicalField::StationLabel:
            if (!station_col) station_col = c;
            break;
        case harmonize::CanonicalField::Unit:
            if (!unit_col) unit_col = c;
            break;
        default: break;
        }
    }

    for (std::size_t r = 0; r < table.data_rows.size(); ++r) {
        const auto& row = table.data_rows[r];

        std::optional<double> row_lat, row_lon, row_depth;
        std::optional<std::string> row_date, row_station, row_unit;
        std::optional<Phase> row_phase;
        std::set<std::string> row_flags;

        if (lat_col && lon_col) {
            std::optional<double> lat, lon;
            try {
                lat = geo::parse_coordinate_cell(cell_at(row, *lat_col), true);
                lon = geo::parse_coordinate_cell(cell_at(row, *lon_col), false);
            } catch (const Error&) {
                row_flags.insert("coord_out_of_range");
            }
            if (lat && lon) {
                row_lat = lat;
                row_lon = lon;
                row_flags.insert("coord_from_row");
            } else if (lat || lon) {
                row_flags.insert("coord_partial_row");
            }
        }
        if (depth_col) {
            const auto& mapping = result.mappings[*depth_col];
            try {
                row_depth = geo::parse_depth_cell(cell_at(row, *depth_col),
                                                  mapping.unit.value_or("m"));
                if (row_depth) row_flags.insert("depth_from_row");
            } catch (const Error&) {
                row_flags.insert("negative_depth");
            }
        }
        if (date_col) {
            const std::string cell = util::trim(cell_at(row, *date_col));
            if (looks_like_iso_date(cell)) {
                row_date = cell;
                row_flags.insert("date_from_row");
            }
        }
        if (station_col) {
            const std::string cell = util::trim(cell_at(row, *station_col));
            if (!cell.empty()) row_station = cell;
        }
        if (phase_col) {
            const std::string cell = util::to_lower(util::trim(cell_at(row, *phase_col)));
            if (!cell.empty()) row_phase = phase_from_string(cell);
        }
        if (unit_col) {
            const std::string cell = util::trim(cell_at(row, *unit_col));
            if (!cell.empty()) row_unit = cell;
        }

        for (std::size_t c : value_cols) {
            const std::string& raw = cell_at(row, c);
            const CellValue cell = classify_cell(raw);
            const auto& mapping = result.mappings[c];

            if (cell.kind != CellKind::Numeric) {
                SkippedCell skipped;
                skipped.paper_id = paper.paper_id;
                skipped.table_id = table.table_id;
                skipped.row_index = static_cast<int>(r);
                skipped.column_header = headers[c];
                skipped.raw_text = raw;
                skipped.flag = cell.kind == CellKind::Empty           ? "empty_cell"
                               : cell.kind == CellKind::BelowDetection ? "bdl_skipped"
                                                                       : "non_numeric_cell";
                result.skipped.push_back(std::move(skipped));
                continue;
            }

            PbRecord record;
            record.record_id = paper.paper_id + ":" + table.table_id + ":r" + std::to_string(r) +
                               ":c" + std::to_string(c);
            record.measurement_type = *mapping.measurement_type;
            record.value = cell.number;
            if (row_unit)
                record.unit = *row_unit;
            else
                record.unit = mapping.unit.value_or("");
            record.latitude = row_lat;
            record.longitude = row_lon;
            record.depth_m = row_depth;
            record.sample_date = row_date;
            if (row_phase)
                record.phase = *row_phase;
            else if (mapping.phase)
                record.phase = *mapping.phase;
            record.flags = row_flags;
            if (row_station) record.flags.insert("station_label:" + *row_station);
            record.source_kind = SourceKind::Extracted;

            Provenance prov;
            prov.paper_id = paper.paper_id;
            prov.doi = paper.doi;
            prov.table_id = table.table_id;
            prov.row_index = static_cast<int>(r);
            prov.column_header = headers[c];
            prov.source_uri = paper.source_uri;
            record.provenance.push_back(std::move(prov));

            result.drafts.push_back(std::move(record));
        }
    }
    return result;
}

namespace {

std::string station_after_keyword(const std::string& text) {
    const auto tokens = util::tokenize_alnum(text);
    for (std::size_t i = 0; i + 1 < tokens.size(); ++i) {
        const std::string lowered = util::to_lower(tokens[i]);
        if (lowered == "station" || lowered == "sta" || lowered == "stn")
            return tokens[i + 1];
    }
    return "";
}

std::optional<std::pair<double, double>> first_coordinate_pair(const std::string& text) {
    std::vector<geo::CoordinateMatch> matches;
    try {
        matches = geo::scan_coordinates(text);
    } catch (const Error&) {
        return std::nullopt; // out-of-range text cannot anchor a record
    }
    std::optional<double> lat, lon;
    for (const auto& match : matches) {
        if (match.is_latitude && !lat) lat = match.degrees;
        if (!match.is_latitude && !lon) lon = match.degrees;
        if (lat && lon) break;
    }
    if (!lat || !lon) return std::nullopt;
    return std::make_pair(*lat, *lon);
}

std::vector<FoundCoordinate> gather_coordinates(const std::string& scope, const TableBlock& table,
                                                const ParsedPaper& paper,
                                                const harmonize::HeaderAliasTable& aliases) {
    std::vector<FoundCoordinate> found;
    if (scope == "footnote") {
        for (const auto& note : table.footnotes) {
            if (auto pair = first_coordinate_pair(note))
                found.push_back(
                    {pair->first, pair->second, scope, station_after_keyword(note), note});
        }
    } else if (scope == "caption") {
        if (auto pair = first_coordinate_pair(table.caption))
            found.push_back({pair->first, pair->second, scope,
                             station_after_keyword(table.caption), table.caption});
    } else if (scope == "sibling_table") {
        for (const auto& sibling : paper.tables) {
            if (sibling.table_id == table.table_id) continue;
            const auto headers = composite_headers(sibling);
            std::optional<std::size_t> lat_col, lon_col, station_col;
            for (std::size_t c = 0; c < headers.size(); ++c) {
                auto mapping = aliases.lookup(headers[c]);
                if (!mapping) continue;
                if (mapping->canonical_field == harmonize::CanonicalField::Latitude && !lat_col)
                    lat_col = c;
                if (mapping->canonical_field == harmonize::CanonicalField::Longitude && !lon_col)
                    lon_col = c;
                if (mapping->canonical_field == harmonize::CanonicalField::StationLabel &&
                    !station_col)
                    station_col = c;
            }
            if (!lat_col || !lon_col) continue;
            for (const auto& row : sibling.data_rows) {
                std::optional<double> lat, lon;
                try {
                    lat = geo::parse_coordinate_cell(cell_at(row, *lat_col), true);
                    lon = geo::parse_coordinate_cell(cell_at(row, *lon_col), false);
                } catch (const Error&) {
                    continue;
                }
                if (!lat || !lon) continue;
                FoundCoordinate candidate;
                candidate.latitude = *lat;
                candidate.longitude = *lon;
                candidate.scope = scope;
                if (station_col) candidate.station = util::trim(cell_at(row, *station_col));
                candidate.raw = sibling.table_id + " row coordinates";
                found.push_back(std::move(candidate));
            }
        }
    } else if (scope == "body") {
        for (const auto& section : paper.sections) {
            if (auto pair = first_coordinate_pair(section.text))
                found.push_back({pair->first, pair->second, scope,
                                 station_after_keyword(section.text), section.text});
        }
    }
    return found;
}

bool same_point(const FoundCoordinate& a, const FoundCoordinate& b) {
    return std::fabs(a.latitude - b.latitude) <= 1e-9 &&
           std::fabs(a.longitude - b.longitude) <= 1e-9;
}

std::vector<FoundCoordinate> distinct_points(const std::vector<FoundCoordinate>& candidates) {
    std::vector<FoundCoordinate> distinct;
    for (const auto& candidate : candidates) {
        bool seen = false;
        for (const auto& kept : distinct)
            if (same_point(kept, candidate)) seen = true;
        if (!seen) distinct.push_back(candidate);
    }
    return distinct;
}

std::string draft_station(const PbRecord& record) {
    for (const auto& flag : record.flags)
        if (flag.rfind("station_label:", 0) == 0) return flag.substr(14);
    return "";
}

} // namespace

std::vector<PbRecord> associate_metadata(std::vector<PbRecord> drafts, const TableBlock& table,
                                         const ParsedPaper& paper,
                                         const harmonize::HeaderAliasTable& aliases,
                                         AssociationContext* context) {
    static const std::vector<std::string> coordinate_scopes = {"footnote", "caption",
                                                               "sibling_table", "body"};

    std::vector<bool> coord_done(drafts.size(), false);
    for (std::size_t i = 0; i < drafts.size(); ++i)
        if (drafts[i].has_location()) coord_done[i] = true;

    for (const auto& scope : coordinate_scopes) {
        if (std::all_of(coord_done.begin(), coord_done.end(), [](bool b) { return b; })) break;
        const auto candidates = gather_coordinates(scope, table, paper, aliases);
        if (candidates.empty()) continue;
        if (context)
            context->coordinates_found.insert(context->coordinates_found.end(),
                                              candidates.begin(), candidates.end());
        const bool any_labeled = std::any_of(candidates.begin(), candidates.end(),
                                             [](const auto& c) { return !c.station.empty(); });
        const auto all_distinct = distinct_points(candidates);

        for (std::size_t i = 0; i < drafts.size(); ++i) {
            if (coord_done[i]) continue;
            PbRecord& draft = drafts[i];
            const std::string station = util::to_lower(draft_station(draft));

            std::vector<FoundCoordinate> pool;
            if (!station.empty()) {
                for (const auto& candidate : candidates)
                    if (util::to_lower(candidate.station) == station) pool.push_back(candidate);
                if (pool.empty()) {
                    if (any_labeled) continue; // labels exist, none match this draft: look deeper
                    pool = all_distinct;
                } else {
                    pool = distinct_points(pool);
                }
            } else {
                pool = all_distinct;
            }

            if (pool.size() == 1) {
                draft.latitude = pool.front().latitude;
                draft.longitude = pool.front().longitude;
                draft.flags.insert("coord_from_" + scope);
                coord_done[i] = true;
            } else if (pool.size() >= 2) {
                draft.flags.insert("coord_ambiguous");
                coord_done[i] = true; // nearest scope is ambiguous; stop descending
            }
        }
    }

    static const std::vector<std::string> text_scopes = {"footnote", "caption"};

    auto texts_for = [&](const std::string& scope) {
        std::vector<std::string> texts;
        if (scope == "footnote")
            texts = table.footnotes;
        else
            texts.push_back(table.caption);
        return texts;
    };

    bool depth_missing = std::any_of(drafts.begin(), drafts.end(),
                                     [](const PbRecord& r) { return !r.depth_m.has_value(); });
    for (const auto& scope : text_scopes) {
        if (!depth_missing) break;
        std::vector<std::pair<double, std::string>> found;
        for (const auto& text : texts_for(scope)) {
            try {
                if (auto depth = geo::parse_depth(text)) found.push_back({*depth, text});
            } catch (const Error&) {
            }
        }
        if (found.empty()) continue;
        if (context)
            for (const auto& [depth, raw] : found)
                context->depths_found.push_back({depth, scope, raw});
        std::vector<double> distinct;
        for (const auto& [depth, raw] : found) {
            bool seen = false;
            for (double kept : distinct)
                if (std::fabs(kept - depth) <= 1e-9) seen = true;
            if (!seen) distinct.push_back(depth);
        }
        for (auto& draft : drafts) {
            if (draft.depth_m.has_value()) continue;
            if (distinct.size() == 1) {
                draft.depth_m = distinct.front();
                draft.flags.insert("depth_from_" + scope);
            } else {
                draft.flags.insert("depth_ambiguous");
            }
        }
        break; // nearest scope with any depth text decides
    }

    bool date_missing = std::any_of(drafts.begin(), drafts.end(),
                                    [](const PbRecord& r) { return !r.sample_date.has_value(); });
    for (const auto& scope : text_scopes) {
        if (!date_missing) break;
        std::vector<std::pair<std::string, std::string>> found;
        for (const auto& text : texts_for(scope)) {
            if (auto date = find_iso_date(text)) found.push_back({*date, text});
        }
        if (found.empty()) continue;
        if (context)
            for (const auto& [date, raw] : found) context->dates_found.push_back({date, scope, raw});
        std::set<std::string> distinct;
        for (const auto& [date, raw] : found) distinct.insert(date);
        for (auto& draft : drafts) {
            if (draft.sample_date.has_value()) continue;
            if (distinct.size() == 1) {
                draft.sample_date = *distinct.begin();
                draft.flags.insert("date_from_" + scope);
            } else {
                draft.flags.insert("date_ambiguous");
            }
        }
        break;
    }

    for (auto& draft : drafts)
        if (!draft.has_location()) draft.flags.insert("unlocated");
    return drafts;
}

} // namespace compass::extract
