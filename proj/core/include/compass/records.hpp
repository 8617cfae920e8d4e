#pragma once

#include <array>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace compass {

using json = nlohmann::ordered_json;

/// The eight measurement types carried by the unified dataset: elemental Pb
/// concentration, 210Pb activity concentration, and six stable-isotope ratios.
enum class MeasurementType {
    PbConc,
    Pb210Conc,
    R206_204,
    R207_204,
    R208_204,
    R206_207,
    R208_206,
    R208_207,
};

inline constexpr std::array<MeasurementType, 8> kAllMeasurementTypes = {
    MeasurementType::PbConc,    MeasurementType::Pb210Conc, MeasurementType::R206_204,
    MeasurementType::R207_204,  MeasurementType::R208_204,  MeasurementType::R206_207,
    MeasurementType::R208_206,  MeasurementType::R208_207,
};

std::string to_string(MeasurementType t);
std::optional<MeasurementType> measurement_type_from_string(const std::string& s);
bool is_isotope_ratio(MeasurementType t);

enum class Phase { Dissolved, Particulate, Total, Unknown };

std::string to_string(Phase p);
Phase phase_from_string(const std::string& s);

/// Where a record entered the unified dataset from.
enum class SourceKind { Extracted, Structured, Scattered };

std::string to_string(SourceKind k);
SourceKind source_kind_from_string(const std::string& s);

/// Pointer back to the exact table cell (or external-dataset row) a value
/// came from. Every exported record must resolve through this.
struct Provenance {
    std::string paper_id;
    std::optional<std::string> doi;
    std::string table_id;
    int row_index = 0;
    std::string column_header;
    std::string source_uri;

    bool operator==(const Provenance&) const = default;
};

/// One marine Pb measurement in the unified schema.
///
/// `provenance` is a list: the first entry is the primary source; merged
/// duplicates append the sources they absorbed. `flags` records processing
/// notes (association scopes, skip reasons, validation annotations).
struct PbRecord {
    std::string record_id;
    MeasurementType measurement_type = MeasurementType::PbConc;
    double value = 0.0;
    std::string unit;
    std::optional<double> latitude;
    std::optional<double> longitude;
    std::optional<double> depth_m;
    Phase phase = Phase::Unknown;
    std::optional<std::string> sample_date;
    std::vector<Provenance> provenance;
    std::set<std::string> flags;
    SourceKind source_kind = SourceKind::Extracted;

    bool has_location() const { return latitude.has_value() && longitude.has_value(); }
    bool has_flag(const std::string& f) const { return flags.count(f) > 0; }
};

json to_json(const Provenance& p);
Provenance provenance_from_json(const json& j);

json to_json(const PbRecord& r);
PbRecord record_from_json(const json& j);

} // namespace compass
