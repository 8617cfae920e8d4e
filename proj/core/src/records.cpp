#include "compass/records.hpp"

#include "compass/errors.hpp"

namespace compass {

std::string to_string(MeasurementType t) {
    switch (t) {
        case MeasurementType::PbConc: return "PbConc";
        case MeasurementType::Pb210Conc: return "Pb210Conc";
        case MeasurementType::R206_204: return "R206_204";
        case MeasurementType::R207_204: return "R207_204";
        case MeasurementType::R208_204: return "R208_204";
        case MeasurementType::R206_207: return "R206_207";
        case MeasurementType::R208_206: return "R208_206";
        case MeasurementType::R208_207: return "R208_207";
    }
    return "PbConc";
}

std::optional<MeasurementType> measurement_type_from_string(const std::string& s) {
    for (auto t : kAllMeasurementTypes) {
        if (to_string(t) == s) return t;
    }
    return std::nullopt;
}

bool is_isotope_ratio(MeasurementType t) {
    return t != MeasurementType::PbConc && t != MeasurementType::Pb210Conc;
}

std::string to_string(Phase p) {
    switch (p) {
        case Phase::Dissolved: return "dissolved";
        case Phase::Particulate: return "particulate";
        case Phase::Total: return "total";
        case Phase::Unknown: return "unknown";
    }
    return "unknown";
}

Phase phase_from_string(const std::string& s) {
    if (s == "dissolved") return Phase::Dissolved;
    if (s == "particulate") return Phase::Particulate;
    if (s == "total") return Phase::Total;
    return Phase::Unknown;
}

std::string to_string(SourceKind k) {
    switch (k) {
        case SourceKind::Extracted: return "extracted";
        case SourceKind::Structured: return "structured";
        case SourceKind::Scattered: return "scattered";
    }
    return "extracted";
}

SourceKind source_kind_from_string(const std::string& s) {
    if (s == "structured") return SourceKind::Structured;
    if (s == "scattered") return SourceKind::Scattered;
    return SourceKind::Extracted;
}

json to_json(const Provenance& p) {
    json j;
    j["paper_id"] = p.paper_id;
    if (p.doi) j["doi"] = *p.doi;
    j["table_id"] = p.table_id;
    j["row_index"] = p.row_index;
    j["column_header"] = p.column_header;
    j["source_uri"] = p.source_uri;
    return j;
}

Provenance provenance_from_json(const json& j) {
    Provenance p;
    p.paper_id = j.at("paper_id").get<std::string>();
    if (j.contains("doi") && !j["doi"].is_null()) p.doi = j["doi"].get<std::string>();
    p.table_id = j.value("table_id", std::string{});
    p.row_index = j.value("row_index", 0);
    p.column_header = j.value("column_header", std::string{});
    p.source_uri = j.value("source_uri", std::string{});
    return p;
}

json to_json(const PbRecord& r) {
    json j;
    j["record_id"] = r.record_id;
    j["measurement_type"] = to_string(r.measurement_type);
    j["value"] = r.value;
    j["unit"] = r.unit;
    j["latitude"] = r.latitude ? json(*r.latitude) : json(nullptr);
    j["longitude"] = r.longitude ? json(*r.longitude) : json(nullptr);
    j["depth_m"] = r.depth_m ? json(*r.depth_m) : json(nullptr);
    j["phase"] = to_string(r.phase);
    j["sample_date"] = r.sample_date ? json(*r.sample_date) : json(nullptr);
    j["provenance"] = json::array();
    for (const auto& p : r.provenance) j["provenance"].push_back(to_json(p));
    j["flags"] = json::array();
    for (const auto& f : r.flags) j["flags"].push_back(f);
    j["source_kind"] = to_string(r.source_kind);
    return j;
}

PbRecord record_from_json(const json& j) {
    PbRecord r;
    r.record_id = j.value("record_id", std::string{});
    const auto type_str = j.at("measurement_type").get<std::string>();
    auto t = measurement_type_from_string(type_str);
    if (!t) throw Error("UnknownMeasurementType", type_str, "not one of the 8 types");
    r.measurement_type = *t;
    r.value = j.at("value").get<double>();
    r.unit = j.value("unit", std::string{});
    if (j.contains("latitude") && !j["latitude"].is_null()) r.latitude = j["latitude"].get<double>();
    if (j.contains("longitude") && !j["longitude"].is_null())
        r.longitude = j["longitude"].get<double>();
    if (j.contains("depth_m") && !j["depth_m"].is_null()) r.depth_m = j["depth_m"].get<double>();
    r.phase = phase_from_string(j.value("phase", std::string{"unknown"}));
    if (j.contains("sample_date") && !j["sample_date"].is_null())
        r.sample_date = j["sample_date"].get<std::string>();
    if (j.contains("provenance")) {
        for (const auto& pj : j["provenance"]) r.provenance.push_back(provenance_from_json(pj));
    }
    if (j.contains("flags")) {
        for (const auto& f : j["flags"]) r.flags.insert(f.get<std::string>());
    }
    r.source_kind = source_kind_from_string(j.value("source_kind", std::string{"extracted"}));
    return r;
}

} // namespace compass
