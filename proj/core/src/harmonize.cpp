#include "compass/harmonize.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <tuple>

#include "compass/errors.hpp"
#include "compass/util/csv.hpp"
#include "compass/util/digest.hpp"
#include "compass/util/text.hpp"

namespace compass::harmonize {

std::string to_string(CanonicalField field) {
    switch (field) {
    case CanonicalField::MeasurementValue: return "measurement_type";
    case CanonicalField::Value: return "value";
    case CanonicalField::Unit: return "unit";
    case CanonicalField::Latitude: return "latitude";
    case CanonicalField::Longitude: return "longitude";
    case CanonicalField::DepthM: return "depth_m";
    case CanonicalField::Phase: return "phase";
    case CanonicalField::SampleDate: return "sample_date";
    case CanonicalField::StationLabel: return "station_label";
    case CanonicalField::Ignore: return "ignore";
    }
    return "ignore";
}

std::optional<CanonicalField> canonical_field_from_string(const std::string& text) {
    static const std::map<std::string, CanonicalField> table = {
        {"measurement_type", CanonicalField::MeasurementValue},
        {"value", CanonicalField::Value},
        {"unit", CanonicalField::Unit},
        {"latitude", CanonicalField::Latitude},
        {"longitude", CanonicalField::Longitude},
        {"depth_m", CanonicalField::DepthM},
        {"phase", CanonicalField::Phase},
        {"sample_date", CanonicalField::SampleDate},
        {"station_label", CanonicalField::StationLabel},
        {"ignore", CanonicalField::Ignore},
    };
    auto it = table.find(text);
    if (it == table.end()) return std::nullopt;
    return it->second;
}

namespace {

std::string normalize_header_text(const std::string& header) {
    std::string lowered = util::to_lower(util::trim(header));
    std::string out;
    bool in_space = false;
    for (char c : lowered) {
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
            in_space = true;
            continue;
        }
        if (in_space && !out.empty()) out += ' ';
        in_space = false;
        out += c;
    }
    return out;
}

struct StrippedHeader {
    std::string core;
    std::string paren_text;
};

StrippedHeader strip_trailing_parens(const std::string& normalized) {
    StrippedHeader out{normalized, ""};
    if (normalized.empty() || normalized.back() != ')') return out;
    auto open = normalized.rfind('(');
    if (open == std::string::npos) return out;
    out.core = util::trim(normalized.substr(0, open));
    out.paren_text = normalized.substr(open + 1, normalized.size() - open - 2);
    return out;
}

} // namespace

HeaderAliasTable::HeaderAliasTable(const json& doc) {
    const json* aliases = &doc;
    if (doc.is_object() && doc.contains("aliases")) aliases = &doc["aliases"];
    if (!aliases->is_object())
        throw Error("MalformedAliasTable", "", "expected an object of header -> mapping");
    for (const auto& [header, value] : aliases->items()) {
        Entry entry;
        if (value.is_string()) {
            auto field = canonical_field_from_string(value.get<std::string>());
            if (!field)
                throw Error("MalformedAliasTable", header,
                            "unknown canonical field " + value.get<std::string>());
            entry.field = *field;
        } else if (value.is_object()) {
            if (!value.contains("field") || !value["field"].is_string())
                throw Error("MalformedAliasTable", header, "mapping needs a field name");
            auto field = canonical_field_from_string(value["field"].get<std::string>());
            if (!field)
                throw Error("MalformedAliasTable", header,
                            "unknown canonical field " + value["field"].get<std::string>());
            entry.field = *field;
            if (value.contains("measurement_type")) {
                entry.measurement_type =
                    measurement_type_from_string(value["measurement_type"].get<std::string>());
                if (!entry.measurement_type)
                    throw Error("MalformedAliasTable", header, "unknown measurement type");
            }
            if (value.contains("phase"))
                entry.phase = phase_from_string(value["phase"].get<std::string>());
            if (value.contains("unit")) entry.unit = value["unit"].get<std::string>();
        } else {
            throw Error("MalformedAliasTable", header, "mapping must be a string or object");
        }
        entries_[normalize_header_text(header)] = entry;
    }
}

namespace {

const char* kBuiltinAliasesJson = R"JSON({
  "aliases": {
    "date": "sample_date",
    "sampling date": "sample_date",
    "sample date": "sample_date",
    "depth": "depth_m",
    "lat": "latitude",
    "lat.": "latitude",
    "latitude": "latitude",
    "lon": "longitude",
    "lon.": "longitude",
    "long.": "longitude",
    "longitude": "longitude",
    "station": "station_label",
    "sta": "station_label",
    "sta.": "station_label",
    "site": "station_label",
    "diss. pb": {"field": "measurement_type", "measurement_type": "PbConc", "phase": "dissolved"},
    "dissolved pb": {"field": "measurement_type", "measurement_type": "PbConc", "phase": "dissolved"},
    "part. pb": {"field": "measurement_type", "measurement_type": "PbConc", "phase": "particulate"},
    "particulate pb": {"field": "measurement_type", "measurement_type": "PbConc", "phase": "particulate"},
    "total pb": {"field": "measurement_type", "measurement_type": "PbConc", "phase": "total"},
    "pb": {"field": "measurement_type", "measurement_type": "PbConc"},
    "pb conc.": {"field": "measurement_type", "measurement_type": "PbConc"},
    "pb concentration": {"field": "measurement_type", "measurement_type": "PbConc"},
    "210pb": {"field": "measurement_type", "measurement_type": "Pb210Conc"},
    "210pb activity": {"field": "measurement_type", "measurement_type": "Pb210Conc"},
    "salinity": "ignore",
    "temp": "ignore",
    "temperature": "ignore",
    "chl-a": "ignore",
    "oxygen": "ignore",
    "sigma-theta": "ignore",
    "unit": "unit",
    "units": "unit",
    "value": "value"
  }
})JSON";

} // namespace

HeaderAliasTable HeaderAliasTable::builtin() {
    return HeaderAliasTable(json::parse(kBuiltinAliasesJson));
}

HeaderAliasTable HeaderAliasTable::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw Error("MalformedAliasTable", path, "cannot open alias file");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw Error("MalformedAliasTable", path, e.what());
    }
    return HeaderAliasTable(doc);
}

std::optional<HeaderMapping> HeaderAliasTable::lookup(const std::string& header) const {
    const std::string normalized = normalize_header_text(header);
    if (normalized.empty()) return std::nullopt;

    auto build = [&](const Entry& entry, const std::string& captured_unit) {
        HeaderMapping mapping;
        mapping.source_header = header;
        mapping.canonical_field = entry.field;
        mapping.confidence_note = "alias";
        mapping.measurement_type = entry.measurement_type;
        mapping.phase = entry.phase;
        if (!captured_unit.empty())
            mapping.unit = captured_unit;
        else
            mapping.unit = entry.unit;
        return mapping;
    };

    if (auto it = entries_.find(normalized); it != entries_.end())
        return build(it->second, "");

    const StrippedHeader stripped = strip_trailing_parens(normalized);
    if (!stripped.paren_text.empty()) {
        if (auto it = entries_.find(stripped.core); it != entries_.end())
            return build(it->second, stripped.paren_text);
    }
    return std::nullopt;
}

std::optional<MeasurementType> parse_isotope_header(const std::string& header) {
    const std::string normalized = strip_trailing_parens(normalize_header_text(header)).core;
    std::string compact;
    for (std::size_t i = 0; i < normalized.size(); ++i) {
        const char c = normalized[i];
        if (c == '$' || c == '^' || c == '{' || c == '}' || c == ' ' || c == '-') continue;
        if (c == 'p' && i + 1 < normalized.size() && normalized[i + 1] == 'b') {
            ++i;
            continue;
        }
        compact += c;
    }
    static const std::map<std::string, MeasurementType> ratios = {
        {"206/204", MeasurementType::R206_204}, {"207/204", MeasurementType::R207_204},
        {"208/204", MeasurementType::R208_204}, {"206/207", MeasurementType::R206_207},
        {"208/206", MeasurementType::R208_206}, {"208/207", MeasurementType::R208_207},
    };
    auto it = ratios.find(compact);
    if (it == ratios.end()) return std::nullopt;
    return it->second;
}

std::string build_normalization_context(const std::vector<std::string>& unresolved_headers) {
    std::string context = "Column headers that need schema mapping:\n";
    for (const auto& header : unresolved_headers) context += "- " + header + "\n";
    context +=
        "Reply with JSON {\"mappings\": [{\"header\": original text, \"field\": canonical field, "
        "\"measurement_type\"?, \"phase\"?, \"unit\"?}]} covering every header above.";
    return context;
}

std::vector<HeaderMapping> normalize_headers(const std::vector<std::string>& headers,
                                             const HeaderAliasTable& aliases,
                                             const tree::KnowledgeTree* tree,
                                             gateway::LlmGateway* gateway,
                                             NormalizationTrace* trace) {
    if (headers.empty())
        throw Error("InvalidArgument", "headers", "nothing to normalize");

    std::vector<HeaderMapping> mappings(headers.size());
    std::vector<std::size_t> unresolved;
    for (std::size_t i = 0; i < headers.size(); ++i) {
        if (auto hit = aliases.lookup(headers[i])) {
            mappings[i] = *hit;
            continue;
        }
        if (auto ratio = parse_isotope_header(headers[i])) {
            mappings[i].source_header = headers[i];
            mappings[i].canonical_field = CanonicalField::MeasurementValue;
            mappings[i].confidence_note = "isotope-notation";
            mappings[i].measurement_type = ratio;
            mappings[i].unit = "dimensionless";
            continue;
        }
        mappings[i].source_header = headers[i];
        mappings[i].canonical_field = CanonicalField::Ignore;
        mappings[i].confidence_note = "unresolved";
        unresolved.push_back(i);
    }

    if (!unresolved.empty() && tree != nullptr && gateway != nullptr) {
        std::vector<std::string> pending;
        for (std::size_t i : unresolved) pending.push_back(headers[i]);
        if (trace) trace->sent_to_backend = pending;

        gateway::CompletionRequest request;
        request.bundle = tree::assemble_prompt(*tree, tree::node_ids::kHeaderNormalization,
                                               build_normalization_context(pending));
        request.request_tag = "normalize_headers";
        if (trace)
            trace->backend_digest =
                util::prompt_digest(request.bundle.system_text, request.bundle.user_text);

        const gateway::Completion completion = gateway->complete(request);
        const json doc =
            gateway::parse_structured(completion, gateway::header_mappings_schema());

        for (const auto& item : doc["mappings"]) {
            if (!item.is_object() || !item.contains("header") || !item.contains("field"))
                continue;
            const std::string header = item["header"].get<std::string>();
            auto field = canonical_field_from_string(item["field"].get<std::string>());
            if (!field) continue;
            for (std::size_t i : unresolved) {
                if (headers[i] != header) continue;
                mappings[i].canonical_field = *field;
                mappings[i].confidence_note = "backend";
                if (item.contains("measurement_type") && item["measurement_type"].is_string())
                    mappings[i].measurement_type =
                        measurement_type_from_string(item["measurement_type"].get<std::string>());
                if (item.contains("phase") && item["phase"].is_string())
                    mappings[i].phase = phase_from_string(item["phase"].get<std::string>());
                if (item.contains("unit") && item["unit"].is_string())
                    mappings[i].unit = item["unit"].get<std::string>();
            }
        }
    }
    return mappings;
}

// ---------------------------------------------------------------------------
// Units
// ---------------------------------------------------------------------------

std::string to_string(Dimension d) {
    switch (d) {
    case Dimension::MolarPerMass: return "molar_per_mass";
    case Dimension::MassPerMass: return "mass_per_mass";
    case Dimension::MolarPerVolume: return "molar_per_volume";
    case Dimension::MassPerVolume: return "mass_per_volume";
    case Dimension::ActivityPerVolume: return "activity_per_volume";
    case Dimension::ActivityPerMass: return "activity_per_mass";
    case Dimension::Dimensionless: return "dimensionless";
    }
    return "dimensionless";
}

std::optional<Dimension> dimension_from_string(const std::string& text) {
    static const std::map<std::string, Dimension> table = {
        {"molar_per_mass", Dimension::MolarPerMass},
        {"mass_per_mass", Dimension::MassPerMass},
        {"molar_per_volume", Dimension::MolarPerVolume},
        {"mass_per_volume", Dimension::MassPerVolume},
        {"activity_per_volume", Dimension::ActivityPerVolume},
        {"activity_per_mass", Dimension::ActivityPerMass},
        {"dimensionless", Dimension::Dimensionless},
    };
    auto it = table.find(text);
    if (it == table.end()) return std::nullopt;
    return it->second;
}

namespace {

const char* kBuiltinRegistryJson = R"JSON({
  "constants": {
    "dpm_per_bq": 60.0,
    "pb_molar_mass_g_per_mol": 207.2,
    "seawater_density_kg_per_m3": 1025.0
  },
  "units": [
    {"symbol": "", "dimension": "dimensionless", "factor_to_base": 1.0},
    {"symbol": "Bq/kg", "dimension": "activity_per_mass", "factor_to_base": 1000.0},
    {"symbol": "Bq/m3", "dimension": "activity_per_volume", "factor_to_base": 1000.0},
    {"symbol": "dimensionless", "dimension": "dimensionless", "factor_to_base": 1.0},
    {"symbol": "dpm/100kg", "dimension": "activity_per_mass", "factor_to_base": 0.16666666666666666},
    {"symbol": "dpm/L", "dimension": "activity_per_volume", "factor_to_base": 16666.666666666668},
    {"symbol": "dpm/kg", "dimension": "activity_per_mass", "factor_to_base": 16.666666666666668},
    {"symbol": "mBq/L", "dimension": "activity_per_volume", "factor_to_base": 1000.0},
    {"symbol": "mBq/kg", "dimension": "activity_per_mass", "factor_to_base": 1.0},
    {"symbol": "mBq/m3", "dimension": "activity_per_volume", "factor_to_base": 1.0},
    {"symbol": "nM", "dimension": "molar_per_volume", "factor_to_base": 1000.0},
    {"symbol": "ng/L", "dimension": "mass_per_volume", "factor_to_base": 1.0},
    {"symbol": "ng/g", "dimension": "mass_per_mass", "factor_to_base": 1000.0},
    {"symbol": "ng/kg", "dimension": "mass_per_mass", "factor_to_base": 1.0},
    {"symbol": "nmol/L", "dimension": "molar_per_volume", "factor_to_base": 1000.0},
    {"symbol": "nmol/kg", "dimension": "molar_per_mass", "factor_to_base": 1000.0},
    {"symbol": "pM", "dimension": "molar_per_volume", "factor_to_base": 1.0},
    {"symbol": "pmol/L", "dimension": "molar_per_volume", "factor_to_base": 1.0},
    {"symbol": "pmol/kg", "dimension": "molar_per_mass", "factor_to_base": 1.0},
    {"symbol": "ratio", "dimension": "dimensionless", "factor_to_base": 1.0},
    {"symbol": "ug/L", "dimension": "mass_per_volume", "factor_to_base": 1000.0},
    {"symbol": "ug/kg", "dimension": "mass_per_mass", "factor_to_base": 1000.0},
    {"symbol": "umol/kg", "dimension": "molar_per_mass", "factor_to_base": 1000000.0},
    {"symbol": "µg/L", "dimension": "mass_per_volume", "factor_to_base": 1000.0},
    {"symbol": "µg/kg", "dimension": "mass_per_mass", "factor_to_base": 1000.0},
    {"symbol": "µmol/kg", "dimension": "molar_per_mass", "factor_to_base": 1000000.0}
  ]
})JSON";

bool is_concentration(Dimension d) {
    return d == Dimension::MolarPerMass || d == Dimension::MassPerMass ||
           d == Dimension::MolarPerVolume || d == Dimension::MassPerVolume;
}

bool is_activity(Dimension d) {
    return d == Dimension::ActivityPerVolume || d == Dimension::ActivityPerMass;
}

struct RefFactor {
    double factor = 1.0;       // base unit of the dimension -> family reference unit
    bool uses_molar_mass = false;
    bool uses_density = false;
};

// Concentration family reference: pmol/kg. Activity family reference: mBq/m3.
RefFactor to_family_reference(Dimension d) {
    switch (d) {
    case Dimension::MolarPerMass: return {1.0, false, false};
    case Dimension::MassPerMass: return {1000.0 / kPbMolarMassGPerMol, true, false};
    case Dimension::MolarPerVolume: return {1.0 / 1.025, false, true};
    case Dimension::MassPerVolume:
        return {(1.0 / 1.025) * (1000.0 / kPbMolarMassGPerMol), true, true};
    case Dimension::ActivityPerVolume: return {1.0, false, false};
    case Dimension::ActivityPerMass: return {kSeawaterDensityKgPerM3, false, true};
    case Dimension::Dimensionless: return {1.0, false, false};
    }
    return {1.0, false, false};
}

struct Bridge {
    double factor = 1.0;
    std::vector<std::string> constants_used;
    bool uses_molar_mass = false;
};

Bridge bridge_dimensions(Dimension from, Dimension to) {
    if (from == to) return {1.0, {}, false};
    const bool compatible = (is_concentration(from) && is_concentration(to)) ||
                            (is_activity(from) && is_activity(to));
    if (!compatible)
        throw Error("DimensionalMismatch", to_string(from),
                    "no physical bridge to " + to_string(to));
    const RefFactor a = to_family_reference(from);
    const RefFactor b = to_family_reference(to);
    Bridge bridge;
    bridge.factor = a.factor / b.factor;
    if (a.uses_molar_mass != b.uses_molar_mass) {
        bridge.constants_used.push_back("pb_molar_mass_g_per_mol=207.2");
        bridge.uses_molar_mass = true;
    }
    if (a.uses_density != b.uses_density)
        bridge.constants_used.push_back("seawater_density_kg_per_m3=1025");
    return bridge;
}

} // namespace

UnitRegistry::UnitRegistry(const json& doc) {
    if (!doc.is_object() || !doc.contains("units") || !doc["units"].is_array())
        throw Error("MalformedRegistry", "", "expected {constants, units: [...]}");
    for (const auto& entry : doc["units"]) {
        if (!entry.contains("symbol") || !entry.contains("dimension") ||
            !entry.contains("factor_to_base"))
            throw Error("MalformedRegistry", entry.dump(),
                        "unit needs symbol, dimension, factor_to_base");
        UnitDef unit;
        unit.symbol = entry["symbol"].get<std::string>();
        auto dim = dimension_from_string(entry["dimension"].get<std::string>());
        if (!dim)
            throw Error("MalformedRegistry", unit.symbol,
                        "unknown dimension " + entry["dimension"].get<std::string>());
        unit.dimension = *dim;
        unit.factor_to_base = entry["factor_to_base"].get<double>();
        if (!(unit.factor_to_base > 0.0))
            throw Error("MalformedRegistry", unit.symbol, "factor_to_base must be positive");
        units_[unit.symbol] = unit;
    }
}

UnitRegistry UnitRegistry::builtin() { return UnitRegistry(json::parse(kBuiltinRegistryJson)); }

UnitRegistry UnitRegistry::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw Error("MalformedRegistry", path, "cannot open registry file");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw Error("MalformedRegistry", path, e.what());
    }
    return UnitRegistry(doc);
}

std::string UnitRegistry::canonical_unit(MeasurementType mtype) {
    switch (mtype) {
    case MeasurementType::PbConc: return "pmol/kg";
    case MeasurementType::Pb210Conc: return "mBq/m3";
    default: return "dimensionless";
    }
}

Dimension UnitRegistry::canonical_dimension(MeasurementType mtype) {
    switch (mtype) {
    case MeasurementType::PbConc: return Dimension::MolarPerMass;
    case MeasurementType::Pb210Conc: return Dimension::ActivityPerVolume;
    default: return Dimension::Dimensionless;
    }
}

const UnitDef* UnitRegistry::find(const std::string& symbol) const {
    auto it = units_.find(util::trim(symbol));
    if (it == units_.end()) return nullptr;
    return &it->second;
}

ConversionResult UnitRegistry::convert(double value, const std::string& from_unit,
                                       MeasurementType mtype) const {
    const UnitDef* from = find(from_unit);
    if (from == nullptr)
        throw Error("UnknownUnit", from_unit, "unit is not in the registry");

    const std::string canon_symbol = canonical_unit(mtype);
    const UnitDef* canon = find(canon_symbol);
    if (canon == nullptr)
        throw Error("MalformedRegistry", canon_symbol, "canonical unit missing from registry");

    const Bridge bridge = bridge_dimensions(from->dimension, canon->dimension);
    const double factor = from->factor_to_base * bridge.factor / canon->factor_to_base;

    ConversionResult result;
    result.value = value * factor;
    result.conversion.from_unit = from->symbol;
    result.conversion.to_unit = canon_symbol;
    result.conversion.kind = bridge.uses_molar_mass ? "mass_to_molar" : "linear_factor";
    result.conversion.factor = factor;
    result.conversion.offset = 0.0;
    result.conversion.constants_used = bridge.constants_used;
    return result;
}

UnitDef UnitRegistry::vet_proposal(const json& proposal, MeasurementType mtype) const {
    for (const char* key : {"from_unit", "dimension", "factor_to_base", "inverse_factor"})
        if (!proposal.contains(key))
            throw Error("ConversionRejected", "proposal", std::string("missing field ") + key);

    const std::string symbol = proposal["from_unit"].get<std::string>();
    auto dim = dimension_from_string(proposal["dimension"].get<std::string>());
    if (!dim)
        throw Error("ConversionRejected", symbol,
                    "unknown dimension " + proposal["dimension"].get<std::string>());

    try {
        bridge_dimensions(*dim, canonical_dimension(mtype));
    } catch (const Error&) {
        throw Error("ConversionRejected", symbol,
                    "dimension " + to_string(*dim) + " cannot reach " +
                        to_string(canonical_dimension(mtype)));
    }

    const double factor = proposal["factor_to_base"].get<double>();
    const double inverse = proposal["inverse_factor"].get<double>();
    if (!(factor > 0.0) || !std::isfinite(factor) || !std::isfinite(inverse))
        throw Error("ConversionRejected", symbol, "factor must be positive and finite");

    for (double x : {1.0, 3.7, 1e6}) {
        const double round_trip = (x * factor) * inverse;
        if (std::fabs(x - round_trip) > 1e-12 * std::fabs(x))
            throw Error("ConversionRejected", symbol,
                        "round trip drifted at x=" + std::to_string(x));
    }

    UnitDef unit;
    unit.symbol = symbol;
    unit.dimension = *dim;
    unit.factor_to_base = factor;
    return unit;
}

void UnitRegistry::add_unit(const UnitDef& unit) {
    if (!(unit.factor_to_base > 0.0))
        throw Error("MalformedRegistry", unit.symbol, "factor_to_base must be positive");
    units_[unit.symbol] = unit;
}

json UnitRegistry::to_json() const {
    json units = json::array();
    for (const auto& [symbol, unit] : units_) {
        units.push_back({{"symbol", symbol},
                         {"dimension", to_string(unit.dimension)},
                         {"factor_to_base", unit.factor_to_base}});
    }
    return {{"constants",
             {{"dpm_per_bq", kDpmPerBq},
              {"pb_molar_mass_g_per_mol", kPbMolarMassGPerMol},
              {"seawater_density_kg_per_m3", kSeawaterDensityKgPerM3}}},
            {"units", units}};
}

// ---------------------------------------------------------------------------
// External datasets and fusion
// ---------------------------------------------------------------------------

namespace {

double parse_strict_double(const std::string& text, const std::string& what) {
    try {
        std::size_t used = 0;
        const double value = std::stod(util::trim(text), &used);
        if (used != util::trim(text).size())
            throw std::invalid_argument("trailing characters");
        return value;
    } catch (const std::exception&) {
        throw Error("MalformedExternalRecord", what, "not a number: '" + text + "'");
    }
}

struct ColumnRule {
    CanonicalField field = CanonicalField::Ignore;
    std::optional<MeasurementType> measurement_type;
    std::optional<std::string> unit;
    std::optional<Phase> phase;
};

} // namespace

ExternalDataset load_external_dataset(const std::string& csv_path,
                                      const std::string& sidecar_path,
                                      const UnitRegistry& registry) {
    std::ifstream side_in(sidecar_path);
    if (!side_in)
        throw Error("MalformedSidecar", sidecar_path, "cannot open sidecar");
    json side;
    try {
        side = json::parse(side_in);
    } catch (const json::parse_error& e) {
        throw Error("MalformedSidecar", sidecar_path, e.what());
    }
    for (const char* key : {"dataset_id", "kind", "columns"})
        if (!side.contains(key))
            throw Error("MalformedSidecar", sidecar_path, std::string("missing ") + key);

    ExternalDataset dataset;
    dataset.dataset_id = side["dataset_id"].get<std::string>();
    const std::string kind = side["kind"].get<std::string>();
    if (kind == "structured")
        dataset.kind = SourceKind::Structured;
    else if (kind == "scattered")
        dataset.kind = SourceKind::Scattered;
    else
        throw Error("MalformedSidecar", sidecar_path, "kind must be structured or scattered");
    if (side.contains("citation")) dataset.citation = side["citation"].get<std::string>();
    const std::string source_uri =
        side.contains("source_uri") ? side["source_uri"].get<std::string>() : csv_path;

    std::map<std::string, ColumnRule> rules;
    for (const auto& [header, value] : side["columns"].items()) {
        ColumnRule rule;
        const json spec = value.is_string() ? json{{"field", value}} : value;
        auto field = canonical_field_from_string(spec.value("field", ""));
        if (!field)
            throw Error("MalformedSidecar", header, "unknown canonical field");
        rule.field = *field;
        if (spec.contains("measurement_type")) {
            rule.measurement_type =
                measurement_type_from_string(spec["measurement_type"].get<std::string>());
            if (!rule.measurement_type)
                throw Error("MalformedSidecar", header, "unknown measurement type");
        }
        if (spec.contains("unit")) rule.unit = spec["unit"].get<std::string>();
        if (spec.contains("phase")) rule.phase = phase_from_string(spec["phase"].get<std::string>());
        rules[header] = rule;
    }

    std::optional<MeasurementType> default_type;
    std::optional<std::string> default_unit;
    Phase default_phase = Phase::Unknown;
    if (side.contains("defaults")) {
        const json& defaults = side["defaults"];
        if (defaults.contains("measurement_type"))
            default_type =
                measurement_type_from_string(defaults["measurement_type"].get<std::string>());
        if (defaults.contains("unit")) default_unit = defaults["unit"].get<std::string>();
        if (defaults.contains("phase"))
            default_phase = phase_from_string(defaults["phase"].get<std::string>());
    }

    const auto rows = util::read_csv_file(csv_path);
    if (rows.empty())
        throw Error("MalformedExternalRecord", csv_path, "csv has no header row");
    const auto& header_row = rows.front();

    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        PbRecord record;
        record.source_kind = dataset.kind;
        record.phase = default_phase;
        std::optional<double> raw_value;
        std::optional<MeasurementType> mtype = default_type;
        std::optional<std::string> unit = default_unit;
        std::string value_header;

        for (std::size_t c = 0; c < header_row.size() && c < row.size(); ++c) {
            auto rule_it = rules.find(header_row[c]);
            if (rule_it == rules.end()) continue;
            const ColumnRule& rule = rule_it->second;
            const std::string cell = util::trim(row[c]);
            if (cell.empty()) continue;
            const std::string where =
                dataset.dataset_id + " row " + std::to_string(r) + " col " + header_row[c];
            switch (rule.field) {
            case CanonicalField::MeasurementValue:
            case CanonicalField::Value:
                raw_value = parse_strict_double(cell, where);
                value_header = header_row[c];
                if (rule.measurement_type) mtype = rule.measurement_type;
                if (rule.unit) unit = rule.unit;
                if (rule.phase) record.phase = *rule.phase;
                break;
            case CanonicalField::Unit: unit = cell; break;
            case CanonicalField::Latitude: record.latitude = parse_strict_double(cell, where); break;
            case CanonicalField::Longitude:
                record.longitude = parse_strict_double(cell, where);
                break;
            case CanonicalField::DepthM: record.depth_m = parse_strict_double(cell, where); break;
            case CanonicalField::Phase: record.phase = phase_from_string(cell); break;
            case CanonicalField::SampleDate: record.sample_date = cell; break;
            case CanonicalField::StationLabel:
            case CanonicalField::Ignore: break;
            }
        }

        const std::string where = dataset.dataset_id + " row " + std::to_string(r);
        if (!raw_value)
            throw Error("MalformedExternalRecord", where, "no value cell");
        if (!mtype)
            throw Error("MalformedExternalRecord", where, "no measurement type");
        if (!unit)
            throw Error("MalformedExternalRecord", where, "no unit");

        const ConversionResult converted = registry.convert(*raw_value, *unit, *mtype);
        record.record_id = dataset.dataset_id + "-r" + std::to_string(r);
        record.measurement_type = *mtype;
        record.value = converted.value;
        record.unit = converted.conversion.to_unit;

        Provenance prov;
        prov.paper_id = dataset.dataset_id;
        prov.table_id = "external";
        prov.row_index = static_cast<int>(r);
        prov.column_header = value_header;
        prov.source_uri = source_uri;
        record.provenance.push_back(prov);
        dataset.records.push_back(record);
    }
    return dataset;
}

bool records_duplicate(const PbRecord& a, const PbRecord& b, const DedupCriteria& criteria) {
    if (a.measurement_type != b.measurement_type) return false;
    if (a.unit != b.unit) return false;

    const double scale = std::max(std::fabs(a.value), std::fabs(b.value));
    const double value_diff = std::fabs(a.value - b.value);
    if (scale > 0.0 && value_diff / scale > criteria.value_rel_tol) return false;
    if (scale == 0.0 && value_diff != 0.0) return false;

    if (!a.has_location() || !b.has_location()) return false;
    if (std::fabs(*a.latitude - *b.latitude) > criteria.coord_tol_deg) return false;
    if (std::fabs(*a.longitude - *b.longitude) > criteria.coord_tol_deg) return false;

    if (a.depth_m.has_value() != b.depth_m.has_value()) return false;
    if (a.depth_m && std::fabs(*a.depth_m - *b.depth_m) > criteria.depth_tol_m) return false;
    return true;
}

namespace {

int source_rank(SourceKind kind) {
    switch (kind) {
    case SourceKind::Structured: return 0;
    case SourceKind::Scattered: return 1;
    case SourceKind::Extracted: return 2;
    }
    return 2;
}

struct UnionFind {
    std::vector<std::size_t> parent;
    explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    std::size_t find(std::size_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }
    void unite(std::size_t a, std::size_t b) { parent[find(a)] = find(b); }
};

} // namespace

UnifiedDataset merge_sources(const std::vector<PbRecord>& extracted,
                             const std::vector<ExternalDataset>& externals,
                             const DedupCriteria& criteria) {
    std::vector<PbRecord> all = extracted;
    for (const auto& dataset : externals)
        all.insert(all.end(), dataset.records.begin(), dataset.records.end());

    UnionFind groups(all.size());
    for (std::size_t i = 0; i < all.size(); ++i)
        for (std::size_t j = i + 1; j < all.size(); ++j)
            if (records_duplicate(all[i], all[j], criteria)) groups.unite(i, j);

    std::map<std::size_t, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < all.size(); ++i) members[groups.find(i)].push_back(i);

    UnifiedDataset out;
    for (MeasurementType t : kAllMeasurementTypes) out.per_type[to_string(t)] = 0;
    for (const char* kind : {"structured", "scattered", "extracted"}) out.per_source[kind] = 0;

    for (auto& [root, ids] : members) {
        std::size_t best = ids.front();
        for (std::size_t id : ids) {
            const auto lhs = std::make_pair(source_rank(all[id].source_kind), all[id].record_id);
            const auto rhs = std::make_pair(source_rank(all[best].source_kind), all[best].record_id);
            if (lhs < rhs) best = id;
        }
        PbRecord survivor = all[best];
        std::vector<std::size_t> absorbed;
        for (std::size_t id : ids)
            if (id != best) absorbed.push_back(id);
        std::sort(absorbed.begin(), absorbed.end(), [&](std::size_t a, std::size_t b) {
            return all[a].record_id < all[b].record_id;
        });
        for (std::size_t id : absorbed) {
            for (const auto& prov : all[id].provenance) survivor.provenance.push_back(prov);
            for (const auto& flag : all[id].flags) survivor.flags.insert(flag);
            out.merge_log.push_back({survivor.record_id, all[id].record_id});
        }
        out.records.push_back(std::move(survivor));
    }

    std::sort(out.records.begin(), out.records.end(),
              [](const PbRecord& a, const PbRecord& b) { return a.record_id < b.record_id; });
    std::sort(out.merge_log.begin(), out.merge_log.end(),
              [](const MergeLogEntry& a, const MergeLogEntry& b) {
                  return std::tie(a.survivor_id, a.absorbed_id) <
                         std::tie(b.survivor_id, b.absorbed_id);
              });

    for (const auto& record : out.records) {
        out.per_type[to_string(record.measurement_type)] += 1;
        out.per_source[to_string(record.source_kind)] += 1;
    }
    out.dedup_removed = all.size() - out.records.size();
    return out;
}

} // namespace compass::harmonize
