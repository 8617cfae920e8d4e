#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "compass/knowledge_tree.hpp"
#include "compass/llm_gateway.hpp"
#include "compass/records.hpp"

namespace compass::harmonize {

// ---------------------------------------------------------------------------
// Header normalization
// ---------------------------------------------------------------------------

enum class CanonicalField {
    MeasurementValue, // a column of values for one measurement type
    Value,
    Unit,
    Latitude,
    Longitude,
    DepthM,
    Phase,
    SampleDate,
    StationLabel,
    Ignore,
};

std::string to_string(CanonicalField field);
std::optional<CanonicalField> canonical_field_from_string(const std::string& text);

struct HeaderMapping {
    std::string source_header;
    CanonicalField canonical_field = CanonicalField::Ignore;
    std::string confidence_note; // "alias" | "isotope-notation" | "backend" | "unresolved"
    std::optional<MeasurementType> measurement_type; // set when canonical_field is MeasurementValue
    std::optional<Phase> phase;                      // phase implied by the header, if any
    std::optional<std::string> unit;                 // unit implied by the header, if any
};

/// Exact-match layer: normalized header text -> mapping. Ships with a builtin
/// table mirrored by a data file; unknown headers fall through to the
/// isotope-notation parser and then (optionally) the backend.
class HeaderAliasTable {
public:
    static HeaderAliasTable builtin();
    static HeaderAliasTable from_file(const std::string& path);
    explicit HeaderAliasTable(const json& doc);
    HeaderAliasTable() = default;

    std::optional<HeaderMapping> lookup(const std::string& header) const;
    std::size_t size() const { return entries_.size(); }

private:
    struct Entry {
        CanonicalField field = CanonicalField::Ignore;
        std::optional<MeasurementType> measurement_type;
        std::optional<Phase> phase;
        std::optional<std::string> unit;
    };
    std::map<std::string, Entry> entries_; // keyed by normalized header text
};

/// Recognizes Pb isotope-ratio headers in plain ("206Pb/204Pb") and markup
/// ("$^{206}$Pb/$^{204}$Pb") notations.
std::optional<MeasurementType> parse_isotope_header(const std::string& header);

struct NormalizationTrace {
    std::vector<std::string> sent_to_backend;
    std::string backend_digest;
};

/// The task context sent to the backend for unresolved headers; exposed so
/// fixture tooling can reproduce prompts bit-for-bit.
std::string build_normalization_context(const std::vector<std::string>& unresolved_headers);

/// Alias layer first, then one batched backend call for whatever is left
/// (skipped when gateway is null); still-unresolved headers map to Ignore
/// with confidence_note "unresolved". Total: one mapping per header, in
/// input order.
std::vector<HeaderMapping> normalize_headers(const std::vector<std::string>& headers,
                                             const HeaderAliasTable& aliases,
                                             const tree::KnowledgeTree* tree,
                                             gateway::LlmGateway* gateway,
                                             NormalizationTrace* trace = nullptr);

// ---------------------------------------------------------------------------
// Units
// ---------------------------------------------------------------------------

enum class Dimension {
    MolarPerMass,     // base pmol/kg
    MassPerMass,      // base ng/kg
    MolarPerVolume,   // base pmol/L
    MassPerVolume,    // base ng/L
    ActivityPerVolume,// base mBq/m3
    ActivityPerMass,  // base mBq/kg
    Dimensionless,
};

std::string to_string(Dimension d);
std::optional<Dimension> dimension_from_string(const std::string& text);

struct UnitDef {
    std::string symbol;
    Dimension dimension = Dimension::Dimensionless;
    double factor_to_base = 1.0; // value[unit] * factor = value[base unit of dimension]
};

struct UnitConversion {
    std::string from_unit;
    std::string to_unit;
    std::string kind = "linear_factor"; // "linear_factor" | "mass_to_molar" | "affine"
    double factor = 1.0;
    double offset = 0.0;
    std::vector<std::string> constants_used;
};

struct ConversionResult {
    double value = 0.0;
    UnitConversion conversion;
};

inline constexpr double kPbMolarMassGPerMol = 207.2;
inline constexpr double kSeawaterDensityKgPerM3 = 1025.0;
inline constexpr double kDpmPerBq = 60.0;

class UnitRegistry {
public:
    static UnitRegistry builtin();
    static UnitRegistry from_file(const std::string& path);
    explicit UnitRegistry(const json& doc);
    UnitRegistry() = default;

    static std::string canonical_unit(MeasurementType mtype);
    static Dimension canonical_dimension(MeasurementType mtype);

    /// Converts to the canonical unit for mtype. Errors: UnknownUnit,
    /// DimensionalMismatch (no physical bridge from the source dimension).
    ConversionResult convert(double value, const std::string& from_unit,
                             MeasurementType mtype) const;

    /// Registers a backend-proposed unit after gating it on (a) a known,
    /// bridgeable dimension and (b) a 1e-12-relative round trip between
    /// factor_to_base and inverse_factor. Error: ConversionRejected.
    UnitDef vet_proposal(const json& proposal, MeasurementType mtype) const;
    void add_unit(const UnitDef& unit);

    const UnitDef* find(const std::string& symbol) const;
    std::size_t size() const { return units_.size(); }
    json to_json() const;

private:
    std::map<std::string, UnitDef> units_;
};

// ---------------------------------------------------------------------------
// Cross-source fusion
// ---------------------------------------------------------------------------

struct ExternalDataset {
    std::string dataset_id;
    SourceKind kind = SourceKind::Structured; // structured or scattered only
    std::vector<PbRecord> records;
    std::string citation;
};

/// Loads a CSV plus its column-map sidecar into canonical-unit records.
/// Errors: MalformedExternalRecord, MalformedSidecar, plus unit errors.
ExternalDataset load_external_dataset(const std::string& csv_path,
                                      const std::string& sidecar_path,
                                      const UnitRegistry& registry);

struct DedupCriteria {
    double coord_tol_deg = 0.01;
    double depth_tol_m = 1.0;
    double value_rel_tol = 1e-6;
};

/// Symmetric duplicate predicate: same type and unit, values within the
/// relative tolerance, coordinates both present and within tolerance, depth
/// both present and within tolerance or both absent.
bool records_duplicate(const PbRecord& a, const PbRecord& b, const DedupCriteria& criteria);

struct MergeLogEntry {
    std::string survivor_id;
    std::string absorbed_id;
};

struct UnifiedDataset {
    std::vector<PbRecord> records; // sorted by record_id
    std::map<std::string, std::size_t> per_type;
    std::map<std::string, std::size_t> per_source;
    std::vector<MergeLogEntry> merge_log;
    std::size_t dedup_removed = 0;
};

/// Concatenates extracted records with all external datasets, groups
/// duplicates transitively, and keeps one survivor per group: structured
/// beats scattered beats extracted, ties broken by record_id. The survivor
/// absorbs the provenance and flags of everything it replaced.
UnifiedDataset merge_sources(const std::vector<PbRecord>& extracted,
                             const std::vector<ExternalDataset>& externals,
                             const DedupCriteria& criteria = {});

} // namespace compass::harmonize
