#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "compass/records.hpp"

namespace compass {

/// Executable validation checks carried by Knowledge Tree nodes. Prose-only
/// criteria stay in the prompt; these run against records.

struct RangeCheck {
    MeasurementType mtype = MeasurementType::PbConc;
    double min = 0.0;
    double max = 0.0;
    std::string unit; // unit the bounds are expressed in (canonical)
};

struct GeoBoundsCheck {
    std::string mask_ref; // path or well-known name of the ocean mask
};

struct UnitWhitelistCheck {
    MeasurementType mtype = MeasurementType::PbConc;
    std::vector<std::string> allowed_units;
};

struct RequiredFieldsCheck {
    std::vector<std::string> fields;
};

struct CoordinateSanityCheck {};

enum class CheckSeverity { Fatal, Flag };

std::string to_string(CheckSeverity s);

struct CheckSpec {
    using Variant = std::variant<RangeCheck, GeoBoundsCheck, UnitWhitelistCheck,
                                 RequiredFieldsCheck, CoordinateSanityCheck>;

    std::string check_id;
    CheckSeverity severity = CheckSeverity::Fatal;
    Variant spec;

    std::string kind_name() const;
};

/// Parses {"kind": ..., "params": {...}, "id"?: ..., "severity"?: ...}.
/// Throws compass::Error with code "MalformedCheckSpec" on any defect;
/// `subject` is filled with `owner_id` so tree loading can name the node.
CheckSpec parse_check_spec(const json& j, const std::string& owner_id,
                           const std::string& default_id);

json to_json(const CheckSpec& c);

} // namespace compass
