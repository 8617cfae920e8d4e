#include "compass/checks.hpp"

#include "compass/errors.hpp"

namespace compass {

namespace {

MeasurementType require_mtype(const json& params, const std::string& owner_id) {
    if (!params.contains("mtype")) {
        throw Error("MalformedCheckSpec", owner_id, "check params missing 'mtype'");
    }
    auto t = measurement_type_from_string(params["mtype"].get<std::string>());
    if (!t) {
        throw Error("MalformedCheckSpec", owner_id,
                    "unknown measurement type '" + params["mtype"].get<std::string>() + "'");
    }
    return *t;
}

} // namespace

std::string to_string(CheckSeverity s) {
    return s == CheckSeverity::Fatal ? "fatal" : "flag";
}

std::string CheckSpec::kind_name() const {
    struct Visitor {
        std::string operator()(const RangeCheck&) const { return "range"; }
        std::string operator()(const GeoBoundsCheck&) const { return "geo_bounds"; }
        std::string operator()(const UnitWhitelistCheck&) const { return "unit_whitelist"; }
        std::string operator()(const RequiredFieldsCheck&) const { return "required_fields"; }
        std::string operator()(const CoordinateSanityCheck&) const { return "coordinate_sanity"; }
    };
    return std::visit(Visitor{}, spec);
}

CheckSpec parse_check_spec(const json& j, const std::string& owner_id,
                           const std::string& default_id) {
    if (!j.is_object() || !j.contains("kind")) {
        throw Error("MalformedCheckSpec", owner_id, "check must be an object with a 'kind'");
    }
    CheckSpec out;
    out.check_id = j.value("id", default_id);
    const std::string severity = j.value("severity", std::string{"fatal"});
    if (severity == "fatal") {
        out.severity = CheckSeverity::Fatal;
    } else if (severity == "flag") {
        out.severity = CheckSeverity::Flag;
    } else {
        throw Error("MalformedCheckSpec", owner_id, "unknown severity '" + severity + "'");
    }

    const std::string kind = j["kind"].get<std::string>();
    const json params = j.value("params", json::object());

    if (kind == "range") {
        RangeCheck c;
        c.mtype = require_mtype(params, owner_id);
        if (!params.contains("min") || !params.contains("max")) {
            throw Error("MalformedCheckSpec", owner_id, "range check needs 'min' and 'max'");
        }
        c.min = params["min"].get<double>();
        c.max = params["max"].get<double>();
        if (!(c.min < c.max)) {
            throw Error("MalformedCheckSpec", owner_id, "range check requires min < max");
        }
        c.unit = params.value("unit", std::string{});
        out.spec = c;
    } else if (kind == "geo_bounds") {
        GeoBoundsCheck c;
        c.mask_ref = params.value("mask_ref", std::string{"default"});
        out.spec = c;
    } else if (kind == "unit_whitelist") {
        UnitWhitelistCheck c;
        c.mtype = require_mtype(params, owner_id);
        if (!params.contains("allowed_units") || !params["allowed_units"].is_array() ||
            params["allowed_units"].empty()) {
            throw Error("MalformedCheckSpec", owner_id,
                        "unit_whitelist check needs a non-empty 'allowed_units' array");
        }
        for (const auto& u : params["allowed_units"]) c.allowed_units.push_back(u.get<std::string>());
        out.spec = c;
    } else if (kind == "required_fields") {
        RequiredFieldsCheck c;
        if (!params.contains("fields") || !params["fields"].is_array() || params["fields"].empty()) {
            throw Error("MalformedCheckSpec", owner_id,
                        "required_fields check needs a non-empty 'fields' array");
        }
        for (const auto& f : params["fields"]) c.fields.push_back(f.get<std::string>());
        out.spec = c;
    } else if (kind == "coordinate_sanity") {
        out.spec = CoordinateSanityCheck{};
    } else {
        throw Error("MalformedCheckSpec", owner_id, "unknown check kind '" + kind + "'");
    }
    return out;
}

json to_json(const CheckSpec& c) {
    json j;
    j["id"] = c.check_id;
    j["kind"] = c.kind_name();
    j["severity"] = to_string(c.severity);
    json params = json::object();
    if (const auto* r = std::get_if<RangeCheck>(&c.spec)) {
        params["mtype"] = to_string(r->mtype);
        params["min"] = r->min;
        params["max"] = r->max;
        if (!r->unit.empty()) params["unit"] = r->unit;
    } else if (const auto* g = std::get_if<GeoBoundsCheck>(&c.spec)) {
        params["mask_ref"] = g->mask_ref;
    } else if (const auto* u = std::get_if<UnitWhitelistCheck>(&c.spec)) {
        params["mtype"] = to_string(u->mtype);
        params["allowed_units"] = u->allowed_units;
    } else if (const auto* f = std::get_if<RequiredFieldsCheck>(&c.spec)) {
        params["fields"] = f->fields;
    }
    j["params"] = params;
    return j;
}

} // namespace compass
