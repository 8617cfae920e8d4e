#include "compass/validate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <tuple>
#include <variant>

#include "compass/errors.hpp"
#include "compass/util/digest.hpp"
#include "compass/util/text.hpp"

namespace compass::validate {

OceanMask OceanMask::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw Error("MalformedMask", path, "cannot open mask file");
    std::string header;
    if (!std::getline(in, header) || header.rfind("# ocean-mask v1", 0) != 0)
        throw Error("MalformedMask", path, "missing '# ocean-mask v1' header line");

    OceanMask mask;
    mask.cells_.assign(static_cast<std::size_t>(kRows) * kCols, false);
    std::string line;
    int row = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (row >= kRows)
            throw Error("MalformedMask", path, "more than 180 grid rows");
        if (line.size() != static_cast<std::size_t>(kCols))
            throw Error("MalformedMask", path,
                        "row " + std::to_string(row) + " has " + std::to_string(line.size()) +
                            " cells, expected 360");
        for (int col = 0; col < kCols; ++col) {
            if (line[col] == '1')
                mask.cells_[static_cast<std::size_t>(row) * kCols + col] = true;
            else if (line[col] != '0')
                throw Error("MalformedMask", path,
                            "row " + std::to_string(row) + " holds a character besides 0/1");
        }
        ++row;
    }
    if (row != kRows)
        throw Error("MalformedMask", path,
                    "only " + std::to_string(row) + " grid rows, expected 180");
    return mask;
}

OceanMask OceanMask::all_ocean() {
    OceanMask mask;
    mask.cells_.assign(static_cast<std::size_t>(kRows) * kCols, true);
    return mask;
}

bool OceanMask::is_ocean(double latitude, double longitude) const {
    int row = static_cast<int>(std::floor(90.0 - latitude));
    int col = static_cast<int>(std::floor(longitude + 180.0));
    row = std::clamp(row, 0, kRows - 1);
    col = std::clamp(col, 0, kCols - 1);
    return cells_[static_cast<std::size_t>(row) * kCols + col];
}

std::size_t OceanMask::ocean_cells() const {
    return static_cast<std::size_t>(std::count(cells_.begin(), cells_.end(), true));
}

namespace {

bool check_applies(const CheckSpec& check, const PbRecord& record) {
    if (const auto* range = std::get_if<RangeCheck>(&check.spec))
        return range->mtype == record.measurement_type;
    if (const auto* whitelist = std::get_if<UnitWhitelistCheck>(&check.spec))
        return whitelist->mtype == record.measurement_type;
    return true;
}

CheckOutcome evaluate_check(const CheckSpec& check, const PbRecord& record,
                            const OceanMask& mask) {
    CheckOutcome outcome;
    outcome.record_id = record.record_id;
    outcome.check_id = check.check_id;

    if (const auto* range = std::get_if<RangeCheck>(&check.spec)) {
        if (!range->unit.empty() && range->unit != record.unit) {
            outcome.pass = false;
            outcome.message = "unit " + record.unit + " is not the check unit " + range->unit;
            return outcome;
        }
        outcome.pass = std::isfinite(record.value) && record.value >= range->min &&
                       record.value <= range->max;
        if (!outcome.pass)
            outcome.message = "value " + std::to_string(record.value) + " outside [" +
                              std::to_string(range->min) + ", " + std::to_string(range->max) + "]";
        return outcome;
    }

    if (std::holds_alternative<GeoBoundsCheck>(check.spec)) {
        if (!record.has_location()) {
            outcome.pass = false;
            outcome.message = "missing coordinates";
            return outcome;
        }
        outcome.pass = mask.is_ocean(*record.latitude, *record.longitude);
        if (!outcome.pass)
            outcome.message = "cell at (" + std::to_string(*record.latitude) + ", " +
                              std::to_string(*record.longitude) + ") is land";
        return outcome;
    }

    if (const auto* whitelist = std::get_if<UnitWhitelistCheck>(&check.spec)) {
        outcome.pass = std::find(whitelist->allowed_units.begin(), whitelist->allowed_units.end(),
                                 record.unit) != whitelist->allowed_units.end();
        if (!outcome.pass)
            outcome.message = "unit " + record.unit + " is not allowed for this type";
        return outcome;
    }

    if (const auto* required = std::get_if<RequiredFieldsCheck>(&check.spec)) {
        std::string missing;
        for (const auto& field : required->fields) {
            bool present = true;
            if (field == "value")
                present = std::isfinite(record.value);
            else if (field == "unit")
                present = !record.unit.empty();
            else if (field == "latitude")
                present = record.latitude.has_value();
            else if (field == "longitude")
                present = record.longitude.has_value();
            else if (field == "depth_m")
                present = record.depth_m.has_value();
            else if (field == "sample_date")
                present = record.sample_date.has_value();
            else if (field == "phase")
                present = record.phase != Phase::Unknown;
            else if (field == "measurement_type")
                present = true;
            else
                present = false;
            if (!present) missing += (missing.empty() ? "" : ", ") + field;
        }
        outcome.pass = missing.empty();
        if (!outcome.pass) outcome.message = "missing: " + missing;
        return outcome;
    }

    // CoordinateSanity
    const bool has_lat = record.latitude.has_value();
    const bool has_lon = record.longitude.has_value();
    if (!has_lat && !has_lon) {
        outcome.pass = true;
        return outcome;
    }
    if (has_lat != has_lon) {
        outcome.pass = false;
        outcome.message = "partial coordinates";
        return outcome;
    }
    outcome.pass = std::fabs(*record.latitude) <= 90.0 && std::fabs(*record.longitude) <= 180.0;
    if (!outcome.pass) outcome.message = "coordinates outside the valid ranges";
    return outcome;
}

} // namespace

bool ValidationReport::record_failed_fatal(const std::string& record_id,
                                           const std::vector<CheckSpec>& checks) const {
    for (const auto& row : rows) {
        if (row.record_id != record_id || row.pass) continue;
        for (const auto& check : checks)
            if (check.check_id == row.check_id && check.severity == CheckSeverity::Fatal)
                return true;
    }
    return false;
}

json ValidationReport::to_json() const {
    json rows_json = json::array();
    for (const auto& row : rows)
        rows_json.push_back({{"record_id", row.record_id},
                             {"check_id", row.check_id},
                             {"outcome", row.pass ? "pass" : "fail"},
                             {"message", row.message}});
    json summary_json = json::object();
    for (const auto& [check_id, counts] : summary)
        summary_json[check_id] = {{"pass", counts.first}, {"fail", counts.second}};
    return {{"rows", rows_json}, {"summary", summary_json}};
}

ValidationReport run_checks(const std::vector<PbRecord>& records,
                            const std::vector<CheckSpec>& checks, const OceanMask& mask) {
    ValidationReport report;
    for (const auto& check : checks) report.summary[check.check_id] = {0, 0};
    for (const auto& record : records) {
        for (const auto& check : checks) {
            if (!check_applies(check, record)) continue;
            CheckOutcome outcome = evaluate_check(check, record, mask);
            auto& counts = report.summary[check.check_id];
            (outcome.pass ? counts.first : counts.second) += 1;
            report.rows.push_back(std::move(outcome));
        }
    }
    return report;
}

std::string to_string(StepStatus status) {
    switch (status) {
    case StepStatus::Pending: return "pending";
    case StepStatus::Done: return "done";
    case StepStatus::Failed: return "failed";
    }
    return "pending";
}

void PipelineState::append(StateEntry entry) {
    std::lock_guard<std::mutex> lock(mutex_);
    entries_.push_back(std::move(entry));
}

void PipelineState::record_rollback(RollbackEvent event) {
    std::lock_guard<std::mutex> lock(mutex_);
    rollbacks_.push_back(std::move(event));
}

void PipelineState::mark_resolved(const std::string& step_id, const std::string& subject_id) {
    std::lock_guard<std::mutex> lock(mutex_);
    for (auto& event : rollbacks_)
        if (event.step_id == step_id && event.subject_id == subject_id) event.resolved = true;
}

std::vector<StateEntry> PipelineState::entries() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return entries_;
}

std::vector<RollbackEvent> PipelineState::rollback_events() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return rollbacks_;
}

std::size_t PipelineState::rollback_count() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return rollbacks_.size();
}

std::size_t PipelineState::unresolved_count() const {
    std::lock_guard<std::mutex> lock(mutex_);
    std::size_t count = 0;
    for (const auto& event : rollbacks_)
        if (!event.resolved) ++count;
    return count;
}

json PipelineState::to_json() const {
    std::lock_guard<std::mutex> lock(mutex_);
    auto entries = entries_;
    std::sort(entries.begin(), entries.end(), [](const StateEntry& a, const StateEntry& b) {
        return std::tie(a.step_id, a.subject_id, a.attempt) <
               std::tie(b.step_id, b.subject_id, b.attempt);
    });
    auto rollbacks = rollbacks_;
    std::sort(rollbacks.begin(), rollbacks.end(), [](const RollbackEvent& a, const RollbackEvent& b) {
        return std::tie(a.step_id, a.subject_id, a.attempt) <
               std::tie(b.step_id, b.subject_id, b.attempt);
    });
    json entries_json = json::array();
    for (const auto& entry : entries)
        entries_json.push_back({{"step_id", entry.step_id},
                                {"subject_id", entry.subject_id},
                                {"input_digest", entry.input_digest},
                                {"output_digest", entry.output_digest},
                                {"status", to_string(entry.status)},
                                {"attempt", entry.attempt}});
    json rollbacks_json = json::array();
    for (const auto& event : rollbacks)
        rollbacks_json.push_back({{"step_id", event.step_id},
                                  {"subject_id", event.subject_id},
                                  {"attempt", event.attempt},
                                  {"reason", event.reason},
                                  {"resolved", event.resolved}});
    return {{"entries", entries_json}, {"rollback_events", rollbacks_json}};
}

namespace {

bool is_recoverable(const Error& e) {
    const std::string code = e.code();
    return code == "UnparseableOutput" || code == "SchemaMismatch" ||
           code == "ConversionRejected" || code == "UnknownLabel";
}

} // namespace

std::optional<json> execute_with_rollback(const std::string& step_id,
                                          const std::string& subject_id,
                                          const std::string& input_digest,
                                          const std::function<json()>& step,
                                          PipelineState& state, int max_attempts) {
    max_attempts = std::max(1, max_attempts);
    bool had_failures = false;
    for (int attempt = 1; attempt <= max_attempts; ++attempt) {
        try {
            json output = step();
            if (had_failures) state.mark_resolved(step_id, subject_id);
            state.append({step_id, subject_id, input_digest, util::digest_hex(output.dump()),
                          StepStatus::Done, attempt});
            return output;
        } catch (const Error& e) {
            if (!is_recoverable(e)) throw;
            had_failures = true;
            state.append({step_id, subject_id, input_digest, "", StepStatus::Failed, attempt});
            state.record_rollback({step_id, subject_id, attempt, e.what(), false});
        }
    }
    return std::nullopt;
}

} // namespace compass::validate
