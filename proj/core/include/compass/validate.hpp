#pragma once

#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "compass/checks.hpp"
#include "compass/records.hpp"

namespace compass::validate {

/// 1°x1° land/ocean grid. Row 0 covers latitudes [89, 90), column 0 covers
/// longitudes [-180, -179); out-of-grid coordinates clamp to the edge cell.
class OceanMask {
public:
    static OceanMask from_file(const std::string& path); // Error: MalformedMask
    static OceanMask all_ocean();

    bool is_ocean(double latitude, double longitude) const;
    std::size_t ocean_cells() const;

    static constexpr int kRows = 180;
    static constexpr int kCols = 360;

private:
    std::vector<bool> cells_; // kRows * kCols, true = ocean
};

struct CheckOutcome {
    std::string record_id;
    std::string check_id;
    bool pass = false;
    std::string message;
};

struct ValidationReport {
    std::vector<CheckOutcome> rows;
    std::map<std::string, std::pair<std::size_t, std::size_t>> summary; // check_id -> {pass, fail}

    bool record_failed_fatal(const std::string& record_id,
                             const std::vector<CheckSpec>& checks) const;
    json to_json() const;
};

/// Evaluates every applicable check against every record, in record-major
/// order. Pure: no record is mutated; callers act on the report.
ValidationReport run_checks(const std::vector<PbRecord>& records,
                            const std::vector<CheckSpec>& checks, const OceanMask& mask);

enum class StepStatus { Pending, Done, Failed };
std::string to_string(StepStatus status);

struct StateEntry {
    std::string step_id;
    std::string subject_id;
    std::string input_digest;
    std::string output_digest;
    StepStatus status = StepStatus::Pending;
    int attempt = 1;
};

struct RollbackEvent {
    std::string step_id;
    std::string subject_id;
    int attempt = 1;
    std::string reason;
    bool resolved = false;
};

/// Append-only execution log shared across pipeline stages; thread-safe.
class PipelineState {
public:
    void append(StateEntry entry);
    void record_rollback(RollbackEvent event);
    /// Marks every unresolved rollback event for (step, subject) resolved.
    void mark_resolved(const std::string& step_id, const std::string& subject_id);

    std::vector<StateEntry> entries() const;
    std::vector<RollbackEvent> rollback_events() const;
    std::size_t rollback_count() const;
    std::size_t unresolved_count() const;
    json to_json() const;

private:
    mutable std::mutex mutex_;
    std::vector<StateEntry> entries_;
    std::vector<RollbackEvent> rollbacks_;
};

/// Runs a re-executable subtask at most max_attempts times. Recoverable
/// failures (unusable backend output, rejected conversions, unknown labels)
/// roll the step back and retry; success resolves the step's rollback
/// events. Returns the step output, or nullopt once attempts are exhausted —
/// the caller quarantines the subject and the run continues. Non-recoverable
/// errors propagate.
std::optional<json> execute_with_rollback(const std::string& step_id,
                                          const std::string& subject_id,
                                          const std::string& input_digest,
                                          const std::function<json()>& step,
                                          PipelineState& state, int max_attempts = 2);

} // namespace compass::validate
