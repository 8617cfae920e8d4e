#pragma once

#include <optional>
#include <string>
#include <vector>

#include "compass/harmonize.hpp"
#include "compass/records.hpp"

namespace compass::pipeline {

struct ExternalDatasetRef {
    std::string csv_path;
    std::string sidecar_path;
};

struct PipelineConfig {
    std::string corpus_path;
    std::string tree_path;
    std::string output_dir;

    std::string backend = "mock"; // "mock" | "http"
    std::string fixtures_path;    // mock backend responses
    std::string http_url;
    std::string model = "compass-extractor";
    std::string fault_inject = "none"; // "none" | "fail_once" (mock only)

    std::vector<std::string> keywords = {"lead", "Pb", "210Pb", "isotope"};
    bool classify_full_text = false;
    int max_parallel = 4;
    int max_attempts = 2;     // step-level rollback budget
    int gateway_retries = 3;  // transport-level retry budget

    std::string mask_path;          // empty: <tree dir>/../masks/ocean_mask_1deg.txt
    std::string header_alias_path;  // empty: builtin table
    std::string unit_registry_path; // empty: builtin registry

    harmonize::DedupCriteria dedup;
    std::vector<ExternalDatasetRef> external_datasets;

    json to_json() const;
    static PipelineConfig from_json(const json& doc);   // Error: MalformedConfig
    static PipelineConfig load_file(const std::string& path);
};

struct RunCounts {
    std::size_t papers_seen = 0;
    std::size_t papers_target = 0;
    std::size_t tables_target = 0;
    std::size_t records_extracted = 0;
    std::size_t records_validated = 0;
    std::size_t records_quarantined = 0;
    std::size_t records_fused = 0;
    std::size_t dedup_removed = 0; // extracted records absorbed during fusion
    std::size_t cells_skipped = 0;
    std::size_t subjects_quarantined = 0;
};

struct RunManifest {
    std::string run_id;
    std::string config_digest;
    RunCounts counts;
    std::size_t rollback_events = 0;
    std::size_t unresolved_rollbacks = 0;
    long long wall_time_ms = 0; // excluded from determinism comparisons

    json to_json() const;
};

/// Collection -> extraction -> aggregation over the configured corpus.
/// Per-subject failures quarantine and the run continues; only unreadable
/// inputs (corpus root, tree, mask, fixtures, externals) are fatal. Writes
/// store.jsonl, quarantine.jsonl, validation_report.json, predictions.json,
/// manifest.json, state.json, and config.json under output_dir.
RunManifest run_pipeline(const PipelineConfig& config);

} // namespace compass::pipeline
