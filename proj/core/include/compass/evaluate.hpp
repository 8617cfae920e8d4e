#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "compass/records.hpp"

namespace compass::evaluate {

struct GoldSet {
    std::map<std::string, std::string> paper_labels;
    std::map<std::string, std::map<std::string, std::string>> table_labels; // paper -> table -> label
    std::vector<PbRecord> records;
};

GoldSet gold_from_json(const json& doc);
GoldSet load_gold_file(const std::string& path); // Error: MalformedGold

struct MatchCriteria {
    double value_rel_tol = 1e-6;
    double coord_tol_deg = 0.01;
    double depth_tol_m = 1.0;
    bool require_type_equal = true;
};

struct ClassificationMetrics {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t true_positives = 0;
    std::size_t false_positives = 0;
    std::size_t false_negatives = 0;
    std::size_t true_negatives = 0;
    std::size_t total = 0;
    std::map<std::string, std::map<std::string, std::size_t>> confusion; // gold -> predicted -> n
};

/// Accuracy over exact labels; precision/recall/F1 over the binary
/// collapse "label in positive_set". A prediction of a sentinel label
/// outside positive_set is simply negative. Empty denominators go to 0 by
/// convention. Error: KeyMismatch when the two key sets differ.
ClassificationMetrics score_classification(const std::map<std::string, std::string>& predictions,
                                           const std::map<std::string, std::string>& gold,
                                           const std::set<std::string>& positive_set);

struct ExtractionMetrics {
    double precision = 0.0;
    double recall = 0.0; // micro (pooled)
    double f1 = 0.0;
    std::size_t true_positives = 0;
    std::size_t predicted_count = 0;
    std::size_t gold_count = 0;
    double per_paper_recall = 0.0; // macro mean over papers with >= 1 gold record
    std::size_t papers_with_gold = 0;
    std::vector<std::pair<std::size_t, std::size_t>> matches; // (predicted idx, gold idx)
};

/// True when the two records are close enough to count as the same data
/// point: same source paper, same type (when required), value within the
/// relative tolerance, coordinates both present within tolerance or both
/// absent, depth likewise.
bool records_match(const PbRecord& predicted, const PbRecord& gold, const MatchCriteria& criteria);

/// Maximum one-to-one matching over the compatibility graph (augmenting
/// paths); |matching| is the true-positive count.
ExtractionMetrics score_extraction(const std::vector<PbRecord>& predicted,
                                   const std::vector<PbRecord>& gold,
                                   const MatchCriteria& criteria = {});

struct ReportDocument {
    std::string text;
    json data;
};

/// Renders the three task rows plus per-type record counts, deterministic
/// byte-for-byte given the same inputs.
ReportDocument report(const ClassificationMetrics& paper_task,
                      const ClassificationMetrics& table_task,
                      const ExtractionMetrics& extraction_task,
                      const std::map<std::string, std::size_t>& per_type_counts,
                      const json& run_manifest);

} // namespace compass::evaluate
