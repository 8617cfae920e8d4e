#pragma once

#include <optional>
#include <string>
#include <vector>

#include "compass/classify.hpp"
#include "compass/corpus.hpp"
#include "compass/harmonize.hpp"
#include "compass/knowledge_tree.hpp"
#include "compass/llm_gateway.hpp"
#include "compass/records.hpp"
#include "compass/validate.hpp"

namespace compass::extract {

enum class CellKind { Empty, Numeric, BelowDetection, NonNumeric };

struct CellValue {
    CellKind kind = CellKind::Empty;
    double number = 0.0; // valid when kind == Numeric
};

/// Classifies one table cell. "<0.5", "n.d.", "nd", "bdl", "b.d.l." and
/// "below detection" count as below-detection markers; a numeric body with
/// an uncertainty tail ("1.2 ± 0.1") parses as its central value.
CellValue classify_cell(const std::string& raw);

struct SkippedCell {
    std::string paper_id;
    std::string table_id;
    int row_index = 0;
    std::string column_header;
    std::string raw_text;
    std::string flag; // bdl_skipped | non_numeric_cell | empty_cell
};

struct ExtractionResult {
    std::vector<PbRecord> drafts;
    std::vector<SkippedCell> skipped;
    std::vector<harmonize::HeaderMapping> mappings;
};

/// Per-column header text: the cells of every header row joined top to
/// bottom. This is the text handed to normalization and recorded in
/// provenance.
std::vector<std::string> composite_headers(const TableBlock& table);

struct FoundCoordinate {
    double latitude = 0.0;
    double longitude = 0.0;
    std::string scope;   // footnote | caption | sibling_table | body
    std::string station; // empty when the source text names no station
    std::string raw;     // verbatim source text
};

struct FoundDepth {
    double depth_m = 0.0;
    std::string scope;
    std::string raw;
};

struct FoundDate {
    std::string date;
    std::string scope;
    std::string raw;
};

struct AssociationContext {
    std::vector<FoundCoordinate> coordinates_found;
    std::vector<FoundDepth> depths_found;
    std::vector<FoundDate> dates_found;
};

struct ExtractOptions {
    int max_attempts = 2; // header-normalization rollback budget
    validate::PipelineState* state = nullptr;
};

/// Fans a target table out into one draft record per (data row x value
/// column). Value columns come from header normalization; shared columns
/// (coordinates, depth, date, station) fill every draft on their row. The
/// original unit strings are preserved; nothing is converted here.
/// Errors: NonTargetTable; QuarantinedSubject when header normalization
/// stays unusable after the rollback budget.
ExtractionResult extract_table_records(const ParsedPaper& paper, const TableBlock& table,
                                       classify::TableCategory category,
                                       const harmonize::HeaderAliasTable& aliases,
                                       const tree::KnowledgeTree* tree,
                                       gateway::LlmGateway* gateway,
                                       const ExtractOptions& options = {});

/// Fills missing coordinates, depth, and date from the nearest scope that
/// supplies them: footnotes, then the caption, then sibling tables, then
/// body text (row cells were already applied during extraction). Scope hits
/// are recorded as flags (coord_from_footnote, depth_from_caption, ...);
/// same-scope conflicts without a station key flag coord_ambiguous and fill
/// nothing. Drafts still unlocated afterwards are flagged unlocated.
std::vector<PbRecord> associate_metadata(std::vector<PbRecord> drafts, const TableBlock& table,
                                         const ParsedPaper& paper,
                                         const harmonize::HeaderAliasTable& aliases,
                                         AssociationContext* context = nullptr);

} // namespace compass::extract
