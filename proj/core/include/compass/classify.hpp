#pragma once

#include <array>
#include <optional>
#include <string>

#include "compass/corpus.hpp"
#include "compass/knowledge_tree.hpp"
#include "compass/llm_gateway.hpp"

namespace compass::validate {
class PipelineState;
}

namespace compass::classify {

enum class PaperCategory {
    MarinePbConc,
    Marine210Pb,
    MarinePbIsotopeRatios,
    MarinePbNonTarget,
    AtmosphericPb,
    TerrestrialPb,
    AnalyticalPb,
    IrrelevantPb,
    OtherMarineElements,
    UnrelatedTopics,
    Unclassified,
};

inline constexpr std::array<PaperCategory, 10> kPaperTaxonomy = {
    PaperCategory::MarinePbConc,     PaperCategory::Marine210Pb,
    PaperCategory::MarinePbIsotopeRatios, PaperCategory::MarinePbNonTarget,
    PaperCategory::AtmosphericPb,    PaperCategory::TerrestrialPb,
    PaperCategory::AnalyticalPb,     PaperCategory::IrrelevantPb,
    PaperCategory::OtherMarineElements, PaperCategory::UnrelatedTopics,
};

std::string to_string(PaperCategory category);
std::optional<PaperCategory> paper_category_from_string(const std::string& label);
bool is_target(PaperCategory category);

enum class TableCategory {
    TargetPbConc,
    Target210Pb,
    TargetIsotopeRatios,
    NonTarget,
    Unclassified,
};

std::string to_string(TableCategory category);
std::optional<TableCategory> table_category_from_string(const std::string& label);
bool is_target(TableCategory category);

struct ClassificationResult {
    std::string subject_id;
    std::string label;
    std::string rationale;
    std::string bundle_digest;
};

struct ClassifyOptions {
    bool full_text = false; // include section bodies in the paper prompt
    int attempts = 2;       // parse failures re-prompt this many times total
    validate::PipelineState* state = nullptr;
};

std::string build_paper_context(const ParsedPaper& paper, bool full_text);
std::string build_table_context(const TableBlock& table, std::size_t max_rows = 5);

/// One label per paper. Output that stays unusable after every attempt maps
/// to the Unclassified sentinel; backend unavailability propagates.
/// Error: EmptyPaperText.
ClassificationResult classify_paper(const ParsedPaper& paper, const tree::KnowledgeTree& tree,
                                    gateway::LlmGateway& gateway,
                                    const ClassifyOptions& options = {});

/// One label per table. Tables with no data rows short-circuit to NonTarget
/// without touching the backend.
ClassificationResult classify_table(const std::string& paper_id, const TableBlock& table,
                                    const tree::KnowledgeTree& tree,
                                    gateway::LlmGateway& gateway,
                                    const ClassifyOptions& options = {});

} // namespace compass::classify
