#include "compass/classify.hpp"

#include "compass/errors.hpp"
#include "compass/util/digest.hpp"
#include "compass/util/text.hpp"
#include "compass/validate.hpp"

namespace compass::classify {

std::string to_string(PaperCategory category) {
    switch (category) {
    case PaperCategory::MarinePbConc: return "Marine Pb conc.";
    case PaperCategory::Marine210Pb: return "Marine 210Pb";
    case PaperCategory::MarinePbIsotopeRatios: return "Marine Pb isotopes ratios";
    case PaperCategory::MarinePbNonTarget: return "Marine Pb (non-target)";
    case PaperCategory::AtmosphericPb: return "Atmospheric Pb";
    case PaperCategory::TerrestrialPb: return "Terrestrial Pb";
    case PaperCategory::AnalyticalPb: return "Analytical Pb";
    case PaperCategory::IrrelevantPb: return "Irrelevant \"Pb\"";
    case PaperCategory::OtherMarineElements: return "Other marine elements";
    case PaperCategory::UnrelatedTopics: return "Unrelated topics";
    case PaperCategory::Unclassified: return "Unclassified";
    }
    return "Unclassified";
}

std::optional<PaperCategory> paper_category_from_string(const std::string& label) {
    for (PaperCategory category : kPaperTaxonomy)
        if (to_string(category) == label) return category;
    if (label == to_string(PaperCategory::Unclassified)) return PaperCategory::Unclassified;
    return std::nullopt;
}

bool is_target(PaperCategory category) {
    return category == PaperCategory::MarinePbConc || category == PaperCategory::Marine210Pb ||
           category == PaperCategory::MarinePbIsotopeRatios;
}

std::string to_string(TableCategory category) {
    switch (category) {
    case TableCategory::TargetPbConc: return "Target Pb conc.";
    case TableCategory::Target210Pb: return "Target 210Pb";
    case TableCategory::TargetIsotopeRatios: return "Target isotope ratios";
    case TableCategory::NonTarget: return "Non-target";
    case TableCategory::Unclassified: return "Unclassified";
    }
    return "Unclassified";
}

std::optional<TableCategory> table_category_from_string(const std::string& label) {
    for (TableCategory category :
         {TableCategory::TargetPbConc, TableCategory::Target210Pb,
          TableCategory::TargetIsotopeRatios, TableCategory::NonTarget,
          TableCategory::Unclassified})
        if (to_string(category) == label) return category;
    return std::nullopt;
}

bool is_target(TableCategory category) {
    return category == TableCategory::TargetPbConc || category == TableCategory::Target210Pb ||
           category == TableCategory::TargetIsotopeRatios;
}

std::string build_paper_context(const ParsedPaper& paper, bool full_text) {
    std::string context = "Title: " + paper.title + "\nAbstract: " + paper.abstract_text + "\n";
    if (full_text) {
        for (const auto& section : paper.sections)
            context += "## Section: " + section.heading + "\n" + section.text + "\n";
    }
    return context;
}

std::string build_table_context(const TableBlock& table, std::size_t max_rows) {
    std::string context = "Caption: " + table.caption + "\n";
    for (const auto& header_row : table.header_rows) {
        context += "Headers:";
        for (std::size_t i = 0; i < header_row.size(); ++i)
            context += (i ? " | " : " ") + header_row[i];
        context += "\n";
    }
    const std::size_t shown = std::min(max_rows, table.data_rows.size());
    for (std::size_t r = 0; r < shown; ++r) {
        context += "Row " + std::to_string(r + 1) + ":";
        for (std::size_t i = 0; i < table.data_rows[r].size(); ++i)
            context += (i ? " | " : " ") + table.data_rows[r][i];
        context += "\n";
    }
    if (table.data_rows.size() > shown)
        context += "(" + std::to_string(table.data_rows.size() - shown) + " more rows)\n";
    if (!table.footnotes.empty()) {
        context += "Footnotes:\n";
        for (const auto& note : table.footnotes) context += "- " + note + "\n";
    }
    if (!table.context_snippets.empty()) {
        context += "Context:\n";
        for (const auto& snippet : table.context_snippets) context += "- " + snippet + "\n";
    }
    return context;
}

namespace {

struct LabelAttempt {
    std::optional<std::string> label; // validated against the taxonomy by caller
    std::string rationale;
    std::string failure; // set when the completion was unusable
};

LabelAttempt request_label(const tree::PromptBundle& bundle, gateway::LlmGateway& gateway,
                           const std::string& tag) {
    gateway::CompletionRequest request;
    request.bundle = bundle;
    request.request_tag = tag;
    const gateway::Completion completion = gateway.complete(request);
    LabelAttempt attempt;
    try {
        const json doc = gateway::parse_structured(completion, gateway::label_schema());
        attempt.label = doc["label"].get<std::string>();
        if (doc.contains("rationale") && doc["rationale"].is_string())
            attempt.rationale = doc["rationale"].get<std::string>();
    } catch (const Error& e) {
        attempt.failure = e.what();
    }
    return attempt;
}

template <typename CategoryT, typename FromString>
ClassificationResult classify_subject(const std::string& step_id, const std::string& subject_id,
                                      const tree::PromptBundle& bundle,
                                      gateway::LlmGateway& gateway, FromString from_string,
                                      CategoryT sentinel, const ClassifyOptions& options) {
    const std::string prompt_digest =
        util::prompt_digest(bundle.system_text, bundle.user_text);
    ClassificationResult result;
    result.subject_id = subject_id;
    result.bundle_digest = prompt_digest;

    bool had_failures = false;
    const int attempts = std::max(1, options.attempts);
    for (int attempt = 1; attempt <= attempts; ++attempt) {
        LabelAttempt got = request_label(bundle, gateway, step_id + ":" + subject_id);
        std::string reason = got.failure;
        if (reason.empty()) {
            if (auto category = from_string(*got.label)) {
                result.label = to_string(*category);
                result.rationale = got.rationale;
                if (options.state) {
                    if (had_failures) options.state->mark_resolved(step_id, subject_id);
                    options.state->append({step_id, subject_id, prompt_digest,
                                           util::digest_hex(result.label),
                                           validate::StepStatus::Done, attempt});
                }
                return result;
            }
            reason = "UnknownLabel: '" + *got.label + "'";
        }
        had_failures = true;
        if (options.state)
            options.state->record_rollback({step_id, subject_id, attempt, reason, false});
    }

    result.label = to_string(sentinel);
    if (options.state)
        options.state->append({step_id, subject_id, prompt_digest, util::digest_hex(result.label),
                               validate::StepStatus::Failed, attempts});
    return result;
}

} // namespace

ClassificationResult classify_paper(const ParsedPaper& paper, const tree::KnowledgeTree& tree,
                                    gateway::LlmGateway& gateway,
                                    const ClassifyOptions& options) {
    if (util::trim(paper.title).empty() && util::trim(paper.abstract_text).empty())
        throw Error("EmptyPaperText", paper.paper_id, "need a title or abstract to classify");

    const tree::PromptBundle bundle =
        tree::assemble_prompt(tree, tree::node_ids::kPaperClassification,
                              build_paper_context(paper, options.full_text));
    return classify_subject("classify_paper", paper.paper_id, bundle, gateway,
                            paper_category_from_string, PaperCategory::Unclassified, options);
}

ClassificationResult classify_table(const std::string& paper_id, const TableBlock& table,
                                    const tree::KnowledgeTree& tree,
                                    gateway::LlmGateway& gateway,
                                    const ClassifyOptions& options) {
    const std::string subject_id = paper_id + ":" + table.table_id;
    if (table.data_rows.empty()) {
        ClassificationResult result;
        result.subject_id = subject_id;
        result.label = to_string(TableCategory::NonTarget);
        result.rationale = "table has no data rows";
        return result;
    }
    const tree::PromptBundle bundle = tree::assemble_prompt(
        tree, tree::node_ids::kTableClassification, build_table_context(table));
    return classify_subject("classify_table", subject_id, bundle, gateway,
                            table_category_from_string, TableCategory::Unclassified, options);
}

} // namespace compass::classify
