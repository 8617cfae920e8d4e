#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "compass/checks.hpp"
#include "compass/errors.hpp"
#include "compass/records.hpp"

namespace compass::tree {

/// One Validation Criteria entry: prose that goes into prompts, plus an
/// optional executable check that the validator runs.
struct ValidationCriterion {
    std::string text;
    std::optional<CheckSpec> check;
};

struct OperationalStep {
    std::string text;
    std::string output_format; // empty unless the step pins an output schema
};

/// The four knowledge dimensions attached to every node. Lists may be empty
/// but are always present.
struct KnowledgeDimensions {
    std::vector<std::string> background_knowledge;
    std::vector<std::string> logical_constraints;
    std::vector<OperationalStep> operational_guidelines;
    std::vector<ValidationCriterion> validation_criteria;
};

struct KnowledgeNode {
    std::string id;
    std::string label;
    std::string task_description;
    std::optional<std::string> parent_id;
    std::vector<std::string> child_ids;
    KnowledgeDimensions dimensions;
    std::vector<std::string> category_labels;

    bool is_leaf() const { return child_ids.empty(); }
};

class KnowledgeTree {
public:
    const std::string& root_id() const { return root_id_; }
    const std::string& version() const { return version_; }
    const std::string& domain() const { return domain_; }
    const std::map<std::string, KnowledgeNode>& nodes() const { return nodes_; }
    std::size_t size() const { return nodes_.size(); }
    std::size_t leaf_count() const;

    /// Pure lookup; throws Error("UnknownNode", id, ...) when absent.
    const KnowledgeNode& resolve(const std::string& node_id) const;

    /// Node ids on the path root -> node_id inclusive, root first.
    std::vector<std::string> path_to(const std::string& node_id) const;

    friend KnowledgeTree load_tree(const json& doc);
    friend json serialize(const KnowledgeTree& tree);

private:
    std::string root_id_;
    std::string version_;
    std::string domain_;
    std::map<std::string, KnowledgeNode> nodes_;
    std::vector<std::string> insertion_order_; // preserves source order for serialization
};

/// Loads and validates a tree document. Error codes (subject = offending
/// node id): DuplicateId, DanglingParent, CycleDetected, MultipleRoots,
/// MalformedCheckSpec.
KnowledgeTree load_tree(const json& doc);
KnowledgeTree load_tree_file(const std::string& path);

json serialize(const KnowledgeTree& tree);

/// Executable checks on the root->node path, root-first, in-node order.
/// Prose-only criteria are skipped.
std::vector<CheckSpec> collect_checks(const KnowledgeTree& tree, const std::string& node_id);

struct PromptBundle {
    std::string system_text;
    std::string user_text;
    std::string output_schema_hint;
    std::string source_node_id;
    std::string context_digest;
};

struct PromptOptions {
    std::size_t token_budget = 8192; // applies to system + user text
    std::string system_text =
        "You are a data-integration component for marine lead (Pb) measurements. "
        "Follow the instructions exactly and reply with the requested JSON only.";
};

/// Deterministic prompt assembly: the four dimension sections render in the
/// fixed order BK, LC, OG, VC (empty ones render as "(none)"), followed by
/// the task payload. Throws Error("ContextTooLarge", node_id, ...) when the
/// rendered bundle exceeds options.token_budget.
PromptBundle assemble_prompt(const KnowledgeNode& node, const std::string& task_context,
                             const PromptOptions& options = {});

/// Convenience: resolve node_id in the tree, then assemble.
PromptBundle assemble_prompt(const KnowledgeTree& tree, const std::string& node_id,
                             const std::string& task_context, const PromptOptions& options = {});

/// Well-known node ids the pipeline binds to. The bundled tree uses exactly
/// these; custom trees must keep them.
namespace node_ids {
inline constexpr const char* kPaperClassification = "paper_classification";
inline constexpr const char* kTableClassification = "table_classification";
inline constexpr const char* kTableExtraction = "table_extraction";
inline constexpr const char* kDataAssociation = "data_association";
inline constexpr const char* kHeaderNormalization = "header_normalization";
inline constexpr const char* kUnitStandardization = "unit_standardization";
} // namespace node_ids

/// Leaf node carrying the knowledge (and Range checks) for one measurement type.
std::string node_id_for_measurement(MeasurementType t);

} // namespace compass::tree
