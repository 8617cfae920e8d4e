#include "compass/knowledge_tree.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "compass/util/digest.hpp"
#include "compass/util/text.hpp"

namespace compass::tree {

namespace {

KnowledgeNode parse_node(const json& nj) {
    KnowledgeNode node;
    node.id = nj.at("id").get<std::string>();
    node.label = nj.value("label", node.id);
    node.task_description = nj.value("task", std::string{});
    if (nj.contains("parent") && !nj["parent"].is_null()) {
        node.parent_id = nj["parent"].get<std::string>();
    }
    if (nj.contains("children")) {
        for (const auto& c : nj["children"]) node.child_ids.push_back(c.get<std::string>());
    }
    if (nj.contains("bk")) {
        for (const auto& e : nj["bk"]) node.dimensions.background_knowledge.push_back(e.get<std::string>());
    }
    if (nj.contains("lc")) {
        for (const auto& e : nj["lc"]) node.dimensions.logical_constraints.push_back(e.get<std::string>());
    }
    if (nj.contains("og")) {
        for (const auto& e : nj["og"]) {
            OperationalStep step;
            if (e.is_string()) {
                step.text = e.get<std::string>();
            } else {
                step.text = e.at("text").get<std::string>();
                step.output_format = e.value("output_format", std::string{});
            }
            node.dimensions.operational_guidelines.push_back(std::move(step));
        }
    }
    if (nj.contains("vc")) {
        int index = 0;
        for (const auto& e : nj["vc"]) {
            ValidationCriterion vc;
            if (e.is_string()) {
                vc.text = e.get<std::string>();
            } else {
                vc.text = e.at("text").get<std::string>();
                if (e.contains("check") && !e["check"].is_null()) {
                    vc.check = parse_check_spec(e["check"], node.id,
                                                node.id + ".vc" + std::to_string(index));
                }
            }
            node.dimensions.validation_criteria.push_back(std::move(vc));
            ++index;
        }
    }
    if (nj.contains("categories")) {
        for (const auto& c : nj["categories"]) node.category_labels.push_back(c.get<std::string>());
    }
    return node;
}

} // namespace

std::size_t KnowledgeTree::leaf_count() const {
    std::size_t n = 0;
    for (const auto& [id, node] : nodes_) {
        if (node.is_leaf()) ++n;
    }
    return n;
}

const KnowledgeNode& KnowledgeTree::resolve(const std::string& node_id) const {
    auto it = nodes_.find(node_id);
    if (it == nodes_.end()) {
        throw Error("UnknownNode", node_id, "no such node in tree");
    }
    return it->second;
}

std::vector<std::string> KnowledgeTree::path_to(const std::string& node_id) const {
    std::vector<std::string> reversed;
    const KnowledgeNode* cur = &resolve(node_id);
    reversed.push_back(cur->id);
    while (cur->parent_id) {
        cur = &resolve(*cur->parent_id);
        reversed.push_back(cur->id);
    }
    return {reversed.rbegin(), reversed.rend()};
}

KnowledgeTree load_tree(const json& doc) {
    KnowledgeTree tree;
    tree.version_ = doc.value("version", std::string{"0"});
    tree.domain_ = doc.value("domain", std::string{});
    if (!doc.contains("root") || !doc.contains("nodes")) {
        throw Error("MalformedTree", "", "document needs 'root' and 'nodes'");
    }
    tree.root_id_ = doc["root"].get<std::string>();

    for (const auto& nj : doc["nodes"]) {
        KnowledgeNode node = parse_node(nj);
        const std::string id = node.id;
        if (tree.nodes_.count(id)) {
            throw Error("DuplicateId", id, "node id appears more than once");
        }
        tree.nodes_.emplace(id, std::move(node));
        tree.insertion_order_.push_back(id);
    }

    if (!tree.nodes_.count(tree.root_id_)) {
        throw Error("DanglingParent", tree.root_id_, "root id does not name a node");
    }

    // Parent references must exist and child lists must mirror them exactly.
    for (const auto& [id, node] : tree.nodes_) {
        if (node.parent_id) {
            auto pit = tree.nodes_.find(*node.parent_id);
            if (pit == tree.nodes_.end()) {
                throw Error("DanglingParent", id, "parent '" + *node.parent_id + "' does not exist");
            }
            const auto& siblings = pit->second.child_ids;
            if (std::find(siblings.begin(), siblings.end(), id) == siblings.end()) {
                throw Error("DanglingParent", id,
                            "parent '" + *node.parent_id + "' does not list this node as a child");
            }
        }
        for (const auto& child : node.child_ids) {
            auto cit = tree.nodes_.find(child);
            if (cit == tree.nodes_.end()) {
                throw Error("DanglingParent", id, "child '" + child + "' does not exist");
            }
            if (!cit->second.parent_id || *cit->second.parent_id != id) {
                throw Error("DanglingParent", child,
                            "listed as child of '" + id + "' but does not point back");
            }
        }
    }

    // Walk every ancestor chain; a repeat before reaching a root is a cycle.
    for (const auto& [id, node] : tree.nodes_) {
        std::set<std::string> seen{id};
        const KnowledgeNode* cur = &node;
        while (cur->parent_id) {
            const std::string& pid = *cur->parent_id;
            if (!seen.insert(pid).second) {
                throw Error("CycleDetected", id, "ancestor chain revisits '" + pid + "'");
            }
            cur = &tree.nodes_.at(pid);
        }
    }

    // Exactly one parentless node, and it must be the declared root.
    std::vector<std::string> parentless;
    for (const auto& [id, node] : tree.nodes_) {
        if (!node.parent_id) parentless.push_back(id);
    }
    if (parentless.size() != 1 || parentless.front() != tree.root_id_) {
        const std::string subject = parentless.empty() ? tree.root_id_ : parentless.back();
        throw Error("MultipleRoots", subject,
                    "expected exactly one parentless node matching 'root' (found " +
                        std::to_string(parentless.size()) + ")");
    }

    // Connectivity: every node reachable from root. With the single-root and
    // acyclicity checks above, |edges| = |nodes|-1 follows.
    std::size_t reachable = 0;
    std::vector<const KnowledgeNode*> stack{&tree.nodes_.at(tree.root_id_)};
    std::set<std::string> visited;
    while (!stack.empty()) {
        const KnowledgeNode* cur = stack.back();
        stack.pop_back();
        if (!visited.insert(cur->id).second) continue;
        ++reachable;
        for (const auto& child : cur->child_ids) stack.push_back(&tree.nodes_.at(child));
    }
    if (reachable != tree.nodes_.size()) {
        throw Error("CycleDetected", tree.root_id_,
                    "tree is not connected: " + std::to_string(reachable) + " of " +
                        std::to_string(tree.nodes_.size()) + " nodes reachable from root");
    }

    return tree;
}

KnowledgeTree load_tree_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error("UnreadableTree", path, "cannot open tree file");
    }
    json doc = json::parse(in);
    return load_tree(doc);
}

json serialize(const KnowledgeTree& tree) {
    json doc;
    doc["version"] = tree.version();
    doc["domain"] = tree.domain();
    doc["root"] = tree.root_id();
    doc["nodes"] = json::array();
    for (const auto& id : tree.insertion_order_) {
        const KnowledgeNode& node = tree.nodes_.at(id);
        json nj;
        nj["id"] = node.id;
        nj["label"] = node.label;
        nj["task"] = node.task_description;
        nj["parent"] = node.parent_id ? json(*node.parent_id) : json(nullptr);
        nj["children"] = node.child_ids;
        nj["bk"] = node.dimensions.background_knowledge;
        nj["lc"] = node.dimensions.logical_constraints;
        nj["og"] = json::array();
        for (const auto& step : node.dimensions.operational_guidelines) {
            if (step.output_format.empty()) {
                nj["og"].push_back(step.text);
            } else {
                nj["og"].push_back(json{{"text", step.text}, {"output_format", step.output_format}});
            }
        }
        nj["vc"] = json::array();
        for (const auto& vc : node.dimensions.validation_criteria) {
            json vj;
            vj["text"] = vc.text;
            if (vc.check) vj["check"] = to_json(*vc.check);
            nj["vc"].push_back(vj);
        }
        if (!node.category_labels.empty()) nj["categories"] = node.category_labels;
        doc["nodes"].push_back(nj);
    }
    return doc;
}

std::vector<CheckSpec> collect_checks(const KnowledgeTree& tree, const std::string& node_id) {
    std::vector<CheckSpec> out;
    for (const auto& id : tree.path_to(node_id)) {
        const auto& node = tree.resolve(id);
        for (const auto& vc : node.dimensions.validation_criteria) {
            if (vc.check) out.push_back(*vc.check);
        }
    }
    return out;
}

PromptBundle assemble_prompt(const KnowledgeNode& node, const std::string& task_context,
                             const PromptOptions& options) {
    std::ostringstream user;
    user << "# Task: " << node.label << "\n";
    if (!node.task_description.empty()) user << node.task_description << "\n";
    user << "\n## Background Knowledge\n";
    if (node.dimensions.background_knowledge.empty()) {
        user << "(none)\n";
    } else {
        for (const auto& e : node.dimensions.background_knowledge) user << "- " << e << "\n";
    }
    user << "\n## Logical Constraints\n";
    if (node.dimensions.logical_constraints.empty()) {
        user << "(none)\n";
    } else {
        for (const auto& e : node.dimensions.logical_constraints) user << "- " << e << "\n";
    }
    user << "\n## Operational Guidelines\n";
    std::string schema_hint;
    if (node.dimensions.operational_guidelines.empty()) {
        user << "(none)\n";
    } else {
        for (const auto& step : node.dimensions.operational_guidelines) {
            user << "- " << step.text << "\n";
            if (!step.output_format.empty()) {
                user << "  Output format: " << step.output_format << "\n";
                schema_hint = step.output_format;
            }
        }
    }
    user << "\n## Validation Criteria\n";
    if (node.dimensions.validation_criteria.empty()) {
        user << "(none)\n";
    } else {
        for (const auto& vc : node.dimensions.validation_criteria) user << "- " << vc.text << "\n";
    }
    if (!node.category_labels.empty()) {
        user << "\n## Allowed Labels\n";
        for (const auto& c : node.category_labels) user << "- " << c << "\n";
    }
    user << "\n## Task Input\n" << task_context << "\n";

    PromptBundle bundle;
    bundle.system_text = options.system_text;
    bundle.user_text = user.str();
    bundle.output_schema_hint = schema_hint;
    bundle.source_node_id = node.id;
    bundle.context_digest = util::digest_hex(task_context);

    const std::size_t tokens =
        util::estimate_tokens(bundle.system_text) + util::estimate_tokens(bundle.user_text);
    if (tokens > options.token_budget) {
        throw Error("ContextTooLarge", node.id,
                    "rendered bundle is ~" + std::to_string(tokens) + " tokens; budget " +
                        std::to_string(options.token_budget));
    }
    return bundle;
}

PromptBundle assemble_prompt(const KnowledgeTree& tree, const std::string& node_id,
                             const std::string& task_context, const PromptOptions& options) {
    return assemble_prompt(tree.resolve(node_id), task_context, options);
}

std::string node_id_for_measurement(MeasurementType t) {
    switch (t) {
        case MeasurementType::PbConc: return "pb_conc_extraction";
        case MeasurementType::Pb210Conc: return "pb210_conc_extraction";
        case MeasurementType::R206_204: return "pb_isotope_206_204";
        case MeasurementType::R207_204: return "pb_isotope_207_204";
        case MeasurementType::R208_204: return "pb_isotope_208_204";
        case MeasurementType::R206_207: return "pb_isotope_206_207";
        case MeasurementType::R208_206: return "pb_isotope_208_206";
        case MeasurementType::R208_207: return "pb_isotope_208_207";
    }
    return "pb_conc_extraction";
}

} // namespace compass::tree
