#include "compass/mockgen.hpp"

#include <string>
#include <vector>

#include "compass/classify.hpp"
#include "compass/errors.hpp"
#include "compass/extract.hpp"
#include "compass/util/digest.hpp"

namespace compass::mockgen {

namespace {

const json* find_in(const json& doc, const std::string& key) {
    if (!doc.is_object()) return nullptr;
    auto it = doc.find(key);
    if (it == doc.end()) return nullptr;
    return &*it;
}

std::string annotation_label(const json* node, const std::string& subject) {
    if (node) {
        if (node->is_string()) return node->get<std::string>();
        if (node->is_object() && node->contains("label") && (*node)["label"].is_string())
            return (*node)["label"].get<std::string>();
    }
    throw Error("MissingAnnotation", subject, "no label in annotations");
}

} // namespace

json build_mock_responses(const Corpus& corpus, const tree::KnowledgeTree& tree,
                          const json& annotations, const harmonize::HeaderAliasTable& aliases) {
    const json* papers_ann = find_in(annotations, "papers");
    const json* tables_ann = find_in(annotations, "tables");
    const json* headers_ann = find_in(annotations, "headers");

    json entries = json::object();
    auto add_entry = [&entries](const tree::PromptBundle& bundle, const json& response) {
        entries[util::prompt_digest(bundle.system_text, bundle.user_text)] = response.dump();
    };

    for (const auto& [paper_id, paper_ref] : corpus.papers()) {
        const ParsedPaper* paper = &paper_ref;
        const std::string label = annotation_label(
            papers_ann ? find_in(*papers_ann, paper->paper_id) : nullptr, paper->paper_id);
        add_entry(tree::assemble_prompt(tree, tree::node_ids::kPaperClassification,
                                        classify::build_paper_context(*paper, false)),
                  json{{"label", label}});

        auto category = classify::paper_category_from_string(label);
        if (!category || !classify::is_target(*category)) continue;

        const json* paper_tables = tables_ann ? find_in(*tables_ann, paper->paper_id) : nullptr;
        for (const TableBlock& table : paper->tables) {
            if (table.data_rows.empty()) continue;
            const std::string subject = paper->paper_id + ":" + table.table_id;
            const std::string table_label = annotation_label(
                paper_tables ? find_in(*paper_tables, table.table_id) : nullptr, subject);
            add_entry(tree::assemble_prompt(tree, tree::node_ids::kTableClassification,
                                            classify::build_table_context(table)),
                      json{{"label", table_label}});

            auto table_category = classify::table_category_from_string(table_label);
            if (!table_category || !classify::is_target(*table_category)) continue;

            std::vector<std::string> pending;
            for (const std::string& header : extract::composite_headers(table)) {
                if (aliases.lookup(header)) continue;
                if (harmonize::parse_isotope_header(header)) continue;
                pending.push_back(header);
            }
            if (pending.empty()) continue;

            const json* table_headers = nullptr;
            if (const json* ph = headers_ann ? find_in(*headers_ann, paper->paper_id) : nullptr)
                table_headers = find_in(*ph, table.table_id);

            json mappings = json::array();
            for (const std::string& header : pending) {
                const json* hann = table_headers ? find_in(*table_headers, header) : nullptr;
                if (!hann || !hann->is_object())
                    throw Error("MissingAnnotation", subject + ":" + header,
                                "no mapping for backend-bound header");
                json item = json::object();
                item["header"] = header;
                for (const auto& [key, value] : hann->items()) item[key] = value;
                mappings.push_back(item);
            }
            add_entry(tree::assemble_prompt(tree, tree::node_ids::kHeaderNormalization,
                                            harmonize::build_normalization_context(pending)),
                      json{{"mappings", mappings}});
        }
    }

    json doc = json::object();
    doc["miss_policy"] = "error";
    doc["entries"] = entries;
    return doc;
}

} // namespace compass::mockgen
