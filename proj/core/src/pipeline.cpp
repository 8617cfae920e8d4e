#include "compass/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <future>

#include "compass/classify.hpp"
#include "compass/corpus.hpp"
#include "compass/errors.hpp"
#include "compass/extract.hpp"
#include "compass/knowledge_tree.hpp"
#include "compass/llm_gateway.hpp"
#include "compass/store.hpp"
#include "compass/util/digest.hpp"
#include "compass/validate.hpp"

namespace compass::pipeline {

namespace fs = std::filesystem;

json PipelineConfig::to_json() const {
    json externals = json::array();
    for (const auto& ref : external_datasets)
        externals.push_back({{"csv", ref.csv_path}, {"sidecar", ref.sidecar_path}});
    return {
        {"corpus_path", corpus_path},
        {"tree_path", tree_path},
        {"output_dir", output_dir},
        {"backend", backend},
        {"fixtures_path", fixtures_path},
        {"http_url", http_url},
        {"model", model},
        {"fault_inject", fault_inject},
        {"keywords", keywords},
        {"classify_full_text", classify_full_text},
        {"max_parallel", max_parallel},
        {"max_attempts", max_attempts},
        {"gateway_retries", gateway_retries},
        {"mask_path", mask_path},
        {"header_alias_path", header_alias_path},
        {"unit_registry_path", unit_registry_path},
        {"dedup",
         {{"coord_tol_deg", dedup.coord_tol_deg},
          {"depth_tol_m", dedup.depth_tol_m},
          {"value_rel_tol", dedup.value_rel_tol}}},
        {"external_datasets", externals},
    };
}

PipelineConfig PipelineConfig::from_json(const json& doc) {
    if (!doc.is_object())
        throw Error("MalformedConfig", "", "config must be a JSON object");
    PipelineConfig config;
    try {
        config.corpus_path = doc.value("corpus_path", "");
        config.tree_path = doc.value("tree_path", "");
        config.output_dir = doc.value("output_dir", "");
        config.backend = doc.value("backend", "mock");
        config.fixtures_path = doc.value("fixtures_path", "");
        config.http_url = doc.value("http_url", "");
        config.model = doc.value("model", "compass-extractor");
        config.fault_inject = doc.value("fault_inject", "none");
        if (doc.contains("keywords"))
            config.keywords = doc["keywords"].get<std::vector<std::string>>();
        config.classify_full_text = doc.value("classify_full_text", false);
        config.max_parallel = doc.value("max_parallel", 4);
        config.max_attempts = doc.value("max_attempts", 2);
        config.gateway_retries = doc.value("gateway_retries", 3);
        config.mask_path = doc.value("mask_path", "");
        config.header_alias_path = doc.value("header_alias_path", "");
        config.unit_registry_path = doc.value("unit_registry_path", "");
        if (doc.contains("dedup")) {
            const json& dedup = doc["dedup"];
            config.dedup.coord_tol_deg = dedup.value("coord_tol_deg", 0.01);
            config.dedup.depth_tol_m = dedup.value("depth_tol_m", 1.0);
            config.dedup.value_rel_tol = dedup.value("value_rel_tol", 1e-6);
        }
        if (doc.contains("external_datasets"))
            for (const auto& entry : doc["external_datasets"])
                config.external_datasets.push_back(
                    {entry.at("csv").get<std::string>(), entry.at("sidecar").get<std::string>()});
    } catch (const json::exception& e) {
        throw Error("MalformedConfig", "", e.what());
    }
    if (config.backend != "mock" && config.backend != "http")
        throw Error("MalformedConfig", "backend", "must be mock or http");
    if (config.fault_inject != "none" && config.fault_inject != "fail_once")
        throw Error("MalformedConfig", "fault_inject", "must be none or fail_once");
    return config;
}

PipelineConfig PipelineConfig::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw Error("MalformedConfig", path, "cannot open config file");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw Error("MalformedConfig", path, e.what());
    }
    return from_json(doc);
}

json RunManifest::to_json() const {
    return {{"run_id", run_id},
            {"config_digest", config_digest},
            {"counts",
             {{"papers_seen", counts.papers_seen},
              {"papers_target", counts.papers_target},
              {"tables_target", counts.tables_target},
              {"records_extracted", counts.records_extracted},
              {"records_validated", counts.records_validated},
              {"records_quarantined", counts.records_quarantined},
              {"records_fused", counts.records_fused},
              {"dedup_removed", counts.dedup_removed},
              {"cells_skipped", counts.cells_skipped},
              {"subjects_quarantined", counts.subjects_quarantined}}},
            {"rollback_events", rollback_events},
            {"unresolved_rollbacks", unresolved_rollbacks},
            {"wall_time_ms", wall_time_ms}};
}

namespace {

std::string resolve_mask_path(const PipelineConfig& config) {
    if (!config.mask_path.empty()) return config.mask_path;
    const fs::path tree_dir = fs::path(config.tree_path).parent_path();
    const fs::path candidate = tree_dir / ".." / "masks" / "ocean_mask_1deg.txt";
    if (fs::exists(candidate)) return candidate.string();
    throw Error("MaskNotFound", candidate.string(),
                "pass an explicit mask path or place the bundled mask next to the tree");
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error("UnwritablePath", path.string(), "cannot open for writing");
    out << text;
    if (!out)
        throw Error("UnwritablePath", path.string(), "write failed");
}

struct QuarantineRow {
    json to_json() const { return payload; }
    json payload;
};

} // namespace

RunManifest run_pipeline(const PipelineConfig& config) {
    const auto started = std::chrono::steady_clock::now();

    const std::string config_dump = config.to_json().dump();
    RunManifest manifest;
    manifest.config_digest = util::digest_hex(config_dump);
    manifest.run_id = "run-" + manifest.config_digest;

    const tree::KnowledgeTree knowledge = tree::load_tree_file(config.tree_path);
    const Corpus corpus = load_corpus(config.corpus_path);
    const validate::OceanMask mask = validate::OceanMask::from_file(resolve_mask_path(config));
    const harmonize::HeaderAliasTable aliases =
        config.header_alias_path.empty()
            ? harmonize::HeaderAliasTable::builtin()
            : harmonize::HeaderAliasTable::from_file(config.header_alias_path);
    harmonize::UnitRegistry registry =
        config.unit_registry_path.empty()
            ? harmonize::UnitRegistry::builtin()
            : harmonize::UnitRegistry::from_file(config.unit_registry_path);

    std::shared_ptr<gateway::Backend> backend;
    if (config.backend == "mock") {
        const auto fault = config.fault_inject == "fail_once" ? gateway::FaultMode::FailOnce
                                                              : gateway::FaultMode::None;
        backend = gateway::MockBackend::from_file(config.fixtures_path,
                                                  gateway::MissPolicy::Error, fault);
    } else {
        gateway::HttpBackendConfig http;
        http.url = config.http_url;
        http.model = config.model;
        backend = std::make_shared<gateway::HttpBackend>(http);
    }
    gateway::GatewayOptions gateway_options;
    gateway_options.max_attempts = config.gateway_retries;
    gateway_options.max_parallel = std::max(1, config.max_parallel);
    gateway::LlmGateway gateway(backend, gateway_options);

    std::vector<harmonize::ExternalDataset> externals;
    for (const auto& ref : config.external_datasets)
        externals.push_back(
            harmonize::load_external_dataset(ref.csv_path, ref.sidecar_path, registry));

    validate::PipelineState state;
    manifest.counts.papers_seen = corpus.size();

    // Collection: keyword recall, then paper classification.
    const std::vector<std::string> candidates = keyword_search(corpus, config.keywords);
    std::map<std::string, std::string> paper_labels;
    {
        classify::ClassifyOptions options;
        options.full_text = config.classify_full_text;
        options.attempts = config.max_attempts;
        options.state = &state;
        const std::size_t wave = static_cast<std::size_t>(std::max(1, config.max_parallel));
        for (std::size_t begin = 0; begin < candidates.size(); begin += wave) {
            const std::size_t end = std::min(candidates.size(), begin + wave);
            std::vector<std::future<classify::ClassificationResult>> wave_results;
            for (std::size_t i = begin; i < end; ++i) {
                wave_results.push_back(std::async(std::launch::async, [&, i] {
                    return classify::classify_paper(corpus.at(candidates[i]), knowledge, gateway,
                                                    options);
                }));
            }
            for (auto& future : wave_results) {
                classify::ClassificationResult result = future.get();
                paper_labels[result.subject_id] = result.label;
            }
        }
    }

    // Extraction: table classification, row fan-out, metadata association.
    std::map<std::string, std::map<std::string, std::string>> table_labels;
    std::vector<PbRecord> drafts;
    std::vector<QuarantineRow> quarantine;
    classify::ClassifyOptions table_options;
    table_options.attempts = config.max_attempts;
    table_options.state = &state;

    for (const auto& [paper_id, label] : paper_labels) {
        auto category = classify::paper_category_from_string(label);
        if (!category || !classify::is_target(*category)) continue;
        manifest.counts.papers_target += 1;
        const ParsedPaper& paper = corpus.at(paper_id);

        for (const auto& table : paper.tables) {
            const classify::ClassificationResult result =
                classify::classify_table(paper_id, table, knowledge, gateway, table_options);
            table_labels[paper_id][table.table_id] = result.label;
            auto table_category = classify::table_category_from_string(result.label);
            if (!table_category || !classify::is_target(*table_category)) continue;
            manifest.counts.tables_target += 1;

            extract::ExtractOptions extract_options;
            extract_options.max_attempts = config.max_attempts;
            extract_options.state = &state;
            extract::ExtractionResult extraction;
            try {
                extraction = extract::extract_table_records(paper, table, *table_category,
                                                            aliases, &knowledge, &gateway,
                                                            extract_options);
            } catch (const Error& e) {
                if (std::string(e.code()) != "QuarantinedSubject") throw;
                manifest.counts.subjects_quarantined += 1;
                quarantine.push_back({json{{"row_kind", "subject"},
                                           {"subject_id", e.subject()},
                                           {"reason", e.what()}}});
                continue;
            }

            for (const auto& cell : extraction.skipped) {
                manifest.counts.cells_skipped += 1;
                quarantine.push_back({json{{"row_kind", "cell"},
                                           {"paper_id", cell.paper_id},
                                           {"table_id", cell.table_id},
                                           {"row_index", cell.row_index},
                                           {"column_header", cell.column_header},
                                           {"raw_text", cell.raw_text},
                                           {"flag", cell.flag}}});
            }

            std::vector<PbRecord> associated =
                extract::associate_metadata(std::move(extraction.drafts), table, paper, aliases);
            manifest.counts.records_extracted += associated.size();
            drafts.insert(drafts.end(), std::make_move_iterator(associated.begin()),
                          std::make_move_iterator(associated.end()));
        }
    }

    // Aggregation: canonical units, physical checks, fusion.
    auto quarantine_record = [&](PbRecord record, const std::string& reason) {
        manifest.counts.records_quarantined += 1;
        quarantine.push_back({json{{"row_kind", "record"},
                                   {"reason", reason},
                                   {"record", to_json(record)}}});
    };

    std::vector<PbRecord> converted;
    for (auto& record : drafts) {
        try {
            const harmonize::ConversionResult conversion =
                registry.convert(record.value, record.unit, record.measurement_type);
            record.value = conversion.value;
            record.unit = conversion.conversion.to_unit;
        } catch (const Error& e) {
            record.flags.insert(std::string("unit_unresolved:") + e.code());
            quarantine_record(record, e.what());
            continue;
        }
        if (record.has_flag("unlocated") || record.has_flag("coord_ambiguous")) {
            quarantine_record(record, "no usable coordinates after association");
            continue;
        }
        converted.push_back(std::move(record));
    }

    std::vector<PbRecord> validated;
    validate::ValidationReport combined_report;
    std::map<std::string, std::vector<PbRecord>> by_type;
    for (auto& record : converted) by_type[to_string(record.measurement_type)].push_back(record);
    for (auto& [type_name, group] : by_type) {
        const auto mtype = measurement_type_from_string(type_name);
        const std::vector<CheckSpec> checks =
            tree::collect_checks(knowledge, tree::node_id_for_measurement(*mtype));
        const validate::ValidationReport report = validate::run_checks(group, checks, mask);
        combined_report.rows.insert(combined_report.rows.end(), report.rows.begin(),
                                    report.rows.end());
        for (const auto& [check_id, counts] : report.summary) {
            auto& tally = combined_report.summary[check_id];
            tally.first += counts.first;
            tally.second += counts.second;
        }
        for (auto& record : group) {
            bool fatal = false;
            for (const auto& row : report.rows) {
                if (row.record_id != record.record_id || row.pass) continue;
                bool is_fatal = false;
                for (const auto& check : checks)
                    if (check.check_id == row.check_id)
                        is_fatal = check.severity == CheckSeverity::Fatal;
                if (is_fatal)
                    fatal = true;
                else
                    record.flags.insert("flagged:" + row.check_id);
            }
            if (fatal) {
                for (const auto& row : report.rows)
                    if (row.record_id == record.record_id && !row.pass)
                        record.flags.insert("check_failed:" + row.check_id);
                quarantine_record(record, "failed a fatal physical-constraint check");
            } else {
                validated.push_back(std::move(record));
            }
        }
    }
    std::sort(validated.begin(), validated.end(),
              [](const PbRecord& a, const PbRecord& b) { return a.record_id < b.record_id; });
    manifest.counts.records_validated = validated.size();

    const harmonize::UnifiedDataset unified =
        harmonize::merge_sources(validated, externals, config.dedup);
    manifest.counts.records_fused = unified.records.size();

    std::set<std::string> extracted_ids;
    for (const auto& record : validated) extracted_ids.insert(record.record_id);
    for (const auto& entry : unified.merge_log)
        if (extracted_ids.count(entry.absorbed_id)) manifest.counts.dedup_removed += 1;
    manifest.counts.records_validated -= manifest.counts.dedup_removed;

    manifest.rollback_events = state.rollback_count();
    manifest.unresolved_rollbacks = state.unresolved_count();
    manifest.wall_time_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                                std::chrono::steady_clock::now() - started)
                                .count();

    // Outputs.
    fs::create_directories(config.output_dir);
    const fs::path out_dir(config.output_dir);

    store::RecordStore record_store;
    for (const auto& record : unified.records) record_store.append(record);
    record_store.write_file((out_dir / "store.jsonl").string());

    std::string quarantine_text;
    for (const auto& row : quarantine) quarantine_text += row.payload.dump() + "\n";
    write_text(out_dir / "quarantine.jsonl", quarantine_text);

    write_text(out_dir / "validation_report.json", combined_report.to_json().dump(2) + "\n");

    json predictions = {{"paper_labels", json::object()},
                        {"table_labels", json::object()},
                        {"records", json::array()}};
    for (const auto& [paper_id, label] : paper_labels) predictions["paper_labels"][paper_id] = label;
    for (const auto& [paper_id, tables] : table_labels) {
        json labels = json::object();
        for (const auto& [table_id, label] : tables) labels[table_id] = label;
        predictions["table_labels"][paper_id] = labels;
    }
    for (const auto& record : validated) predictions["records"].push_back(to_json(record));
    write_text(out_dir / "predictions.json", predictions.dump(2) + "\n");

    json merge_log = json::array();
    for (const auto& entry : unified.merge_log)
        merge_log.push_back({{"survivor_id", entry.survivor_id}, {"absorbed_id", entry.absorbed_id}});
    json fusion = {{"per_type", json::object()},
                   {"per_source", json::object()},
                   {"merge_log", merge_log},
                   {"dedup_removed", unified.dedup_removed}};
    for (const auto& [key, count] : unified.per_type) fusion["per_type"][key] = count;
    for (const auto& [key, count] : unified.per_source) fusion["per_source"][key] = count;
    write_text(out_dir / "fusion.json", fusion.dump(2) + "\n");

    write_text(out_dir / "manifest.json", manifest.to_json().dump(2) + "\n");
    write_text(out_dir / "state.json", state.to_json().dump(2) + "\n");
    write_text(out_dir / "config.json", config.to_json().dump(2) + "\n");
    return manifest;
}

} // namespace compass::pipeline
