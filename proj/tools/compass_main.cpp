#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "compass/errors.hpp"
#include "compass/evaluate.hpp"
#include "compass/pipeline.hpp"
#include "compass/store.hpp"
#include "compass/util/text.hpp"

namespace {

using compass::json;

std::vector<std::string> parse_keyword_list(const std::string& csv) {
    std::vector<std::string> out;
    for (const auto& piece : compass::util::split(csv, ',')) {
        const std::string keyword = compass::util::trim(piece);
        if (!keyword.empty()) out.push_back(keyword);
    }
    return out;
}

json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw compass::Error("UnreadableFile", path, "cannot open");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw compass::Error("MalformedJson", path, e.what());
    }
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw compass::Error("UnwritablePath", path, "cannot open for writing");
    out << text;
}

struct RunArgs {
    std::string config_path;
    std::string corpus;
    std::string tree;
    std::string out_dir;
    std::string backend;
    std::string fixtures;
    std::string http_url;
    std::string model;
    std::string fault_inject;
    std::string keywords;
    std::string mask;
    std::string aliases;
    std::string units;
    bool full_text = false;
    int max_parallel = 0;
    int max_attempts = 0;
    int retries = 0;
    std::vector<std::string> externals; // "data.csv:sidecar.json"
};

int cmd_run(const CLI::App& sub, const RunArgs& args) {
    compass::pipeline::PipelineConfig config;
    if (sub.count("--config")) config = compass::pipeline::PipelineConfig::load_file(args.config_path);

    if (sub.count("--corpus")) config.corpus_path = args.corpus;
    if (sub.count("--tree")) config.tree_path = args.tree;
    if (sub.count("--out")) config.output_dir = args.out_dir;
    if (sub.count("--backend")) config.backend = args.backend;
    if (sub.count("--fixtures")) config.fixtures_path = args.fixtures;
    if (sub.count("--http-url")) config.http_url = args.http_url;
    if (sub.count("--model")) config.model = args.model;
    if (sub.count("--fault-inject")) config.fault_inject = args.fault_inject;
    if (sub.count("--keywords")) config.keywords = parse_keyword_list(args.keywords);
    if (sub.count("--full-text")) config.classify_full_text = args.full_text;
    if (sub.count("--max-parallel")) config.max_parallel = args.max_parallel;
    if (sub.count("--max-attempts")) config.max_attempts = args.max_attempts;
    if (sub.count("--retries")) config.gateway_retries = args.retries;
    if (sub.count("--mask")) config.mask_path = args.mask;
    if (sub.count("--aliases")) config.header_alias_path = args.aliases;
    if (sub.count("--units")) config.unit_registry_path = args.units;
    for (const auto& spec : args.externals) {
        const auto colon = spec.rfind(':');
        if (colon == std::string::npos)
            throw compass::Error("InvalidArgument", "--external", "expected CSV:SIDECAR, got " + spec);
        config.external_datasets.push_back({spec.substr(0, colon), spec.substr(colon + 1)});
    }

    if (config.corpus_path.empty() || config.tree_path.empty() || config.output_dir.empty())
        throw compass::Error("InvalidArgument", "run", "--corpus, --tree and --out are required");

    const compass::pipeline::RunManifest manifest = compass::pipeline::run_pipeline(config);
    std::cout << manifest.to_json().dump(2) << "\n";

    const auto& counts = manifest.counts;
    if (counts.records_quarantined > 0 || counts.subjects_quarantined > 0) return 2;
    return 0;
}

std::map<std::string, std::string> flatten_table_labels(const json& by_paper) {
    std::map<std::string, std::string> flat;
    for (const auto& [paper_id, tables] : by_paper.items())
        for (const auto& [table_id, label] : tables.items())
            flat[paper_id + ":" + table_id] = label.get<std::string>();
    return flat;
}

int cmd_eval(const std::string& gold_path, const std::string& pred_path,
             const std::string& manifest_path, const std::string& out_path,
             const compass::evaluate::MatchCriteria& criteria) {
    const compass::evaluate::GoldSet gold = compass::evaluate::load_gold_file(gold_path);
    const json pred = load_json_file(pred_path);

    std::map<std::string, std::string> paper_pred;
    if (pred.contains("paper_labels"))
        for (const auto& [paper_id, label] : pred["paper_labels"].items())
            paper_pred[paper_id] = label.get<std::string>();

    std::map<std::string, std::string> table_pred;
    if (pred.contains("table_labels")) table_pred = flatten_table_labels(pred["table_labels"]);

    std::map<std::string, std::string> table_gold;
    {
        json as_json = json::object();
        for (const auto& [paper_id, tables] : gold.table_labels) {
            json inner = json::object();
            for (const auto& [table_id, label] : tables) inner[table_id] = label;
            as_json[paper_id] = inner;
        }
        table_gold = flatten_table_labels(as_json);
    }

    std::vector<compass::PbRecord> predicted_records;
    if (pred.contains("records"))
        for (const auto& item : pred["records"])
            predicted_records.push_back(compass::record_from_json(item));

    const std::set<std::string> paper_positive = {
        "Marine Pb conc.", "Marine 210Pb", "Marine Pb isotopes ratios"};
    const std::set<std::string> table_positive = {
        "Target Pb conc.", "Target 210Pb", "Target isotope ratios"};

    const auto paper_metrics =
        compass::evaluate::score_classification(paper_pred, gold.paper_labels, paper_positive);
    const auto table_metrics =
        compass::evaluate::score_classification(table_pred, table_gold, table_positive);
    const auto extraction_metrics =
        compass::evaluate::score_extraction(predicted_records, gold.records, criteria);

    std::map<std::string, std::size_t> per_type;
    for (const auto& record : predicted_records)
        per_type[compass::to_string(record.measurement_type)] += 1;

    json manifest = json::object();
    if (!manifest_path.empty()) manifest = load_json_file(manifest_path);

    const compass::evaluate::ReportDocument doc = compass::evaluate::report(
        paper_metrics, table_metrics, extraction_metrics, per_type, manifest);
    std::cout << doc.text;
    if (!out_path.empty()) write_text_file(out_path, doc.data.dump(2) + "\n");
    return 0;
}

int cmd_export(const std::string& store_path, const std::string& format,
               const std::string& out_path) {
    const compass::store::RecordStore store = compass::store::RecordStore::read_file(store_path);
    std::string payload;
    if (format == "csv")
        payload = compass::store::to_csv(store.records());
    else if (format == "jsonl")
        payload = compass::store::to_jsonl(store.records());
    else if (format == "geojson")
        payload = compass::store::to_geojson(store.records()).dump(2) + "\n";
    else
        throw compass::Error("InvalidArgument", "--format", "expected csv, jsonl or geojson");

    if (out_path.empty() || out_path == "-")
        std::cout << payload;
    else
        write_text_file(out_path, payload);
    return 0;
}

int cmd_stats(const std::string& store_path) {
    const compass::store::RecordStore store = compass::store::RecordStore::read_file(store_path);
    const compass::store::StoreStats stats = compass::store::stats_report(store.records());
    std::cout << compass::store::stats_to_json(stats).dump(2) << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Knowledge-tree-guided extraction of marine Pb measurements"};
    app.require_subcommand(1);

    RunArgs run_args;
    CLI::App* run = app.add_subcommand("run", "Run the collection -> extraction -> aggregation pipeline");
    run->add_option("--config", run_args.config_path, "Pipeline config JSON; flags override its fields");
    run->add_option("--corpus", run_args.corpus, "Directory of parsed-paper JSON files");
    run->add_option("--tree", run_args.tree, "Knowledge tree JSON");
    run->add_option("--out", run_args.out_dir, "Output directory");
    run->add_option("--backend", run_args.backend, "mock or http")
        ->check(CLI::IsMember({"mock", "http"}));
    run->add_option("--fixtures", run_args.fixtures, "Mock backend fixture JSON");
    run->add_option("--http-url", run_args.http_url, "Chat-completions endpoint for the http backend");
    run->add_option("--model", run_args.model, "Model name sent to the http backend");
    run->add_option("--fault-inject", run_args.fault_inject, "none or fail_once (mock only)")
        ->check(CLI::IsMember({"none", "fail_once"}));
    run->add_option("--keywords", run_args.keywords, "Comma-separated recall keywords");
    run->add_flag("--full-text", run_args.full_text, "Include section bodies in classification prompts");
    run->add_option("--max-parallel", run_args.max_parallel, "Concurrent backend requests")
        ->check(CLI::PositiveNumber);
    run->add_option("--max-attempts", run_args.max_attempts, "Step attempts before quarantine")
        ->check(CLI::PositiveNumber);
    run->add_option("--retries", run_args.retries, "Transport retries per request")
        ->check(CLI::PositiveNumber);
    run->add_option("--mask", run_args.mask, "Ocean mask grid file");
    run->add_option("--aliases", run_args.aliases, "Header alias table JSON");
    run->add_option("--units", run_args.units, "Unit registry JSON");
    run->add_option("--external", run_args.externals,
                    "External dataset as CSV:SIDECAR; repeatable");

    std::string gold_path, pred_path, manifest_path, eval_out;
    compass::evaluate::MatchCriteria criteria;
    CLI::App* eval = app.add_subcommand("eval", "Score predictions against a gold set");
    eval->add_option("--gold", gold_path, "Gold set JSON")->required();
    eval->add_option("--pred", pred_path, "predictions.json from a run")->required();
    eval->add_option("--manifest", manifest_path, "manifest.json from the same run");
    eval->add_option("--out", eval_out, "Write the JSON report here");
    eval->add_option("--value-tol", criteria.value_rel_tol, "Relative value tolerance");
    eval->add_option("--coord-tol", criteria.coord_tol_deg, "Coordinate tolerance, degrees");
    eval->add_option("--depth-tol", criteria.depth_tol_m, "Depth tolerance, meters");

    std::string store_path, export_format = "csv", export_out;
    CLI::App* exp = app.add_subcommand("export", "Convert a record store to csv, jsonl or geojson");
    exp->add_option("--store", store_path, "store.jsonl from a run")->required();
    exp->add_option("--format", export_format, "csv, jsonl or geojson")
        ->check(CLI::IsMember({"csv", "jsonl", "geojson"}));
    exp->add_option("--out", export_out, "Output file; '-' or empty for stdout");

    std::string stats_store;
    CLI::App* stats = app.add_subcommand("stats", "Print per-type, per-source and per-region counts");
    stats->add_option("--store", stats_store, "store.jsonl from a run")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(*run, run_args);
        if (eval->parsed()) return cmd_eval(gold_path, pred_path, manifest_path, eval_out, criteria);
        if (exp->parsed()) return cmd_export(store_path, export_format, export_out);
        if (stats->parsed()) return cmd_stats(stats_store);
    } catch (const compass::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
