// Acceptance gate for the extraction engine: nine end-to-end guarantees, one
// PASS/FAIL line each. Exits nonzero if any criterion fails.

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "compass/corpus.hpp"
#include "compass/errors.hpp"
#include "compass/evaluate.hpp"
#include "compass/extract.hpp"
#include "compass/geo.hpp"
#include "compass/harmonize.hpp"
#include "compass/knowledge_tree.hpp"
#include "compass/pipeline.hpp"
#include "compass/store.hpp"
#include "compass/validate.hpp"

namespace fs = std::filesystem;
using namespace compass;

namespace {

std::string data_path(const std::string& relative) {
    return std::string(COMPASS_DATA_DIR) + "/" + relative;
}

const fs::path& temp_root() {
    static const fs::path root = [] {
        fs::path p = fs::temp_directory_path() /
                     ("compass-acceptance-" + std::to_string(::getpid()));
        fs::create_directories(p);
        return p;
    }();
    return root;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void require(bool condition, const std::string& message) {
    if (!condition) throw std::runtime_error(message);
}

template <typename T>
void require_eq(const T& actual, const T& expected, const std::string& what) {
    if (!(actual == expected)) {
        std::ostringstream msg;
        msg << what << ": got " << actual << ", expected " << expected;
        throw std::runtime_error(msg.str());
    }
}

pipeline::PipelineConfig mini_config(const fs::path& output_dir) {
    pipeline::PipelineConfig config;
    config.corpus_path = data_path("corpus_mini");
    config.tree_path = data_path("trees/marine_pb.json");
    config.fixtures_path = data_path("fixtures/mock_responses.json");
    config.output_dir = output_dir.string();
    return config;
}

struct BaselineRun {
    pipeline::RunManifest manifest;
    fs::path dir;
};

const BaselineRun& baseline_run() {
    static const BaselineRun run = [] {
        BaselineRun r;
        r.dir = temp_root() / "baseline";
        r.manifest = pipeline::run_pipeline(mini_config(r.dir));
        return r;
    }();
    return run;
}

// --- criterion 1 -----------------------------------------------------------

int node_index(const json& nodes, const std::string& id) {
    for (std::size_t i = 0; i < nodes.size(); ++i)
        if (nodes[i]["id"] == id) return static_cast<int>(i);
    return -1;
}

void expect_rejection(const json& doc, const std::string& code, int iteration) {
    try {
        tree::load_tree(doc);
    } catch (const Error& e) {
        if (e.code() != code)
            throw std::runtime_error("mutation " + std::to_string(iteration) + " raised " +
                                     e.code() + ", expected " + code);
        return;
    }
    throw std::runtime_error("mutation " + std::to_string(iteration) +
                             " was accepted; expected " + code);
}

void criterion_tree_integrity() {
    const auto started = std::chrono::steady_clock::now();
    const json pristine = json::parse(read_file(data_path("trees/marine_pb.json")));
    tree::load_tree(pristine); // the bundled tree must be valid

    std::mt19937 rng(42);
    const std::size_t node_count = pristine["nodes"].size();
    std::vector<std::size_t> leaves, non_roots;
    for (std::size_t i = 0; i < node_count; ++i) {
        if (pristine["nodes"][i]["children"].empty()) leaves.push_back(i);
        if (!pristine["nodes"][i]["parent"].is_null()) non_roots.push_back(i);
    }

    for (int i = 0; i < 100; ++i) {
        json doc = pristine;
        json& nodes = doc["nodes"];
        switch (i % 3) {
        case 0: {
            std::size_t j = rng() % node_count;
            std::size_t k = rng() % node_count;
            while (k == j) k = rng() % node_count;
            nodes[j]["id"] = nodes[k]["id"];
            expect_rejection(doc, "DuplicateId", i);
            break;
        }
        case 1: {
            const std::size_t j = non_roots[rng() % non_roots.size()];
            nodes[j]["parent"] = "ghost_node_" + std::to_string(i);
            expect_rejection(doc, "DanglingParent", i);
            break;
        }
        case 2: {
            // Swap a leaf with its parent so the two nodes point at each
            // other, keeping every parent/child mirror consistent.
            const std::size_t j = leaves[rng() % leaves.size()];
            const std::string leaf_id = nodes[j]["id"];
            const std::string parent_id = nodes[j]["parent"];
            const int pi = node_index(nodes, parent_id);
            const std::string grand_id = nodes[pi]["parent"];
            const int gi = node_index(nodes, grand_id);

            nodes[pi]["parent"] = leaf_id;
            nodes[j]["children"].push_back(parent_id);
            json& siblings = nodes[gi]["children"];
            for (auto it = siblings.begin(); it != siblings.end(); ++it) {
                if (*it == parent_id) {
                    siblings.erase(it);
                    break;
                }
            }
            expect_rejection(doc, "CycleDetected", i);
            break;
        }
        }
    }

    const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                             std::chrono::steady_clock::now() - started)
                             .count();
    require(elapsed < 1000, "took " + std::to_string(elapsed) + " ms, budget is 1000");
}

// --- criterion 2 -----------------------------------------------------------

void criterion_cli_end_to_end() {
#ifndef COMPASS_CLI
    throw std::runtime_error("the CLI target was not built");
#else
    const auto started = std::chrono::steady_clock::now();
    const fs::path out = temp_root() / "cli";
    fs::create_directories(out);
    const std::string log = (out / "cli.log").string();

    const std::string run_cmd = std::string(COMPASS_CLI) + " run --corpus " +
                                data_path("corpus_mini") + " --tree " +
                                data_path("trees/marine_pb.json") + " --fixtures " +
                                data_path("fixtures/mock_responses.json") + " --out " +
                                out.string() + " > " + log + " 2>&1";
    require_eq(std::system(run_cmd.c_str()), 0, "run exit status");

    const std::string eval_cmd = std::string(COMPASS_CLI) + " eval --gold " +
                                 data_path("gold/mini_gold.json") + " --pred " +
                                 (out / "predictions.json").string() + " --manifest " +
                                 (out / "manifest.json").string() + " --out " +
                                 (out / "eval.json").string() + " >> " + log + " 2>&1";
    require_eq(std::system(eval_cmd.c_str()), 0, "eval exit status");

    const json report = json::parse(read_file(out / "eval.json"));
    for (const char* task : {"paper_classification", "table_classification"}) {
        for (const char* metric : {"accuracy", "precision", "recall", "f1"}) {
            require(report[task][metric] == 1.0,
                    std::string(task) + " " + metric + " is not 1.000");
        }
    }
    for (const char* metric : {"precision", "recall_micro", "recall_macro_per_paper", "f1"}) {
        require(report["extraction"][metric] == 1.0,
                std::string("extraction ") + metric + " is not 1.000");
    }

    const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                             std::chrono::steady_clock::now() - started)
                             .count();
    require(elapsed < 10000, "took " + std::to_string(elapsed) + " ms, budget is 10000");
#endif
}

// --- criterion 3 -----------------------------------------------------------

void criterion_fault_equivalence() {
    const BaselineRun& clean = baseline_run();
    const std::string clean_bytes = read_file(clean.dir / "store.jsonl");

    const fs::path dir = temp_root() / "faulty";
    auto config = mini_config(dir);
    config.fault_inject = "fail_once";
    const auto manifest = pipeline::run_pipeline(config);

    require(read_file(dir / "store.jsonl") == clean_bytes,
            "the store differs between the clean and fault-injected runs");
    require(manifest.rollback_events >= 1, "no rollback events were recorded");
    require_eq(manifest.unresolved_rollbacks, std::size_t{0}, "unresolved rollbacks");

    const json state = json::parse(read_file(dir / "state.json"));
    for (const auto& entry : state["entries"]) {
        require(entry["attempt"].get<int>() <= config.max_attempts,
                "entry for " + entry["subject_id"].get<std::string>() +
                    " exceeded the attempt budget");
    }
}

// --- criterion 4 -----------------------------------------------------------

std::size_t oracle_matching(const std::vector<std::vector<std::size_t>>& adjacency,
                            std::size_t gold_count) {
    std::vector<std::size_t> best(std::size_t{1} << gold_count, 0);
    for (const auto& candidates : adjacency) {
        auto next = best;
        for (std::size_t mask = 0; mask < best.size(); ++mask) {
            for (std::size_t g : candidates) {
                if (mask & (std::size_t{1} << g)) continue;
                auto& slot = next[mask | (std::size_t{1} << g)];
                slot = std::max(slot, best[mask] + 1);
            }
        }
        best = std::move(next);
    }
    return *std::max_element(best.begin(), best.end());
}

void criterion_matcher_oracle() {
    const auto started = std::chrono::steady_clock::now();
    std::mt19937 rng(20260819);
    std::uniform_int_distribution<int> size_dist(0, 7);
    std::uniform_int_distribution<int> jitter_dist(-4, 4);
    std::uniform_int_distribution<int> paper_dist(1, 2);
    std::bernoulli_distribution located(0.8);
    const evaluate::MatchCriteria criteria;

    auto make_point = [&](const std::string& id) {
        PbRecord record;
        record.record_id = id;
        record.measurement_type = MeasurementType::PbConc;
        record.value = 100.0;
        record.unit = "pmol/kg";
        if (located(rng)) {
            record.latitude = 36.5 + jitter_dist(rng) * 0.004;
            record.longitude = -64.0 + jitter_dist(rng) * 0.004;
        }
        Provenance prov;
        prov.paper_id = "P" + std::to_string(paper_dist(rng));
        record.provenance.push_back(prov);
        return record;
    };

    for (int iteration = 0; iteration < 1000; ++iteration) {
        std::vector<PbRecord> predicted, gold;
        for (int i = size_dist(rng); i > 0; --i)
            predicted.push_back(make_point("p" + std::to_string(i)));
        for (int i = size_dist(rng); i > 0; --i)
            gold.push_back(make_point("g" + std::to_string(i)));

        std::vector<std::vector<std::size_t>> adjacency(predicted.size());
        for (std::size_t p = 0; p < predicted.size(); ++p)
            for (std::size_t g = 0; g < gold.size(); ++g)
                if (evaluate::records_match(predicted[p], gold[g], criteria))
                    adjacency[p].push_back(g);

        const std::size_t expected = oracle_matching(adjacency, gold.size());
        const auto metrics = evaluate::score_extraction(predicted, gold, criteria);
        if (metrics.true_positives != expected)
            throw std::runtime_error("iteration " + std::to_string(iteration) + ": matcher found " +
                                     std::to_string(metrics.true_positives) + ", oracle found " +
                                     std::to_string(expected));
    }

    const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                             std::chrono::steady_clock::now() - started)
                             .count();
    require(elapsed < 5000, "took " + std::to_string(elapsed) + " ms, budget is 5000");
}

// --- criterion 5 -----------------------------------------------------------

void criterion_unit_conversions() {
    const auto registry = harmonize::UnitRegistry::builtin();

    const auto ng_kg = registry.convert(1.0, "ng/kg", MeasurementType::PbConc);
    const double expected = 1000.0 / 207.2;
    require(std::fabs(ng_kg.conversion.factor - expected) <= 1e-9 * expected,
            "ng/kg -> pmol/kg factor drifted from 1000/207.2");
    require_eq(ng_kg.conversion.to_unit, std::string("pmol/kg"), "ng/kg target unit");

    const json snapshot = registry.to_json();
    for (const auto& unit : snapshot["units"]) {
        const double factor = unit["factor_to_base"].get<double>();
        const std::string symbol = unit["symbol"].get<std::string>();
        require(std::isfinite(factor) && factor > 0.0, symbol + " has a bad factor");
        const double inverse = 1.0 / factor;
        for (double x : {1.0, 3.7, 1e6}) {
            require(std::fabs(x * factor * inverse - x) <= 1e-12 * std::fabs(x),
                    symbol + " does not round-trip at " + std::to_string(x));
        }
    }

    int rejected = 0;
    for (int i = 0; i < 50; ++i) {
        json proposal = {{"from_unit", "bogus_" + std::to_string(i)},
                         {"dimension", "mass_per_mass"},
                         {"factor_to_base", 4.8262548262548262},
                         {"inverse_factor", 1.0 / 4.8262548262548262}};
        MeasurementType mtype = MeasurementType::PbConc;
        switch (i % 6) {
        case 0: {
            const char* fields[] = {"from_unit", "dimension", "factor_to_base", "inverse_factor"};
            proposal.erase(fields[i % 4]);
            break;
        }
        case 1:
            proposal["dimension"] = "furlong_per_fortnight";
            break;
        case 2:
            proposal["factor_to_base"] = -static_cast<double>(i + 1);
            break;
        case 3:
            proposal["factor_to_base"] = std::numeric_limits<double>::quiet_NaN();
            break;
        case 4:
            proposal["inverse_factor"] = (1.0 / 4.8262548262548262) * (1.0 + 1e-7);
            break;
        case 5:
            proposal["dimension"] = "activity_per_mass"; // no bridge to a molar target
            break;
        }
        try {
            registry.vet_proposal(proposal, mtype);
        } catch (const Error& e) {
            if (e.code() == "ConversionRejected") ++rejected;
            continue;
        }
    }
    require_eq(rejected, 50, "adversarial proposals rejected");
}

// --- criterion 6 -----------------------------------------------------------

void criterion_coordinate_round_trips() {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> lat_dist(-90.0, 90.0);
    std::uniform_real_distribution<double> lon_dist(-180.0, 180.0);

    for (int i = 0; i < 10000; ++i) {
        const bool is_lat = (i % 2) == 0;
        const double truth = is_lat ? lat_dist(rng) : lon_dist(rng);
        const std::string text = geo::format_dms(truth, is_lat);
        const auto matches = geo::scan_coordinates(text);
        require(matches.size() == 1, "expected exactly one match in '" + text + "'");
        require(matches[0].is_latitude == is_lat, "axis flipped for '" + text + "'");
        require(std::fabs(matches[0].degrees - truth) <= 1e-9,
                "round trip drifted for '" + text + "'");
    }

    const auto half = geo::scan_coordinates("36°30'N");
    require(half.size() == 1 && half[0].degrees == 36.5, "36°30'N must equal 36.5 exactly");

    const auto decimal_minutes = geo::scan_coordinates("123°15.6'E");
    require(decimal_minutes.size() == 1 &&
                std::fabs(decimal_minutes[0].degrees - 123.26) <= 1e-12,
            "123°15.6'E must equal 123.26");

    try {
        geo::scan_coordinates("Station at 95°N.");
        throw std::runtime_error("a 95-degree latitude was accepted");
    } catch (const Error& e) {
        require_eq(e.code(), std::string("OutOfRange"), "impossible latitude error code");
    }
}

// --- criterion 7 -----------------------------------------------------------

std::set<std::string> fatal_failures(const std::vector<PbRecord>& records,
                                     const tree::KnowledgeTree& knowledge,
                                     const validate::OceanMask& mask) {
    std::map<std::string, std::vector<PbRecord>> by_type;
    for (const auto& record : records) by_type[to_string(record.measurement_type)].push_back(record);

    std::set<std::string> failed;
    for (const auto& [type_name, group] : by_type) {
        const auto mtype = measurement_type_from_string(type_name);
        const auto checks = tree::collect_checks(knowledge, tree::node_id_for_measurement(*mtype));
        const auto report = validate::run_checks(group, checks, mask);
        for (const auto& record : group)
            if (report.record_failed_fatal(record.record_id, checks)) failed.insert(record.record_id);
    }
    return failed;
}

void criterion_violation_coverage() {
    const auto gold = evaluate::load_gold_file(data_path("gold/mini_gold.json"));
    const auto knowledge = tree::load_tree_file(data_path("trees/marine_pb.json"));
    const auto mask = validate::OceanMask::from_file(data_path("masks/ocean_mask_1deg.txt"));

    const auto clean = fatal_failures(gold.records, knowledge, mask);
    require(clean.empty(),
            std::to_string(clean.size()) + " clean records were wrongly condemned");

    auto tampered = gold.records;
    std::set<std::string> planted;
    int negatives = 0, landed = 0, wild = 0;
    for (auto& record : tampered) {
        if (record.measurement_type == MeasurementType::PbConc && negatives < 8) {
            record.value = -5.0 - negatives;
            planted.insert(record.record_id);
            ++negatives;
        } else if (record.measurement_type == MeasurementType::Pb210Conc && landed < 6) {
            record.latitude = 47.0; // inland France
            record.longitude = 2.5;
            planted.insert(record.record_id);
            ++landed;
        } else if (record.unit == "dimensionless" && wild < 6) {
            record.value = 1e6;
            planted.insert(record.record_id);
            ++wild;
        }
    }
    require_eq(planted.size(), std::size_t{20}, "planted violations");

    const auto caught = fatal_failures(tampered, knowledge, mask);
    for (const auto& id : planted)
        require(caught.count(id) == 1, "planted violation in " + id + " went uncaught");
    for (const auto& id : caught)
        require(planted.count(id) == 1, id + " failed without a planted violation");
}

// --- criterion 8 -----------------------------------------------------------

void criterion_provenance_resolves() {
    const BaselineRun& run = baseline_run();
    const auto records = store::records_from_jsonl(read_file(run.dir / "store.jsonl"));
    require(!records.empty(), "the baseline run stored no records");

    const Corpus corpus = load_corpus(data_path("corpus_mini"));
    for (const auto& record : records) {
        require(!record.provenance.empty(), record.record_id + " has no provenance");
        for (const auto& prov : record.provenance) {
            const ParsedPaper& paper = corpus.at(prov.paper_id); // throws if unknown
            const TableBlock* table = paper.find_table(prov.table_id);
            require(table != nullptr,
                    record.record_id + " cites missing table " + prov.paper_id + ":" +
                        prov.table_id);
            require(prov.row_index >= 0 &&
                        static_cast<std::size_t>(prov.row_index) < table->data_rows.size(),
                    record.record_id + " cites a row outside " + prov.table_id);
            const auto headers = extract::composite_headers(*table);
            require(std::find(headers.begin(), headers.end(), prov.column_header) != headers.end(),
                    record.record_id + " cites unknown column '" + prov.column_header + "'");
        }
    }
}

// --- criterion 9 -----------------------------------------------------------

void criterion_fusion_idempotent() {
    const BaselineRun& run = baseline_run();
    const auto extracted = store::records_from_jsonl(read_file(run.dir / "store.jsonl"));
    require_eq(extracted.size(), std::size_t{40}, "extracted record count");

    const auto registry = harmonize::UnitRegistry::builtin();
    const auto external = harmonize::load_external_dataset(
        data_path("external/structured_geo.csv"), data_path("external/structured_geo.map.json"),
        registry);
    require_eq(external.records.size(), std::size_t{8}, "external record count");

    const harmonize::DedupCriteria criteria;
    const auto unified = harmonize::merge_sources(extracted, {external}, criteria);
    require_eq(unified.records.size(), std::size_t{43}, "fused record count");
    require_eq(unified.dedup_removed, std::size_t{5}, "absorbed duplicates");
    require_eq(unified.merge_log.size(), std::size_t{5}, "merge log entries");

    for (const auto& entry : unified.merge_log) {
        const auto survivor =
            std::find_if(unified.records.begin(), unified.records.end(),
                         [&](const PbRecord& r) { return r.record_id == entry.survivor_id; });
        require(survivor != unified.records.end(), "survivor " + entry.survivor_id + " vanished");
        require(survivor->source_kind == SourceKind::Structured,
                "survivor " + entry.survivor_id + " is not from the structured source");
    }

    const auto again = harmonize::merge_sources(unified.records, {}, criteria);
    require_eq(again.records.size(), std::size_t{43}, "re-merged record count");
    require_eq(again.dedup_removed, std::size_t{0}, "re-merge removals");
}

// --- harness ----------------------------------------------------------------

int run_criterion(int number, const std::string& name, const std::function<void()>& body) {
    try {
        body();
        std::printf("PASS - %d: %s\n", number, name.c_str());
        return 0;
    } catch (const std::exception& e) {
        std::printf("FAIL - %d: %s (%s)\n", number, name.c_str(), e.what());
        return 1;
    }
}

} // namespace

int main() {
    int failures = 0;
    failures += run_criterion(1, "knowledge tree validates and rejects 100 seeded corruptions",
                              criterion_tree_integrity);
    failures += run_criterion(2, "mock end-to-end run scores 1.000 on all three tasks",
                              criterion_cli_end_to_end);
    failures += run_criterion(3, "injected transient faults leave the dataset byte-identical",
                              criterion_fault_equivalence);
    failures += run_criterion(4, "record matcher agrees with a brute-force oracle on 1000 cases",
                              criterion_matcher_oracle);
    failures += run_criterion(5, "unit conversions are exact, reversible, and strictly vetted",
                              criterion_unit_conversions);
    failures += run_criterion(6, "coordinate formats round-trip within 1e-9 degrees",
                              criterion_coordinate_round_trips);
    failures += run_criterion(7, "20 planted physical-constraint violations are all caught",
                              criterion_violation_coverage);
    failures += run_criterion(8, "every stored record's provenance resolves into the corpus",
                              criterion_provenance_resolves);
    failures += run_criterion(9, "cross-source fusion absorbs duplicates and is idempotent",
                              criterion_fusion_idempotent);

    std::fflush(stdout);
    return failures == 0 ? 0 : 1;
}
