#include "compass/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "compass/errors.hpp"

namespace compass::evaluate {

GoldSet gold_from_json(const json& doc) {
    GoldSet gold;
    try {
        if (doc.contains("paper_labels"))
            for (const auto& [paper_id, label] : doc["paper_labels"].items())
                gold.paper_labels[paper_id] = label.get<std::string>();
        if (doc.contains("table_labels"))
            for (const auto& [paper_id, tables] : doc["table_labels"].items())
                for (const auto& [table_id, label] : tables.items())
                    gold.table_labels[paper_id][table_id] = label.get<std::string>();
        if (doc.contains("records"))
            for (const auto& item : doc["records"]) gold.records.push_back(record_from_json(item));
    } catch (const json::exception& e) {
        throw Error("MalformedGold", "", e.what());
    }
    return gold;
}

GoldSet load_gold_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw Error("MalformedGold", path, "cannot open gold file");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw Error("MalformedGold", path, e.what());
    }
    return gold_from_json(doc);
}

namespace {

double safe_div(std::size_t numerator, std::size_t denominator) {
    return denominator == 0 ? 0.0 : static_cast<double>(numerator) / denominator;
}

double f1_of(double precision, double recall) {
    return precision + recall == 0.0 ? 0.0 : 2.0 * precision * recall / (precision + recall);
}

} // namespace

ClassificationMetrics score_classification(const std::map<std::string, std::string>& predictions,
                                           const std::map<std::string, std::string>& gold,
                                           const std::set<std::string>& positive_set) {
    if (predictions.size() != gold.size() ||
        !std::equal(predictions.begin(), predictions.end(), gold.begin(),
                    [](const auto& a, const auto& b) { return a.first == b.first; })) {
        std::string missing, extra;
        for (const auto& [key, value] : gold)
            if (!predictions.count(key)) missing += (missing.empty() ? "" : ", ") + key;
        for (const auto& [key, value] : predictions)
            if (!gold.count(key)) extra += (extra.empty() ? "" : ", ") + key;
        throw Error("KeyMismatch", "predictions",
                    "missing: [" + missing + "] unexpected: [" + extra + "]");
    }

    ClassificationMetrics metrics;
    metrics.total = gold.size();
    std::size_t exact = 0;
    for (const auto& [key, gold_label] : gold) {
        const std::string& predicted_label = predictions.at(key);
        metrics.confusion[gold_label][predicted_label] += 1;
        if (predicted_label == gold_label) ++exact;
        const bool gold_positive = positive_set.count(gold_label) > 0;
        const bool predicted_positive = positive_set.count(predicted_label) > 0;
        if (gold_positive && predicted_positive)
            ++metrics.true_positives;
        else if (!gold_positive && predicted_positive)
            ++metrics.false_positives;
        else if (gold_positive && !predicted_positive)
            ++metrics.false_negatives;
        else
            ++metrics.true_negatives;
    }
    metrics.accuracy = safe_div(exact, metrics.total);
    metrics.precision =
        safe_div(metrics.true_positives, metrics.true_positives + metrics.false_positives);
    metrics.recall =
        safe_div(metrics.true_positives, metrics.true_positives + metrics.false_negatives);
    metrics.f1 = f1_of(metrics.precision, metrics.recall);
    return metrics;
}

namespace {

const std::string& record_paper(const PbRecord& record) {
    static const std::string unknown;
    return record.provenance.empty() ? unknown : record.provenance.front().paper_id;
}

bool within(double a, double b, double tolerance) { return std::fabs(a - b) <= tolerance; }

struct Matcher {
    const std::vector<std::vector<std::size_t>>& adjacency; // predicted -> gold candidates
    std::vector<int>& gold_owner;                           // gold -> predicted or -1
    std::vector<bool> visited;

    bool augment(std::size_t predicted) {
        for (std::size_t gold : adjacency[predicted]) {
            if (visited[gold]) continue;
            visited[gold] = true;
            if (gold_owner[gold] < 0 || augment(static_cast<std::size_t>(gold_owner[gold]))) {
                gold_owner[gold] = static_cast<int>(predicted);
                return true;
            }
        }
        return false;
    }
};

} // namespace

bool records_match(const PbRecord& predicted, const PbRecord& gold, const MatchCriteria& criteria) {
    if (record_paper(predicted) != record_paper(gold)) return false;
    if (criteria.require_type_equal && predicted.measurement_type != gold.measurement_type)
        return false;

    const double scale = std::max(std::fabs(predicted.value), std::fabs(gold.value));
    const double diff = std::fabs(predicted.value - gold.value);
    if (scale > 0.0 && diff / scale > criteria.value_rel_tol) return false;
    if (scale == 0.0 && diff != 0.0) return false;

    if (predicted.has_location() != gold.has_location()) return false;
    if (predicted.has_location()) {
        if (!within(*predicted.latitude, *gold.latitude, criteria.coord_tol_deg)) return false;
        if (!within(*predicted.longitude, *gold.longitude, criteria.coord_tol_deg)) return false;
    }

    if (predicted.depth_m.has_value() != gold.depth_m.has_value()) return false;
    if (predicted.depth_m && !within(*predicted.depth_m, *gold.depth_m, criteria.depth_tol_m))
        return false;
    return true;
}

ExtractionMetrics score_extraction(const std::vector<PbRecord>& predicted,
                                   const std::vector<PbRecord>& gold,
                                   const MatchCriteria& criteria) {
    ExtractionMetrics metrics;
    metrics.predicted_count = predicted.size();
    metrics.gold_count = gold.size();

    std::vector<std::vector<std::size_t>> adjacency(predicted.size());
    for (std::size_t p = 0; p < predicted.size(); ++p)
        for (std::size_t g = 0; g < gold.size(); ++g)
            if (records_match(predicted[p], gold[g], criteria)) adjacency[p].push_back(g);

    std::vector<int> gold_owner(gold.size(), -1);
    Matcher matcher{adjacency, gold_owner, {}};
    for (std::size_t p = 0; p < predicted.size(); ++p) {
        matcher.visited.assign(gold.size(), false);
        matcher.augment(p);
    }

    std::map<std::string, std::pair<std::size_t, std::size_t>> per_paper; // matched, total gold
    for (std::size_t g = 0; g < gold.size(); ++g) {
        auto& tally = per_paper[record_paper(gold[g])];
        tally.second += 1;
        if (gold_owner[g] >= 0) {
            tally.first += 1;
            metrics.matches.push_back({static_cast<std::size_t>(gold_owner[g]), g});
            ++metrics.true_positives;
        }
    }

    metrics.precision = safe_div(metrics.true_positives, metrics.predicted_count);
    metrics.recall = safe_div(metrics.true_positives, metrics.gold_count);
    metrics.f1 = f1_of(metrics.precision, metrics.recall);

    metrics.papers_with_gold = per_paper.size();
    double recall_sum = 0.0;
    for (const auto& [paper_id, tally] : per_paper)
        recall_sum += safe_div(tally.first, tally.second);
    metrics.per_paper_recall =
        per_paper.empty() ? 0.0 : recall_sum / static_cast<double>(per_paper.size());
    return metrics;
}

namespace {

std::string fixed3(double value) {
    char buffer[32];
    std::snprintf(buffer, sizeof(buffer), "%.3f", value);
    return buffer;
}

json classification_to_json(const ClassificationMetrics& metrics) {
    json confusion = json::object();
    for (const auto& [gold_label, row] : metrics.confusion) {
        json row_json = json::object();
        for (const auto& [predicted_label, count] : row) row_json[predicted_label] = count;
        confusion[gold_label] = row_json;
    }
    return {{"accuracy", metrics.accuracy},
            {"precision", metrics.precision},
            {"recall", metrics.recall},
            {"f1", metrics.f1},
            {"true_positives", metrics.true_positives},
            {"false_positives", metrics.false_positives},
            {"false_negatives", metrics.false_negatives},
            {"true_negatives", metrics.true_negatives},
            {"total", metrics.total},
            {"confusion", confusion}};
}

} // namespace

ReportDocument report(const ClassificationMetrics& paper_task,
                      const ClassificationMetrics& table_task,
                      const ExtractionMetrics& extraction_task,
                      const std::map<std::string, std::size_t>& per_type_counts,
                      const json& run_manifest) {
    ReportDocument doc;
    std::string& text = doc.text;

    text += "Task                      Acc    Prec   Rec    F1\n";
    auto row = [&](const std::string& name, const std::string& acc, double precision,
                   double recall, double f1) {
        char buffer[160];
        std::snprintf(buffer, sizeof(buffer), "%-25s %-6s %-6s %-6s %-6s\n", name.c_str(),
                      acc.c_str(), fixed3(precision).c_str(), fixed3(recall).c_str(),
                      fixed3(f1).c_str());
        text += buffer;
    };
    row("paper_classification", fixed3(paper_task.accuracy), paper_task.precision,
        paper_task.recall, paper_task.f1);
    row("table_classification", fixed3(table_task.accuracy), table_task.precision,
        table_task.recall, table_task.f1);

    const bool has_gold = extraction_task.gold_count > 0;
    if (has_gold) {
        row("extraction_end_to_end", "-", extraction_task.precision, extraction_task.recall,
            extraction_task.f1);
        text += "extraction recall (micro, pooled): " + fixed3(extraction_task.recall) + "\n";
        text += "extraction recall (macro, per-paper mean over " +
                std::to_string(extraction_task.papers_with_gold) +
                " papers): " + fixed3(extraction_task.per_paper_recall) + "\n";
    } else {
        text += "extraction_end_to_end     no gold records\n";
    }

    text += "\nRecords by measurement type:\n";
    for (MeasurementType mtype : kAllMeasurementTypes) {
        const std::string name = to_string(mtype);
        const auto it = per_type_counts.find(name);
        const std::size_t count = it == per_type_counts.end() ? 0 : it->second;
        char buffer[80];
        std::snprintf(buffer, sizeof(buffer), "  %-10s %zu\n", name.c_str(), count);
        text += buffer;
    }

    json per_type_json = json::object();
    for (MeasurementType mtype : kAllMeasurementTypes) {
        const std::string name = to_string(mtype);
        const auto it = per_type_counts.find(name);
        per_type_json[name] = it == per_type_counts.end() ? 0 : it->second;
    }

    doc.data = {{"paper_classification", classification_to_json(paper_task)},
                {"table_classification", classification_to_json(table_task)},
                {"per_type_counts", per_type_json},
                {"run_manifest", run_manifest}};
    if (has_gold) {
        doc.data["extraction"] = {{"precision", extraction_task.precision},
                                  {"recall_micro", extraction_task.recall},
                                  {"recall_macro_per_paper", extraction_task.per_paper_recall},
                                  {"f1", extraction_task.f1},
                                  {"true_positives", extraction_task.true_positives},
                                  {"predicted_count", extraction_task.predicted_count},
                                  {"gold_count", extraction_task.gold_count},
                                  {"papers_with_gold", extraction_task.papers_with_gold}};
    } else {
        doc.data["extraction"] = {{"note", "no gold records"}};
    }
    return doc;
}

} // namespace compass::evaluate
