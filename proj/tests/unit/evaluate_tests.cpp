#include <doctest.h>

#include <algorithm>
#include <random>
#include <vector>

#include "compass/errors.hpp"
#include "compass/evaluate.hpp"

#include "helpers.hpp"

using namespace compass;
using evaluate::MatchCriteria;

namespace {

PbRecord point(const std::string& id, double value, std::optional<double> lat,
               std::optional<double> lon, std::optional<double> depth,
               const std::string& paper = "P1") {
    return testutil::make_record(id, MeasurementType::PbConc, value, "pmol/kg", lat, lon, depth,
                                 paper);
}

std::size_t brute_force_matching(const std::vector<std::vector<std::size_t>>& adjacency,
                                 std::size_t gold_count) {
    std::vector<std::size_t> best(std::size_t{1} << gold_count, 0);
    for (const auto& candidates : adjacency) {
        auto next = best;
        for (std::size_t mask = 0; mask < best.size(); ++mask) {
            for (std::size_t g : candidates) {
                if (mask & (std::size_t{1} << g)) continue;
                const std::size_t with = best[mask] + 1;
                auto& slot = next[mask | (std::size_t{1} << g)];
                slot = std::max(slot, with);
            }
        }
        best = std::move(next);
    }
    return *std::max_element(best.begin(), best.end());
}

} // namespace

TEST_SUITE("evaluate") {

TEST_CASE("bundled gold file loads with the expected shape") {
    const auto gold = evaluate::load_gold_file(testutil::data_path("gold/mini_gold.json"));
    CHECK(gold.paper_labels.size() == 12);
    CHECK(gold.paper_labels.at("P001") == "Marine Pb conc.");
    CHECK(gold.table_labels.size() == 3);
    std::size_t tables = 0;
    for (const auto& [paper_id, labels] : gold.table_labels) tables += labels.size();
    CHECK(tables == 7);
    CHECK(gold.table_labels.at("P001").at("T3") == "Non-target");
    CHECK(gold.records.size() == 40);

    std::size_t pb_conc = 0;
    for (const auto& record : gold.records)
        if (record.measurement_type == MeasurementType::PbConc) ++pb_conc;
    CHECK(pb_conc == 14);
}

TEST_CASE("gold parsing tolerates absent blocks and rejects bad ones") {
    const auto empty = evaluate::gold_from_json(json::object());
    CHECK(empty.paper_labels.empty());
    CHECK(empty.table_labels.empty());
    CHECK(empty.records.empty());

    try {
        evaluate::gold_from_json(json{{"paper_labels", {{"P1", 7}}}});
        FAIL("expected rejection of a numeric label");
    } catch (const Error& e) {
        CHECK(e.code() == "MalformedGold");
    }

    CHECK_THROWS_AS(evaluate::load_gold_file("/nonexistent/gold.json"), Error);

    const auto dir = testutil::make_temp_dir("compass-gold");
    testutil::write_file(dir / "broken.json", "{ not json");
    try {
        evaluate::load_gold_file((dir / "broken.json").string());
        FAIL("expected a parse failure");
    } catch (const Error& e) {
        CHECK(e.code() == "MalformedGold");
    }
}

TEST_CASE("classification metrics separate exact accuracy from binary collapse") {
    const std::set<std::string> positive = {"pos1", "pos2"};
    const std::map<std::string, std::string> gold = {{"A", "pos1"}, {"B", "pos1"}, {"C", "neg1"},
                                                     {"D", "neg2"}, {"E", "pos2"}, {"F", "neg1"}};
    const std::map<std::string, std::string> predictions = {
        {"A", "pos1"}, {"B", "pos2"}, {"C", "pos1"}, {"D", "neg2"}, {"E", "neg1"}, {"F", "neg1"}};

    const auto m = evaluate::score_classification(predictions, gold, positive);
    CHECK(m.total == 6);
    CHECK(m.accuracy == doctest::Approx(0.5)); // A, D, F exact
    // B counts as a true positive despite the wrong positive label
    CHECK(m.true_positives == 2);
    CHECK(m.false_positives == 1);
    CHECK(m.false_negatives == 1);
    CHECK(m.true_negatives == 2);
    CHECK(m.precision == doctest::Approx(2.0 / 3.0));
    CHECK(m.recall == doctest::Approx(2.0 / 3.0));
    CHECK(m.f1 == doctest::Approx(2.0 / 3.0));
    CHECK(m.confusion.at("pos1").at("pos2") == 1);
    CHECK(m.confusion.at("neg1").at("pos1") == 1);
    CHECK(m.confusion.at("neg1").at("neg1") == 1);
}

TEST_CASE("a sentinel prediction counts against recall, not precision") {
    const std::set<std::string> positive = {"target"};
    const auto m = evaluate::score_classification({{"A", "Unclassified"}, {"B", "target"}},
                                                  {{"A", "target"}, {"B", "target"}}, positive);
    CHECK(m.true_positives == 1);
    CHECK(m.false_negatives == 1);
    CHECK(m.false_positives == 0);
    CHECK(m.precision == doctest::Approx(1.0));
    CHECK(m.recall == doctest::Approx(0.5));
}

TEST_CASE("key mismatches name both directions") {
    try {
        evaluate::score_classification({{"A", "x"}, {"Z", "x"}}, {{"A", "x"}, {"B", "x"}}, {});
        FAIL("expected a key mismatch");
    } catch (const Error& e) {
        CHECK(e.code() == "KeyMismatch");
        const std::string what = e.what();
        CHECK(what.find("missing: [B]") != std::string::npos);
        CHECK(what.find("unexpected: [Z]") != std::string::npos);
    }
}

TEST_CASE("empty label sets score zero everywhere") {
    const auto m = evaluate::score_classification({}, {}, {"target"});
    CHECK(m.total == 0);
    CHECK(m.accuracy == 0.0);
    CHECK(m.precision == 0.0);
    CHECK(m.recall == 0.0);
    CHECK(m.f1 == 0.0);
}

TEST_CASE("record matching tolerances") {
    const MatchCriteria criteria;
    const auto base = point("p", 100.0, 36.5, -64.0, 10.0);

    CHECK(evaluate::records_match(base, point("g", 100.0, 36.5, -64.0, 10.0), criteria));
    CHECK(evaluate::records_match(base, point("g", 100.0 * (1.0 + 5e-7), 36.5, -64.0, 10.0),
                                  criteria));
    CHECK_FALSE(evaluate::records_match(base, point("g", 100.01, 36.5, -64.0, 10.0), criteria));

    CHECK(evaluate::records_match(base, point("g", 100.0, 36.509, -64.0, 10.0), criteria));
    CHECK_FALSE(evaluate::records_match(base, point("g", 100.0, 36.512, -64.0, 10.0), criteria));
    CHECK(evaluate::records_match(base, point("g", 100.0, 36.5, -64.0, 11.0), criteria));
    CHECK_FALSE(evaluate::records_match(base, point("g", 100.0, 36.5, -64.0, 11.01), criteria));

    // presence must agree on both sides
    CHECK_FALSE(evaluate::records_match(base, point("g", 100.0, {}, {}, 10.0), criteria));
    CHECK_FALSE(evaluate::records_match(base, point("g", 100.0, 36.5, -64.0, {}), criteria));
    CHECK(evaluate::records_match(point("p", 100.0, {}, {}, {}), point("g", 100.0, {}, {}, {}),
                                  criteria));

    // zero values only match exactly
    CHECK(evaluate::records_match(point("p", 0.0, {}, {}, {}), point("g", 0.0, {}, {}, {}),
                                  criteria));
    CHECK_FALSE(evaluate::records_match(point("p", 0.0, {}, {}, {}),
                                        point("g", 1e-12, {}, {}, {}), criteria));

    // the paper of origin must agree
    CHECK_FALSE(evaluate::records_match(point("p", 100.0, 36.5, -64.0, 10.0, "PA"),
                                        point("g", 100.0, 36.5, -64.0, 10.0, "PB"), criteria));

    auto isotope = testutil::make_record("p", MeasurementType::R206_204, 100.0, "pmol/kg", 36.5,
                                         -64.0, 10.0);
    CHECK_FALSE(evaluate::records_match(isotope, base, criteria));
    MatchCriteria loose = criteria;
    loose.require_type_equal = false;
    CHECK(evaluate::records_match(isotope, base, loose));
}

TEST_CASE("extraction scoring finds the maximum matching, not the greedy one") {
    // p0 is compatible with both gold points, p1 only with the first; a
    // greedy pass that hands g0 to p0 would strand p1.
    const std::vector<PbRecord> predicted = {point("p0", 100.0, 36.508, -64.008, 10.0),
                                             point("p1", 100.0, 36.500, -64.000, 10.0)};
    const std::vector<PbRecord> gold = {point("g0", 100.0, 36.500, -64.000, 10.0),
                                        point("g1", 100.0, 36.516, -64.016, 10.0)};

    const auto m = evaluate::score_extraction(predicted, gold);
    CHECK(m.true_positives == 2);
    CHECK(m.precision == doctest::Approx(1.0));
    CHECK(m.recall == doctest::Approx(1.0));
    REQUIRE(m.matches.size() == 2);
    CHECK(m.matches[0] == std::pair<std::size_t, std::size_t>{1, 0});
    CHECK(m.matches[1] == std::pair<std::size_t, std::size_t>{0, 1});
}

TEST_CASE("micro and macro recall diverge when one paper is missed") {
    const std::vector<PbRecord> gold = {point("g0", 100.0, {}, {}, {}, "PA"),
                                        point("g1", 200.0, {}, {}, {}, "PA"),
                                        point("g2", 300.0, {}, {}, {}, "PB")};
    const std::vector<PbRecord> predicted = {point("p0", 100.0, {}, {}, {}, "PA"),
                                             point("p1", 200.0, {}, {}, {}, "PA")};

    const auto m = evaluate::score_extraction(predicted, gold);
    CHECK(m.true_positives == 2);
    CHECK(m.gold_count == 3);
    CHECK(m.recall == doctest::Approx(2.0 / 3.0));
    CHECK(m.papers_with_gold == 2);
    CHECK(m.per_paper_recall == doctest::Approx(0.5)); // mean of 1.0 and 0.0
    CHECK(m.precision == doctest::Approx(1.0));
}

TEST_CASE("unmatched predictions cost precision") {
    const std::vector<PbRecord> gold = {point("g0", 100.0, {}, {}, {})};
    const std::vector<PbRecord> predicted = {point("p0", 100.0, {}, {}, {}),
                                             point("p1", 555.0, {}, {}, {}),
                                             point("p2", 777.0, {}, {}, {})};
    const auto m = evaluate::score_extraction(predicted, gold);
    CHECK(m.true_positives == 1);
    CHECK(m.precision == doctest::Approx(1.0 / 3.0));
    CHECK(m.recall == doctest::Approx(1.0));
}

TEST_CASE("empty sides follow the zero conventions") {
    const auto no_gold = evaluate::score_extraction({point("p", 1.0, {}, {}, {})}, {});
    CHECK(no_gold.recall == 0.0);
    CHECK(no_gold.f1 == 0.0);
    CHECK(no_gold.papers_with_gold == 0);
    CHECK(no_gold.per_paper_recall == 0.0);

    const auto no_pred = evaluate::score_extraction({}, {point("g", 1.0, {}, {}, {})});
    CHECK(no_pred.precision == 0.0);
    CHECK(no_pred.recall == 0.0);
}

TEST_CASE("matching size agrees with a brute-force oracle on random graphs") {
    std::mt19937 rng(20260819);
    std::uniform_int_distribution<int> size_dist(0, 6);
    std::uniform_int_distribution<int> jitter_dist(-4, 4);
    std::uniform_int_distribution<int> paper_dist(1, 2);
    std::bernoulli_distribution located(0.8);

    const MatchCriteria criteria;
    for (int iteration = 0; iteration < 200; ++iteration) {
        auto random_point = [&](const std::string& id) {
            std::optional<double> lat, lon;
            if (located(rng)) {
                lat = 36.5 + jitter_dist(rng) * 0.004;
                lon = -64.0 + jitter_dist(rng) * 0.004;
            }
            return point(id, 100.0, lat, lon, {}, "P" + std::to_string(paper_dist(rng)));
        };

        std::vector<PbRecord> predicted, gold;
        const int n_pred = size_dist(rng);
        const int n_gold = size_dist(rng);
        for (int i = 0; i < n_pred; ++i) predicted.push_back(random_point("p" + std::to_string(i)));
        for (int i = 0; i < n_gold; ++i) gold.push_back(random_point("g" + std::to_string(i)));

        std::vector<std::vector<std::size_t>> adjacency(predicted.size());
        for (std::size_t p = 0; p < predicted.size(); ++p)
            for (std::size_t g = 0; g < gold.size(); ++g)
                if (evaluate::records_match(predicted[p], gold[g], criteria))
                    adjacency[p].push_back(g);

        const std::size_t expected = brute_force_matching(adjacency, gold.size());
        const auto m = evaluate::score_extraction(predicted, gold, criteria);
        REQUIRE_MESSAGE(m.true_positives == expected, "iteration " << iteration);
    }
}

TEST_CASE("reports render every measurement type and stay deterministic") {
    const std::set<std::string> positive = {"t"};
    const auto klass =
        evaluate::score_classification({{"A", "t"}, {"B", "n"}}, {{"A", "t"}, {"B", "n"}}, positive);
    const auto extraction = evaluate::score_extraction({point("p", 1.0, {}, {}, {})},
                                                       {point("g", 1.0, {}, {}, {})});

    const std::map<std::string, std::size_t> counts = {{"PbConc", 14}, {"Pb210Conc", 6}};
    const json manifest = {{"run_id", "run-x"}};
    const auto first = evaluate::report(klass, klass, extraction, counts, manifest);
    const auto second = evaluate::report(klass, klass, extraction, counts, manifest);
    CHECK(first.text == second.text);
    CHECK(first.data.dump() == second.data.dump());

    CHECK(first.text.find("paper_classification") != std::string::npos);
    CHECK(first.text.find("table_classification") != std::string::npos);
    CHECK(first.text.find("extraction_end_to_end") != std::string::npos);
    CHECK(first.text.find("1.000") != std::string::npos);
    for (MeasurementType mtype : kAllMeasurementTypes)
        CHECK(first.text.find(to_string(mtype)) != std::string::npos);

    CHECK(first.data["per_type_counts"]["PbConc"] == 14);
    CHECK(first.data["per_type_counts"]["R208_207"] == 0);
    CHECK(first.data["extraction"]["recall_micro"] == 1.0);
    CHECK(first.data["run_manifest"]["run_id"] == "run-x");

    const auto no_gold = evaluate::report(klass, klass, evaluate::score_extraction({}, {}), {},
                                          manifest);
    CHECK(no_gold.text.find("no gold records") != std::string::npos);
    CHECK(no_gold.data["extraction"]["note"] == "no gold records");
}

} // TEST_SUITE
