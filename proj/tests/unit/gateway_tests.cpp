#include <doctest.h>

#include <atomic>
#include <chrono>
#include <thread>
#include <vector>

#include "compass/errors.hpp"
#include "compass/llm_gateway.hpp"
#include "compass/util/text.hpp"

using namespace compass;
using gateway::CompletionRequest;
using gateway::GatewayOptions;
using gateway::LlmGateway;
using gateway::MockBackend;

namespace {

CompletionRequest make_request(const std::string& system_text, const std::string& user_text,
                               const std::string& tag = "t1") {
    CompletionRequest req;
    req.bundle.system_text = system_text;
    req.bundle.user_text = user_text;
    req.bundle.source_node_id = "node_x";
    req.request_tag = tag;
    return req;
}

// Scripted backend: each call consumes the next step. "ok:<text>" returns
// text, "transient" and "fatal" throw the matching error kind.
class ScriptedBackend : public gateway::Backend {
public:
    explicit ScriptedBackend(std::vector<std::string> steps) : steps_(std::move(steps)) {}
    std::string id() const override { return "scripted"; }
    std::string complete_once(const CompletionRequest& request) override {
        const std::size_t i = calls_++;
        REQUIRE(i < steps_.size());
        const std::string& step = steps_[i];
        if (step == "transient")
            throw Error("TransientBackendFailure", request.request_tag, "flaky wire");
        if (step == "fatal")
            throw Error("AuthRejected", request.request_tag, "bad key");
        return step.substr(3);
    }
    int calls() const { return calls_.load(); }

private:
    std::vector<std::string> steps_;
    std::atomic<int> calls_{0};
};

class CountingBackend : public gateway::Backend {
public:
    std::string id() const override { return "counting"; }
    std::string complete_once(const CompletionRequest&) override {
        const int now = ++in_flight_;
        int seen = peak_.load();
        while (now > seen && !peak_.compare_exchange_weak(seen, now)) {
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
        --in_flight_;
        return "{\"label\": \"x\"}";
    }
    int peak() const { return peak_.load(); }

private:
    std::atomic<int> in_flight_{0};
    std::atomic<int> peak_{0};
};

} // namespace

TEST_SUITE("gateway") {

TEST_CASE("mock backend answers by prompt digest") {
    const std::string digest = util::prompt_digest("sys", "usr");
    json fixture = {{"miss_policy", "error"},
                    {"entries", {{digest, json{{"label", "Marine Pb conc."}}}}}};
    MockBackend backend(fixture);
    CHECK(backend.size() == 1);
    CHECK(backend.has(digest));
    CHECK_FALSE(backend.has("no-such-digest"));

    const std::string text = backend.complete_once(make_request("sys", "usr"));
    CHECK(json::parse(text)["label"] == "Marine Pb conc.");
}

TEST_CASE("mock backend accepts a flat digest map and string values") {
    const std::string digest = util::prompt_digest("a", "b");
    json fixture = {{digest, "plain text answer"}};
    MockBackend backend(fixture);
    CHECK(backend.complete_once(make_request("a", "b")) == "plain text answer");
}

TEST_CASE("mock backend miss policies") {
    json fixture = {{"entries", json::object()}};
    MockBackend strict(fixture, gateway::MissPolicy::Error);
    try {
        strict.complete_once(make_request("s", "u"));
        FAIL("expected a miss error");
    } catch (const Error& e) {
        CHECK(e.code() == "FixtureMiss");
        CHECK(e.subject() == util::prompt_digest("s", "u"));
    }

    MockBackend lenient(fixture, gateway::MissPolicy::SchemaDefault);
    CHECK(lenient.complete_once(make_request("s", "u")) == "{}");

    json bad = {{"entries", json::array()}};
    CHECK_THROWS_AS(MockBackend{bad}, Error);
}

TEST_CASE("fail-once fault burns exactly one failure per digest") {
    const std::string d1 = util::prompt_digest("s1", "u1");
    const std::string d2 = util::prompt_digest("s2", "u2");
    json fixture = {{"entries", {{d1, "one"}, {d2, "two"}}}};
    MockBackend backend(fixture, gateway::MissPolicy::Error, gateway::FaultMode::FailOnce);

    const std::string first = backend.complete_once(make_request("s1", "u1"));
    CHECK(first != "one");
    CHECK_THROWS_AS((void)json::parse(first), json::parse_error);
    CHECK(backend.complete_once(make_request("s1", "u1")) == "one");
    CHECK(backend.complete_once(make_request("s1", "u1")) == "one");

    CHECK(backend.complete_once(make_request("s2", "u2")) != "two");
    CHECK(backend.complete_once(make_request("s2", "u2")) == "two");
}

TEST_CASE("gateway returns completion metadata on first success") {
    auto backend = std::make_shared<ScriptedBackend>(std::vector<std::string>{"ok:hello"});
    GatewayOptions opts;
    opts.sleeper = [](std::chrono::milliseconds) { FAIL("no backoff expected"); };
    LlmGateway gw(backend, opts);

    const auto done = gw.complete(make_request("s", "u", "req-1"));
    CHECK(done.text == "hello");
    CHECK(done.backend_id == "scripted");
    CHECK(done.attempt_count == 1);

    const auto log = gw.attempt_log();
    REQUIRE(log.size() == 1);
    CHECK(log[0].request_tag == "req-1");
    CHECK(log[0].attempt == 1);
    CHECK(log[0].outcome == "ok");
    CHECK(log[0].backoff_ms == 0);
}

TEST_CASE("transient failures retry with doubling backoff") {
    auto backend = std::make_shared<ScriptedBackend>(
        std::vector<std::string>{"transient", "transient", "ok:done"});
    std::vector<long long> naps;
    GatewayOptions opts;
    opts.max_attempts = 3;
    opts.base_backoff = std::chrono::milliseconds(25);
    opts.sleeper = [&naps](std::chrono::milliseconds d) { naps.push_back(d.count()); };
    LlmGateway gw(backend, opts);

    const auto done = gw.complete(make_request("s", "u", "req-2"));
    CHECK(done.text == "done");
    CHECK(done.attempt_count == 3);
    CHECK(naps == std::vector<long long>{25, 50});

    const auto log = gw.attempt_log();
    REQUIRE(log.size() == 3);
    CHECK(log[0].outcome.rfind("TransientBackendFailure", 0) == 0);
    CHECK(log[0].backoff_ms == 25);
    CHECK(log[1].backoff_ms == 50);
    CHECK(log[2].outcome == "ok");
    CHECK(log[2].backoff_ms == 0);
}

TEST_CASE("exhausted retries raise BackendUnavailable") {
    auto backend = std::make_shared<ScriptedBackend>(
        std::vector<std::string>{"transient", "transient"});
    std::vector<long long> naps;
    GatewayOptions opts;
    opts.max_attempts = 2;
    opts.base_backoff = std::chrono::milliseconds(10);
    opts.sleeper = [&naps](std::chrono::milliseconds d) { naps.push_back(d.count()); };
    LlmGateway gw(backend, opts);

    try {
        gw.complete(make_request("s", "u", "req-3"));
        FAIL("expected exhaustion");
    } catch (const Error& e) {
        CHECK(e.code() == "BackendUnavailable");
        CHECK(e.subject() == "req-3");
    }
    CHECK(backend->calls() == 2);
    CHECK(naps == std::vector<long long>{10}); // no sleep after the last attempt
    const auto log = gw.attempt_log();
    REQUIRE(log.size() == 2);
    CHECK(log[1].backoff_ms == 0);
}

TEST_CASE("non-transient errors abort without retry") {
    auto backend = std::make_shared<ScriptedBackend>(std::vector<std::string>{"fatal"});
    GatewayOptions opts;
    opts.sleeper = [](std::chrono::milliseconds) { FAIL("no backoff expected"); };
    LlmGateway gw(backend, opts);

    try {
        gw.complete(make_request("s", "u", "req-4"));
        FAIL("expected auth failure");
    } catch (const Error& e) {
        CHECK(e.code() == "AuthRejected");
    }
    CHECK(backend->calls() == 1);
    const auto log = gw.attempt_log();
    REQUIRE(log.size() == 1);
    CHECK(log[0].outcome == "AuthRejected");
}

TEST_CASE("prompt budget is enforced before any attempt") {
    auto backend = std::make_shared<ScriptedBackend>(std::vector<std::string>{"ok:x"});
    GatewayOptions opts;
    opts.max_prompt_tokens = 4;
    LlmGateway gw(backend, opts);

    // 20 bytes -> 5 estimated tokens, over the limit of 4.
    try {
        gw.complete(make_request("0123456789", "0123456789", "req-5"));
        FAIL("expected budget rejection");
    } catch (const Error& e) {
        CHECK(e.code() == "BudgetExceeded");
    }
    CHECK(backend->calls() == 0);

    // 16 bytes -> 4 tokens, exactly at the limit.
    CHECK(gw.complete(make_request("01234567", "01234567", "req-6")).text == "x");
}

TEST_CASE("concurrent requests never exceed the parallelism cap") {
    auto backend = std::make_shared<CountingBackend>();
    GatewayOptions opts;
    opts.max_parallel = 2;
    LlmGateway gw(backend, opts);

    std::vector<std::thread> workers;
    for (int i = 0; i < 8; ++i) {
        workers.emplace_back([&gw, i] {
            (void)gw.complete(make_request("s", "u", "par-" + std::to_string(i)));
        });
    }
    for (auto& t : workers) t.join();

    CHECK(backend->peak() >= 1);
    CHECK(backend->peak() <= 2);
    CHECK(gw.attempt_log().size() == 8);
}

TEST_CASE("gateway constructor rejects bad options") {
    auto backend = std::make_shared<CountingBackend>();
    GatewayOptions zero_attempts;
    zero_attempts.max_attempts = 0;
    CHECK_THROWS_AS(LlmGateway(backend, zero_attempts), Error);
    GatewayOptions zero_parallel;
    zero_parallel.max_parallel = 0;
    CHECK_THROWS_AS(LlmGateway(backend, zero_parallel), Error);
    CHECK_THROWS_AS(LlmGateway(nullptr), Error);
}

TEST_CASE("parse_structured accepts clean, fenced, and prose-wrapped json") {
    gateway::Completion c;
    c.text = R"({"label": "Target Pb conc."})";
    CHECK(gateway::parse_structured(c, gateway::label_schema())["label"] ==
          "Target Pb conc.");

    c.text = "```json\n{\"label\": \"Non-target\"}\n```";
    CHECK(gateway::parse_structured(c, gateway::label_schema())["label"] == "Non-target");

    c.text = "Sure, here is the classification:\n{\"label\": \"Marine 210Pb\"}\nHope that helps!";
    CHECK(gateway::parse_structured(c, gateway::label_schema())["label"] == "Marine 210Pb");
}

TEST_CASE("parse_structured reports unparseable and mismatched output") {
    gateway::Completion c;
    c.text = "?? injected fault ?? not parseable as json {{{";
    try {
        gateway::parse_structured(c, gateway::label_schema());
        FAIL("expected parse failure");
    } catch (const Error& e) {
        CHECK(e.code() == "UnparseableOutput");
        CHECK(e.subject() == "label_choice");
    }

    c.text = R"({"labelled": true})";
    try {
        gateway::parse_structured(c, gateway::label_schema());
        FAIL("expected schema failure");
    } catch (const Error& e) {
        CHECK(e.code() == "SchemaMismatch");
        CHECK(std::string(e.what()).find("label missing") != std::string::npos);
    }

    c.text = R"({"label": 7})";
    try {
        gateway::parse_structured(c, gateway::label_schema());
        FAIL("expected schema failure");
    } catch (const Error& e) {
        CHECK(e.code() == "SchemaMismatch");
        CHECK(std::string(e.what()).find("label is not string") != std::string::npos);
    }
}

TEST_CASE("conversion proposal schema checks every field") {
    gateway::Completion c;
    c.text = R"({"from_unit": "ng/kg", "dimension": "molar_concentration",
                 "factor_to_base": 4.826, "inverse_factor": 0.2072})";
    const json ok = gateway::parse_structured(c, gateway::conversion_proposal_schema());
    CHECK(ok["from_unit"] == "ng/kg");

    c.text = R"({"from_unit": "ng/kg", "dimension": "molar_concentration",
                 "factor_to_base": "4.826", "inverse_factor": 0.2072})";
    try {
        gateway::parse_structured(c, gateway::conversion_proposal_schema());
        FAIL("expected schema failure");
    } catch (const Error& e) {
        CHECK(e.code() == "SchemaMismatch");
        CHECK(std::string(e.what()).find("factor_to_base is not number") != std::string::npos);
    }

    // integer-valued factors still count as numbers
    c.text = R"({"from_unit": "x", "dimension": "d", "factor_to_base": 60,
                 "inverse_factor": 1})";
    CHECK(gateway::parse_structured(c, gateway::conversion_proposal_schema())["factor_to_base"] ==
          60);
}

TEST_CASE("mappings schema requires an array") {
    gateway::Completion c;
    c.text = R"({"mappings": []})";
    CHECK(gateway::parse_structured(c, gateway::header_mappings_schema())["mappings"].is_array());
    c.text = R"({"mappings": {"a": 1}})";
    CHECK_THROWS_AS(gateway::parse_structured(c, gateway::header_mappings_schema()), Error);
}

} // TEST_SUITE
