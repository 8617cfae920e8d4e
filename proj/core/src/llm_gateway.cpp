#include "compass/llm_gateway.hpp"

#include <cstdlib>
#include <fstream>
#include <thread>

#include <httplib.h>

#include "compass/errors.hpp"
#include "compass/util/digest.hpp"
#include "compass/util/text.hpp"

namespace compass::gateway {

MockBackend::MockBackend(json fixture_doc, MissPolicy miss_policy, FaultMode fault)
    : miss_policy_(miss_policy), fault_(fault) {
    const json* entries = &fixture_doc;
    if (fixture_doc.is_object() && fixture_doc.contains("entries")) {
        if (fixture_doc.contains("miss_policy") && fixture_doc["miss_policy"].is_string()) {
            miss_policy_ = fixture_doc["miss_policy"].get<std::string>() == "schema_default"
                               ? MissPolicy::SchemaDefault
                               : MissPolicy::Error;
        }
        entries = &fixture_doc["entries"];
    }
    if (!entries->is_object())
        throw Error("MalformedFixture", "mock", "expected an object of digest -> response text");
    for (const auto& [digest, value] : entries->items()) {
        if (value.is_string())
            entries_[digest] = value.get<std::string>();
        else
            entries_[digest] = value.dump();
    }
}

std::shared_ptr<MockBackend> MockBackend::from_file(const std::string& path,
                                                    MissPolicy miss_policy, FaultMode fault) {
    std::ifstream in(path);
    if (!in)
        throw Error("MalformedFixture", path, "cannot open fixture file");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw Error("MalformedFixture", path, e.what());
    }
    return std::make_shared<MockBackend>(std::move(doc), miss_policy, fault);
}

std::string MockBackend::complete_once(const CompletionRequest& request) {
    const std::string digest =
        util::prompt_digest(request.bundle.system_text, request.bundle.user_text);
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = entries_.find(digest);
    if (it == entries_.end()) {
        if (miss_policy_ == MissPolicy::SchemaDefault)
            return "{}";
        throw Error("FixtureMiss", digest,
                    "no canned response for prompt (node " + request.bundle.source_node_id + ")");
    }
    if (fault_ == FaultMode::FailOnce && faulted_.insert(digest).second)
        return "?? injected fault ?? not parseable as json {{{";
    return it->second;
}

HttpBackend::HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {
    if (config_.url.empty())
        throw Error("InvalidArgument", "url", "http backend needs an endpoint url");
}

namespace {

struct SplitUrl {
    std::string host_port;
    std::string path;
};

SplitUrl split_url(const std::string& url) {
    auto scheme_end = url.find("://");
    std::size_t host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
    auto path_start = url.find('/', host_start);
    SplitUrl out;
    if (path_start == std::string::npos) {
        out.host_port = url;
        out.path = "/";
    } else {
        out.host_port = url.substr(0, path_start);
        out.path = url.substr(path_start);
    }
    return out;
}

} // namespace

std::string HttpBackend::complete_once(const CompletionRequest& request) {
    auto parts = split_url(config_.url);
    httplib::Client client(parts.host_port);
    client.set_connection_timeout(config_.connect_timeout_s, 0);
    client.set_read_timeout(config_.read_timeout_s, 0);

    httplib::Headers headers;
    if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key)
        headers.emplace("Authorization", std::string("Bearer ") + key);

    json body = {
        {"model", config_.model},
        {"messages",
         json::array({json{{"role", "system"}, {"content", request.bundle.system_text}},
                      json{{"role", "user"}, {"content", request.bundle.user_text}}})},
        {"temperature", request.temperature},
        {"max_tokens", request.max_output_tokens},
    };

    auto res = client.Post(parts.path, headers, body.dump(), "application/json");
    if (!res)
        throw Error("TransientBackendFailure", request.request_tag,
                    httplib::to_string(res.error()));
    if (res->status == 429 || res->status >= 500)
        throw Error("TransientBackendFailure", request.request_tag,
                    "status " + std::to_string(res->status));
    if (res->status == 401 || res->status == 403)
        throw Error("AuthRejected", config_.api_key_env,
                    "status " + std::to_string(res->status));
    if (res->status != 200)
        throw Error("MalformedResponse", request.request_tag,
                    "status " + std::to_string(res->status));

    json doc;
    try {
        doc = json::parse(res->body);
    } catch (const json::parse_error& e) {
        throw Error("MalformedResponse", request.request_tag, e.what());
    }
    if (doc.contains("choices") && doc["choices"].is_array() && !doc["choices"].empty()) {
        const json& first = doc["choices"][0];
        if (first.contains("message") && first["message"].contains("content"))
            return first["message"]["content"].get<std::string>();
        if (first.contains("text"))
            return first["text"].get<std::string>();
    }
    if (doc.contains("text") && doc["text"].is_string())
        return doc["text"].get<std::string>();
    throw Error("MalformedResponse", request.request_tag, "no completion text in response body");
}

LlmGateway::LlmGateway(std::shared_ptr<Backend> backend, GatewayOptions options)
    : backend_(std::move(backend)), options_(std::move(options)) {
    if (!backend_)
        throw Error("InvalidArgument", "backend", "gateway needs a backend");
    if (options_.max_attempts < 1)
        throw Error("InvalidArgument", "max_attempts", "must be at least 1");
    if (options_.max_parallel < 1)
        throw Error("InvalidArgument", "max_parallel", "must be at least 1");
    if (!options_.sleeper)
        options_.sleeper = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

Completion LlmGateway::complete(const CompletionRequest& request) {
    const std::size_t prompt_tokens =
        util::estimate_tokens(request.bundle.system_text) +
        util::estimate_tokens(request.bundle.user_text);
    if (prompt_tokens > options_.max_prompt_tokens)
        throw Error("BudgetExceeded", request.request_tag,
                    "prompt is ~" + std::to_string(prompt_tokens) + " tokens, limit " +
                        std::to_string(options_.max_prompt_tokens));

    std::unique_lock<std::mutex> slot(slot_mutex_);
    slot_cv_.wait(slot, [&] { return slots_in_use_ < options_.max_parallel; });
    ++slots_in_use_;
    slot.unlock();

    struct SlotRelease {
        LlmGateway* gw;
        ~SlotRelease() {
            {
                std::lock_guard<std::mutex> lock(gw->slot_mutex_);
                --gw->slots_in_use_;
            }
            gw->slot_cv_.notify_one();
        }
    } release{this};

    std::string last_reason;
    for (int attempt = 1; attempt <= options_.max_attempts; ++attempt) {
        const auto started = std::chrono::steady_clock::now();
        try {
            std::string text = backend_->complete_once(request);
            const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                std::chrono::steady_clock::now() - started);
            {
                std::lock_guard<std::mutex> lock(log_mutex_);
                log_.push_back({request.request_tag, attempt, "ok", 0});
            }
            Completion done;
            done.text = std::move(text);
            done.backend_id = backend_->id();
            done.latency_ms = elapsed.count();
            done.attempt_count = attempt;
            return done;
        } catch (const Error& e) {
            if (std::string(e.code()) != "TransientBackendFailure") {
                std::lock_guard<std::mutex> lock(log_mutex_);
                log_.push_back({request.request_tag, attempt, e.code(), 0});
                throw;
            }
            last_reason = e.what();
            const auto backoff = options_.base_backoff * (1LL << (attempt - 1));
            {
                std::lock_guard<std::mutex> lock(log_mutex_);
                log_.push_back({request.request_tag, attempt, e.what(),
                                attempt < options_.max_attempts ? backoff.count() : 0});
            }
            if (attempt < options_.max_attempts)
                options_.sleeper(backoff);
        }
    }
    throw Error("BackendUnavailable", request.request_tag,
                "gave up after " + std::to_string(options_.max_attempts) +
                    " attempts; last: " + last_reason);
}

std::vector<AttemptLogEntry> LlmGateway::attempt_log() const {
    std::lock_guard<std::mutex> lock(log_mutex_);
    return log_;
}

SchemaDescriptor label_schema() { return {"label_choice", {{"label", "string"}}}; }

SchemaDescriptor header_mappings_schema() { return {"header_mappings", {{"mappings", "array"}}}; }

SchemaDescriptor conversion_proposal_schema() {
    return {"conversion_proposal",
            {{"from_unit", "string"},
             {"dimension", "string"},
             {"factor_to_base", "number"},
             {"inverse_factor", "number"}}};
}

namespace {

bool type_matches(const json& value, const std::string& type) {
    if (type == "string") return value.is_string();
    if (type == "number") return value.is_number();
    if (type == "integer") return value.is_number_integer();
    if (type == "boolean") return value.is_boolean();
    if (type == "array") return value.is_array();
    if (type == "object") return value.is_object();
    return false;
}

} // namespace

json parse_structured(const Completion& completion, const SchemaDescriptor& expected_shape) {
    json doc;
    bool parsed = false;
    try {
        doc = json::parse(completion.text);
        parsed = true;
    } catch (const json::parse_error&) {
    }
    if (!parsed) {
        const std::string body = util::extract_json_body(completion.text);
        if (!body.empty()) {
            try {
                doc = json::parse(body);
                parsed = true;
            } catch (const json::parse_error&) {
            }
        }
    }
    if (!parsed)
        throw Error("UnparseableOutput", expected_shape.name,
                    "completion is not JSON, even after stripping wrappers");

    std::string problems;
    for (const auto& field : expected_shape.required) {
        if (!doc.is_object() || !doc.contains(field.key)) {
            problems += (problems.empty() ? "" : ", ") + field.key + " missing";
        } else if (!type_matches(doc[field.key], field.type)) {
            problems += (problems.empty() ? "" : ", ") + field.key + " is not " + field.type;
        }
    }
    if (!problems.empty())
        throw Error("SchemaMismatch", expected_shape.name, problems);
    return doc;
}

} // namespace compass::gateway
