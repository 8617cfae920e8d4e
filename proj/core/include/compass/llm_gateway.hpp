#pragma once

#include <chrono>
#include <condition_variable>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include "compass/knowledge_tree.hpp"
#include "compass/records.hpp"

namespace compass::gateway {

struct CompletionRequest {
    tree::PromptBundle bundle;
    int max_output_tokens = 1024;
    double temperature = 0.0; // pipeline stages never change this
    std::string request_tag;  // for logging and retry nonces
};

struct Completion {
    std::string text;
    std::string backend_id;
    long long latency_ms = 0;
    int attempt_count = 1;
};

/// One raw completion attempt. Implementations signal retryable trouble by
/// throwing Error("TransientBackendFailure", ...); anything else aborts the
/// request immediately.
class Backend {
public:
    virtual ~Backend() = default;
    virtual std::string id() const = 0;
    virtual std::string complete_once(const CompletionRequest& request) = 0;
};

enum class MissPolicy { Error, SchemaDefault };
enum class FaultMode { None, FailOnce };

/// Deterministic offline backend: responses keyed by the content digest of
/// (system_text, user_text). FaultMode::FailOnce returns unusable text the
/// first time each known digest is requested, then the real fixture —
/// exercising the step-level rollback path without touching determinism.
class MockBackend : public Backend {
public:
    MockBackend(json fixture_doc, MissPolicy miss_policy = MissPolicy::Error,
                FaultMode fault = FaultMode::None);
    static std::shared_ptr<MockBackend> from_file(const std::string& path,
                                                  MissPolicy miss_policy = MissPolicy::Error,
                                                  FaultMode fault = FaultMode::None);

    std::string id() const override { return "mock"; }
    std::string complete_once(const CompletionRequest& request) override;

    bool has(const std::string& digest) const { return entries_.count(digest) > 0; }
    std::size_t size() const { return entries_.size(); }

private:
    std::map<std::string, std::string> entries_;
    MissPolicy miss_policy_;
    FaultMode fault_;
    std::set<std::string> faulted_; // digests that already burned their one failure
    mutable std::mutex mutex_;
};

struct HttpBackendConfig {
    std::string url;   // full endpoint, e.g. http://host:port/v1/chat/completions
    std::string model = "compass-default";
    std::string api_key_env = "COMPASS_LLM_KEY";
    int connect_timeout_s = 5;
    int read_timeout_s = 60;
};

/// Chat-completion client: POST {model, messages, temperature, max_tokens},
/// bearer token from the configured env var. 429/5xx/transport failures are
/// transient; auth and malformed bodies are not.
class HttpBackend : public Backend {
public:
    explicit HttpBackend(HttpBackendConfig config);
    std::string id() const override { return "http:" + config_.model; }
    std::string complete_once(const CompletionRequest& request) override;

private:
    HttpBackendConfig config_;
};

struct GatewayOptions {
    int max_attempts = 3; // total attempts per request (transient failures only)
    std::chrono::milliseconds base_backoff{25};
    int max_parallel = 4;
    std::size_t max_prompt_tokens = 32768;
    // Injection point so tests can observe delays instead of sleeping.
    std::function<void(std::chrono::milliseconds)> sleeper;
};

struct AttemptLogEntry {
    std::string request_tag;
    int attempt = 0;
    std::string outcome; // "ok" or the failure note
    long long backoff_ms = 0;
};

class LlmGateway {
public:
    explicit LlmGateway(std::shared_ptr<Backend> backend, GatewayOptions options = {});

    /// Retries transient failures with exponentially growing backoff; at
    /// most options.max_attempts attempts. Concurrent calls are capped at
    /// options.max_parallel in flight.
    /// Errors: BudgetExceeded, BackendUnavailable (transients exhausted),
    /// plus whatever non-transient error the backend raised.
    Completion complete(const CompletionRequest& request);

    std::vector<AttemptLogEntry> attempt_log() const;
    const GatewayOptions& options() const { return options_; }
    std::string backend_id() const { return backend_->id(); }

private:
    std::shared_ptr<Backend> backend_;
    GatewayOptions options_;
    mutable std::mutex log_mutex_;
    std::vector<AttemptLogEntry> log_;
    std::mutex slot_mutex_;
    std::condition_variable_any slot_cv_;
    int slots_in_use_ = 0;
};

/// Stage output schemas, named for error messages.
struct FieldSpec {
    std::string key;
    std::string type; // "string" | "number" | "integer" | "boolean" | "array" | "object"
};

struct SchemaDescriptor {
    std::string name;
    std::vector<FieldSpec> required;
};

SchemaDescriptor label_schema();               // {"label": string}
SchemaDescriptor header_mappings_schema();     // {"mappings": array}
SchemaDescriptor conversion_proposal_schema(); // unit proposal fields

/// Strips code fences and surrounding prose (one repair pass), parses the
/// JSON body, and verifies required fields. Errors: UnparseableOutput,
/// SchemaMismatch (subject lists the missing/mistyped fields).
json parse_structured(const Completion& completion, const SchemaDescriptor& expected_shape);

} // namespace compass::gateway
