#pragma once

#include <chrono>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "compass/records.hpp"

namespace compass {

struct TableBlock {
    std::string table_id;
    std::string caption;
    std::vector<std::vector<std::string>> header_rows; // at least one row after load
    std::vector<std::vector<std::string>> data_rows;   // rectangular after load
    std::vector<std::string> footnotes;
    std::vector<std::string> context_snippets; // in-text sentences citing this table
    std::vector<std::string> anomalies;        // ParseAnomaly notes from load-time padding

    std::size_t width() const { return header_rows.empty() ? 0 : header_rows.front().size(); }
};

struct Section {
    std::string heading;
    std::string text;
};

struct ParsedPaper {
    std::string paper_id;
    std::optional<std::string> doi;
    std::string title;
    std::string abstract_text;
    std::vector<Section> sections;
    std::vector<TableBlock> tables;
    std::string source_uri;

    const TableBlock* find_table(const std::string& table_id) const;
};

struct CorpusManifest {
    std::size_t count = 0;
    std::vector<std::string> load_warnings;
};

/// Immutable after load; papers iterate in paper_id order.
class Corpus {
public:
    const std::map<std::string, ParsedPaper>& papers() const { return papers_; }
    const CorpusManifest& manifest() const { return manifest_; }
    std::size_t size() const { return papers_.size(); }
    bool contains(const std::string& paper_id) const { return papers_.count(paper_id) > 0; }

    /// Throws Error("UnknownPaper", paper_id, ...) when absent.
    const ParsedPaper& at(const std::string& paper_id) const;

    void add(ParsedPaper paper); // used by loaders and tests
    void add_warning(std::string note);

private:
    std::map<std::string, ParsedPaper> papers_;
    CorpusManifest manifest_;
};

/// Parses one paper document; normalizes every table to rectangular shape,
/// padding short rows and recording an anomaly note per padded row. Throws
/// Error on structural defects (missing ids, duplicate table ids).
ParsedPaper paper_from_json(const json& j);
json to_json(const ParsedPaper& paper);

/// Loads every *.json paper under root_path (non-recursive). Malformed
/// files are skipped with a manifest warning; only an unreadable root is
/// fatal (Error("UnreadableRoot", path, ...)).
Corpus load_corpus(const std::string& root_path);

/// Papers whose title, abstract, or section text contains any keyword as a
/// whole alphanumeric token, case-insensitive. Result sorted by paper_id.
/// Throws Error("InvalidArgument", "keywords", ...) when keywords is empty.
std::vector<std::string> keyword_search(const Corpus& corpus,
                                        const std::vector<std::string>& keywords);

struct RemoteFetchOptions {
    int limit = 10;
    int max_retries = 3; // total attempts
    std::chrono::milliseconds base_backoff{50};
    std::string api_key_env = "COMPASS_REPO_KEY";
};

struct RemoteFetchLog {
    int attempts = 0;
    std::vector<std::string> notes;
};

/// Queries a scholarly-repository endpoint (HTTP GET, JSON response) for
/// paper stubs: metadata only, no tables. Retries transient failures
/// (connection errors, 429, 5xx) with monotone backoff.
/// Errors: NetworkError, QuotaExceeded, MalformedResponse,
/// InvalidArgument (limit < 1).
std::vector<ParsedPaper> fetch_remote(const std::vector<std::string>& query,
                                      const std::string& repository_endpoint,
                                      const RemoteFetchOptions& options = {},
                                      RemoteFetchLog* log = nullptr);

} // namespace compass
