#include "compass/corpus.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <thread>

#include <httplib.h>

#include "compass/errors.hpp"
#include "compass/util/text.hpp"

namespace fs = std::filesystem;

namespace compass {

const TableBlock* ParsedPaper::find_table(const std::string& table_id) const {
    for (const auto& t : tables) {
        if (t.table_id == table_id) return &t;
    }
    return nullptr;
}

const ParsedPaper& Corpus::at(const std::string& paper_id) const {
    auto it = papers_.find(paper_id);
    if (it == papers_.end()) {
        throw Error("UnknownPaper", paper_id, "paper not in corpus");
    }
    return it->second;
}

void Corpus::add(ParsedPaper paper) {
    const std::string id = paper.paper_id;
    papers_.emplace(id, std::move(paper));
    manifest_.count = papers_.size();
}

void Corpus::add_warning(std::string note) {
    manifest_.load_warnings.push_back(std::move(note));
}

namespace {

std::vector<std::vector<std::string>> rows_from_json(const json& arr) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& row : arr) {
        std::vector<std::string> cells;
        for (const auto& cell : row) {
            cells.push_back(cell.is_string() ? cell.get<std::string>() : cell.dump());
        }
        rows.push_back(std::move(cells));
    }
    return rows;
}

TableBlock table_from_json(const json& tj, const std::string& paper_id) {
    TableBlock t;
    if (!tj.contains("table_id") || tj["table_id"].get<std::string>().empty()) {
        throw Error("MalformedPaper", paper_id, "table without table_id");
    }
    t.table_id = tj["table_id"].get<std::string>();
    t.caption = tj.value("caption", std::string{});
    if (tj.contains("headers")) t.header_rows = rows_from_json(tj["headers"]);
    if (tj.contains("rows")) t.data_rows = rows_from_json(tj["rows"]);
    if (tj.contains("footnotes")) {
        for (const auto& f : tj["footnotes"]) t.footnotes.push_back(f.get<std::string>());
    }
    if (tj.contains("context")) {
        for (const auto& c : tj["context"]) t.context_snippets.push_back(c.get<std::string>());
    }
    if (t.header_rows.empty()) {
        t.header_rows.push_back({});
        t.anomalies.push_back("missing header row synthesized");
    }

    std::size_t width = 0;
    for (const auto& r : t.header_rows) width = std::max(width, r.size());
    for (const auto& r : t.data_rows) width = std::max(width, r.size());

    for (auto& r : t.header_rows) r.resize(width);
    for (std::size_t i = 0; i < t.data_rows.size(); ++i) {
        if (t.data_rows[i].size() != width) {
            t.anomalies.push_back("row " + std::to_string(i) + " padded from " +
                                  std::to_string(t.data_rows[i].size()) + " to " +
                                  std::to_string(width) + " cells");
            t.data_rows[i].resize(width);
        }
    }
    return t;
}

} // namespace

ParsedPaper paper_from_json(const json& j) {
    ParsedPaper p;
    if (!j.contains("paper_id") || !j["paper_id"].is_string() ||
        j["paper_id"].get<std::string>().empty()) {
        throw Error("MalformedPaper", "", "missing paper_id");
    }
    p.paper_id = j["paper_id"].get<std::string>();
    if (j.contains("doi") && !j["doi"].is_null()) p.doi = j["doi"].get<std::string>();
    p.title = j.value("title", std::string{});
    p.abstract_text = j.value("abstract", std::string{});
    if (j.contains("sections")) {
        for (const auto& sj : j["sections"]) {
            p.sections.push_back({sj.value("heading", std::string{}),
                                  sj.value("text", std::string{})});
        }
    }
    if (j.contains("tables")) {
        for (const auto& tj : j["tables"]) {
            TableBlock t = table_from_json(tj, p.paper_id);
            if (p.find_table(t.table_id)) {
                throw Error("MalformedPaper", p.paper_id,
                            "duplicate table_id '" + t.table_id + "'");
            }
            p.tables.push_back(std::move(t));
        }
    }
    p.source_uri = j.value("source_uri", std::string{});
    return p;
}

json to_json(const ParsedPaper& p) {
    json j;
    j["paper_id"] = p.paper_id;
    if (p.doi) j["doi"] = *p.doi;
    j["title"] = p.title;
    j["abstract"] = p.abstract_text;
    j["sections"] = json::array();
    for (const auto& s : p.sections) {
        j["sections"].push_back(json{{"heading", s.heading}, {"text", s.text}});
    }
    j["tables"] = json::array();
    for (const auto& t : p.tables) {
        json tj;
        tj["table_id"] = t.table_id;
        tj["caption"] = t.caption;
        tj["headers"] = t.header_rows;
        tj["rows"] = t.data_rows;
        tj["footnotes"] = t.footnotes;
        tj["context"] = t.context_snippets;
        j["tables"].push_back(tj);
    }
    j["source_uri"] = p.source_uri;
    return j;
}

Corpus load_corpus(const std::string& root_path) {
    std::error_code ec;
    if (!fs::is_directory(root_path, ec)) {
        throw Error("UnreadableRoot", root_path, "not a readable directory");
    }
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(root_path)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());

    Corpus corpus;
    for (const auto& file : files) {
        std::ifstream in(file);
        if (!in) {
            corpus.add_warning(file.filename().string() + ": unreadable, skipped");
            continue;
        }
        try {
            json doc = json::parse(in);
            ParsedPaper paper = paper_from_json(doc);
            if (corpus.contains(paper.paper_id)) {
                corpus.add_warning(file.filename().string() + ": duplicate paper_id '" +
                                   paper.paper_id + "', skipped");
                continue;
            }
            corpus.add(std::move(paper));
        } catch (const std::exception& e) {
            corpus.add_warning(file.filename().string() + ": " + e.what() + ", skipped");
        }
    }
    return corpus;
}

std::vector<std::string> keyword_search(const Corpus& corpus,
                                        const std::vector<std::string>& keywords) {
    if (keywords.empty()) {
        throw Error("InvalidArgument", "keywords", "keyword list must be non-empty");
    }
    std::vector<std::string> hits;
    for (const auto& [id, paper] : corpus.papers()) {
        bool matched = false;
        for (const auto& kw : keywords) {
            if (util::contains_token(paper.title, kw) ||
                util::contains_token(paper.abstract_text, kw)) {
                matched = true;
                break;
            }
            for (const auto& section : paper.sections) {
                if (util::contains_token(section.text, kw)) {
                    matched = true;
                    break;
                }
            }
            if (matched) break;
        }
        if (matched) hits.push_back(id);
    }
    return hits;
}

namespace {

struct ParsedUrl {
    std::string host_port; // scheme://host:port
    std::string path;
};

ParsedUrl split_url(const std::string& url) {
    auto scheme_end = url.find("://");
    std::size_t path_start;
    if (scheme_end == std::string::npos) {
        path_start = url.find('/');
    } else {
        path_start = url.find('/', scheme_end + 3);
    }
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

} // namespace

std::vector<ParsedPaper> fetch_remote(const std::vector<std::string>& query,
                                      const std::string& repository_endpoint,
                                      const RemoteFetchOptions& options,
                                      RemoteFetchLog* log) {
    if (options.limit < 1) {
        throw Error("InvalidArgument", "limit", "limit must be >= 1");
    }
    if (query.empty()) {
        throw Error("InvalidArgument", "query", "query keywords must be non-empty");
    }

    const ParsedUrl url = split_url(repository_endpoint);
    httplib::Client client(url.host_port);
    client.set_connection_timeout(5, 0);
    client.set_read_timeout(10, 0);

    httplib::Headers headers;
    if (const char* key = std::getenv(options.api_key_env.c_str()); key && *key) {
        headers.emplace("Authorization", std::string("Bearer ") + key);
    }

    std::string q;
    for (std::size_t i = 0; i < query.size(); ++i) {
        if (i) q += ' ';
        q += query[i];
    }
    httplib::Params params{{"q", q}, {"limit", std::to_string(options.limit)}};

    std::string last_note = "no attempt made";
    for (int attempt = 1; attempt <= options.max_retries; ++attempt) {
        if (log) log->attempts = attempt;
        auto res = client.Get(url.path, params, headers);
        bool transient = false;
        if (!res) {
            last_note = "connection failed (" + httplib::to_string(res.error()) + ")";
            transient = true;
        } else if (res->status == 429 || res->status >= 500) {
            last_note = "status " + std::to_string(res->status);
            transient = true;
        } else if (res->status != 200) {
            throw Error("MalformedResponse", repository_endpoint,
                        "unexpected status " + std::to_string(res->status));
        } else {
            json body;
            try {
                body = json::parse(res->body);
            } catch (const std::exception& e) {
                throw Error("MalformedResponse", repository_endpoint, e.what());
            }
            if (!body.is_object() || !body.contains("papers") || !body["papers"].is_array()) {
                throw Error("MalformedResponse", repository_endpoint,
                            "body lacks a 'papers' array");
            }
            std::vector<ParsedPaper> stubs;
            for (const auto& pj : body["papers"]) {
                if (static_cast<int>(stubs.size()) >= options.limit) break;
                ParsedPaper stub;
                stub.paper_id = pj.value("paper_id",
                                         pj.value("doi", std::string{"remote-"} +
                                                              std::to_string(stubs.size())));
                if (pj.contains("doi") && !pj["doi"].is_null()) {
                    stub.doi = pj["doi"].get<std::string>();
                }
                stub.title = pj.value("title", std::string{});
                stub.abstract_text = pj.value("abstract", std::string{});
                stub.source_uri = repository_endpoint;
                stubs.push_back(std::move(stub));
            }
            return stubs;
        }

        if (transient && attempt < options.max_retries) {
            auto delay = options.base_backoff * (1 << (attempt - 1));
            if (log) {
                log->notes.push_back("retry " + std::to_string(attempt) + ": " + last_note);
            }
            std::this_thread::sleep_for(delay);
        }
    }

    if (last_note.rfind("status 429", 0) == 0) {
        throw Error("QuotaExceeded", repository_endpoint,
                    "rate-limited after " + std::to_string(options.max_retries) + " attempts");
    }
    throw Error("NetworkError", repository_endpoint,
                last_note + " after " + std::to_string(options.max_retries) + " attempts");
}

} // namespace compass
