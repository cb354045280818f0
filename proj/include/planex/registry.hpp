#pragma once

#include "planex/tool_spec.hpp"
#include "planex/value.hpp"

#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

namespace planex {

struct AppManifest {
    std::string app_id;
    std::string title;
    std::string description;
    std::string base_url;
    std::vector<ToolSpec> tools;
    std::string source_digest;

    Value to_json() const;
};

// One operation of an OpenAPI document with every internal $ref resolved.
struct SourceOperation {
    std::string key;     // operationId, or derived from method + path
    std::string method;  // upper-case
    std::string path;
    Value operation;     // resolved operation object, path-level parameters merged
};

// Parses an OpenAPI v3 document (JSON) into resolved operations. Throws
// SpecParseError / UnresolvableRefError.
struct ParsedSpec {
    std::string title;
    std::string description;
    std::vector<SourceOperation> operations;
};
ParsedSpec parse_openapi(const Value& document);

// Lossy, size-bounded projection of one operation.
ToolSpec minimize(const std::string& app_id, const SourceOperation& op);

struct SearchHit {
    std::string tool_id;
    double score = 0.0;
    int app_rank = 0;
    std::string snippet;
};

struct HttpCall {
    std::string method;
    std::string base_url;
    std::string target;  // path + query string
    std::map<std::string, std::string> headers;
    std::optional<std::string> json_body;
};

struct HttpReply {
    int status = 0;
    std::string body;
    std::optional<std::string> transport_error;
};

class ToolTransport {
public:
    virtual ~ToolTransport() = default;
    virtual HttpReply send(const HttpCall& call) = 0;
};

class HttpToolTransport : public ToolTransport {
public:
    explicit HttpToolTransport(double timeout_s = 30.0) : timeout_s_(timeout_s) {}
    HttpReply send(const HttpCall& call) override;

private:
    double timeout_s_;
};

struct SearchConfig {
    // applications kept after the first (app-level) ranking stage
    std::size_t top_apps = 3;
};

// Application registry and uniform tool gateway. Reads are concurrent;
// ingestion takes the write lock.
class Registry : public ToolInvoker {
public:
    explicit Registry(std::shared_ptr<ToolTransport> transport = nullptr, SearchConfig search = {});

    const AppManifest& ingest_spec(std::string_view document, const std::string& app_id, const std::string& base_url);

    // Per-app headers passed through untouched on every invocation.
    void set_app_headers(const std::string& app_id, std::map<std::string, std::string> headers);
    void set_base_url(const std::string& app_id, const std::string& base_url);

    std::vector<SearchHit> search(std::string_view query, std::optional<std::string> scope, std::size_t k) const;
    std::vector<SearchHit> search(std::string_view query, std::span<const std::string> scope, std::size_t k) const;

    ToolResponse invoke(const std::string& tool_id, const Value& args) override;

    // Validates args against the ToolSpec and builds the request without sending it.
    HttpCall build_call(const std::string& tool_id, const Value& args) const;

    std::optional<ToolSpec> tool(const std::string& tool_id) const;
    std::vector<ToolSpec> tools_of(const std::string& app_id) const;
    std::optional<AppManifest> manifest(const std::string& app_id) const;
    std::vector<std::string> app_ids() const;
    bool empty() const;

    // Deterministic dump of all manifests, sorted by app id.
    std::string export_text() const;

private:
    struct IndexedTool {
        ToolSpec spec;
        std::map<std::string, int> terms;
    };
    struct IndexedApp {
        AppManifest manifest;
        std::map<std::string, int> terms;
        std::vector<IndexedTool> tools;
        std::map<std::string, std::string> headers;
    };

    const IndexedTool* find_tool(const std::string& tool_id, const IndexedApp** app) const;

    std::shared_ptr<ToolTransport> transport_;
    SearchConfig search_config_;
    mutable std::shared_mutex mu_;
    std::map<std::string, IndexedApp> apps_;
};

// Search-side term normalization shared by the registry and enrichment:
// lowercase tokens, stopwords removed, trailing plural "s" stripped.
std::vector<std::string> index_terms(std::string_view text);

}  // namespace planex
