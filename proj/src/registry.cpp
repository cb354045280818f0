#include "planex/registry.hpp"

#include "planex/errors.hpp"

#include <httplib.h>

#include <algorithm>
#include <chrono>
#include <cctype>
#include <cmath>
#include <mutex>
#include <set>

namespace planex {

namespace {

constexpr const char* kMethods[] = {"get", "put", "post", "delete", "patch", "head", "options"};

std::string upper(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return s;
}

std::string sanitize_key(std::string_view s) {
    std::string out;
    for (char c : s) {
        auto u = static_cast<unsigned char>(c);
        out.push_back(std::isalnum(u) ? c : '_');
    }
    return out;
}

Value resolve_refs(const Value& node, const Value& doc, std::vector<std::string>& stack) {
    if (node.is_object()) {
        if (auto ref = node.find("$ref"); ref != node.end() && ref->is_string()) {
            const auto target = ref->get<std::string>();
            if (target.rfind("#/", 0) != 0) throw UnresolvableRefError("external reference not supported: " + target);
            if (std::find(stack.begin(), stack.end(), target) != stack.end()) {
                // recursive schema: cut the cycle
                return Value{{"type", "object"}};
            }
            Value pointed;
            try {
                pointed = doc.at(Value::json_pointer(target.substr(1)));
            } catch (const Value::exception&) {
                throw UnresolvableRefError("unresolvable reference: " + target);
            }
            stack.push_back(target);
            auto resolved = resolve_refs(pointed, doc, stack);
            stack.pop_back();
            return resolved;
        }
        Value out = Value::object();
        for (const auto& [k, v] : node.items()) out[k] = resolve_refs(v, doc, stack);
        return out;
    }
    if (node.is_array()) {
        Value out = Value::array();
        for (const auto& v : node) out.push_back(resolve_refs(v, doc, stack));
        return out;
    }
    return node;
}

TypeTag schema_tag(const Value& schema) {
    if (!schema.is_object()) return TypeTag::string;
    auto t = schema.find("type");
    if (t == schema.end() || !t->is_string()) {
        if (schema.contains("properties")) return TypeTag::record;
        if (schema.contains("items")) return TypeTag::list;
        return TypeTag::string;
    }
    const auto ty = t->get<std::string>();
    if (ty == "integer" || ty == "number") return TypeTag::number;
    if (ty == "boolean") return TypeTag::boolean;
    if (ty == "array") return TypeTag::list;
    if (ty == "object") return TypeTag::record;
    if (ty == "null") return TypeTag::null;
    return TypeTag::string;
}

void flatten_schema(const Value& schema, const std::string& prefix, int depth, std::vector<ResponseField>& out) {
    if (!schema.is_object() || depth > 4) return;
    auto tag = schema_tag(schema);
    if (!prefix.empty()) out.push_back({prefix, tag});
    if (tag == TypeTag::record) {
        if (auto props = schema.find("properties"); props != schema.end() && props->is_object()) {
            for (const auto& [k, sub] : props->items()) flatten_schema(sub, prefix.empty() ? k : prefix + "." + k, depth + 1, out);
        }
    } else if (tag == TypeTag::list) {
        if (auto items = schema.find("items"); items != schema.end()) {
            auto base = (prefix.empty() ? std::string("") : prefix) + "[]";
            auto item_tag = schema_tag(*items);
            if (item_tag == TypeTag::record) {
                if (auto props = items->find("properties"); props != items->end() && props->is_object()) {
                    for (const auto& [k, sub] : props->items()) flatten_schema(sub, base + "." + k, depth + 1, out);
                }
            }
        }
    }
}

const Value* json_content_schema(const Value& holder) {
    auto content = holder.find("content");
    if (content == holder.end() || !content->is_object()) return nullptr;
    auto media = content->find("application/json");
    if (media == content->end()) {
        for (auto it = content->begin(); it != content->end(); ++it) {
            if (it.key().find("json") != std::string::npos) {
                media = it;
                break;
            }
        }
    }
    if (media == content->end()) return nullptr;
    auto schema = media->find("schema");
    return schema == media->end() ? nullptr : &*schema;
}

std::vector<std::string> path_placeholders(const std::string& path) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while ((pos = path.find('{', pos)) != std::string::npos) {
        auto end = path.find('}', pos);
        if (end == std::string::npos) break;
        out.push_back(path.substr(pos + 1, end - pos - 1));
        pos = end + 1;
    }
    return out;
}

std::string percent_encode(std::string_view s) {
    static constexpr char kHex[] = "0123456789ABCDEF";
    std::string out;
    for (char c : s) {
        auto u = static_cast<unsigned char>(c);
        if (std::isalnum(u) || c == '-' || c == '_' || c == '.' || c == '~') {
            out.push_back(c);
        } else {
            out.push_back('%');
            out.push_back(kHex[u >> 4]);
            out.push_back(kHex[u & 0xf]);
        }
    }
    return out;
}

bool arg_matches(TypeTag tag, const Value& v) {
    switch (tag) {
        case TypeTag::string: return v.is_string();
        case TypeTag::number: return v.is_number();
        case TypeTag::boolean: return v.is_boolean();
        case TypeTag::list: return v.is_array();
        case TypeTag::record: return v.is_object();
        case TypeTag::null: return true;
    }
    return false;
}

std::map<std::string, int> term_counts(std::string_view text) {
    std::map<std::string, int> tf;
    for (auto& t : index_terms(text)) ++tf[t];
    return tf;
}

std::string tool_document(const ToolSpec& t) {
    std::string doc = t.tool_id.substr(t.tool_id.find('.') + 1) + " " + t.summary + " ";
    for (const auto& seg : tokenize(t.path)) doc += seg + " ";
    for (const auto& p : t.params) doc += p.name + " ";
    return doc;
}

double tfidf(const std::map<std::string, int>& tf, const std::set<std::string>& query,
             const std::map<std::string, double>& idf) {
    double score = 0.0;
    for (const auto& q : query) {
        auto it = tf.find(q);
        if (it == tf.end()) continue;
        auto w = idf.find(q);
        if (w == idf.end()) continue;
        score += (1.0 + std::log(static_cast<double>(it->second))) * w->second;
    }
    return score;
}

}  // namespace

std::vector<std::string> index_terms(std::string_view text) {
    static const std::set<std::string, std::less<>> kStop = {
        "a", "an", "the", "to", "of", "for", "in", "on", "and", "or", "by", "with", "from", "at", "is", "are",
        "be", "this", "that", "it", "its", "as", "my", "me", "i", "you", "your", "all", "any", "via", "into"};
    // split camelCase before tokenizing
    std::string split;
    split.reserve(text.size() + 8);
    for (std::size_t i = 0; i < text.size(); ++i) {
        auto c = static_cast<unsigned char>(text[i]);
        if (i > 0 && std::isupper(c) && std::islower(static_cast<unsigned char>(text[i - 1]))) split.push_back(' ');
        split.push_back(text[i]);
    }
    std::vector<std::string> out;
    for (auto& tok : tokenize(split)) {
        if (kStop.count(tok)) continue;
        if (tok.size() > 3 && tok.back() == 's' && tok[tok.size() - 2] != 's') tok.pop_back();
        out.push_back(std::move(tok));
    }
    return out;
}

Value AppManifest::to_json() const {
    Value tj = Value::array();
    for (const auto& t : tools) tj.push_back(t.to_json());
    return Value{{"app_id", app_id}, {"title", title}, {"description", description},
                 {"base_url", base_url}, {"source_digest", source_digest}, {"tools", tj}};
}

ParsedSpec parse_openapi(const Value& doc) {
    if (!doc.is_object()) throw SpecParseError("document is not an object");
    if (doc.contains("swagger")) throw SpecParseError("OpenAPI v2 (swagger) documents are not supported");
    auto version = doc.find("openapi");
    if (version == doc.end() || !version->is_string() || version->get<std::string>().rfind("3.", 0) != 0) {
        throw SpecParseError("missing or unsupported 'openapi' version");
    }
    ParsedSpec out;
    if (auto info = doc.find("info"); info != doc.end() && info->is_object()) {
        out.title = info->value("title", "");
        out.description = info->value("description", "");
    }
    auto paths = doc.find("paths");
    if (paths == doc.end() || !paths->is_object()) throw SpecParseError("missing 'paths' object");

    std::set<std::string> keys;
    for (const auto& [path, item_raw] : paths->items()) {
        std::vector<std::string> stack;
        auto item = resolve_refs(item_raw, doc, stack);
        if (!item.is_object()) throw SpecParseError("path item for " + path + " is not an object");
        Value shared_params = item.value("parameters", Value::array());
        for (const char* m : kMethods) {
            auto it = item.find(m);
            if (it == item.end()) continue;
            if (!it->is_object()) throw SpecParseError(std::string(m) + " " + path + " is not an object");
            SourceOperation op;
            op.method = upper(m);
            op.path = path;
            op.operation = *it;
            // merge path-level parameters; operation-level ones win
            Value params = op.operation.value("parameters", Value::array());
            for (const auto& sp : shared_params) {
                bool overridden = std::any_of(params.begin(), params.end(), [&](const Value& p) {
                    return p.value("name", "") == sp.value("name", "") && p.value("in", "") == sp.value("in", "");
                });
                if (!overridden) params.push_back(sp);
            }
            if (!params.empty()) op.operation["parameters"] = params;
            if (auto oid = op.operation.find("operationId"); oid != op.operation.end() && oid->is_string()) {
                op.key = sanitize_key(oid->get<std::string>());
            } else {
                op.key = std::string(m);
                for (const auto& seg : tokenize(path)) op.key += "_" + seg;
            }
            if (!keys.insert(op.key).second) throw SpecParseError("duplicate operation key: " + op.key);
            out.operations.push_back(std::move(op));
        }
    }
    if (out.operations.empty()) throw SpecParseError("no operations");
    return out;
}

ToolSpec minimize(const std::string& app_id, const SourceOperation& op) {
    ToolSpec t;
    t.app_id = app_id;
    t.tool_id = app_id + "." + op.key;
    t.method = op.method;
    t.path = op.path;
    const auto& o = op.operation;
    std::string summary = o.value("summary", "");
    if (summary.empty()) summary = o.value("description", "");
    t.summary = cap_text(summary, kSummaryCap);

    for (const auto& p : o.value("parameters", Value::array())) {
        if (!p.is_object()) continue;
        const auto in = p.value("in", "");
        if (in != "path" && in != "query") continue;
        ParamSpec ps;
        ps.name = p.value("name", "");
        if (ps.name.empty()) continue;
        ps.location = param_location_from_string(in);
        ps.type_tag = schema_tag(p.value("schema", Value::object()));
        ps.required = in == "path" || p.value("required", false);
        ps.description = cap_text(p.value("description", ""), kParamDescriptionCap);
        t.params.push_back(std::move(ps));
    }
    for (const auto& name : path_placeholders(op.path)) {
        if (!t.param(name)) t.params.push_back(ParamSpec{name, ParamLocation::path, TypeTag::string, true, ""});
    }
    if (auto body = o.find("requestBody"); body != o.end() && body->is_object()) {
        const bool body_required = body->value("required", false);
        if (const auto* schema = json_content_schema(*body)) {
            if (schema_tag(*schema) == TypeTag::record && schema->contains("properties")) {
                std::set<std::string> required;
                for (const auto& r : schema->value("required", Value::array())) required.insert(r.get<std::string>());
                for (const auto& [name, sub] : schema->at("properties").items()) {
                    ParamSpec ps;
                    ps.name = name;
                    ps.location = ParamLocation::body;
                    ps.type_tag = schema_tag(sub);
                    ps.required = required.count(name) != 0;
                    ps.description = cap_text(sub.value("description", ""), kParamDescriptionCap);
                    t.params.push_back(std::move(ps));
                }
            } else {
                t.params.push_back(ParamSpec{"body", ParamLocation::body, schema_tag(*schema), body_required, ""});
            }
        }
    }
    if (auto responses = o.find("responses"); responses != o.end() && responses->is_object()) {
        for (const auto& [code, resp] : responses->items()) {
            if (code.size() != 3 || code[0] != '2' || !resp.is_object()) continue;
            if (const auto* schema = json_content_schema(resp)) flatten_schema(*schema, "", 0, t.response_fields);
            break;
        }
    }
    return t;
}

HttpReply HttpToolTransport::send(const HttpCall& call) {
    HttpReply reply;
    try {
        // base_url may carry a path prefix, which httplib does not accept
        std::string host = call.base_url;
        std::string prefix;
        auto scheme = host.find("://");
        auto slash = host.find('/', scheme == std::string::npos ? 0 : scheme + 3);
        if (slash != std::string::npos) {
            prefix = host.substr(slash);
            host.resize(slash);
            while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
        }
        httplib::Client cli(host);
        cli.set_connection_timeout(5, 0);
        cli.set_read_timeout(static_cast<time_t>(timeout_s_), 0);
        httplib::Request req;
        req.method = call.method;
        req.path = prefix + call.target;
        for (const auto& [k, v] : call.headers) req.headers.emplace(k, v);
        if (call.json_body) {
            req.body = *call.json_body;
            req.headers.emplace("Content-Type", "application/json");
        }
        auto res = cli.send(req);
        if (!res) {
            reply.transport_error = httplib::to_string(res.error());
            return reply;
        }
        reply.status = res->status;
        reply.body = res->body;
    } catch (const std::exception& e) {
        reply.transport_error = e.what();
    }
    return reply;
}

Registry::Registry(std::shared_ptr<ToolTransport> transport, SearchConfig search)
    : transport_(transport ? std::move(transport) : std::make_shared<HttpToolTransport>()), search_config_(search) {}

const AppManifest& Registry::ingest_spec(std::string_view document, const std::string& app_id, const std::string& base_url) {
    if (app_id.empty() || app_id.find('.') != std::string::npos) throw SpecParseError("invalid app id '" + app_id + "'");
    Value doc;
    try {
        doc = Value::parse(document);
    } catch (const Value::parse_error& e) {
        throw SpecParseError(std::string("document does not parse: ") + e.what());
    }
    {
        std::shared_lock lock(mu_);
        if (apps_.count(app_id)) throw DuplicateAppError("application already registered: " + app_id);
    }
    auto parsed = parse_openapi(doc);

    IndexedApp app;
    app.manifest.app_id = app_id;
    app.manifest.title = parsed.title.empty() ? app_id : parsed.title;
    app.manifest.description = cap_text(parsed.description, kSummaryCap);
    app.manifest.base_url = base_url;
    app.manifest.source_digest = sha256_hex(document);
    std::string app_doc = app.manifest.title + " " + app.manifest.description + " " + app_id + " ";
    for (const auto& op : parsed.operations) {
        auto spec = minimize(app_id, op);
        auto doc_text = tool_document(spec);
        app_doc += doc_text + " ";
        app.tools.push_back(IndexedTool{spec, term_counts(doc_text)});
        app.manifest.tools.push_back(std::move(spec));
    }
    app.terms = term_counts(app_doc);

    std::unique_lock lock(mu_);
    auto [it, inserted] = apps_.emplace(app_id, std::move(app));
    if (!inserted) throw DuplicateAppError("application already registered: " + app_id);
    return it->second.manifest;
}

void Registry::set_app_headers(const std::string& app_id, std::map<std::string, std::string> headers) {
    std::unique_lock lock(mu_);
    auto it = apps_.find(app_id);
    if (it == apps_.end()) throw Error("unknown application: " + app_id);
    it->second.headers = std::move(headers);
}

void Registry::set_base_url(const std::string& app_id, const std::string& base_url) {
    std::unique_lock lock(mu_);
    auto it = apps_.find(app_id);
    if (it == apps_.end()) throw Error("unknown application: " + app_id);
    it->second.manifest.base_url = base_url;
}

std::vector<SearchHit> Registry::search(std::string_view query, std::optional<std::string> scope, std::size_t k) const {
    std::vector<std::string> s;
    if (scope) s.push_back(*scope);
    return search(query, std::span<const std::string>(s), k);
}

std::vector<SearchHit> Registry::search(std::string_view query, std::span<const std::string> scope, std::size_t k) const {
    if (k < 1) throw Error("search needs k >= 1");
    std::shared_lock lock(mu_);
    if (apps_.empty()) throw EmptyRegistryError("registry has no applications");
    auto terms = index_terms(query);
    std::set<std::string> q(terms.begin(), terms.end());
    if (q.empty()) return {};

    // stage 1: applications
    std::map<std::string, double> app_idf;
    for (const auto& t : q) {
        std::size_t df = 0;
        for (const auto& [_, app] : apps_) df += app.terms.count(t);
        if (df) app_idf[t] = std::log(1.0 + static_cast<double>(apps_.size()) / static_cast<double>(df));
    }
    std::vector<std::pair<double, const IndexedApp*>> ranked;
    if (!scope.empty()) {
        for (const auto& id : scope) {
            if (auto it = apps_.find(id); it != apps_.end()) ranked.emplace_back(tfidf(it->second.terms, q, app_idf), &it->second);
        }
    } else {
        for (const auto& [_, app] : apps_) {
            double s = tfidf(app.terms, q, app_idf);
            if (s > 0) ranked.emplace_back(s, &app);
        }
    }
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second->manifest.app_id < b.second->manifest.app_id;
    });
    if (scope.empty() && ranked.size() > search_config_.top_apps) ranked.resize(search_config_.top_apps);

    // stage 2: operations within the selected applications, idf over the whole registry
    std::size_t n_tools = 0;
    for (const auto& [_, app] : apps_) n_tools += app.tools.size();
    std::map<std::string, double> tool_idf;
    for (const auto& t : q) {
        std::size_t df = 0;
        for (const auto& [_, app] : apps_) {
            for (const auto& tool : app.tools) df += tool.terms.count(t);
        }
        if (df) tool_idf[t] = std::log(1.0 + static_cast<double>(n_tools) / static_cast<double>(df));
    }
    std::vector<SearchHit> hits;
    for (std::size_t rank = 0; rank < ranked.size(); ++rank) {
        for (const auto& tool : ranked[rank].second->tools) {
            double s = tfidf(tool.terms, q, tool_idf);
            if (s <= 0) continue;
            hits.push_back(SearchHit{tool.spec.tool_id, s, static_cast<int>(rank + 1), cap_text(tool.spec.summary, 80)});
        }
    }
    std::sort(hits.begin(), hits.end(), [](const SearchHit& a, const SearchHit& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.tool_id < b.tool_id;
    });
    if (hits.size() > k) hits.resize(k);
    return hits;
}

const Registry::IndexedTool* Registry::find_tool(const std::string& tool_id, const IndexedApp** app) const {
    auto dot = tool_id.find('.');
    if (dot == std::string::npos) return nullptr;
    auto it = apps_.find(tool_id.substr(0, dot));
    if (it == apps_.end()) return nullptr;
    for (const auto& t : it->second.tools) {
        if (t.spec.tool_id == tool_id) {
            if (app) *app = &it->second;
            return &t;
        }
    }
    return nullptr;
}

HttpCall Registry::build_call(const std::string& tool_id, const Value& args) const {
    std::shared_lock lock(mu_);
    const IndexedApp* app = nullptr;
    const auto* tool = find_tool(tool_id, &app);
    if (!tool) throw UnknownToolError("unknown tool: " + tool_id);
    if (!args.is_object()) throw ArgValidationError("", "arguments must be a record");
    const auto& spec = tool->spec;

    for (const auto& [name, v] : args.items()) {
        const auto* p = spec.param(name);
        if (!p) throw ArgValidationError(name, "unknown parameter '" + name + "' for " + tool_id);
        if (v.is_null() && !p->required) continue;
        if (!arg_matches(p->type_tag, v)) {
            throw ArgValidationError(name, "parameter '" + name + "' expects " + std::string(to_string(p->type_tag)) +
                                               ", got " + v.type_name());
        }
    }
    for (const auto& p : spec.params) {
        auto it = args.find(p.name);
        if (p.required && (it == args.end() || it->is_null())) {
            throw ArgValidationError(p.name, "missing required parameter '" + p.name + "' for " + tool_id);
        }
    }

    HttpCall call;
    call.method = spec.method;
    call.base_url = app->manifest.base_url;
    call.headers = app->headers;
    std::string path = spec.path;
    std::string query;
    Value body = Value::object();
    bool has_body = false;
    for (const auto& p : spec.params) {
        auto it = args.find(p.name);
        if (it == args.end() || it->is_null()) continue;
        switch (p.location) {
            case ParamLocation::path: {
                auto token = "{" + p.name + "}";
                auto pos = path.find(token);
                if (pos != std::string::npos) path.replace(pos, token.size(), percent_encode(render_plain(*it)));
                break;
            }
            case ParamLocation::query:
                query += (query.empty() ? "?" : "&") + percent_encode(p.name) + "=" + percent_encode(render_plain(*it));
                break;
            case ParamLocation::body:
                has_body = true;
                if (p.name == "body" && spec.params.back().name == "body" && !it->is_object()) {
                    body = *it;
                } else {
                    body[p.name] = *it;
                }
                break;
        }
    }
    call.target = path + query;
    if (has_body || spec.method == "POST" || spec.method == "PUT" || spec.method == "PATCH") {
        bool any_body_param = std::any_of(spec.params.begin(), spec.params.end(),
                                          [](const ParamSpec& p) { return p.location == ParamLocation::body; });
        if (any_body_param) call.json_body = body.dump();
    }
    return call;
}

ToolResponse Registry::invoke(const std::string& tool_id, const Value& args) {
    auto call = build_call(tool_id, args);
    auto start = std::chrono::steady_clock::now();
    auto reply = transport_->send(call);
    ToolResponse out;
    out.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    out.status_code = reply.status;
    if (reply.transport_error) {
        out.error = "transport failure: " + *reply.transport_error;
        return out;
    }
    try {
        out.body = reply.body.empty() ? Value() : Value::parse(reply.body);
    } catch (const Value::parse_error&) {
        out.body = reply.body;
    }
    if (reply.status < 200 || reply.status >= 300) out.error = "HTTP " + std::to_string(reply.status);
    return out;
}

std::optional<ToolSpec> Registry::tool(const std::string& tool_id) const {
    std::shared_lock lock(mu_);
    const auto* t = find_tool(tool_id, nullptr);
    if (!t) return std::nullopt;
    return t->spec;
}

std::vector<ToolSpec> Registry::tools_of(const std::string& app_id) const {
    std::shared_lock lock(mu_);
    auto it = apps_.find(app_id);
    if (it == apps_.end()) return {};
    return it->second.manifest.tools;
}

std::optional<AppManifest> Registry::manifest(const std::string& app_id) const {
    std::shared_lock lock(mu_);
    auto it = apps_.find(app_id);
    if (it == apps_.end()) return std::nullopt;
    return it->second.manifest;
}

std::vector<std::string> Registry::app_ids() const {
    std::shared_lock lock(mu_);
    std::vector<std::string> out;
    for (const auto& [k, _] : apps_) out.push_back(k);
    return out;
}

bool Registry::empty() const {
    std::shared_lock lock(mu_);
    return apps_.empty();
}

std::string Registry::export_text() const {
    std::shared_lock lock(mu_);
    Value apps = Value::array();
    for (const auto& [_, app] : apps_) apps.push_back(app.manifest.to_json());
    return Value{{"apps", apps}}.dump(2) + "\n";
}

}  // namespace planex
