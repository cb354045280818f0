#include "planex/mock_server.hpp"

#include "planex/errors.hpp"

#include <httplib.h>

#include <cstdlib>

namespace planex {

namespace {

std::vector<std::string> split_path(const std::string& path) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= path.size()) {
        auto end = path.find('/', start);
        if (end == std::string::npos) end = path.size();
        if (end > start) out.push_back(path.substr(start, end - start));
        start = end + 1;
    }
    return out;
}

bool is_placeholder(const std::string& seg) { return seg.size() > 2 && seg.front() == '{' && seg.back() == '}'; }

bool value_matches_schema_type(const Value& v, const Value& schema) {
    auto type = schema.value("type", "");
    if (type.empty()) return true;
    if (type == "string") return v.is_string();
    if (type == "integer") return v.is_number_integer() || v.is_number_unsigned() ||
                                  (v.is_number_float() && v.get<double>() == static_cast<double>(static_cast<long long>(v.get<double>())));
    if (type == "number") return v.is_number();
    if (type == "boolean") return v.is_boolean();
    if (type == "array") return v.is_array();
    if (type == "object") return v.is_object();
    return true;
}

bool text_matches_schema_type(const std::string& text, const Value& schema) {
    auto type = schema.value("type", "");
    if (type == "integer" || type == "number") {
        if (text.empty()) return false;
        char* end = nullptr;
        std::strtod(text.c_str(), &end);
        return end && *end == '\0';
    }
    if (type == "boolean") return text == "true" || text == "false";
    return true;
}

Value typed_from_text(const std::string& text, const Value& schema) {
    auto type = schema.value("type", "");
    if (type == "integer" || type == "number") {
        try {
            return Value::parse(text);
        } catch (...) {
            return text;
        }
    }
    if (type == "boolean") return text == "true";
    return text;
}

Value substitute(const Value& tpl, const Value& args, const std::string& digest) {
    if (tpl.is_string()) {
        const auto& s = tpl.get_ref<const std::string&>();
        if (s == "$digest") return digest;
        if (s.rfind("$param:", 0) == 0) {
            auto name = s.substr(7);
            return args.contains(name) ? args[name] : Value();
        }
        return tpl;
    }
    if (tpl.is_object()) {
        Value out = Value::object();
        for (const auto& [k, v] : tpl.items()) out[k] = substitute(v, args, digest);
        return out;
    }
    if (tpl.is_array()) {
        Value out = Value::array();
        for (const auto& v : tpl) out.push_back(substitute(v, args, digest));
        return out;
    }
    return tpl;
}

Value error_body(const std::string& message, const std::string& param = "") {
    Value j{{"error", message}};
    if (!param.empty()) j["param"] = param;
    return j;
}

}  // namespace

Value synthesize_from_schema(const Value& schema, int depth) {
    if (!schema.is_object() || depth > 6) return nullptr;
    if (schema.contains("example")) return schema["example"];
    if (auto e = schema.find("enum"); e != schema.end() && e->is_array() && !e->empty()) return e->front();
    auto type = schema.value("type", "");
    if (type.empty() && schema.contains("properties")) type = "object";
    if (type.empty() && schema.contains("items")) type = "array";
    if (type == "object") {
        Value out = Value::object();
        if (auto props = schema.find("properties"); props != schema.end() && props->is_object()) {
            for (const auto& [k, sub] : props->items()) out[k] = synthesize_from_schema(sub, depth + 1);
        }
        return out;
    }
    if (type == "array") {
        Value out = Value::array();
        if (auto items = schema.find("items"); items != schema.end()) out.push_back(synthesize_from_schema(*items, depth + 1));
        return out;
    }
    if (type == "integer") return 1;
    if (type == "number") return 1.5;
    if (type == "boolean") return true;
    if (type == "string") return "sample";
    return nullptr;
}

MockAppServer::MockAppServer() : server_(std::make_unique<httplib::Server>()) {
    auto dispatch = [this](const httplib::Request& req, httplib::Response& res) {
        std::multimap<std::string, std::string> query(req.params.begin(), req.params.end());
        int status = 500;
        std::string reply;
        handle(req.method, req.path, query, req.body, status, reply);
        res.status = status;
        res.set_content(reply, "application/json");
    };
    server_->Get(".*", dispatch);
    server_->Post(".*", dispatch);
    server_->Put(".*", dispatch);
    server_->Delete(".*", dispatch);
    server_->Patch(".*", dispatch);
}

MockAppServer::~MockAppServer() { stop(); }

void MockAppServer::add_app(const std::string& app_id, const Value& document) {
    auto parsed = parse_openapi(document);
    App app;
    for (auto& op : parsed.operations) {
        Route r;
        r.segments = split_path(op.path);
        r.op = std::move(op);
        app.routes.push_back(std::move(r));
    }
    std::lock_guard lock(mu_);
    apps_[app_id] = std::move(app);
}

void MockAppServer::set_status_override(const std::string& app_id, const std::string& key, int status) {
    std::lock_guard lock(mu_);
    auto it = apps_.find(app_id);
    if (it == apps_.end()) throw Error("mock server has no app " + app_id);
    for (auto& r : it->second.routes) {
        if (r.op.key == key) {
            r.override_status = status;
            return;
        }
    }
    throw Error("mock server app " + app_id + " has no operation " + key);
}

void MockAppServer::start() {
    if (thread_.joinable()) return;
    port_ = server_->bind_to_any_port("127.0.0.1");
    if (port_ <= 0) throw Error("mock server could not bind a port");
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
}

void MockAppServer::stop() {
    if (!thread_.joinable()) return;
    server_->stop();
    thread_.join();
}

std::string MockAppServer::base_url(const std::string& app_id) const {
    return "http://127.0.0.1:" + std::to_string(port_) + "/" + app_id;
}

std::size_t MockAppServer::request_count() const {
    std::lock_guard lock(mu_);
    return requests_;
}

std::size_t MockAppServer::client_error_count() const {
    std::lock_guard lock(mu_);
    return client_errors_;
}

void MockAppServer::handle(const std::string& method, const std::string& path,
                           const std::multimap<std::string, std::string>& query, const std::string& body, int& status,
                           std::string& reply) {
    std::unique_lock lock(mu_);
    ++requests_;
    auto finish = [&](int code, const Value& j) {
        status = code;
        reply = j.dump();
        if (code >= 400 && code < 500) ++client_errors_;
    };

    auto segments = split_path(path);
    if (segments.empty()) return finish(404, error_body("no application in path"));
    auto app_it = apps_.find(segments.front());
    if (app_it == apps_.end()) return finish(404, error_body("unknown application " + segments.front()));
    segments.erase(segments.begin());

    const Route* route = nullptr;
    bool path_known = false;
    Value path_args = Value::object();
    for (const auto& r : app_it->second.routes) {
        if (r.segments.size() != segments.size()) continue;
        Value captured = Value::object();
        bool match = true;
        for (std::size_t i = 0; i < segments.size() && match; ++i) {
            if (is_placeholder(r.segments[i])) {
                captured[r.segments[i].substr(1, r.segments[i].size() - 2)] = httplib::detail::decode_url(segments[i], false);
            } else {
                match = r.segments[i] == segments[i];
            }
        }
        if (!match) continue;
        path_known = true;
        if (r.op.method == method) {
            route = &r;
            path_args = std::move(captured);
            break;
        }
    }
    if (!route) {
        return path_known ? finish(405, error_body("method not allowed")) : finish(404, error_body("no such path " + path));
    }
    const auto& op = route->op.operation;

    // structural validation
    Value args = Value::object();
    for (const auto& p : op.value("parameters", Value::array())) {
        const auto name = p.value("name", "");
        const auto in = p.value("in", "");
        const auto schema = p.value("schema", Value::object());
        if (in == "path") {
            auto v = path_args.value(name, "");
            if (v.empty()) return finish(400, error_body("missing path parameter", name));
            if (!text_matches_schema_type(v, schema)) return finish(400, error_body("bad type", name));
            args[name] = typed_from_text(v, schema);
        } else if (in == "query") {
            auto it = query.find(name);
            if (it == query.end()) {
                if (p.value("required", false)) return finish(400, error_body("missing query parameter", name));
                continue;
            }
            if (!text_matches_schema_type(it->second, schema)) return finish(400, error_body("bad type", name));
            args[name] = typed_from_text(it->second, schema);
        }
    }
    for (const auto& [k, v] : path_args.items()) {
        if (!args.contains(k)) args[k] = v;
    }
    if (auto rb = op.find("requestBody"); rb != op.end() && rb->is_object()) {
        const Value* schema = nullptr;
        if (auto content = rb->find("content"); content != rb->end() && content->is_object()) {
            for (const auto& [media, m] : content->items()) {
                if (media.find("json") != std::string::npos && m.contains("schema")) {
                    schema = &m["schema"];
                    break;
                }
            }
        }
        if (body.empty()) {
            if (rb->value("required", false)) return finish(400, error_body("missing request body"));
        } else {
            Value parsed;
            try {
                parsed = Value::parse(body);
            } catch (const Value::parse_error&) {
                return finish(400, error_body("request body is not JSON"));
            }
            if (schema) {
                if (!value_matches_schema_type(parsed, *schema)) return finish(400, error_body("request body has the wrong type"));
                if (parsed.is_object()) {
                    for (const auto& r : schema->value("required", Value::array())) {
                        if (!parsed.contains(r.get<std::string>())) return finish(400, error_body("missing body field", r));
                    }
                    auto props = schema->value("properties", Value::object());
                    for (const auto& [k, v] : parsed.items()) {
                        if (props.contains(k) && !value_matches_schema_type(v, props[k])) {
                            return finish(400, error_body("bad type", k));
                        }
                        args[k] = v;
                    }
                }
            }
        }
    }

    if (route->override_status) return finish(route->override_status, error_body("injected failure"));

    const auto digest = sha256_hex(args.dump()).substr(0, 12);
    int ok_status = 200;
    const Value* ok_schema = nullptr;
    if (auto responses = op.find("responses"); responses != op.end() && responses->is_object()) {
        for (const auto& [code, resp] : responses->items()) {
            if (code.size() == 3 && code[0] == '2') {
                ok_status = std::atoi(code.c_str());
                if (auto c = resp.find("content"); c != resp.end() && c->is_object()) {
                    for (const auto& [media, m] : c->items()) {
                        if (media.find("json") != std::string::npos && m.contains("schema")) {
                            ok_schema = &m["schema"];
                            break;
                        }
                    }
                }
                break;
            }
        }
    }
    if (auto mock = op.find("x-mock"); mock != op.end() && mock->is_object()) {
        int code = mock->value("status", ok_status);
        if (auto by = mock->find("by"); by != mock->end()) {
            auto key = args.contains(by->get<std::string>()) ? render_plain(args[by->get<std::string>()]) : std::string();
            auto cases = mock->value("cases", Value::object());
            if (cases.contains(key)) return finish(code, substitute(cases[key], args, digest));
            if (mock->contains("default")) return finish(code, substitute((*mock)["default"], args, digest));
            return finish(404, error_body("not found", by->get<std::string>()));
        }
        return finish(code, substitute(mock->value("response", Value::object()), args, digest));
    }
    return finish(ok_status, ok_schema ? synthesize_from_schema(*ok_schema) : Value::object());
}

}  // namespace planex
