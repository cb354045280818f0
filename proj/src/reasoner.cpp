#include "planex/reasoner.hpp"

#include "planex/errors.hpp"

#include <httplib.h>

#include <cstdlib>
#include <fstream>
#include <regex>
#include <sstream>

namespace planex {

namespace {

bool type_matches(const std::string& type, const Value& v) {
    if (type == "object") return v.is_object();
    if (type == "array") return v.is_array();
    if (type == "string") return v.is_string();
    if (type == "number") return v.is_number();
    if (type == "integer") return v.is_number_integer() || v.is_number_unsigned();
    if (type == "boolean") return v.is_boolean();
    if (type == "null") return v.is_null();
    return false;
}

std::optional<std::string> validate_at(const Value& schema, const Value& value, const std::string& path) {
    if (!schema.is_object()) return std::nullopt;
    if (auto it = schema.find("type"); it != schema.end()) {
        bool ok = false;
        if (it->is_string()) {
            ok = type_matches(it->get<std::string>(), value);
        } else if (it->is_array()) {
            for (const auto& t : *it) ok = ok || type_matches(t.get<std::string>(), value);
        }
        if (!ok) return path + ": expected type " + it->dump() + ", got " + std::string(value.type_name());
    }
    if (auto it = schema.find("enum"); it != schema.end()) {
        bool found = false;
        for (const auto& e : *it) found = found || e == value;
        if (!found) return path + ": value " + value.dump() + " not in " + it->dump();
    }
    if (value.is_object()) {
        if (auto req = schema.find("required"); req != schema.end()) {
            for (const auto& r : *req) {
                if (!value.contains(r.get<std::string>())) return path + ": missing required field '" + r.get<std::string>() + "'";
            }
        }
        auto props = schema.find("properties");
        if (props != schema.end()) {
            for (const auto& [k, sub] : props->items()) {
                if (auto f = value.find(k); f != value.end()) {
                    if (auto err = validate_at(sub, *f, path + "." + k)) return err;
                }
            }
        }
        if (auto ap = schema.find("additionalProperties"); ap != schema.end() && ap->is_boolean() && !ap->get<bool>()) {
            for (const auto& [k, _] : value.items()) {
                if (props == schema.end() || !props->contains(k)) return path + ": unexpected field '" + k + "'";
            }
        }
    }
    if (value.is_array()) {
        if (auto mi = schema.find("minItems"); mi != schema.end() && value.size() < mi->get<std::size_t>()) {
            return path + ": expected at least " + mi->dump() + " items";
        }
        if (auto items = schema.find("items"); items != schema.end()) {
            for (std::size_t i = 0; i < value.size(); ++i) {
                if (auto err = validate_at(*items, value[i], path + "[" + std::to_string(i) + "]")) return err;
            }
        }
    }
    return std::nullopt;
}

void put_field(std::string& out, std::string_view field) {
    out += std::to_string(field.size());
    out.push_back(':');
    out.append(field);
    out.push_back(';');
}

std::string strip_fences(const std::string& raw) {
    static const std::regex fence(R"(^\s*```[A-Za-z]*\s*\n([\s\S]*?)\n?```\s*$)");
    std::smatch m;
    if (std::regex_match(raw, m, fence)) return m[1].str();
    return raw;
}

std::string entry_text(const Value& entry) {
    if (entry.is_object() && entry.contains("raw")) return entry.at("raw").get<std::string>();
    if (entry.is_object() && entry.contains("output")) return entry.at("output").dump();
    throw ConfigError("script entry needs 'output' or 'raw': " + entry.dump());
}

bool rule_matches(const Value& rule, const PromptBundle& bundle, const std::string& text) {
    if (auto a = rule.find("agent"); a != rule.end() && a->get<std::string>() != bundle.agent) return false;
    if (auto t = rule.find("task"); t != rule.end() && t->get<std::string>() != bundle.task_id) return false;
    if (auto c = rule.find("cursor"); c != rule.end() && c->get<int>() != bundle.cursor) return false;
    if (auto c = rule.find("contains"); c != rule.end()) {
        for (const auto& needle : *c) {
            if (text.find(needle.get<std::string>()) == std::string::npos) return false;
        }
    }
    if (auto c = rule.find("excludes"); c != rule.end()) {
        for (const auto& needle : *c) {
            if (text.find(needle.get<std::string>()) != std::string::npos) return false;
        }
    }
    return true;
}

}  // namespace

std::optional<std::string> validate_schema(const Value& schema, const Value& value) {
    return validate_at(schema, value, "$");
}

std::string PromptBundle::fragment_digest() const {
    std::string buf;
    for (const auto& f : context_fragments) {
        put_field(buf, f.label);
        put_field(buf, f.text);
    }
    return sha256_hex(buf);
}

std::string PromptBundle::step_fingerprint() const {
    std::string buf;
    put_field(buf, agent);
    put_field(buf, task_id);
    put_field(buf, std::to_string(cursor));
    put_field(buf, role_preamble);
    put_field(buf, instructions);
    put_field(buf, fragment_digest());
    put_field(buf, output_schema.dump());
    return sha256_hex(buf);
}

std::string PromptBundle::canonical_text() const {
    std::string out = instructions;
    for (const auto& f : context_fragments) {
        out += "\n## " + f.label + "\n" + f.text;
    }
    return out;
}

PromptBundle& PromptBundle::add(std::string label, std::string text) {
    context_fragments.push_back({std::move(label), std::move(text)});
    return *this;
}

std::string fingerprint(const PromptBundle& bundle) { return bundle.step_fingerprint(); }

void BackendConfig::validate() const {
    if (kind == Kind::remote_chat && !endpoint) throw ConfigError("remote_chat backend requires an endpoint");
    if (kind == Kind::scripted && !script_path) throw ConfigError("scripted backend requires a script path");
    if (retry_budget < 0) throw ConfigError("retry budget must be non-negative");
    if (max_in_flight < 1 || max_in_flight > 1024) throw ConfigError("in-flight cap must be in [1, 1024]");
}

ScriptedBackend::ScriptedBackend(Value script) : script_(std::move(script)) {
    if (!script_.is_object()) throw ConfigError("script must be an object");
}

ScriptedBackend ScriptedBackend::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open script " + path.string());
    try {
        return ScriptedBackend(Value::parse(in));
    } catch (const Value::parse_error& e) {
        throw ConfigError("script " + path.string() + " is not valid JSON: " + e.what());
    }
}

std::string ScriptedBackend::generate(const PromptBundle& bundle) {
    const auto fp = bundle.step_fingerprint();
    if (auto entries = script_.find("entries"); entries != script_.end()) {
        if (auto e = entries->find(fp); e != entries->end()) return entry_text(*e);
    }
    if (auto rules = script_.find("rules"); rules != script_.end()) {
        const auto text = bundle.canonical_text();
        for (const auto& rule : *rules) {
            if (rule_matches(rule, bundle, text)) return entry_text(rule);
        }
    }
    if (auto d = script_.find("default"); d != script_.end()) return entry_text(*d);
    throw ScriptMissError("no script entry for " + bundle.agent + " step " + fp.substr(0, 12));
}

std::string HttpChatTransport::post(const ChatRequest& request) {
    static const std::regex url_re(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(request.url, m, url_re)) throw TransportError("malformed endpoint URL: " + request.url);
    httplib::Client cli(m[1].str());
    cli.set_read_timeout(static_cast<time_t>(timeout_s_), 0);
    cli.set_connection_timeout(10, 0);
    httplib::Headers headers;
    for (const auto& [k, v] : request.headers) headers.emplace(k, v);
    auto res = cli.Post(m[2].matched ? m[2].str() : "/", headers, request.body.dump(), "application/json");
    if (!res) throw TransportError("chat request failed: " + httplib::to_string(res.error()));
    if (res->status < 200 || res->status >= 300) {
        throw TransportError("chat endpoint returned " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
    }
    return res->body;
}

RemoteChatBackend::RemoteChatBackend(BackendConfig config, std::shared_ptr<ChatTransport> transport)
    : config_(std::move(config)),
      transport_(transport ? std::move(transport) : std::make_shared<HttpChatTransport>()),
      in_flight_(config_.max_in_flight) {
    if (config_.kind != BackendConfig::Kind::remote_chat) throw ConfigError("RemoteChatBackend needs a remote_chat config");
    config_.validate();
}

std::string RemoteChatBackend::backend_id() const {
    return "remote:" + config_.model_name.value_or("default");
}

Value RemoteChatBackend::build_request_body(const PromptBundle& bundle, const BackendConfig& config) {
    std::string user = bundle.instructions;
    for (const auto& f : bundle.context_fragments) user += "\n\n## " + f.label + "\n" + f.text;
    user += "\n\nRespond with a single JSON value conforming to this schema:\n" + bundle.output_schema.dump();
    Value body{{"messages", Value::array({Value{{"role", "system"}, {"content", bundle.role_preamble}},
                                          Value{{"role", "user"}, {"content", user}}})},
               {"temperature", config.temperature},
               {"max_tokens", config.max_tokens}};
    if (config.model_name) body["model"] = *config.model_name;
    return body;
}

std::string RemoteChatBackend::extract_text(const std::string& response_body) {
    Value j;
    try {
        j = Value::parse(response_body);
    } catch (const Value::parse_error&) {
        throw TransportError("chat response is not JSON");
    }
    if (j.contains("choices") && !j["choices"].empty()) {
        const auto& c = j["choices"][0];
        if (c.contains("message") && c["message"].contains("content")) return c["message"]["content"].get<std::string>();
        if (c.contains("text")) return c["text"].get<std::string>();
    }
    if (j.contains("content") && j["content"].is_string()) return j["content"].get<std::string>();
    if (j.contains("message") && j["message"].contains("content")) return j["message"]["content"].get<std::string>();
    throw TransportError("chat response carries no assistant text");
}

std::string RemoteChatBackend::generate(const PromptBundle& bundle) {
    ChatRequest req;
    req.url = *config_.endpoint;
    req.body = build_request_body(bundle, config_);
    if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key) {
        req.headers["Authorization"] = std::string("Bearer ") + key;
    }
    in_flight_.acquire();
    struct Release {
        std::counting_semaphore<1024>& s;
        ~Release() { s.release(); }
    } release{in_flight_};
    return extract_text(transport_->post(req));
}

std::string RecordingBackend::generate(const PromptBundle& bundle) {
    auto raw = inner_->generate(bundle);
    std::lock_guard lock(mu_);
    entries_[bundle.step_fingerprint()] = raw;
    return raw;
}

Value RecordingBackend::recording() const {
    std::lock_guard lock(mu_);
    Value entries = Value::object();
    for (const auto& [fp, raw] : entries_) entries[fp] = Value{{"raw", raw}};
    return Value{{"entries", entries}};
}

std::shared_ptr<Backend> make_backend(const BackendConfig& config) {
    config.validate();
    if (config.kind == BackendConfig::Kind::scripted) {
        return std::make_shared<ScriptedBackend>(ScriptedBackend::from_file(*config.script_path));
    }
    return std::make_shared<RemoteChatBackend>(config);
}

ReasonerOutput ReasonerGateway::complete(const PromptBundle& bundle) {
    if (bundle.output_schema.is_null() || bundle.output_schema.empty()) {
        throw SchemaViolationError("prompt bundle for " + bundle.agent + " has no output schema");
    }
    PromptBundle attempt = bundle;
    std::string last_error;
    for (int i = 0; i <= retry_budget_; ++i) {
        auto raw = backend_->generate(attempt);
        Value parsed;
        std::optional<std::string> err;
        try {
            parsed = Value::parse(strip_fences(raw));
            err = validate_schema(bundle.output_schema, parsed);
        } catch (const Value::parse_error& e) {
            err = std::string("output is not valid JSON: ") + e.what();
        }
        if (!err) return ReasonerOutput{std::move(parsed), std::move(raw), i + 1, backend_->backend_id()};
        last_error = *err;
        attempt.add("validation_error", "Your previous reply was rejected: " + last_error + ". Reply again with valid JSON.");
    }
    throw SchemaViolationError(bundle.agent + ": output failed schema validation after " +
                               std::to_string(retry_budget_ + 1) + " attempts: " + last_error);
}

ReasonerOutput complete(const PromptBundle& bundle, const BackendConfig& config) {
    ReasonerGateway gateway(make_backend(config), config.retry_budget);
    return gateway.complete(bundle);
}

}  // namespace planex
