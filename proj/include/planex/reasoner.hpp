#pragma once

#include "planex/value.hpp"

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <vector>

namespace planex {

// Validates a value against a JSON-Schema subset: type (string or list),
// properties, required, items, enum, minItems, additionalProperties=false.
// Returns a human-readable description of the first violation.
std::optional<std::string> validate_schema(const Value& schema, const Value& value);

struct ContextFragment {
    std::string label;
    std::string text;

    friend bool operator==(const ContextFragment&, const ContextFragment&) = default;
};

struct PromptBundle {
    std::string agent;
    std::string task_id;
    int cursor = 0;
    std::string role_preamble;
    std::string instructions;
    std::vector<ContextFragment> context_fragments;
    Value output_schema;

    // Digest over the ordered fragment list.
    std::string fragment_digest() const;
    // Stable SHA-256 over the canonicalized bundle; fragment order is semantic.
    std::string step_fingerprint() const;
    // Flattened searchable text used by scripted rule matching.
    std::string canonical_text() const;

    PromptBundle& add(std::string label, std::string text);
};

std::string fingerprint(const PromptBundle& bundle);

struct ReasonerOutput {
    Value structured_value;
    std::string raw_text;
    int attempt_count = 1;
    std::string backend_id;
};

struct BackendConfig {
    enum class Kind { remote_chat, scripted };

    Kind kind = Kind::scripted;
    std::optional<std::string> endpoint;
    std::optional<std::string> model_name;
    double temperature = 0.0;
    int max_tokens = 1024;
    std::optional<std::filesystem::path> script_path;
    int retry_budget = 2;
    int max_in_flight = 8;
    // Name of the environment variable carrying the bearer credential.
    std::string api_key_env = "PLANEX_API_KEY";

    void validate() const;
};

// Produces raw text for one prompt. Backends do not validate.
class Backend {
public:
    virtual ~Backend() = default;
    virtual std::string backend_id() const = 0;
    virtual std::string generate(const PromptBundle& bundle) = 0;
};

// Deterministic backend replaying canned outputs. Lookup order: exact
// fingerprint entry, first matching rule, default, else ScriptMissError.
//
// Script document:
//   { "entries": { "<fingerprint>": {"output": <value>} | {"raw": "<text>"} },
//     "rules":   [ { "agent": "...", "task": "...", "contains": ["..."],
//                    "output": <value> | "raw": "<text>" } ],
//     "default": {"output": <value>} }
class ScriptedBackend : public Backend {
public:
    explicit ScriptedBackend(Value script);
    static ScriptedBackend from_file(const std::filesystem::path& path);

    std::string backend_id() const override { return "scripted"; }
    std::string generate(const PromptBundle& bundle) override;

    const Value& script() const { return script_; }

private:
    Value script_;
};

struct ChatRequest {
    std::string url;
    Value body;
    std::map<std::string, std::string> headers;
};

// Carries one chat-completion request; throws TransportError on failure.
class ChatTransport {
public:
    virtual ~ChatTransport() = default;
    virtual std::string post(const ChatRequest& request) = 0;
};

class HttpChatTransport : public ChatTransport {
public:
    explicit HttpChatTransport(double timeout_s = 120.0) : timeout_s_(timeout_s) {}
    std::string post(const ChatRequest& request) override;

private:
    double timeout_s_;
};

// Chat-completion backend: POST {model, messages[], temperature, max_tokens}.
class RemoteChatBackend : public Backend {
public:
    RemoteChatBackend(BackendConfig config, std::shared_ptr<ChatTransport> transport = nullptr);

    std::string backend_id() const override;
    std::string generate(const PromptBundle& bundle) override;

    static Value build_request_body(const PromptBundle& bundle, const BackendConfig& config);
    static std::string extract_text(const std::string& response_body);

private:
    BackendConfig config_;
    std::shared_ptr<ChatTransport> transport_;
    std::counting_semaphore<1024> in_flight_;
};

// Records fingerprint -> raw text for later replay through ScriptedBackend.
class RecordingBackend : public Backend {
public:
    explicit RecordingBackend(std::shared_ptr<Backend> inner) : inner_(std::move(inner)) {}

    std::string backend_id() const override { return inner_->backend_id(); }
    std::string generate(const PromptBundle& bundle) override;

    // {"entries": {...}} ready for ScriptedBackend.
    Value recording() const;

private:
    std::shared_ptr<Backend> inner_;
    mutable std::mutex mu_;
    std::map<std::string, std::string> entries_;
};

std::shared_ptr<Backend> make_backend(const BackendConfig& config);

// Uniform entry point for all agents: validates structured output locally
// and reprompts with the validation error appended, up to the retry budget.
class ReasonerGateway {
public:
    explicit ReasonerGateway(std::shared_ptr<Backend> backend, int retry_budget = 2)
        : backend_(std::move(backend)), retry_budget_(retry_budget) {}

    ReasonerOutput complete(const PromptBundle& bundle);

    int retry_budget() const { return retry_budget_; }
    Backend& backend() { return *backend_; }

private:
    std::shared_ptr<Backend> backend_;
    int retry_budget_;
};

using ReasonerHandle = ReasonerGateway&;

ReasonerOutput complete(const PromptBundle& bundle, const BackendConfig& config);

}  // namespace planex
