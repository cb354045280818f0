#pragma once

#include "planex/value.hpp"

#include <optional>
#include <string>
#include <vector>

namespace planex {

inline constexpr std::size_t kSummaryCap = 200;
inline constexpr std::size_t kParamDescriptionCap = 80;

enum class ParamLocation { path, query, body };

std::string_view to_string(ParamLocation loc);
ParamLocation param_location_from_string(std::string_view s);

struct ParamSpec {
    std::string name;
    ParamLocation location = ParamLocation::query;
    TypeTag type_tag = TypeTag::string;
    bool required = false;
    std::string description;

    friend bool operator==(const ParamSpec&, const ParamSpec&) = default;
};

struct ResponseField {
    std::string path;  // dotted, "[]" marks list elements
    TypeTag type_tag = TypeTag::null;

    friend bool operator==(const ResponseField&, const ResponseField&) = default;
};

// Minimized, LLM-facing description of one API operation.
struct ToolSpec {
    std::string tool_id;  // "<app_id>.<operation key>"
    std::string app_id;
    std::string method;   // upper-case HTTP verb
    std::string path;     // templated, e.g. /users/{user_id}/orders
    std::string summary;
    std::vector<ParamSpec> params;
    std::vector<ResponseField> response_fields;

    const ParamSpec* param(std::string_view name) const;

    Value to_json() const;
    static ToolSpec from_json(const Value& j);

    friend bool operator==(const ToolSpec&, const ToolSpec&) = default;
};

struct ToolResponse {
    int status_code = 0;
    Value body;
    double latency_ms = 0.0;
    std::optional<std::string> error;

    bool ok() const { return !error && status_code >= 200 && status_code < 300; }
};

class ToolInvoker {
public:
    virtual ~ToolInvoker() = default;
    // Throws UnknownToolError / ArgValidationError; transport and HTTP
    // failures are reported through ToolResponse::error.
    virtual ToolResponse invoke(const std::string& tool_id, const Value& args) = 0;
};

// Truncates to at most `cap` bytes on a UTF-8 boundary, ending in "..."
// when shortened. Whitespace runs are collapsed first.
std::string cap_text(std::string_view text, std::size_t cap);

}  // namespace planex
