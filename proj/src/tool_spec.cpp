#include "planex/tool_spec.hpp"

#include "planex/errors.hpp"

#include <cctype>

namespace planex {

std::string_view to_string(ParamLocation loc) {
    switch (loc) {
        case ParamLocation::path: return "path";
        case ParamLocation::query: return "query";
        case ParamLocation::body: return "body";
    }
    return "query";
}

ParamLocation param_location_from_string(std::string_view s) {
    if (s == "path") return ParamLocation::path;
    if (s == "query") return ParamLocation::query;
    if (s == "body") return ParamLocation::body;
    throw Error("unsupported parameter location: " + std::string(s));
}

const ParamSpec* ToolSpec::param(std::string_view name) const {
    for (const auto& p : params) {
        if (p.name == name) return &p;
    }
    return nullptr;
}

Value ToolSpec::to_json() const {
    Value ps = Value::array();
    for (const auto& p : params) {
        Value pj{{"name", p.name}, {"in", to_string(p.location)}, {"type", to_string(p.type_tag)}, {"required", p.required}};
        if (!p.description.empty()) pj["description"] = p.description;
        ps.push_back(std::move(pj));
    }
    Value rs = Value::array();
    for (const auto& r : response_fields) rs.push_back(Value{{"path", r.path}, {"type", to_string(r.type_tag)}});
    return Value{{"id", tool_id}, {"method", method}, {"path", path}, {"summary", summary}, {"params", ps}, {"response", rs}};
}

ToolSpec ToolSpec::from_json(const Value& j) {
    ToolSpec t;
    t.tool_id = j.at("id").get<std::string>();
    t.app_id = t.tool_id.substr(0, t.tool_id.find('.'));
    t.method = j.at("method").get<std::string>();
    t.path = j.at("path").get<std::string>();
    t.summary = j.value("summary", "");
    for (const auto& pj : j.value("params", Value::array())) {
        ParamSpec p;
        p.name = pj.at("name").get<std::string>();
        p.location = param_location_from_string(pj.at("in").get<std::string>());
        p.type_tag = type_tag_from_string(pj.at("type").get<std::string>());
        p.required = pj.value("required", false);
        p.description = pj.value("description", "");
        t.params.push_back(std::move(p));
    }
    for (const auto& rj : j.value("response", Value::array())) {
        t.response_fields.push_back({rj.at("path").get<std::string>(), type_tag_from_string(rj.at("type").get<std::string>())});
    }
    return t;
}

std::string cap_text(std::string_view text, std::size_t cap) {
    std::string collapsed;
    collapsed.reserve(text.size());
    bool in_space = false;
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            in_space = true;
            continue;
        }
        if (in_space && !collapsed.empty()) collapsed.push_back(' ');
        in_space = false;
        collapsed.push_back(c);
    }
    if (collapsed.size() <= cap) return collapsed;
    static constexpr std::string_view kEllipsis = "...";
    std::size_t keep = cap > kEllipsis.size() ? cap - kEllipsis.size() : 0;
    // back off continuation bytes so a code point is never split
    while (keep > 0 && (static_cast<unsigned char>(collapsed[keep]) & 0xC0) == 0x80) --keep;
    while (keep > 0 && collapsed[keep - 1] == ' ') --keep;
    return collapsed.substr(0, keep) + std::string(kEllipsis);
}

}  // namespace planex
