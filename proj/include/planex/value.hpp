#pragma once

#include "json.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace planex {

// Structured values flowing between agents, tools and stores.
using Value = nlohmann::json;

enum class TypeTag { string, number, boolean, list, record, null };

TypeTag type_tag_of(const Value& v);
std::string_view to_string(TypeTag tag);
TypeTag type_tag_from_string(std::string_view s);

// [A-Za-z_][A-Za-z0-9_]*
bool is_identifier(std::string_view name);

// Hex SHA-256 of the input bytes.
std::string sha256_hex(std::string_view bytes);

// Renders a value the way it should appear inside natural-language text:
// strings without quotes, everything else as compact JSON.
std::string render_plain(const Value& v);

// Lowercased alphanumeric tokens.
std::vector<std::string> tokenize(std::string_view text);

}  // namespace planex
