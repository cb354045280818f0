#include "planex/value.hpp"

#include "planex/errors.hpp"

#include <openssl/evp.h>

#include <array>
#include <cctype>

namespace planex {

TypeTag type_tag_of(const Value& v) {
    switch (v.type()) {
        case Value::value_t::string: return TypeTag::string;
        case Value::value_t::number_integer:
        case Value::value_t::number_unsigned:
        case Value::value_t::number_float: return TypeTag::number;
        case Value::value_t::boolean: return TypeTag::boolean;
        case Value::value_t::array: return TypeTag::list;
        case Value::value_t::object: return TypeTag::record;
        default: return TypeTag::null;
    }
}

std::string_view to_string(TypeTag tag) {
    switch (tag) {
        case TypeTag::string: return "string";
        case TypeTag::number: return "number";
        case TypeTag::boolean: return "boolean";
        case TypeTag::list: return "list";
        case TypeTag::record: return "record";
        case TypeTag::null: return "null";
    }
    return "null";
}

TypeTag type_tag_from_string(std::string_view s) {
    if (s == "string") return TypeTag::string;
    if (s == "number" || s == "integer") return TypeTag::number;
    if (s == "boolean") return TypeTag::boolean;
    if (s == "list" || s == "array") return TypeTag::list;
    if (s == "record" || s == "object") return TypeTag::record;
    if (s == "null") return TypeTag::null;
    throw Error("unknown type tag: " + std::string(s));
}

bool is_identifier(std::string_view name) {
    if (name.empty()) return false;
    auto head = static_cast<unsigned char>(name.front());
    if (!(std::isalpha(head) || head == '_')) return false;
    for (char c : name) {
        auto u = static_cast<unsigned char>(c);
        if (!(std::isalnum(u) || u == '_')) return false;
    }
    return true;
}

std::string sha256_hex(std::string_view bytes) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int len = 0;
    EVP_Digest(bytes.data(), bytes.size(), digest.data(), &len, EVP_sha256(), nullptr);
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(kHex[digest[i] >> 4]);
        out.push_back(kHex[digest[i] & 0xf]);
    }
    return out;
}

std::string render_plain(const Value& v) {
    if (v.is_string()) return v.get<std::string>();
    return v.dump();
}

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        auto u = static_cast<unsigned char>(c);
        if (std::isalnum(u)) {
            cur.push_back(static_cast<char>(std::tolower(u)));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

}  // namespace planex
