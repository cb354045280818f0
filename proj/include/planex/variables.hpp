#pragma once

#include "planex/value.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace planex {

inline constexpr std::string_view kInitialProducer = "initial";

struct Variable {
    std::string name;
    Value value;
    std::string producer{kInitialProducer};
    TypeTag type_tag = TypeTag::null;

    static Variable make(std::string name, Value value, std::string producer = std::string(kInitialProducer));

    Value to_json() const;
    static Variable from_json(const Value& j);

    friend bool operator==(const Variable&, const Variable&) = default;
};

// Named values propagated across sub-tasks. Iteration order is by name.
class VariableStore {
public:
    VariableStore() = default;
    explicit VariableStore(const std::vector<Variable>& vars);

    // Throws VariableCollisionError when the name is already bound by a
    // different producer, or re-bound to a different value.
    void bind(Variable var);

    bool contains(const std::string& name) const { return vars_.count(name) != 0; }
    const Variable& at(const std::string& name) const;
    const Variable* find(const std::string& name) const;

    std::vector<std::string> names() const;
    std::vector<Variable> all() const;
    std::size_t size() const { return vars_.size(); }
    bool empty() const { return vars_.empty(); }

    // Subset restricted to the given names; missing names are skipped.
    VariableStore view(const std::vector<std::string>& names) const;

    Value to_json() const;

    friend bool operator==(const VariableStore&, const VariableStore&) = default;

private:
    std::map<std::string, Variable> vars_;
};

}  // namespace planex
