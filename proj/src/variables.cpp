#include "planex/variables.hpp"

#include "planex/errors.hpp"

namespace planex {

Variable Variable::make(std::string name, Value value, std::string producer) {
    Variable v;
    v.name = std::move(name);
    v.type_tag = type_tag_of(value);
    v.value = std::move(value);
    v.producer = std::move(producer);
    return v;
}

Value Variable::to_json() const {
    return Value{{"name", name}, {"value", value}, {"producer", producer}, {"type", to_string(type_tag)}};
}

Variable Variable::from_json(const Value& j) {
    auto v = make(j.at("name").get<std::string>(), j.value("value", Value()),
                  j.value("producer", std::string(kInitialProducer)));
    if (j.contains("type") && type_tag_from_string(j.at("type").get<std::string>()) != v.type_tag) {
        throw Error("variable " + v.name + ": type tag does not match value");
    }
    return v;
}

VariableStore::VariableStore(const std::vector<Variable>& vars) {
    for (const auto& v : vars) bind(v);
}

void VariableStore::bind(Variable var) {
    if (!is_identifier(var.name)) {
        throw Error("invalid variable name: '" + var.name + "'");
    }
    var.type_tag = type_tag_of(var.value);
    auto it = vars_.find(var.name);
    if (it != vars_.end()) {
        if (it->second.producer != var.producer) {
            throw VariableCollisionError("variable '" + var.name + "' already bound by " + it->second.producer +
                                         ", cannot rebind from " + var.producer);
        }
        if (it->second.value != var.value) {
            throw VariableCollisionError("variable '" + var.name + "' already bound to a different value");
        }
        return;
    }
    auto name = var.name;
    vars_.emplace(std::move(name), std::move(var));
}

const Variable& VariableStore::at(const std::string& name) const {
    auto it = vars_.find(name);
    if (it == vars_.end()) throw Error("unbound variable: " + name);
    return it->second;
}

const Variable* VariableStore::find(const std::string& name) const {
    auto it = vars_.find(name);
    return it == vars_.end() ? nullptr : &it->second;
}

std::vector<std::string> VariableStore::names() const {
    std::vector<std::string> out;
    out.reserve(vars_.size());
    for (const auto& [k, _] : vars_) out.push_back(k);
    return out;
}

std::vector<Variable> VariableStore::all() const {
    std::vector<Variable> out;
    out.reserve(vars_.size());
    for (const auto& [_, v] : vars_) out.push_back(v);
    return out;
}

VariableStore VariableStore::view(const std::vector<std::string>& names) const {
    VariableStore out;
    for (const auto& n : names) {
        if (auto it = vars_.find(n); it != vars_.end()) out.vars_.emplace(n, it->second);
    }
    return out;
}

Value VariableStore::to_json() const {
    Value arr = Value::array();
    for (const auto& [_, v] : vars_) arr.push_back(v.to_json());
    return arr;
}

}  // namespace planex
