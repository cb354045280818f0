#pragma once

#include "planex/reasoner.hpp"
#include "planex/trajectory.hpp"
#include "planex/value.hpp"
#include "planex/variables.hpp"

#include <optional>
#include <string>
#include <vector>

namespace planex {

enum class Executor { browser, api };
std::string_view to_string(Executor e);
Executor executor_from_string(std::string_view s);

struct Task {
    enum class Source { benchmark, interactive };

    std::string id;
    std::string intent;
    std::vector<std::string> apps_in_scope;
    std::vector<Variable> initial_context;
    Source source = Source::benchmark;

    // Throws PlanValidationError on an empty id or scope.
    void validate() const;

    Value to_json() const;
    static Task from_json(const Value& j);
};

struct LoopBinding {
    std::string list_var;
    std::string alias;

    friend bool operator==(const LoopBinding&, const LoopBinding&) = default;
};

struct SubTask {
    std::string id;
    std::string goal;
    Executor executor = Executor::api;
    std::vector<std::string> consumes;
    std::vector<std::string> produces;
    std::optional<LoopBinding> loop_binding;

    Value to_json() const;
    static SubTask from_json(const Value& j);

    friend bool operator==(const SubTask&, const SubTask&) = default;
};

struct SubTaskResult {
    enum class Status { succeeded, failed };

    std::string subtask_id;
    Status status = Status::failed;
    std::vector<Variable> produced;
    std::optional<std::string> answer;
    int step_count = 0;
    std::optional<std::string> failure_reason;

    static SubTaskResult failure(std::string subtask_id, std::string reason, int steps);

    Value to_json() const;
};

// Shared dependencies of a sub-agent run.
struct AgentContext {
    ReasonerGateway* reasoner = nullptr;
    Tracer* tracer = nullptr;
    std::string task_id;
    std::vector<ContextFragment> guidance;
    int step_cap = 12;
    std::size_t stm_cap = 10;

    void trace(AgentRole agent, EventKind kind, Value payload) const {
        if (tracer) tracer->emit(agent, kind, std::move(payload));
    }
};

// Bounded short-term memory: (decision, outcome summary), oldest evicted.
class ShortTermMemory {
public:
    explicit ShortTermMemory(std::size_t cap = 10) : cap_(cap) {}

    void append(Value decision, std::string outcome);
    const std::vector<std::pair<Value, std::string>>& entries() const { return entries_; }
    std::string render() const;
    std::size_t cap() const { return cap_; }

private:
    std::size_t cap_;
    std::vector<std::pair<Value, std::string>> entries_;
};

}  // namespace planex
