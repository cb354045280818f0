#include "planex/task.hpp"

#include "planex/errors.hpp"

namespace planex {

std::string_view to_string(Executor e) { return e == Executor::browser ? "browser" : "api"; }

Executor executor_from_string(std::string_view s) {
    if (s == "browser") return Executor::browser;
    if (s == "api") return Executor::api;
    throw PlanValidationError("unknown executor: " + std::string(s));
}

void Task::validate() const {
    if (id.empty()) throw PlanValidationError("task id is empty");
    if (apps_in_scope.empty()) throw PlanValidationError("task " + id + " has no applications in scope");
}

Value Task::to_json() const {
    Value ctx = Value::array();
    for (const auto& v : initial_context) ctx.push_back(v.to_json());
    return Value{{"id", id},
                 {"intent", intent},
                 {"apps_in_scope", apps_in_scope},
                 {"initial_context", ctx},
                 {"source", source == Source::benchmark ? "benchmark" : "interactive"}};
}

Task Task::from_json(const Value& j) {
    Task t;
    t.id = j.at("id").get<std::string>();
    t.intent = j.value("intent", "");
    t.apps_in_scope = j.value("apps_in_scope", std::vector<std::string>{});
    if (auto ctx = j.find("initial_context"); ctx != j.end()) {
        if (ctx->is_object()) {
            for (const auto& [k, v] : ctx->items()) t.initial_context.push_back(Variable::make(k, v));
        } else {
            for (const auto& v : *ctx) t.initial_context.push_back(Variable::from_json(v));
        }
    }
    t.source = j.value("source", "benchmark") == "interactive" ? Source::interactive : Source::benchmark;
    return t;
}

Value SubTask::to_json() const {
    Value j{{"id", id}, {"goal", goal}, {"executor", to_string(executor)}, {"consumes", consumes}, {"produces", produces}};
    if (loop_binding) j["loop"] = {{"list", loop_binding->list_var}, {"alias", loop_binding->alias}};
    return j;
}

SubTask SubTask::from_json(const Value& j) {
    SubTask s;
    s.id = j.at("id").get<std::string>();
    s.goal = j.value("goal", "");
    s.executor = executor_from_string(j.value("executor", "api"));
    s.consumes = j.value("consumes", std::vector<std::string>{});
    s.produces = j.value("produces", std::vector<std::string>{});
    if (auto loop = j.find("loop"); loop != j.end() && loop->is_object()) {
        s.loop_binding = LoopBinding{loop->at("list").get<std::string>(), loop->at("alias").get<std::string>()};
    }
    return s;
}

SubTaskResult SubTaskResult::failure(std::string subtask_id, std::string reason, int steps) {
    SubTaskResult r;
    r.subtask_id = std::move(subtask_id);
    r.status = Status::failed;
    r.step_count = steps;
    r.failure_reason = std::move(reason);
    return r;
}

Value SubTaskResult::to_json() const {
    Value produced_json = Value::array();
    for (const auto& v : produced) produced_json.push_back(v.to_json());
    Value j{{"subtask_id", subtask_id},
            {"status", status == Status::succeeded ? "succeeded" : "failed"},
            {"produced", produced_json},
            {"step_count", step_count}};
    if (answer) j["answer"] = *answer;
    if (failure_reason) j["failure_reason"] = *failure_reason;
    return j;
}

void ShortTermMemory::append(Value decision, std::string outcome) {
    entries_.emplace_back(std::move(decision), std::move(outcome));
    while (entries_.size() > cap_) entries_.erase(entries_.begin());
}

std::string ShortTermMemory::render() const {
    std::string out;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        out += std::to_string(i + 1) + ". " + entries_[i].first.dump() + " -> " + entries_[i].second + "\n";
    }
    return out;
}

}  // namespace planex
