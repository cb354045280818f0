#pragma once

#include "planex/api_agent.hpp"
#include "planex/browser.hpp"
#include "planex/context.hpp"
#include "planex/reasoner.hpp"
#include "planex/registry.hpp"
#include "planex/task.hpp"
#include "planex/trajectory.hpp"

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace planex {

enum class SubTaskStatus { pending, running, succeeded, failed, skipped };
std::string_view to_string(SubTaskStatus s);

struct PlanState {
    std::string task_id;
    std::vector<SubTask> subtasks;
    std::size_t cursor = 0;
    std::vector<SubTaskStatus> statuses;
    VariableStore variables;
    int revision_count = 0;
    std::optional<std::string> final_answer;
    std::optional<std::string> abort_reason;
    std::vector<std::optional<std::string>> failure_reasons;
    // loop instance id -> its alias binding
    std::map<std::string, Variable> loop_items;
    // loop template id -> instance ids
    std::map<std::string, std::vector<std::string>> loop_instances;

    static PlanState start(const Task& task, std::vector<SubTask> subtasks);

    bool terminal() const { return final_answer.has_value(); }
    bool completed() const { return terminal() && !abort_reason; }
    std::size_t index_of(const std::string& subtask_id) const;
    bool all_resolved() const;
    bool any_failed() const;
    Value to_json() const;
};

// Parses and validates a plan document {"subtasks": [...]}: identifiers,
// executors, unique ids, and dataflow against `bound` plus earlier entries.
std::vector<SubTask> validate_plan(const Value& plan, const std::vector<std::string>& bound,
                                   const std::vector<SubTask>& earlier = {});

std::vector<SubTask> decompose(const Task& task, const ContextBundle& context, ReasonerGateway& reasoner);

struct Dispatch {
    enum class Kind { run, expand, conclude };

    Kind kind = Kind::conclude;
    std::size_t index = 0;
    std::vector<Variable> inputs;
};

Dispatch next_step(const PlanState& state);

std::vector<SubTask> expand_loop(const PlanState& state, const SubTask& template_subtask, const Variable& list_var);

// Marks the template running and inserts its instances right after it. An
// empty list resolves the template at once with an empty list per produce.
void apply_expansion(PlanState& state, std::size_t template_index, std::vector<SubTask> instances, const Variable& list_var);

void mark_running(PlanState& state, std::size_t index);

PlanState record_result(PlanState state, const SubTaskResult& result);

struct Verdict {
    enum class Kind { complete, replan, abort };

    Kind kind = Kind::abort;
    std::string final_answer;
    std::string reason;
    std::vector<SubTask> new_subtasks;

    Value to_json() const;
};

inline constexpr int kReplanBudget = 2;

Verdict conclude_or_replan(const PlanState& state, const Task& task, ReasonerGateway& reasoner,
                           int replan_budget = kReplanBudget);

// Applies a verdict: complete/abort make the state terminal; replan appends
// sub-tasks, bumps revision_count and skips pending sub-tasks that can no
// longer run.
void apply_verdict(PlanState& state, const Verdict& verdict);

// Replaces {{name}} with the plain rendering of bound variables.
std::string substitute_variables(const std::string& text, const VariableStore& vars);

struct RunnerConfig {
    int step_cap = 12;
    std::size_t stm_cap = 10;
    std::size_t shortlist_k = kShortlistSize;
    int replan_budget = kReplanBudget;
    std::size_t context_budget = kContextCharBudget;
    int sitemap_budget = 10;
    // hard limit on dispatches per task, guards against runaway plans
    int max_dispatches = 200;
};

// Everything one task execution needs. Sites are keyed by app id.
struct Environment {
    Registry* registry = nullptr;
    ReasonerGateway* reasoner = nullptr;
    KnowledgeStore* knowledge = nullptr;
    TrajectoryStore* trajectories = nullptr;
    std::map<std::string, SiteGraph> sites;
    RunnerConfig config;
};

struct TaskOutcome {
    std::string task_id;
    bool completed = false;
    std::string final_answer;
    std::optional<std::string> abort_reason;
    int steps = 0;
    PlanState state;
    std::vector<TrajectoryEvent> events;
};

TaskOutcome run_task(const Task& task, Environment& env, const std::string& run_id = "adhoc");

}  // namespace planex
