#pragma once

#include "planex/reasoner.hpp"
#include "planex/registry.hpp"
#include "planex/step_program.hpp"
#include "planex/task.hpp"

#include <optional>
#include <string>
#include <vector>

namespace planex {

enum class ApiPhase { shortlisting, programming, executing, reflecting, done };
std::string_view to_string(ApiPhase p);

// True when `next` may follow `prev` in the planner's phase machine.
bool phase_transition_allowed(ApiPhase prev, ApiPhase next);

inline constexpr std::size_t kShortlistSize = 8;

struct ApiPlannerState {
    SubTask subtask;
    ShortTermMemory stm;
    std::vector<ToolSpec> shortlist;
    VariableStore variables;
    int iteration = 0;
    ApiPhase phase = ApiPhase::shortlisting;
};

// Lexical top-k over the scoped apps merged with reasoner-selected ids.
// Lexical order is kept; reasoner additions are appended. When the merge
// exceeds k, the lowest lexical hits the reasoner did not select go first.
std::vector<ToolSpec> shortlist(const SubTask& subtask, const std::vector<std::string>& apps, const Registry& registry,
                                ReasonerGateway& reasoner, std::size_t k = kShortlistSize, const std::string& task_id = "",
                                const std::string& extra_query = "");

// Asks the reasoner for a program; parse and static-check failures are fed
// back within the gateway's retry budget, then rethrown.
StepProgram generate_program(const SubTask& subtask, const std::vector<ToolSpec>& shortlist, const VariableStore& variables,
                             ReasonerGateway& reasoner, const std::string& task_id = "",
                             const ShortTermMemory* stm = nullptr, const std::optional<std::string>& hint = std::nullopt);

struct Revision {
    enum class Kind { retry_program, reshortlist, give_up };

    Kind kind = Kind::give_up;
    std::string hint;  // retry_program / reshortlist
    std::string reason;  // give_up

    Value to_json() const;
};

std::string summarize_result(const ExecutionResult& result);

Revision reflect(const ExecutionResult& result, ApiPlannerState& state, ReasonerGateway& reasoner, int step_cap,
                 const std::string& task_id = "");

SubTaskResult run_api_subtask(const SubTask& subtask, const VariableStore& inputs, const std::vector<std::string>& apps,
                              Registry& registry, const AgentContext& ctx, std::size_t k = kShortlistSize);

}  // namespace planex
