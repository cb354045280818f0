#include "planex/api_agent.hpp"

#include "planex/errors.hpp"

#include <algorithm>
#include <set>

namespace planex {

namespace {

constexpr const char* kGrammar =
    "let NAME = EXPR | call NAME = APP.TOOL(param: EXPR, ...) | return {field: EXPR, ...} (last line).\n"
    "EXPR: literals, names, a.b, a[0], + - * /, comparisons, len sum min max sort unique concat count str, "
    "filter(list, item > 3), map(list, item.field).";

std::string describe_inputs(const VariableStore& vars) {
    std::string out;
    for (const auto& v : vars.all()) {
        auto preview = v.value.dump();
        if (preview.size() > 120) preview = preview.substr(0, 117) + "...";
        out += v.name + " (" + std::string(to_string(v.type_tag)) + ") = " + preview + "\n";
    }
    return out;
}

std::string describe_tools(const std::vector<ToolSpec>& tools) {
    std::string out;
    for (const auto& t : tools) out += t.to_json().dump() + "\n";
    return out;
}

void check_returns(const StepProgram& prog, const SubTask& subtask) {
    const auto& ret = prog.return_statement();
    for (const auto& name : subtask.produces) {
        bool found = std::any_of(ret.fields.begin(), ret.fields.end(), [&](const auto& f) { return f.first == name; });
        if (!found) {
            throw StaticCheckError("statement " + std::to_string(prog.statements.size()) + " `return`: must provide " + name);
        }
    }
}

}  // namespace

std::string_view to_string(ApiPhase p) {
    switch (p) {
        case ApiPhase::shortlisting: return "shortlisting";
        case ApiPhase::programming: return "programming";
        case ApiPhase::executing: return "executing";
        case ApiPhase::reflecting: return "reflecting";
        case ApiPhase::done: return "done";
    }
    return "?";
}

bool phase_transition_allowed(ApiPhase prev, ApiPhase next) {
    switch (prev) {
        case ApiPhase::shortlisting: return next == ApiPhase::programming || next == ApiPhase::done;
        case ApiPhase::programming: return next == ApiPhase::executing || next == ApiPhase::done;
        case ApiPhase::executing: return next == ApiPhase::reflecting || next == ApiPhase::done;
        case ApiPhase::reflecting: return next == ApiPhase::programming || next == ApiPhase::done;
        case ApiPhase::done: return false;
    }
    return false;
}

std::vector<ToolSpec> shortlist(const SubTask& subtask, const std::vector<std::string>& apps, const Registry& registry,
                                ReasonerGateway& reasoner, std::size_t k, const std::string& task_id,
                                const std::string& extra_query) {
    if (registry.empty()) throw EmptyRegistryError("registry has no applications");
    std::vector<std::string> scope;
    for (const auto& a : apps) {
        if (registry.manifest(a)) scope.push_back(a);
    }
    if (scope.empty()) throw NoCandidateError("no candidate tools: no registered application in scope");

    auto query = subtask.goal;
    if (!extra_query.empty()) query += " " + extra_query;
    auto hits = registry.search(query, std::span<const std::string>(scope), k);

    std::string catalog;
    for (const auto& a : scope) {
        for (const auto& t : registry.tools_of(a)) catalog += t.tool_id + ": " + cap_text(t.summary, 80) + "\n";
    }
    std::string lexical;
    for (const auto& h : hits) lexical += h.tool_id + "\n";
    PromptBundle b;
    b.agent = "shortlister";
    b.task_id = task_id;
    b.role_preamble = "You pick API operations for a sub-task.";
    b.instructions = "List tool ids from the catalog that the sub-task needs and that the lexical candidates miss.";
    b.add("goal", "goal: " + subtask.goal);
    if (!extra_query.empty()) b.add("hint", extra_query);
    b.add("lexical", lexical).add("catalog", catalog);
    b.output_schema = Value::parse(
        R"({"type":"object","properties":{"tool_ids":{"type":"array","items":{"type":"string"}}},"required":["tool_ids"]})");
    auto out = reasoner.complete(b).structured_value;

    std::set<std::string> in_scope(scope.begin(), scope.end());
    std::vector<std::string> chosen;
    for (const auto& id : out["tool_ids"]) {
        auto s = id.get<std::string>();
        auto tool = registry.tool(s);
        if (!tool || !in_scope.count(tool->app_id)) continue;
        if (std::find(chosen.begin(), chosen.end(), s) == chosen.end()) chosen.push_back(s);
    }
    std::vector<std::string> merged;
    for (const auto& h : hits) merged.push_back(h.tool_id);
    for (const auto& c : chosen) {
        if (std::find(merged.begin(), merged.end(), c) == merged.end()) merged.push_back(c);
    }
    for (auto i = merged.size(); merged.size() > k && i-- > 0;) {
        bool lexical_only = i < hits.size() && std::find(chosen.begin(), chosen.end(), merged[i]) == chosen.end();
        if (lexical_only) merged.erase(merged.begin() + static_cast<std::ptrdiff_t>(i));
    }
    if (merged.size() > k) merged.resize(k);
    if (merged.empty()) throw NoCandidateError("no candidate tools for \"" + subtask.goal + "\"");

    std::vector<ToolSpec> result;
    for (const auto& id : merged) result.push_back(*registry.tool(id));
    return result;
}

StepProgram generate_program(const SubTask& subtask, const std::vector<ToolSpec>& tools, const VariableStore& variables,
                             ReasonerGateway& reasoner, const std::string& task_id, const ShortTermMemory* stm,
                             const std::optional<std::string>& hint) {
    if (tools.empty()) throw NoCandidateError("no candidate tools");
    PromptBundle b;
    b.agent = "code_agent";
    b.task_id = task_id;
    b.role_preamble = "You write step programs that call APIs and return variables.";
    b.instructions = "Write one program for the sub-task. Return every variable listed under produces.";
    b.add("goal", "goal: " + subtask.goal + "\nproduces: " + Value(subtask.produces).dump());
    if (!variables.empty()) b.add("inputs", describe_inputs(variables));
    b.add("tools", describe_tools(tools)).add("grammar", kGrammar);
    if (stm && !stm->entries().empty()) b.add("memory", stm->render());
    if (hint) b.add("hint", *hint);
    b.output_schema = Value::parse(R"({"type":"object","properties":{"program":{"type":"string"}},"required":["program"]})");

    for (int attempt = 0;; ++attempt) {
        auto out = reasoner.complete(b).structured_value;
        try {
            auto prog = parse_program(out["program"].get<std::string>());
            check_program(prog, tools, variables);
            check_returns(prog, subtask);
            return prog;
        } catch (const ProgramParseError& e) {
            if (attempt >= reasoner.retry_budget()) throw;
            b.add("program_error", std::string("Your program was rejected: ") + e.what());
        } catch (const StaticCheckError& e) {
            if (attempt >= reasoner.retry_budget()) throw;
            b.add("program_error", std::string("Your program was rejected: ") + e.what());
        }
    }
}

Value Revision::to_json() const {
    switch (kind) {
        case Kind::retry_program: return Value{{"revision", "retry_program"}, {"hint", hint}};
        case Kind::reshortlist: return Value{{"revision", "reshortlist"}, {"hint", hint}};
        case Kind::give_up: return Value{{"revision", "give_up"}, {"reason", reason}};
    }
    return Value();
}

std::string summarize_result(const ExecutionResult& result) {
    std::string s(to_string(result.status));
    if (result.diagnostic) s += ": " + *result.diagnostic;
    return s;
}

Revision reflect(const ExecutionResult& result, ApiPlannerState& state, ReasonerGateway& reasoner, int step_cap,
                 const std::string& task_id) {
    const auto summary = summarize_result(result);
    Revision rev;
    if (state.iteration >= step_cap) {
        rev.kind = Revision::Kind::give_up;
        rev.reason = "step cap reached";
        state.stm.append(rev.to_json(), summary);
        return rev;
    }
    PromptBundle b;
    b.agent = "api_planner";
    b.task_id = task_id;
    b.cursor = state.iteration;
    b.role_preamble = "You supervise API programs and react to unexpected results.";
    b.instructions = "Decide how to continue: retry_program with a hint, reshortlist with a hint, or give_up with a reason.";
    b.add("goal", "goal: " + state.subtask.goal);
    Value calls = Value::array();
    for (const auto& c : result.call_log) calls.push_back({{"tool_id", c.tool_id}, {"status", c.status_code}});
    b.add("result", summary + "\ncalls: " + calls.dump());
    if (!state.stm.entries().empty()) b.add("memory", state.stm.render());
    b.output_schema = Value::parse(R"({"type":"object","properties":{"revision":{"enum":["retry_program","reshortlist","give_up"]},
        "hint":{"type":"string"},"reason":{"type":"string"}},"required":["revision"]})");
    auto out = reasoner.complete(b).structured_value;
    const auto kind = out["revision"].get<std::string>();
    if (kind == "retry_program") {
        rev.kind = Revision::Kind::retry_program;
        rev.hint = out.value("hint", "");
        if (rev.hint.empty() && !result.call_log.empty()) rev.hint = "check the call to " + result.call_log.back().tool_id;
    } else if (kind == "reshortlist") {
        rev.kind = Revision::Kind::reshortlist;
        rev.hint = out.value("hint", "");
    } else {
        rev.kind = Revision::Kind::give_up;
        rev.reason = out.value("reason", "gave up");
    }
    // the same failure twice in a row means the program alone will not fix it
    if (rev.kind == Revision::Kind::retry_program && !state.stm.entries().empty() &&
        state.stm.entries().back().second == summary) {
        rev.kind = Revision::Kind::reshortlist;
    }
    state.stm.append(rev.to_json(), summary);
    return rev;
}

SubTaskResult run_api_subtask(const SubTask& subtask, const VariableStore& inputs, const std::vector<std::string>& apps,
                              Registry& registry, const AgentContext& ctx, std::size_t k) {
    ApiPlannerState state{subtask, ShortTermMemory(ctx.stm_cap), {}, inputs, 0, ApiPhase::shortlisting};
    auto enter = [&](ApiPhase p) {
        state.phase = p;
        ctx.trace(AgentRole::api_planner, EventKind::decision, Value{{"phase", to_string(p)}});
    };
    auto fail = [&](const std::string& reason) {
        enter(ApiPhase::done);
        return SubTaskResult::failure(subtask.id, reason, state.iteration);
    };

    enter(ApiPhase::shortlisting);
    try {
        state.shortlist = shortlist(subtask, apps, registry, *ctx.reasoner, k, ctx.task_id);
    } catch (const NoCandidateError&) {
        return fail("no candidate tools");
    } catch (const Error& e) {
        return fail(std::string(e.kind()) + ": " + e.what());
    }
    {
        Value ids = Value::array();
        for (const auto& t : state.shortlist) ids.push_back(t.tool_id);
        ctx.trace(AgentRole::shortlister, EventKind::result, Value{{"tools", ids}});
    }

    std::optional<std::string> hint;
    while (true) {
        enter(ApiPhase::programming);
        std::optional<StepProgram> prog;
        std::optional<std::string> rejection;
        try {
            prog = generate_program(subtask, state.shortlist, state.variables, *ctx.reasoner, ctx.task_id, &state.stm, hint);
        } catch (const ProgramParseError& e) {
            rejection = e.what();
        } catch (const StaticCheckError& e) {
            rejection = e.what();
        } catch (const Error& e) {
            return fail(std::string(e.kind()) + ": " + e.what());
        }
        hint.reset();

        enter(ApiPhase::executing);
        ++state.iteration;
        ExecutionResult result;
        if (prog) {
            ctx.trace(AgentRole::code_agent, EventKind::action, Value{{"program", prog->render()}});
            result = execute_program(*prog, state.variables, registry, subtask.id);
        } else {
            result.status = ExecutionResult::Status::expr_error;
            result.diagnostic = "program rejected: " + *rejection;
        }
        ctx.trace(AgentRole::code_agent, EventKind::result, result.to_json());

        if (result.status == ExecutionResult::Status::ok) {
            enter(ApiPhase::done);
            SubTaskResult r;
            r.subtask_id = subtask.id;
            r.status = SubTaskResult::Status::succeeded;
            r.step_count = state.iteration;
            for (const auto& v : result.returned) {
                if (std::find(subtask.produces.begin(), subtask.produces.end(), v.name) != subtask.produces.end()) {
                    r.produced.push_back(v);
                }
            }
            if (r.produced.size() == 1) r.answer = render_plain(r.produced.front().value);
            return r;
        }

        enter(ApiPhase::reflecting);
        Revision rev;
        try {
            rev = reflect(result, state, *ctx.reasoner, ctx.step_cap, ctx.task_id);
        } catch (const Error& e) {
            return fail(std::string(e.kind()) + ": " + e.what());
        }
        ctx.trace(AgentRole::api_planner, EventKind::reflection, rev.to_json());
        switch (rev.kind) {
            case Revision::Kind::give_up: return fail(rev.reason);
            case Revision::Kind::retry_program: hint = rev.hint; break;
            case Revision::Kind::reshortlist:
                try {
                    state.shortlist = shortlist(subtask, apps, registry, *ctx.reasoner, k, ctx.task_id, rev.hint);
                } catch (const NoCandidateError&) {
                    return fail("no candidate tools");
                } catch (const Error& e) {
                    return fail(std::string(e.kind()) + ": " + e.what());
                }
                hint = rev.hint.empty() ? std::optional<std::string>() : rev.hint;
                break;
        }
    }
}

}  // namespace planex
