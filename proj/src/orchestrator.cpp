#include "planex/orchestrator.hpp"

#include "planex/errors.hpp"

#include <algorithm>
#include <set>

namespace planex {

namespace {

const char* kPlanItemSchema = R"({"type":"object","properties":{
    "id":{"type":"string"},"goal":{"type":"string"},"executor":{"enum":["api","browser"]},
    "consumes":{"type":"array","items":{"type":"string"}},"produces":{"type":"array","items":{"type":"string"}},
    "loop":{"type":"object","properties":{"list":{"type":"string"},"alias":{"type":"string"}},"required":["list","alias"]}},
    "required":["goal","executor"]})";

Value plan_schema() {
    Value s = Value::parse(R"({"type":"object","properties":{"subtasks":{"type":"array"}},"required":["subtasks"]})");
    s["properties"]["subtasks"]["items"] = Value::parse(kPlanItemSchema);
    return s;
}

bool is_instance(const PlanState& s, const SubTask& t) { return s.loop_items.count(t.id) != 0; }

bool is_template(const PlanState& s, const SubTask& t) { return t.loop_binding && !is_instance(s, t); }

std::string describe_progress(const PlanState& s) {
    std::string out;
    for (std::size_t i = 0; i < s.subtasks.size(); ++i) {
        const auto& t = s.subtasks[i];
        out += t.id + " [" + std::string(to_string(t.executor)) + "] " + std::string(to_string(s.statuses[i])) + ": " + t.goal;
        if (s.failure_reasons[i]) out += " (" + *s.failure_reasons[i] + ")";
        out += "\n";
    }
    return out;
}

std::string describe_variables(const VariableStore& vars) {
    std::string out;
    for (const auto& v : vars.all()) out += v.name + " = " + v.value.dump() + "\n";
    return out;
}

}  // namespace

std::string_view to_string(SubTaskStatus s) {
    switch (s) {
        case SubTaskStatus::pending: return "pending";
        case SubTaskStatus::running: return "running";
        case SubTaskStatus::succeeded: return "succeeded";
        case SubTaskStatus::failed: return "failed";
        case SubTaskStatus::skipped: return "skipped";
    }
    return "?";
}

PlanState PlanState::start(const Task& task, std::vector<SubTask> subtasks) {
    PlanState s;
    s.task_id = task.id;
    s.statuses.assign(subtasks.size(), SubTaskStatus::pending);
    s.failure_reasons.assign(subtasks.size(), std::nullopt);
    s.subtasks = std::move(subtasks);
    for (const auto& v : task.initial_context) {
        auto copy = v;
        copy.producer = std::string(kInitialProducer);
        s.variables.bind(std::move(copy));
    }
    return s;
}

std::size_t PlanState::index_of(const std::string& id) const {
    for (std::size_t i = 0; i < subtasks.size(); ++i) {
        if (subtasks[i].id == id) return i;
    }
    throw UnknownSubtaskError("unknown sub-task " + id);
}

bool PlanState::all_resolved() const {
    return std::none_of(statuses.begin(), statuses.end(),
                        [](SubTaskStatus s) { return s == SubTaskStatus::pending || s == SubTaskStatus::running; });
}

bool PlanState::any_failed() const {
    return std::any_of(statuses.begin(), statuses.end(), [](SubTaskStatus s) { return s == SubTaskStatus::failed; });
}

Value PlanState::to_json() const {
    Value subs = Value::array();
    for (std::size_t i = 0; i < subtasks.size(); ++i) {
        auto j = subtasks[i].to_json();
        j["status"] = to_string(statuses[i]);
        if (failure_reasons[i]) j["failure_reason"] = *failure_reasons[i];
        subs.push_back(j);
    }
    Value j{{"task_id", task_id}, {"subtasks", subs}, {"cursor", cursor}, {"variables", variables.to_json()},
            {"revision_count", revision_count}};
    if (final_answer) j["final_answer"] = *final_answer;
    if (abort_reason) j["abort_reason"] = *abort_reason;
    return j;
}

std::vector<SubTask> validate_plan(const Value& plan, const std::vector<std::string>& bound,
                                   const std::vector<SubTask>& earlier) {
    if (auto err = validate_schema(plan_schema(), plan)) throw PlanValidationError("plan: " + *err);
    const auto& items = plan.at("subtasks");
    if (items.empty()) throw EmptyPlanError("the plan has no sub-tasks");

    std::set<std::string> ids;
    for (const auto& e : earlier) ids.insert(e.id);
    std::set<std::string> available(bound.begin(), bound.end());
    std::vector<SubTask> out;
    std::size_t n = earlier.size();
    for (const auto& item : items) {
        ++n;
        SubTask t;
        t.id = item.value("id", "s" + std::to_string(n));
        if (t.id.empty() || t.id.find('#') != std::string::npos) throw PlanValidationError("invalid sub-task id '" + t.id + "'");
        if (!ids.insert(t.id).second) throw PlanValidationError("duplicate sub-task id " + t.id);
        t.goal = item.at("goal").get<std::string>();
        t.executor = executor_from_string(item.at("executor").get<std::string>());
        t.consumes = item.value("consumes", std::vector<std::string>{});
        t.produces = item.value("produces", std::vector<std::string>{});
        for (const auto& name : t.consumes) {
            if (!is_identifier(name)) throw PlanValidationError(t.id + ": invalid variable name '" + name + "'");
        }
        for (const auto& name : t.produces) {
            if (!is_identifier(name)) throw PlanValidationError(t.id + ": invalid variable name '" + name + "'");
        }
        std::string alias;
        if (auto loop = item.find("loop"); loop != item.end()) {
            t.loop_binding = LoopBinding{loop->at("list").get<std::string>(), loop->at("alias").get<std::string>()};
            alias = t.loop_binding->alias;
            if (!is_identifier(alias)) throw PlanValidationError(t.id + ": invalid loop alias '" + alias + "'");
            if (!available.count(t.loop_binding->list_var)) {
                throw PlanValidationError(t.id + " loops over unbound variable " + t.loop_binding->list_var);
            }
            if (available.count(alias)) throw PlanValidationError(t.id + ": loop alias " + alias + " shadows a variable");
            if (std::find(t.consumes.begin(), t.consumes.end(), t.loop_binding->list_var) == t.consumes.end()) {
                t.consumes.push_back(t.loop_binding->list_var);
            }
        }
        for (const auto& name : t.consumes) {
            if (name != alias && !available.count(name)) {
                throw PlanValidationError(t.id + " consumes " + name + ", which no earlier sub-task produces");
            }
        }
        for (const auto& name : t.produces) {
            if (!available.insert(name).second) throw PlanValidationError(t.id + " re-produces " + name);
        }
        out.push_back(std::move(t));
    }
    return out;
}

std::vector<SubTask> decompose(const Task& task, const ContextBundle& context, ReasonerGateway& reasoner) {
    task.validate();
    PromptBundle b;
    b.agent = "plan_controller";
    b.task_id = task.id;
    b.role_preamble = "You split user tasks into sub-tasks for browser and API agents.";
    b.instructions =
        "Decompose the task into ordered sub-tasks. Each sub-task names an executor (api or browser), the variables it "
        "consumes and the variables it produces. Use loop {list, alias} to repeat a sub-task over a list variable.";
    b.add("intent", task.intent);
    std::string apps;
    for (const auto& a : task.apps_in_scope) apps += a + "\n";
    b.add("apps", apps);
    std::vector<std::string> bound;
    std::string vars;
    for (const auto& v : task.initial_context) {
        bound.push_back(v.name);
        vars += v.name + " (" + std::string(to_string(v.type_tag)) + ")\n";
    }
    if (!vars.empty()) b.add("variables", vars);
    for (const auto& f : context.fragments) b.context_fragments.push_back(f);
    b.output_schema = plan_schema();

    for (int attempt = 0;; ++attempt) {
        auto out = reasoner.complete(b).structured_value;
        try {
            return validate_plan(out, bound);
        } catch (const EmptyPlanError&) {
            throw;
        } catch (const PlanValidationError& e) {
            if (attempt >= reasoner.retry_budget()) throw;
            b.add("plan_error", std::string("Your plan was rejected: ") + e.what());
        }
    }
}

Dispatch next_step(const PlanState& state) {
    if (state.terminal()) throw Error("plan state is terminal");
    bool pending = false;
    for (std::size_t i = 0; i < state.subtasks.size(); ++i) {
        if (state.statuses[i] != SubTaskStatus::pending) continue;
        pending = true;
        const auto& t = state.subtasks[i];
        const Variable* alias_var = nullptr;
        if (auto it = state.loop_items.find(t.id); it != state.loop_items.end()) alias_var = &it->second;
        Dispatch d;
        d.index = i;
        bool ready = true;
        for (const auto& name : t.consumes) {
            if (alias_var && alias_var->name == name) {
                d.inputs.push_back(*alias_var);
            } else if (const auto* v = state.variables.find(name)) {
                d.inputs.push_back(*v);
            } else if (is_template(state, t) && name == t.loop_binding->alias) {
                continue;
            } else {
                ready = false;
                break;
            }
        }
        if (!ready) continue;
        d.kind = is_template(state, t) ? Dispatch::Kind::expand : Dispatch::Kind::run;
        return d;
    }
    bool running = std::any_of(state.statuses.begin(), state.statuses.end(),
                               [](SubTaskStatus s) { return s == SubTaskStatus::running; });
    if (pending || running) throw DeadlockError("no pending sub-task of " + state.task_id + " can run");
    return Dispatch{};
}

std::vector<SubTask> expand_loop(const PlanState&, const SubTask& tmpl, const Variable& list_var) {
    if (!tmpl.loop_binding || tmpl.loop_binding->list_var != list_var.name) {
        throw PlanValidationError(tmpl.id + " does not loop over " + list_var.name);
    }
    if (list_var.type_tag != TypeTag::list || !list_var.value.is_array()) {
        throw NotAListError(list_var.name + " is a " + std::string(to_string(list_var.type_tag)) + ", not a list");
    }
    std::vector<SubTask> out;
    const auto& alias = tmpl.loop_binding->alias;
    for (std::size_t j = 0; j < list_var.value.size(); ++j) {
        SubTask inst;
        inst.id = tmpl.id + "#" + std::to_string(j);
        inst.goal = tmpl.goal;
        inst.executor = tmpl.executor;
        for (const auto& c : tmpl.consumes) {
            if (c != list_var.name) inst.consumes.push_back(c);
        }
        if (std::find(inst.consumes.begin(), inst.consumes.end(), alias) == inst.consumes.end()) inst.consumes.push_back(alias);
        for (const auto& p : tmpl.produces) inst.produces.push_back(p + "_" + std::to_string(j));
        inst.loop_binding = tmpl.loop_binding;
        out.push_back(std::move(inst));
    }
    return out;
}

void apply_expansion(PlanState& state, std::size_t index, std::vector<SubTask> instances, const Variable& list_var) {
    const auto tmpl = state.subtasks.at(index);
    state.statuses[index] = SubTaskStatus::running;
    state.cursor = index;
    std::vector<std::string> ids;
    for (std::size_t j = 0; j < instances.size(); ++j) {
        ids.push_back(instances[j].id);
        state.loop_items[instances[j].id] = Variable::make(tmpl.loop_binding->alias, list_var.value[j], tmpl.id);
    }
    state.loop_instances[tmpl.id] = ids;
    const auto at = static_cast<std::ptrdiff_t>(index + 1);
    const auto n = instances.size();
    state.subtasks.insert(state.subtasks.begin() + at, std::make_move_iterator(instances.begin()),
                          std::make_move_iterator(instances.end()));
    state.statuses.insert(state.statuses.begin() + at, n, SubTaskStatus::pending);
    state.failure_reasons.insert(state.failure_reasons.begin() + at, n, std::nullopt);
    if (n == 0) {
        for (const auto& p : tmpl.produces) state.variables.bind(Variable::make(p, Value::array(), tmpl.id));
        state.statuses[index] = SubTaskStatus::succeeded;
        state.cursor = index + 1;
    }
}

void mark_running(PlanState& state, std::size_t index) {
    if (state.statuses.at(index) != SubTaskStatus::pending) {
        throw Error("sub-task " + state.subtasks[index].id + " is not pending");
    }
    state.statuses[index] = SubTaskStatus::running;
    state.cursor = index;
}

PlanState record_result(PlanState state, const SubTaskResult& result) {
    const auto idx = state.index_of(result.subtask_id);
    if (state.statuses[idx] != SubTaskStatus::running) throw UnknownSubtaskError(result.subtask_id + " is not running");
    const auto& t = state.subtasks[idx];

    if (result.status == SubTaskResult::Status::succeeded) {
        std::optional<std::string> problem;
        for (const auto& v : result.produced) {
            if (std::find(t.produces.begin(), t.produces.end(), v.name) == t.produces.end()) {
                problem = "undeclared output " + v.name;
            }
        }
        for (const auto& name : t.produces) {
            bool found = std::any_of(result.produced.begin(), result.produced.end(),
                                     [&](const Variable& v) { return v.name == name; });
            if (!found) problem = "missing output " + name;
        }
        if (problem) {
            state.statuses[idx] = SubTaskStatus::failed;
            state.failure_reasons[idx] = problem;
        } else {
            for (auto v : result.produced) {
                v.producer = t.id;
                state.variables.bind(std::move(v));
            }
            state.statuses[idx] = SubTaskStatus::succeeded;
        }
    } else {
        state.statuses[idx] = SubTaskStatus::failed;
        state.failure_reasons[idx] = result.failure_reason.value_or("failed");
    }
    state.cursor = idx + 1;

    if (auto hash = t.id.rfind('#'); hash != std::string::npos && state.loop_items.count(t.id)) {
        const auto tmpl_id = t.id.substr(0, hash);
        const auto& ids = state.loop_instances.at(tmpl_id);
        bool done = true, ok = true;
        for (const auto& id : ids) {
            auto s = state.statuses[state.index_of(id)];
            done = done && (s == SubTaskStatus::succeeded || s == SubTaskStatus::failed || s == SubTaskStatus::skipped);
            ok = ok && s == SubTaskStatus::succeeded;
        }
        if (done) {
            const auto tidx = state.index_of(tmpl_id);
            if (ok) {
                for (const auto& p : state.subtasks[tidx].produces) {
                    Value list = Value::array();
                    for (std::size_t j = 0; j < ids.size(); ++j) list.push_back(state.variables.at(p + "_" + std::to_string(j)).value);
                    state.variables.bind(Variable::make(p, list, tmpl_id));
                }
                state.statuses[tidx] = SubTaskStatus::succeeded;
            } else {
                state.statuses[tidx] = SubTaskStatus::failed;
                state.failure_reasons[tidx] = "a loop instance failed";
            }
        }
    }
    return state;
}

Value Verdict::to_json() const {
    switch (kind) {
        case Kind::complete: return Value{{"verdict", "complete"}, {"final_answer", final_answer}};
        case Kind::abort: return Value{{"verdict", "abort"}, {"reason", reason}};
        case Kind::replan: {
            Value subs = Value::array();
            for (const auto& s : new_subtasks) subs.push_back(s.to_json());
            return Value{{"verdict", "replan"}, {"subtasks", subs}};
        }
    }
    return Value();
}

std::string substitute_variables(const std::string& text, const VariableStore& vars) {
    std::string out;
    std::size_t pos = 0;
    while (true) {
        auto open = text.find("{{", pos);
        if (open == std::string::npos) break;
        auto close = text.find("}}", open + 2);
        if (close == std::string::npos) break;
        auto name = text.substr(open + 2, close - open - 2);
        name.erase(0, name.find_first_not_of(' '));
        name.erase(name.find_last_not_of(' ') + 1);
        out += text.substr(pos, open - pos);
        if (const auto* v = vars.find(name)) {
            out += render_plain(v->value);
        } else {
            out += text.substr(open, close + 2 - open);
        }
        pos = close + 2;
    }
    return out + text.substr(pos);
}

Verdict conclude_or_replan(const PlanState& state, const Task& task, ReasonerGateway& reasoner, int replan_budget) {
    const bool needs_recovery = state.any_failed() || !state.all_resolved();
    Verdict v;
    if (needs_recovery && state.revision_count >= replan_budget) {
        v.kind = Verdict::Kind::abort;
        v.reason = "replan budget exhausted";
        return v;
    }
    PromptBundle b;
    b.agent = "plan_controller";
    b.task_id = task.id;
    b.cursor = 1000 + state.revision_count;
    b.role_preamble = "You judge whether a task is complete.";
    b.instructions =
        "Given the progress below, either complete the task with a final answer (you may use {{variable}} placeholders), "
        "replan by listing additional sub-tasks, or abort with a reason.";
    b.add("intent", task.intent);
    b.add("outcome", needs_recovery ? "outcome: failure" : "outcome: success");
    b.add("progress", describe_progress(state));
    b.add("variables", describe_variables(state.variables));
    Value schema = Value::parse(R"({"type":"object","properties":{"verdict":{"enum":["complete","replan","abort"]},
        "final_answer":{"type":"string"},"reason":{"type":"string"},"subtasks":{"type":"array"}},"required":["verdict"]})");
    schema["properties"]["subtasks"]["items"] = Value::parse(kPlanItemSchema);
    b.output_schema = schema;
    auto out = reasoner.complete(b).structured_value;
    const auto kind = out["verdict"].get<std::string>();
    if (kind == "complete") {
        v.final_answer = substitute_variables(out.value("final_answer", ""), state.variables);
        if (v.final_answer.empty()) {
            v.kind = Verdict::Kind::abort;
            v.reason = "judge completed without a final answer";
            return v;
        }
        v.kind = Verdict::Kind::complete;
        return v;
    }
    if (kind == "replan") {
        if (state.revision_count >= replan_budget) {
            v.kind = Verdict::Kind::abort;
            v.reason = "replan budget exhausted";
            return v;
        }
        try {
            v.new_subtasks = validate_plan(Value{{"subtasks", out.value("subtasks", Value::array())}}, state.variables.names(),
                                           state.subtasks);
        } catch (const Error& e) {
            v.kind = Verdict::Kind::abort;
            v.reason = std::string("invalid replan: ") + e.what();
            return v;
        }
        v.kind = Verdict::Kind::replan;
        return v;
    }
    v.kind = Verdict::Kind::abort;
    v.reason = out.value("reason", "aborted by judge");
    return v;
}

void apply_verdict(PlanState& state, const Verdict& v) {
    switch (v.kind) {
        case Verdict::Kind::complete:
            state.final_answer = v.final_answer;
            return;
        case Verdict::Kind::abort:
            state.final_answer = "";
            state.abort_reason = v.reason.empty() ? "aborted" : v.reason;
            return;
        case Verdict::Kind::replan: break;
    }
    for (const auto& t : v.new_subtasks) {
        state.subtasks.push_back(t);
        state.statuses.push_back(SubTaskStatus::pending);
        state.failure_reasons.push_back(std::nullopt);
    }
    ++state.revision_count;
    // skip pending sub-tasks whose inputs can no longer appear
    bool changed = true;
    while (changed) {
        changed = false;
        std::set<std::string> reachable;
        for (const auto& n : state.variables.names()) reachable.insert(n);
        for (std::size_t i = 0; i < state.subtasks.size(); ++i) {
            if (state.statuses[i] == SubTaskStatus::pending || state.statuses[i] == SubTaskStatus::running) {
                for (const auto& p : state.subtasks[i].produces) reachable.insert(p);
                if (state.subtasks[i].loop_binding) reachable.insert(state.subtasks[i].loop_binding->alias);
            }
        }
        for (const auto& [id, var] : state.loop_items) reachable.insert(var.name);
        for (std::size_t i = 0; i < state.subtasks.size(); ++i) {
            if (state.statuses[i] != SubTaskStatus::pending) continue;
            for (const auto& c : state.subtasks[i].consumes) {
                if (!reachable.count(c)) {
                    state.statuses[i] = SubTaskStatus::skipped;
                    state.failure_reasons[i] = "input " + c + " can no longer be produced";
                    changed = true;
                    break;
                }
            }
        }
    }
}

TaskOutcome run_task(const Task& task, Environment& env, const std::string& run_id) {
    if (!env.reasoner) throw ConfigError("environment has no reasoner");
    Tracer tracer(run_id, task.id, env.trajectories);
    TaskOutcome outcome;
    outcome.task_id = task.id;
    auto finish = [&](PlanState state) {
        outcome.state = std::move(state);
        outcome.completed = outcome.state.completed();
        outcome.final_answer = outcome.state.final_answer.value_or("");
        outcome.abort_reason = outcome.state.abort_reason;
        outcome.events = tracer.events();
        return outcome;
    };

    const auto& cfg = env.config;
    AgentContext ctx;
    ctx.reasoner = env.reasoner;
    ctx.tracer = &tracer;
    ctx.task_id = task.id;
    ctx.step_cap = cfg.step_cap;
    ctx.stm_cap = cfg.stm_cap;

    tracer.emit(AgentRole::plan_controller, EventKind::observation,
                Value{{"intent", task.intent}, {"apps", task.apps_in_scope}, {"initial", VariableStore(task.initial_context).to_json()}});

    PlanState state;
    state.task_id = task.id;
    ContextBundle bundle;
    Task planned = task;
    try {
        task.validate();
        auto refined = assess_and_paraphrase(task.intent, *env.reasoner, task.id);
        tracer.emit(AgentRole::context, EventKind::decision,
                    Value{{"quality", to_string(refined.quality)}, {"refined", refined.refined}});
        planned.intent = refined.refined;
        KnowledgeStore empty_store;
        bundle = enrich(refined, task, env.knowledge ? *env.knowledge : empty_store, env.registry, cfg.context_budget);
        Value labels = Value::array();
        for (const auto& f : bundle.fragments) labels.push_back(f.label);
        tracer.emit(AgentRole::context, EventKind::result, Value{{"fragments", labels}});

        auto subtasks = decompose(planned, bundle, *env.reasoner);
        state = PlanState::start(task, subtasks);
        Value plan = Value::array();
        for (const auto& s : subtasks) plan.push_back(s.to_json());
        tracer.emit(AgentRole::plan_controller, EventKind::decision, Value{{"plan", plan}});
    } catch (const Error& e) {
        state = PlanState::start(task, {});
        apply_verdict(state, Verdict{Verdict::Kind::abort, "", std::string(e.kind()) + ": " + e.what(), {}});
        tracer.emit(AgentRole::plan_controller, EventKind::result, Value{{"abort", *state.abort_reason}});
        return finish(std::move(state));
    }
    for (const auto& f : bundle.fragments) {
        if (f.label.rfind("sitemap:", 0) == 0) ctx.guidance.push_back(f);
    }

    std::map<std::string, std::unique_ptr<SimBrowser>> drivers;
    auto browser_for = [&]() -> std::pair<std::string, SimBrowser*> {
        for (const auto& app : task.apps_in_scope) {
            auto site = env.sites.find(app);
            if (site == env.sites.end()) continue;
            if (env.knowledge && !env.knowledge->get(app)) {
                SimBrowser miner(site->second);
                auto k = mine_sitemap(app, site->second.page(site->second.entry).url, miner, cfg.sitemap_budget);
                env.knowledge->put(k);
                tracer.emit(AgentRole::context, EventKind::observation,
                            Value{{"mined", app}, {"pages", k.nodes.size()}});
            }
            auto& d = drivers[app];
            if (!d) d = std::make_unique<SimBrowser>(site->second);
            return {app, d.get()};
        }
        return {"", nullptr};
    };

    int dispatches = 0;
    while (!state.terminal()) {
        Dispatch d;
        try {
            d = next_step(state);
        } catch (const DeadlockError& e) {
            tracer.emit(AgentRole::plan_controller, EventKind::observation, Value{{"deadlock", e.what()}});
            d.kind = Dispatch::Kind::conclude;
        }
        if (++dispatches > cfg.max_dispatches) {
            apply_verdict(state, Verdict{Verdict::Kind::abort, "", "dispatch limit reached", {}});
            break;
        }
        if (d.kind == Dispatch::Kind::conclude) {
            Verdict v;
            try {
                v = conclude_or_replan(state, planned, *env.reasoner, cfg.replan_budget);
            } catch (const Error& e) {
                v = Verdict{Verdict::Kind::abort, "", std::string(e.kind()) + ": " + e.what(), {}};
            }
            tracer.emit(AgentRole::judge, EventKind::reflection, v.to_json());
            apply_verdict(state, v);
            continue;
        }

        const auto sub = state.subtasks[d.index];
        if (d.kind == Dispatch::Kind::expand) {
            const auto& list_var = d.inputs.front().name == sub.loop_binding->list_var
                                       ? d.inputs.front()
                                       : state.variables.at(sub.loop_binding->list_var);
            try {
                auto instances = expand_loop(state, sub, list_var);
                tracer.emit(AgentRole::plan_controller, EventKind::decision,
                            Value{{"expand", sub.id}, {"instances", instances.size()}});
                apply_expansion(state, d.index, std::move(instances), list_var);
            } catch (const NotAListError& e) {
                mark_running(state, d.index);
                state = record_result(state, SubTaskResult::failure(sub.id, e.what(), 0));
            }
            continue;
        }

        Value input_names = Value::array();
        for (const auto& v : d.inputs) input_names.push_back(v.name);
        tracer.emit(AgentRole::plan_controller, EventKind::action,
                    Value{{"dispatch", sub.id}, {"executor", to_string(sub.executor)}, {"inputs", input_names}});
        mark_running(state, d.index);
        VariableStore inputs(d.inputs);
        // loop instances run under the template's output names
        auto agent_view = sub;
        std::string suffix;
        if (state.loop_items.count(sub.id)) {
            suffix = "_" + sub.id.substr(sub.id.rfind('#') + 1);
            for (auto& p : agent_view.produces) p.resize(p.size() - suffix.size());
        }
        SubTaskResult result;
        if (sub.executor == Executor::api) {
            if (!env.registry) {
                result = SubTaskResult::failure(sub.id, "no registry", 0);
            } else {
                result = run_api_subtask(agent_view, inputs, task.apps_in_scope, *env.registry, ctx, cfg.shortlist_k);
            }
        } else {
            try {
                auto [app, driver] = browser_for();
                result = driver ? run_browser_subtask(agent_view, inputs, *driver, ctx)
                                : SubTaskResult::failure(sub.id, "no browsable application in scope", 0);
            } catch (const Error& e) {
                result = SubTaskResult::failure(sub.id, std::string(e.kind()) + ": " + e.what(), 0);
            }
        }
        result.subtask_id = sub.id;
        for (auto& v : result.produced) v.name += suffix;
        outcome.steps += result.step_count;
        tracer.emit(AgentRole::plan_controller, EventKind::result, result.to_json());
        try {
            state = record_result(state, result);
        } catch (const VariableCollisionError& e) {
            state = record_result(state, SubTaskResult::failure(sub.id, e.what(), result.step_count));
        }
    }
    tracer.emit(AgentRole::plan_controller, EventKind::result,
                state.completed() ? Value{{"final_answer", *state.final_answer}} : Value{{"abort", *state.abort_reason}});
    return finish(std::move(state));
}

}  // namespace planex
