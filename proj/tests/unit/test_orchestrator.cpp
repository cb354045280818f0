#include "doctest.h"

#include "planex/errors.hpp"
#include "planex/orchestrator.hpp"
#include "planex/world.hpp"

#include <fstream>

using namespace planex;

namespace {

Value plan_doc(const char* text) { return Value::parse(text); }

Task simple_task() {
    Task t;
    t.id = "t1";
    t.intent = "do things";
    t.apps_in_scope = {"shop-api"};
    t.initial_context = {Variable::make("user_id", "alice")};
    return t;
}

SubTaskResult ok(const std::string& id, std::vector<Variable> vars, int steps = 1) {
    SubTaskResult r;
    r.subtask_id = id;
    r.status = SubTaskResult::Status::succeeded;
    r.produced = std::move(vars);
    r.step_count = steps;
    return r;
}

const World& world() {
    static const World w = load_world(std::string(PLANEX_DATA_DIR) + "/world");
    return w;
}

Task scenario_task() {
    std::ifstream in(std::string(PLANEX_DATA_DIR) + "/world/scenario_task.json");
    return Task::from_json(Value::parse(in));
}

}  // namespace

TEST_CASE("plan validation checks ids and dataflow") {
    auto subs = validate_plan(plan_doc(R"({"subtasks":[
        {"goal":"a","executor":"api","consumes":["user_id"],"produces":["n"]},
        {"goal":"b","executor":"browser","consumes":["n"],"produces":["m"]}]})"),
                              {"user_id"});
    REQUIRE(subs.size() == 2);
    CHECK(subs[0].id == "s1");
    CHECK(subs[1].executor == Executor::browser);

    CHECK_THROWS_AS(validate_plan(plan_doc(R"({"subtasks":[{"goal":"a","executor":"api","consumes":["x"]}]})"), {}),
                    PlanValidationError);
    CHECK_THROWS_AS(validate_plan(plan_doc(R"({"subtasks":[{"id":"a","goal":"a","executor":"api"},
                                                           {"id":"a","goal":"b","executor":"api"}]})"), {}),
                    PlanValidationError);
    CHECK_THROWS_AS(validate_plan(plan_doc(R"({"subtasks":[{"goal":"a","executor":"robot"}]})"), {}), PlanValidationError);
    CHECK_THROWS_AS(validate_plan(plan_doc(R"({"subtasks":[]})"), {}), EmptyPlanError);
    CHECK_THROWS_AS(validate_plan(plan_doc(R"({"subtasks":[{"goal":"a","executor":"api","produces":["user_id"]}]})"),
                                  {"user_id"}),
                    PlanValidationError);
    CHECK_THROWS_AS(validate_plan(plan_doc(R"({"subtasks":[{"goal":"a","executor":"api","consumes":["it"],
                                              "loop":{"list":"xs","alias":"it"}}]})"), {}),
                    PlanValidationError);
}

TEST_CASE("decompose feeds validation errors back to the reasoner") {
    auto backend = std::make_shared<ScriptedBackend>(Value::parse(R"({"rules":[
        {"agent":"plan_controller","contains":["plan_error"],
         "output":{"subtasks":[{"goal":"count","executor":"api","consumes":["user_id"],"produces":["n"]}]}},
        {"agent":"plan_controller","output":{"subtasks":[{"goal":"count","executor":"api","consumes":["nope"]}]}}]})"));
    ReasonerGateway gw(backend);
    auto subs = decompose(simple_task(), ContextBundle{}, gw);
    REQUIRE(subs.size() == 1);
    CHECK(subs[0].produces == std::vector<std::string>{"n"});

    ReasonerGateway stubborn(std::make_shared<ScriptedBackend>(Value::parse(
        R"({"default":{"output":{"subtasks":[{"goal":"count","executor":"api","consumes":["nope"]}]}}})")));
    CHECK_THROWS_AS(decompose(simple_task(), ContextBundle{}, stubborn), PlanValidationError);

    ReasonerGateway empty(std::make_shared<ScriptedBackend>(Value::parse(R"({"default":{"output":{"subtasks":[]}}})")));
    CHECK_THROWS_AS(decompose(simple_task(), ContextBundle{}, empty), EmptyPlanError);
}

TEST_CASE("dispatch follows dataflow and propagates variables") {
    auto subs = validate_plan(plan_doc(R"({"subtasks":[
        {"goal":"a","executor":"api","consumes":["user_id"],"produces":["n"]},
        {"goal":"b","executor":"api","consumes":["n"],"produces":["m"]}]})"),
                              {"user_id"});
    auto st = PlanState::start(simple_task(), subs);
    auto d = next_step(st);
    CHECK(d.kind == Dispatch::Kind::run);
    CHECK(d.index == 0);
    REQUIRE(d.inputs.size() == 1);
    CHECK(d.inputs[0].value == "alice");

    mark_running(st, 0);
    st = record_result(st, ok("s1", {Variable::make("n", 3)}));
    CHECK(st.variables.at("n").producer == "s1");
    d = next_step(st);
    CHECK(d.index == 1);
    CHECK(d.inputs[0].value == 3);

    mark_running(st, 1);
    auto copy = st;
    // a result missing a declared output fails the sub-task
    st = record_result(st, ok("s2", {}));
    CHECK(st.statuses[1] == SubTaskStatus::failed);
    CHECK(next_step(st).kind == Dispatch::Kind::conclude);
    CHECK_THROWS_AS(record_result(st, ok("s2", {})), UnknownSubtaskError);
    CHECK_THROWS_AS(record_result(copy, ok("zz", {})), UnknownSubtaskError);
    CHECK(record_result(copy, ok("s2", {Variable::make("n", 4)})).statuses[1] == SubTaskStatus::failed);
}

TEST_CASE("loop templates expand, run per item and aggregate") {
    Task t = simple_task();
    t.initial_context.push_back(Variable::make("ids", Value::array({"a", "b", "c"})));
    auto subs = validate_plan(plan_doc(R"({"subtasks":[
        {"goal":"each","executor":"api","consumes":["id"],"produces":["total"],"loop":{"list":"ids","alias":"id"}},
        {"goal":"sum","executor":"api","consumes":["total"],"produces":["s"]}]})"),
                              {"user_id", "ids"});
    auto st = PlanState::start(t, subs);
    auto d = next_step(st);
    REQUIRE(d.kind == Dispatch::Kind::expand);
    auto inst = expand_loop(st, st.subtasks[0], st.variables.at("ids"));
    REQUIRE(inst.size() == 3);
    CHECK(inst[1].id == "s1#1");
    CHECK(inst[1].produces == std::vector<std::string>{"total_1"});
    apply_expansion(st, 0, inst, st.variables.at("ids"));
    CHECK(st.subtasks.size() == 5);

    for (int j = 0; j < 3; ++j) {
        d = next_step(st);
        REQUIRE(d.kind == Dispatch::Kind::run);
        CHECK(st.subtasks[d.index].id == "s1#" + std::to_string(j));
        bool has_alias = false;
        for (const auto& v : d.inputs) has_alias = has_alias || (v.name == "id" && v.value == Value::array({"a", "b", "c"})[j]);
        CHECK(has_alias);
        mark_running(st, d.index);
        st = record_result(st, ok(st.subtasks[d.index].id, {Variable::make("total_" + std::to_string(j), 10 * (j + 1))}));
    }
    CHECK(st.statuses[0] == SubTaskStatus::succeeded);
    CHECK(st.variables.at("total").value == Value::array({10, 20, 30}));
    d = next_step(st);
    CHECK(st.subtasks[d.index].id == "s2");

    Variable not_list = Variable::make("ids", 5);
    CHECK_THROWS_AS(expand_loop(st, subs[0], not_list), NotAListError);
}

TEST_CASE("an empty loop list binds empty outputs at once") {
    Task t = simple_task();
    t.initial_context.push_back(Variable::make("ids", Value::array()));
    auto subs = validate_plan(
        plan_doc(R"({"subtasks":[{"goal":"each","executor":"api","consumes":["id"],"produces":["total"],"loop":{"list":"ids","alias":"id"}}]})"),
        {"user_id", "ids"});
    auto st = PlanState::start(t, subs);
    apply_expansion(st, 0, expand_loop(st, st.subtasks[0], st.variables.at("ids")), st.variables.at("ids"));
    CHECK(st.statuses[0] == SubTaskStatus::succeeded);
    CHECK(st.variables.at("total").value == Value::array());
    CHECK(next_step(st).kind == Dispatch::Kind::conclude);
}

TEST_CASE("conclusion, replanning and the replan budget") {
    auto subs = validate_plan(plan_doc(R"({"subtasks":[
        {"goal":"a","executor":"api","consumes":["user_id"],"produces":["n"]},
        {"goal":"b","executor":"api","consumes":["n"],"produces":["m"]}]})"),
                              {"user_id"});
    auto st = PlanState::start(simple_task(), subs);
    mark_running(st, 0);
    st = record_result(st, SubTaskResult::failure("s1", "boom", 2));

    ReasonerGateway gw(std::make_shared<ScriptedBackend>(Value::parse(R"({"rules":[
        {"agent":"plan_controller","contains":["outcome: failure"],"output":{"verdict":"replan",
          "subtasks":[{"goal":"again","executor":"api","consumes":["user_id"],"produces":["k"]}]}},
        {"agent":"plan_controller","output":{"verdict":"complete","final_answer":"n is {{k}} for {{user_id}} {{missing}}"}}]})")));
    auto v = conclude_or_replan(st, simple_task(), gw);
    REQUIRE(v.kind == Verdict::Kind::replan);
    apply_verdict(st, v);
    CHECK(st.revision_count == 1);
    CHECK(st.subtasks.back().id == "s3");
    // s2 consumes n, which nothing can produce any more
    CHECK(st.statuses[1] == SubTaskStatus::skipped);
    auto d = next_step(st);
    CHECK(st.subtasks[d.index].id == "s3");
    mark_running(st, d.index);
    st = record_result(st, ok("s3", {Variable::make("k", 7)}));

    // s1 still counts as failed, so the judge is consulted again
    st.revision_count = kReplanBudget;
    v = conclude_or_replan(st, simple_task(), gw);
    CHECK(v.kind == Verdict::Kind::abort);
    CHECK(v.reason == "replan budget exhausted");
    apply_verdict(st, v);
    CHECK(st.terminal());
    CHECK_FALSE(st.completed());
    CHECK(*st.final_answer == "");

    VariableStore vars({Variable::make("k", 7), Variable::make("user_id", "alice")});
    CHECK(substitute_variables("n is {{k}} for {{ user_id }} {{missing}}", vars) == "n is 7 for alice {{missing}}");
}

TEST_CASE("count orders then send mail end to end") {
    auto task = scenario_task();
    std::string first;
    for (int run = 0; run < 2; ++run) {
        KnowledgeStore knowledge;
        WorldInstance inst(world(), &knowledge, nullptr);
        auto out = run_task(task, inst.env(), "scenario");
        INFO(out.state.to_json().dump(2));
        REQUIRE(out.completed);
        CHECK(out.final_answer.rfind("alice has 2 orders; notification ", 0) == 0);
        CHECK(out.state.variables.at("order_count").value == 2);
        CHECK(out.state.variables.at("order_count").producer == "s1");
        CHECK(out.state.variables.at("message_id").producer == "s2");
        CHECK(out.events.size() >= 8);
        CHECK_FALSE(audit_sequence(out.events).has_value());
        auto canon = canonical_trajectory(out.events);
        if (run == 0) first = canon;
        else CHECK(canon == first);
        CHECK(inst.server().client_error_count() == 0);
    }
}

TEST_CASE("loop, browser and failing tasks over the simulated world") {
    KnowledgeStore knowledge;
    premine(world(), knowledge);
    WorldInstance inst(world(), &knowledge, nullptr);

    Task loop;
    loop.id = "loop";
    loop.intent = "Add up the order totals of user judy";
    loop.apps_in_scope = {"shop-api"};
    loop.initial_context = {Variable::make("user_id", "judy")};
    auto out = run_task(loop, inst.env());
    INFO(out.state.to_json().dump(2));
    REQUIRE(out.completed);
    const auto& totals = out.state.variables.at("order_total").value;
    CHECK(totals.size() == 4);
    int sum = 0;
    for (const auto& x : totals) sum += x.get<int>();
    CHECK(out.final_answer == "Grand total for judy: " + std::to_string(sum));

    Task admin;
    admin.id = "admin";
    admin.intent = "In the store admin, how many orders are shipped?";
    admin.apps_in_scope = {"shop-admin"};
    out = run_task(admin, inst.env());
    INFO(out.state.to_json().dump(2));
    REQUIRE(out.completed);
    CHECK(out.final_answer == "There are 5 matching orders");

    Task popup;
    popup.id = "popup";
    popup.intent = "Open the welcome page and read the coupon code";
    popup.apps_in_scope = {"popup-demo"};
    out = run_task(popup, inst.env());
    REQUIRE(out.completed);
    CHECK(out.final_answer == "Coupon code SAVE20");

    Task locked;
    locked.id = "locked";
    locked.intent = "Verify the account on the locked portal";
    locked.apps_in_scope = {"popup-locked"};
    out = run_task(locked, inst.env());
    CHECK_FALSE(out.completed);
    REQUIRE(out.abort_reason);
    CHECK(out.state.statuses[0] == SubTaskStatus::failed);
}

TEST_CASE("planning failures end the task with a reason") {
    WorldInstance inst(world(), nullptr, nullptr);
    Task t;
    t.id = "odd";
    t.intent = "Something nobody scripted";
    t.apps_in_scope = {"shop-api"};
    auto out = run_task(t, inst.env());
    CHECK_FALSE(out.completed);
    REQUIRE(out.abort_reason);
    CHECK(out.abort_reason->find("ScriptMissError") != std::string::npos);
}
