#include "doctest.h"

#include "planex/api_agent.hpp"
#include "planex/errors.hpp"
#include "planex/world.hpp"

using namespace planex;

namespace {

const World& world() {
    static const World w = load_world(std::string(PLANEX_DATA_DIR) + "/world");
    return w;
}

SubTask api_task(std::string goal, std::vector<std::string> consumes, std::vector<std::string> produces) {
    SubTask s;
    s.id = "s0";
    s.goal = std::move(goal);
    s.executor = Executor::api;
    s.consumes = std::move(consumes);
    s.produces = std::move(produces);
    return s;
}

}  // namespace

TEST_CASE("phase machine") {
    CHECK(phase_transition_allowed(ApiPhase::shortlisting, ApiPhase::programming));
    CHECK(phase_transition_allowed(ApiPhase::reflecting, ApiPhase::programming));
    CHECK_FALSE(phase_transition_allowed(ApiPhase::shortlisting, ApiPhase::executing));
    CHECK_FALSE(phase_transition_allowed(ApiPhase::done, ApiPhase::programming));
}

TEST_CASE("shortlist scope and errors") {
    WorldInstance wi(world(), nullptr, nullptr);
    auto sub = api_task("Count the orders placed by the user", {"user_id"}, {"order_count"});
    auto tools = shortlist(sub, {"shop-api"}, wi.registry(), wi.reasoner(), 3);
    REQUIRE_FALSE(tools.empty());
    CHECK(tools.size() <= 3);
    CHECK(tools.front().tool_id == "shop-api.list_orders");
    for (const auto& t : tools) CHECK(t.app_id == "shop-api");
    CHECK_THROWS_AS(shortlist(sub, {"nope"}, wi.registry(), wi.reasoner()), NoCandidateError);
    Registry empty;
    CHECK_THROWS_AS(shortlist(sub, {"shop-api"}, empty, wi.reasoner()), EmptyRegistryError);
}

TEST_CASE("api sub-task runs against the mock apps") {
    WorldInstance wi(world(), nullptr, nullptr);
    Tracer tracer("r", "t");
    AgentContext ctx;
    ctx.reasoner = &wi.reasoner();
    ctx.tracer = &tracer;
    ctx.task_id = "t";
    VariableStore inputs({Variable::make("user_id", "alice")});
    auto res = run_api_subtask(api_task("Count the orders placed by the user", {"user_id"}, {"order_count"}), inputs,
                               {"shop-api"}, wi.registry(), ctx);
    REQUIRE(res.status == SubTaskResult::Status::succeeded);
    REQUIRE(res.produced.size() == 1);
    CHECK(res.produced[0].name == "order_count");
    CHECK(res.produced[0].value == 2);
    CHECK(res.step_count >= 1);
    CHECK(wi.server().client_error_count() == 0);
    CHECK_FALSE(tracer.events().empty());
}

TEST_CASE("failing calls end in a reported failure") {
    WorldInstance wi(world(), nullptr, nullptr);
    wi.server().set_status_override("shop-api", "list_orders", 500);
    AgentContext ctx;
    ctx.reasoner = &wi.reasoner();
    VariableStore inputs({Variable::make("user_id", "alice")});
    auto res = run_api_subtask(api_task("Count the orders placed by the user", {"user_id"}, {"order_count"}), inputs,
                               {"shop-api"}, wi.registry(), ctx);
    CHECK(res.status == SubTaskResult::Status::failed);
    CHECK(res.failure_reason.has_value());
}

TEST_CASE("unscripted goal surfaces as failure") {
    WorldInstance wi(world(), nullptr, nullptr);
    AgentContext ctx;
    ctx.reasoner = &wi.reasoner();
    auto res = run_api_subtask(api_task("Do something nobody planned", {}, {"x"}), VariableStore{}, {"shop-api"},
                               wi.registry(), ctx);
    CHECK(res.status == SubTaskResult::Status::failed);
}
