#include "doctest.h"

#include "planex/browser.hpp"
#include "planex/context.hpp"
#include "planex/errors.hpp"

using namespace planex;

namespace {

const std::string kSites = std::string(PLANEX_DATA_DIR) + "/world/sites/";

ReasonerGateway gateway(Value rules = Value::array()) {
    return ReasonerGateway(std::make_shared<ScriptedBackend>(Value{{"rules", rules}}));
}

bool has_dismissal(const Tracer& t) {
    for (const auto& e : t.events()) {
        if (e.payload.value("dismissal", false) && e.payload.value("accepted", false)) return true;
    }
    return false;
}

}  // namespace

TEST_CASE("site graph navigation") {
    SimBrowser b(SiteGraph::from_file(kSites + "shop-admin.json"));
    auto obs = b.snapshot();
    CHECK(obs.url == "http://shop-admin.local/home");
    CHECK_FALSE(obs.overlay_present);
    auto gw = gateway();
    auto out = act("click the Orders link", obs, b, gw);
    CHECK(out.success);
    CHECK(out.attempts == 1);
    CHECK(out.new_observation.url == "http://shop-admin.local/orders");
    CHECK(b.page_content().markdown.find("Shipped orders: 5") != std::string::npos);
    CHECK(b.dispatch(BrowserAction{BrowserAction::Kind::go_back}).accepted);
    CHECK(b.current_url() == "http://shop-admin.local/home");
    CHECK_THROWS_AS(act("click the Teleport button", b.snapshot(), b, gw), TargetNotFoundError);
    b.close();
    CHECK_THROWS_AS(act("click the Orders link", obs, b, gw), SessionClosedError);
    CHECK_THROWS_AS(b.snapshot(), SessionClosedError);
}

TEST_CASE("overlay is dismissed before acting") {
    SimBrowser b(SiteGraph::from_file(kSites + "popup-demo.json"));
    auto gw = gateway();
    Tracer tracer("r", "t");
    AgentContext ctx;
    ctx.tracer = &tracer;
    auto obs = b.snapshot();
    REQUIRE(obs.overlay_present);
    const auto* target = obs.find(1);
    REQUIRE(target);
    CHECK(target->occluded_by == 90);
    auto out = act("click the Continue button", obs, b, gw, &ctx);
    CHECK(out.success);
    CHECK(out.attempts <= 3);
    CHECK(out.new_observation.url == "http://popup.local/details");
    CHECK(has_dismissal(tracer));
}

TEST_CASE("undismissable overlay fails after three attempts") {
    SimBrowser b(SiteGraph::from_file(kSites + "popup-locked.json"));
    auto gw = gateway();
    Tracer tracer("r", "t");
    AgentContext ctx;
    ctx.tracer = &tracer;
    auto obs = b.snapshot();
    REQUIRE(obs.overlay_present);
    std::string instruction;
    for (const auto& n : obs.ax_tree) {
        if (n.occluded_by && n.role == "button") instruction = "click the " + n.name + " button";
    }
    REQUIRE_FALSE(instruction.empty());
    try {
        act(instruction, obs, b, gw, &ctx);
        FAIL("act should have failed");
    } catch (const ActionFailedError& e) {
        CHECK(e.attempts() == 3);
    }
    CHECK(tracer.events().size() == 3);
}

TEST_CASE("ambiguous grounding asks the reasoner") {
    Observation obs;
    obs.url = "http://x.local/";
    obs.ax_tree = {AxNode{1, "button", "Save"}, AxNode{2, "button", "Save"}, AxNode{3, "link", "Home"}};
    auto pick = gateway(Value::array({Value{{"agent", "action_agent"}, {"output", {{"node_id", 2}}}}}));
    CHECK(ground("click Save", obs, pick) == 2);
    auto none = gateway(Value::array({Value{{"agent", "action_agent"}, {"output", {{"node_id", nullptr}}}}}));
    CHECK_THROWS_AS(ground("click Save", obs, none), AmbiguousTargetError);
    CHECK(ground("click Home", obs, none) == 3);
}

TEST_CASE("extraction refuses empty pages") {
    auto gw = gateway(Value::array(
        {Value{{"agent", "extraction_agent"}, {"output", {{"found", true}, {"answer", "SAVE20"}, {"citations", {"SAVE20"}}}}}}));
    auto a = extract("what is the code?", PageContent{"Your coupon code is SAVE20", "", "u"}, gw);
    CHECK(a.text == "SAVE20");
    CHECK_THROWS_AS(extract("q", PageContent{"  \n", "", "u"}, gw), NotOnPageError);
}

TEST_CASE("risky decisions") {
    ShortTermMemory stm;
    BrowserDecision finish;
    finish.kind = BrowserDecision::Kind::finish;
    finish.success = true;
    CHECK(is_risky(stm, finish));
    BrowserDecision ex;
    ex.kind = BrowserDecision::Kind::extract;
    ex.question = "q";
    stm.append(ex.to_json(), "answer: 3");
    CHECK_FALSE(is_risky(stm, finish));
}

TEST_CASE("sitemap mining stays on origin and within budget") {
    SimBrowser b(SiteGraph::from_file(kSites + "shop-admin.json"));
    auto k = mine_sitemap("shop-admin", "http://shop-admin.local/home", b, 10);
    CHECK(k.nodes.size() == 5);
    CHECK(k.budget_used == 5);
    for (const auto& n : k.nodes) CHECK(origin_of(n.url) == "http://shop-admin.local");
    SimBrowser b2(SiteGraph::from_file(kSites + "shop-admin.json"));
    auto small = mine_sitemap("shop-admin", "http://shop-admin.local/home", b2, 2);
    CHECK(small.nodes.size() == 2);
    CHECK(small.nodes[0] == k.nodes[0]);
    CHECK_THROWS(mine_sitemap("shop-admin", "http://shop-admin.local/home", b2, 0));
}
