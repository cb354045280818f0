#include "doctest.h"

#include "planex/errors.hpp"
#include "planex/mock_server.hpp"
#include "planex/registry.hpp"

#include <algorithm>
#include <set>

using namespace planex;

namespace {

Value op(const std::string& id, const std::string& summary, Value params = Value::array()) {
    Value o{{"operationId", id}, {"summary", summary},
            {"responses", {{"200", {{"description", "ok"}, {"content", {{"application/json", {{"schema", {{"type", "object"}}}}}}}}}}}};
    if (!params.empty()) o["parameters"] = std::move(params);
    return o;
}

Value query_param(const std::string& name, const std::string& type, bool required) {
    return Value{{"name", name}, {"in", "query"}, {"required", required}, {"schema", {{"type", type}}}};
}

Value payments_doc() {
    Value transfer = op("create_transfer", "Send money from the account to a friend or another person");
    transfer["requestBody"] = {{"required", true},
                               {"content",
                                {{"application/json",
                                  {{"schema",
                                    {{"type", "object"},
                                     {"required", {"recipient", "amount"}},
                                     {"properties", {{"recipient", {{"type", "string"}}}, {"amount", {{"type", "number"}}}}}}}}}}}};
    Value balance = op("get_balance", "Current account balance", Value::array({query_param("user_id", "string", true)}));
    balance["responses"]["200"]["content"]["application/json"]["schema"] = {
        {"type", "object"}, {"properties", {{"balance", {{"type", "number"}}}, {"currency", {{"type", "string"}}}}}};
    balance["x-mock"] = {{"response", {{"balance", 125.5}, {"currency", "EUR"}}}};
    return Value{{"openapi", "3.0.0"},
                 {"info", {{"title", "Payments"}, {"description", "Money transfers and account balance"}}},
                 {"paths",
                  {{"/transfers", {{"post", transfer}, {"get", op("list_transfers", "List past transfers")}}},
                   {"/balance", {{"get", balance}}}}}};
}

Value music_doc() {
    return Value{{"openapi", "3.0.0"},
                 {"info", {{"title", "Music"}, {"description", "Songs, playlists and artists"}}},
                 {"paths",
                  {{"/songs", {{"get", op("search_songs", "Search songs by title")}}},
                   {"/playlists", {{"post", op("create_playlist", "Create a playlist")},
                                   {"get", op("list_playlists", "List playlists")}}}}}};
}

Value grocery_doc() {
    return Value{{"openapi", "3.0.0"},
                 {"info", {{"title", "Groceries"}, {"description", "Grocery basket and delivery slots"}}},
                 {"paths",
                  {{"/basket", {{"get", op("get_basket", "Show the grocery basket")}}},
                   {"/slots", {{"get", op("list_slots", "Delivery slots")}}}}}};
}

}  // namespace

TEST_CASE("ingest turns every operation into a tool") {
    Value doc{{"openapi", "3.0.1"},
              {"info", {{"title", "Three"}}},
              {"paths",
               {{"/a", {{"get", op("a_get", "A")}, {"post", op("a_post", "A")}}},
                {"/b", {{"get", op("b_get", "B")}, {"post", op("b_post", "B")}}},
                {"/c", {{"get", op("c_get", "C")}}}}}};
    Registry reg;
    const auto& m = reg.ingest_spec(doc.dump(), "three", "http://localhost:1");
    CHECK(m.tools.size() == 5);
    std::set<std::string> ids;
    for (const auto& t : m.tools) ids.insert(t.tool_id);
    CHECK(ids.size() == 5);
    CHECK(ids.count("three.a_post"));
    CHECK_THROWS_AS(reg.ingest_spec(doc.dump(), "three", "http://localhost:1"), DuplicateAppError);
}

TEST_CASE("parse errors") {
    Registry reg;
    CHECK_THROWS_AS(reg.ingest_spec("{not json", "x", ""), SpecParseError);
    CHECK_THROWS_AS(reg.ingest_spec(R"({"swagger":"2.0","paths":{}})", "x", ""), SpecParseError);
    CHECK_THROWS_AS(reg.ingest_spec(R"({"openapi":"3.0.0","paths":{}})", "x", ""), SpecParseError);
    auto dangling = Value::parse(
        R"({"openapi":"3.0.0","paths":{"/a":{"get":{"parameters":[{"$ref":"#/components/parameters/nope"}]}}}})");
    CHECK_THROWS_AS(reg.ingest_spec(dangling.dump(), "x", ""), UnresolvableRefError);
    CHECK(reg.empty());
    CHECK_THROWS_AS(reg.search("anything", std::nullopt, 5), EmptyRegistryError);
}

TEST_CASE("references are resolved and cycles cut") {
    Value doc{{"openapi", "3.0.0"},
              {"components",
               {{"parameters", {{"Uid", {{"name", "uid"}, {"in", "query"}, {"required", true}, {"schema", {{"type", "integer"}}}}}}},
                {"schemas",
                 {{"Node", {{"type", "object"}, {"properties", {{"name", {{"type", "string"}}}, {"next", {{"$ref", "#/components/schemas/Node"}}}}}}}}}}},
              {"paths",
               {{"/n",
                 {{"get",
                   {{"operationId", "node"},
                    {"parameters", {{{"$ref", "#/components/parameters/Uid"}}}},
                    {"responses",
                     {{"200", {{"content", {{"application/json", {{"schema", {{"$ref", "#/components/schemas/Node"}}}}}}}}}}}}}}}}}};
    auto parsed = parse_openapi(doc);
    REQUIRE(parsed.operations.size() == 1);
    auto t = minimize("app", parsed.operations[0]);
    REQUIRE(t.param("uid"));
    CHECK(t.param("uid")->type_tag == TypeTag::number);
    CHECK(t.param("uid")->required);
    std::set<std::string> paths;
    for (const auto& f : t.response_fields) paths.insert(f.path);
    CHECK(paths.count("name"));
    CHECK(paths.count("next"));
    CHECK(paths.count("next.name") == 0);
}

TEST_CASE("minimization caps text and drops bloat") {
    Value o = op("long_one", "");
    o["description"] = std::string(500, 'x');
    o["security"] = Value::array({{{"oauth", Value::array({"read"})}}});
    o["x-vendor-trace"] = {{"anything", 1}};
    o["parameters"] = Value::array({{{"name", "q"}, {"in", "query"}, {"description", std::string(300, 'd')},
                                     {"example", "long example"}, {"schema", {{"type", "string"}}}},
                                    {{"name", "X-Trace"}, {"in", "header"}, {"schema", {{"type", "string"}}}}});
    Value doc{{"openapi", "3.0.0"}, {"paths", {{"/x", {{"get", o}}}}}};
    auto t = minimize("app", parse_openapi(doc).operations[0]);
    CHECK(t.summary.size() <= kSummaryCap);
    CHECK(t.summary.size() >= kSummaryCap - 3);
    REQUIRE(t.params.size() == 1);
    CHECK(t.params[0].description.size() <= kParamDescriptionCap);
    auto dumped = t.to_json().dump();
    CHECK(dumped.find("oauth") == std::string::npos);
    CHECK(dumped.find("x-vendor") == std::string::npos);
    CHECK(dumped.find("example") == std::string::npos);
}

TEST_CASE("search ranks the transfer operation first") {
    Registry reg;
    reg.ingest_spec(payments_doc().dump(), "payments", "");
    reg.ingest_spec(music_doc().dump(), "music", "");
    reg.ingest_spec(grocery_doc().dump(), "groceries", "");

    auto hits = reg.search("transfer money to a friend", std::nullopt, 5);
    REQUIRE(!hits.empty());
    CHECK(hits[0].tool_id == "payments.create_transfer");
    CHECK(hits[0].app_rank == 1);

    // oracle: the top hit has the largest raw overlap with the query terms
    auto q = index_terms("transfer money to a friend");
    std::set<std::string> qs(q.begin(), q.end());
    std::size_t best = 0;
    std::string best_id;
    for (const auto& app : reg.app_ids()) {
        for (const auto& t : reg.tools_of(app)) {
            auto terms = index_terms(t.tool_id.substr(t.tool_id.find('.') + 1) + " " + t.summary);
            std::set<std::string> ts(terms.begin(), terms.end());
            std::size_t overlap = std::count_if(qs.begin(), qs.end(), [&](const auto& w) { return ts.count(w) > 0; });
            if (overlap > best) {
                best = overlap;
                best_id = t.tool_id;
            }
        }
    }
    CHECK(best_id == hits[0].tool_id);

    for (std::size_t i = 1; i < hits.size(); ++i) {
        CHECK(hits[i - 1].score >= hits[i].score);
        if (hits[i - 1].score == hits[i].score) CHECK(hits[i - 1].tool_id < hits[i].tool_id);
    }

    auto scoped = reg.search("list", std::optional<std::string>("music"), 10);
    REQUIRE(!scoped.empty());
    for (const auto& h : scoped) CHECK(h.tool_id.rfind("music.", 0) == 0);

    CHECK(reg.search("zebra quantum", std::nullopt, 5).empty());
    CHECK_THROWS_AS(reg.search("x", std::nullopt, 0), Error);
}

TEST_CASE("ties are broken by tool id") {
    Value doc{{"openapi", "3.0.0"},
              {"paths", {{"/z", {{"get", op("zeta", "widget")}}}, {"/a", {{"get", op("alpha", "widget")}}}}}};
    Registry reg;
    reg.ingest_spec(doc.dump(), "w", "");
    auto hits = reg.search("widget", std::nullopt, 5);
    REQUIRE(hits.size() == 2);
    CHECK(hits[0].score == hits[1].score);
    CHECK(hits[0].tool_id == "w.alpha");
}

TEST_CASE("invocation against the mock server") {
    MockAppServer server;
    server.add_app("payments", payments_doc());
    server.start();

    Registry reg;
    reg.ingest_spec(payments_doc().dump(), "payments", server.base_url("payments"));

    auto r = reg.invoke("payments.get_balance", Value{{"user_id", "u1"}});
    CHECK(r.ok());
    CHECK(r.status_code == 200);
    CHECK(r.body["balance"].is_number());

    try {
        reg.invoke("payments.get_balance", Value::object());
        FAIL("expected arg validation error");
    } catch (const ArgValidationError& e) {
        CHECK(e.param() == "user_id");
    }
    CHECK_THROWS_AS(reg.invoke("payments.get_balance", Value{{"user_id", 3}}), ArgValidationError);
    CHECK_THROWS_AS(reg.invoke("payments.nope", Value::object()), UnknownToolError);

    auto sent = reg.invoke("payments.create_transfer", Value{{"recipient", "bob"}, {"amount", 12}});
    CHECK(sent.ok());

    server.set_status_override("payments", "get_balance", 500);
    auto failed = reg.invoke("payments.get_balance", Value{{"user_id", "u1"}});
    CHECK(failed.status_code == 500);
    CHECK(failed.error.has_value());
    CHECK(server.client_error_count() == 0);

    server.stop();
    auto down = reg.invoke("payments.get_balance", Value{{"user_id", "u1"}});
    CHECK(down.status_code == 0);
    CHECK(down.error.has_value());
}

TEST_CASE("mock server rejects structural violations") {
    MockAppServer server;
    server.add_app("payments", payments_doc());
    server.start();
    HttpToolTransport transport;
    auto reply = transport.send(HttpCall{"POST", server.base_url("payments"), "/transfers", {}, std::string(R"({"amount":1})")});
    CHECK(reply.status == 400);
    reply = transport.send(HttpCall{"GET", server.base_url("payments"), "/balance", {}, std::nullopt});
    CHECK(reply.status == 400);
    CHECK(server.client_error_count() == 2);
}

TEST_CASE("export is deterministic") {
    Registry a, b;
    a.ingest_spec(music_doc().dump(), "music", "u");
    a.ingest_spec(payments_doc().dump(), "payments", "u");
    b.ingest_spec(payments_doc().dump(), "payments", "u");
    b.ingest_spec(music_doc().dump(), "music", "u");
    CHECK(a.export_text() == b.export_text());
}
