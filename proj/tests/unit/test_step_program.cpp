#include "doctest.h"

#include "../support/program_oracle.hpp"
#include "planex/errors.hpp"
#include "planex/step_program.hpp"

using namespace planex;
using namespace planex::program;

namespace {

class FakeTools : public ToolInvoker {
public:
    std::map<std::string, ToolResponse> responses;
    std::vector<std::pair<std::string, Value>> calls;

    ToolResponse invoke(const std::string& tool_id, const Value& args) override {
        calls.emplace_back(tool_id, args);
        auto it = responses.find(tool_id);
        if (it == responses.end()) throw UnknownToolError(tool_id);
        return it->second;
    }
};

ToolSpec list_orders_spec() {
    ToolSpec t;
    t.tool_id = "shop-api.list_orders";
    t.app_id = "shop-api";
    t.method = "GET";
    t.path = "/users/{user}/orders";
    t.params = {ParamSpec{"user", ParamLocation::path, TypeTag::string, true, ""},
                ParamSpec{"limit", ParamLocation::query, TypeTag::number, false, ""}};
    return t;
}

Value run_value(const std::string& src, const VariableStore& vars = {}) {
    FakeTools tools;
    auto r = execute_program(parse_program(src), vars, tools);
    REQUIRE(r.status == ExecutionResult::Status::ok);
    Value out = Value::object();
    for (const auto& v : r.returned) out[v.name] = v.value;
    return out;
}

}  // namespace

TEST_CASE("golden parse of the three-statement program") {
    auto prog = parse_program("call r = shop-api.list_orders(user: user_id)\nlet n = len(r.items)\nreturn {order_count: n}");
    REQUIRE(prog.statements.size() == 3);

    const auto& call = std::get<CallStmt>(prog.statements[0]);
    CHECK(call.name == "r");
    CHECK(call.tool_id == "shop-api.list_orders");
    REQUIRE(call.args.size() == 1);
    CHECK(call.args[0].first == "user");
    CHECK(std::get<NameRef>(call.args[0].second->node).name == "user_id");

    const auto& let = std::get<LetStmt>(prog.statements[1]);
    CHECK(let.name == "n");
    const auto& len = std::get<BuiltinCall>(let.expr->node);
    CHECK(len.fn == "len");
    REQUIRE(len.args.size() == 1);
    const auto& field = std::get<FieldAccess>(len.args[0]->node);
    CHECK(field.field == "items");
    CHECK(std::get<NameRef>(field.base->node).name == "r");

    const auto& ret = std::get<ReturnStmt>(prog.statements[2]);
    REQUIRE(ret.fields.size() == 1);
    CHECK(ret.fields[0].first == "order_count");
    CHECK(std::get<NameRef>(ret.fields[0].second->node).name == "n");

    // render is a fixed point of parse
    CHECK(parse_program(prog.render()).render() == prog.render());
}

TEST_CASE("grammar errors") {
    CHECK_THROWS_AS(parse_program("return {n: 1}\nlet x = 2"), ProgramParseError);
    CHECK_THROWS_AS(parse_program("let x = 2"), ProgramParseError);
    CHECK_THROWS_AS(parse_program(""), ProgramParseError);
    CHECK_THROWS_AS(parse_program("return {}"), ProgramParseError);
    CHECK_THROWS_AS(parse_program("let x = foo(1)\nreturn {x: x}"), ProgramParseError);
    CHECK_THROWS_AS(parse_program("let x = len(1, 2)\nreturn {x: x}"), ProgramParseError);
    CHECK_THROWS_AS(parse_program("let x = filter(xs, item)\nreturn {x: x}"), ProgramParseError);
    CHECK_THROWS_AS(parse_program("let x = \"open\nreturn {x: x}"), ProgramParseError);
    CHECK_THROWS_AS(parse_program("let item = 1\nreturn {x: item}"), ProgramParseError);
    CHECK_THROWS_AS(parse_program("return {a: 1, a: 2}"), ProgramParseError);
    CHECK_THROWS_AS(parse_program("call r = nodot(x: 1)\nreturn {r: r}"), ProgramParseError);
    CHECK_THROWS_AS(parse_program("return {a: 1}\nreturn {b: 2}"), ProgramParseError);
    try {
        parse_program("let a = 1\nlet b = [1,\nreturn {a: a}");
        FAIL("expected parse error");
    } catch (const ProgramParseError& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
}

TEST_CASE("static checks") {
    std::vector<ToolSpec> shortlist{list_orders_spec()};
    VariableStore ambient({Variable::make("user_id", "u1")});

    CHECK_NOTHROW(check_program(parse_program("call r = shop-api.list_orders(user: user_id)\nreturn {n: len(r.items)}"),
                                shortlist, ambient));
    CHECK_THROWS_AS(check_program(parse_program("call r = mail-api.send(to: user_id)\nreturn {r: r}"), shortlist, ambient),
                    StaticCheckError);
    CHECK_THROWS_AS(check_program(parse_program("call r = shop-api.list_orders(limit: 3)\nreturn {r: r}"), shortlist, ambient),
                    StaticCheckError);
    CHECK_THROWS_AS(check_program(parse_program("call r = shop-api.list_orders(user: user_id, bogus: 1)\nreturn {r: r}"),
                                  shortlist, ambient),
                    StaticCheckError);
    CHECK_THROWS_AS(check_program(parse_program("let a = b\nreturn {a: a}"), shortlist, ambient), StaticCheckError);
    CHECK_THROWS_AS(check_program(parse_program("let a = 1\nlet a = 2\nreturn {a: a}"), shortlist, ambient), StaticCheckError);
    CHECK_THROWS_AS(check_program(parse_program("let user_id = 1\nreturn {a: user_id}"), shortlist, ambient), StaticCheckError);
    CHECK_THROWS_AS(check_program(parse_program("return {a: item}"), shortlist, ambient), StaticCheckError);

    try {
        check_program(parse_program("let a = 1\ncall r = x.y(q: a)\nreturn {a: a}"), shortlist, ambient);
        FAIL("expected static check error");
    } catch (const StaticCheckError& e) {
        CHECK(std::string(e.what()).find("statement 2") != std::string::npos);
    }
}

TEST_CASE("builtins on literals") {
    CHECK(run_value("let n = len([1,2,3])\nreturn {n: n}")["n"] == 3);
    VariableStore xs({Variable::make("xs", Value::array({1, 2, 3, 4}))});
    CHECK(run_value("let evens = filter(xs, item > 2)\nreturn {evens: evens}", xs)["evens"] == Value::array({3, 4}));
    CHECK(run_value("return {s: sum(xs), lo: min(xs), hi: max(xs)}", xs) == Value{{"s", 10}, {"lo", 1}, {"hi", 4}});
    CHECK(run_value("return {d: map(xs, item * 2)}", xs)["d"] == Value::array({2, 4, 6, 8}));
    CHECK(run_value("return {u: unique([3, 1, 3, 2, 1]), s: sort([3, 1, 2])}") ==
          Value{{"u", Value::array({3, 1, 2})}, {"s", Value::array({1, 2, 3})}});
    CHECK(run_value("return {c: concat([1], [2, 3], []), k: count([1, 2, 1], 1)}") ==
          Value{{"c", Value::array({1, 2, 3})}, {"k", 2}});
    CHECK(run_value("return {q: 7 / 2, p: 1 + 2 * 3, m: (1 + 2) * 3, neg: 5 - -2}") ==
          Value{{"q", 3.5}, {"p", 7}, {"m", 9}, {"neg", 7}});
    CHECK(run_value("return {s: \"a\" + str(4), e: \"q\\\"x\"}") == Value{{"s", "a4"}, {"e", "q\"x"}});
    CHECK(run_value("return {v: [[1, 2], [3]][1][0], b: true, z: null}") == Value{{"v", 3}, {"b", true}, {"z", nullptr}});
}

TEST_CASE("expression errors are encoded, not thrown") {
    FakeTools tools;
    auto r = execute_program(parse_program("let a = min([])\nreturn {a: a}"), {}, tools);
    CHECK(r.status == ExecutionResult::Status::expr_error);
    CHECK(r.returned.empty());
    REQUIRE(r.diagnostic);
    CHECK(r.diagnostic->find("statement 1") != std::string::npos);

    CHECK(execute_program(parse_program("return {a: 1 / 0}"), {}, tools).status == ExecutionResult::Status::expr_error);
    CHECK(execute_program(parse_program("return {a: [1][3]}"), {}, tools).status == ExecutionResult::Status::expr_error);
    CHECK(execute_program(parse_program("return {a: sort([1, \"x\"])}"), {}, tools).status == ExecutionResult::Status::expr_error);
}

TEST_CASE("calls dispatch through the tool invoker") {
    FakeTools tools;
    tools.responses["shop-api.list_orders"] = ToolResponse{200, Value{{"items", Value::array({1, 2, 3, 4, 5})}}, 1.0, {}};
    VariableStore vars({Variable::make("user_id", "alice")});
    auto prog = parse_program("call r = shop-api.list_orders(user: user_id)\nlet n = len(r.items)\nreturn {order_count: n}");
    auto r = execute_program(prog, vars, tools, "s1");
    REQUIRE(r.status == ExecutionResult::Status::ok);
    REQUIRE(r.returned.size() == 1);
    CHECK(r.returned[0].name == "order_count");
    CHECK(r.returned[0].value == 5);
    CHECK(r.returned[0].producer == "s1");
    REQUIRE(r.call_log.size() == 1);
    CHECK(r.call_log[0].status_code == 200);
    CHECK(tools.calls[0].second == Value{{"user", "alice"}});

    // no hidden state
    auto again = execute_program(prog, vars, tools, "s1");
    CHECK(again.returned == r.returned);
    CHECK(again.call_log == r.call_log);
}

TEST_CASE("failed call stops execution with the log so far") {
    FakeTools tools;
    tools.responses["a.ok"] = ToolResponse{200, Value{{"x", 1}}, 1.0, {}};
    tools.responses["a.bad"] = ToolResponse{500, Value{{"error", "boom"}}, 1.0, std::string("HTTP 500")};
    auto r = execute_program(parse_program("call x = a.ok()\ncall y = a.bad()\nreturn {y: y}"), {}, tools);
    CHECK(r.status == ExecutionResult::Status::call_failed);
    CHECK(r.call_log.size() == 2);
    REQUIRE(r.diagnostic);
    CHECK(r.diagnostic->find("500") != std::string::npos);
    CHECK(r.returned.empty());
}

TEST_CASE("interpreter agrees with the brute-force oracle") {
    oracle::Generator gen(20240601);
    int errors = 0;
    for (int i = 0; i < 2000; ++i) {
        auto g = gen.next();
        std::vector<Variable> vars;
        for (const auto& [k, v] : g.ambient) vars.push_back(Variable::make(k, v));
        FakeTools tools;
        StepProgram prog;
        REQUIRE_NOTHROW(prog = parse_program(g.source));
        auto r = execute_program(prog, VariableStore(vars), tools);
        INFO(g.source);
        if (!g.expected) {
            ++errors;
            CHECK(r.status == ExecutionResult::Status::expr_error);
            continue;
        }
        REQUIRE(r.status == ExecutionResult::Status::ok);
        std::map<std::string, Value> got;
        for (const auto& v : r.returned) got[v.name] = v.value;
        CHECK(got == *g.expected);
    }
    // both branches are exercised
    CHECK(errors > 0);
    CHECK(errors < 1000);
}
