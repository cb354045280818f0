#include "doctest.h"

#include "planex/errors.hpp"
#include "planex/variables.hpp"

using namespace planex;

TEST_CASE("type tags follow value shape") {
    CHECK(type_tag_of(Value("x")) == TypeTag::string);
    CHECK(type_tag_of(Value(3)) == TypeTag::number);
    CHECK(type_tag_of(Value(2.5)) == TypeTag::number);
    CHECK(type_tag_of(Value(true)) == TypeTag::boolean);
    CHECK(type_tag_of(Value::array({1, 2})) == TypeTag::list);
    CHECK(type_tag_of(Value::object()) == TypeTag::record);
    CHECK(type_tag_of(Value()) == TypeTag::null);
}

TEST_CASE("identifiers") {
    CHECK(is_identifier("order_count"));
    CHECK(is_identifier("_x1"));
    CHECK_FALSE(is_identifier("1x"));
    CHECK_FALSE(is_identifier("a-b"));
    CHECK_FALSE(is_identifier(""));
}

TEST_CASE("store binds once per producer") {
    VariableStore store;
    store.bind(Variable::make("order_count", 5, "s1"));
    CHECK(store.at("order_count").value == 5);
    CHECK(store.at("order_count").producer == "s1");
    // idempotent re-bind from the same producer
    store.bind(Variable::make("order_count", 5, "s1"));
    CHECK_THROWS_AS(store.bind(Variable::make("order_count", 6, "s2")), VariableCollisionError);
    CHECK_THROWS_AS(store.bind(Variable::make("order_count", 6, "s1")), VariableCollisionError);
    CHECK_THROWS_AS(store.bind(Variable::make("bad name", 1)), Error);
}

TEST_CASE("view and json round trip") {
    VariableStore store({Variable::make("a", 1), Variable::make("b", Value::array({1, 2}), "s1")});
    auto v = store.view({"b", "missing"});
    CHECK(v.names() == std::vector<std::string>{"b"});
    auto j = store.to_json();
    REQUIRE(j.size() == 2);
    CHECK(Variable::from_json(j[1]) == store.at("b"));
    CHECK(store.at("b").type_tag == TypeTag::list);
}
