#include "doctest.h"

#include "planex/errors.hpp"
#include "planex/reasoner.hpp"

#include <httplib.h>

#include <atomic>
#include <random>
#include <set>
#include <thread>

using namespace planex;

namespace {

Value plan_schema() {
    return Value::parse(R"({"type":"object","required":["subtasks"],
        "properties":{"subtasks":{"type":"array","items":{"type":"object","required":["goal"]}}}})");
}

PromptBundle plan_bundle() {
    PromptBundle b;
    b.agent = "plan_controller";
    b.task_id = "t1";
    b.cursor = 0;
    b.role_preamble = "You plan.";
    b.instructions = "Decompose the task.";
    b.add("intent", "count orders");
    b.output_schema = plan_schema();
    return b;
}

class FlakyTransport : public ChatTransport {
public:
    std::vector<std::string> replies;
    std::vector<ChatRequest> seen;
    std::string post(const ChatRequest& r) override {
        seen.push_back(r);
        auto text = replies.at(std::min(seen.size() - 1, replies.size() - 1));
        return Value{{"choices", Value::array({Value{{"message", Value{{"content", text}}}}})}}.dump();
    }
};

BackendConfig remote_config() {
    BackendConfig c;
    c.kind = BackendConfig::Kind::remote_chat;
    c.endpoint = "http://127.0.0.1:9/v1/chat/completions";
    c.model_name = "m";
    return c;
}

}  // namespace

TEST_CASE("scripted entry keyed by fingerprint is returned verbatim") {
    auto bundle = plan_bundle();
    Value plan = Value::parse(R"({"subtasks":[{"goal":"a"},{"goal":"b"}]})");
    ScriptedBackend backend(Value{{"entries", Value{{bundle.step_fingerprint(), Value{{"output", plan}}}}}});
    ReasonerGateway gw(std::make_shared<ScriptedBackend>(backend));
    auto out = gw.complete(bundle);
    CHECK(out.structured_value == plan);
    CHECK(out.attempt_count == 1);
    CHECK(out.backend_id == "scripted");
}

TEST_CASE("scripted miss without default") {
    ReasonerGateway gw(std::make_shared<ScriptedBackend>(Value{{"entries", Value::object()}}));
    CHECK_THROWS_AS(gw.complete(plan_bundle()), ScriptMissError);
}

TEST_CASE("scripted rules and default") {
    Value script = Value::parse(R"({
        "rules":[{"agent":"judge","output":{"subtasks":[]}},
                 {"agent":"plan_controller","contains":["count orders"],"output":{"subtasks":[{"goal":"x"}]}}],
        "default":{"output":{"subtasks":[{"goal":"fallback"}]}}})");
    ScriptedBackend backend(script);
    auto b = plan_bundle();
    CHECK(Value::parse(backend.generate(b))["subtasks"][0]["goal"] == "x");
    b.context_fragments.clear();
    CHECK(Value::parse(backend.generate(b))["subtasks"][0]["goal"] == "fallback");
    // pure: same bundle, same output
    CHECK(backend.generate(b) == backend.generate(b));
}

TEST_CASE("remote backend retries once on malformed output") {
    auto transport = std::make_shared<FlakyTransport>();
    transport->replies = {"not json at all", R"({"subtasks":[{"goal":"a"}]})"};
    ReasonerGateway gw(std::make_shared<RemoteChatBackend>(remote_config(), transport));
    auto out = gw.complete(plan_bundle());
    CHECK(out.attempt_count == 2);
    REQUIRE(transport->seen.size() == 2);
    // the retry carries the validation error
    auto second_user = transport->seen[1].body["messages"][1]["content"].get<std::string>();
    CHECK(second_user.find("validation_error") != std::string::npos);
    CHECK(transport->seen[0].body["temperature"] == 0.0);
    CHECK(transport->seen[0].body["model"] == "m");
}

TEST_CASE("retry bound under default budget") {
    auto transport = std::make_shared<FlakyTransport>();
    transport->replies = {R"({"wrong":1})"};
    ReasonerGateway gw(std::make_shared<RemoteChatBackend>(remote_config(), transport), 2);
    CHECK_THROWS_AS(gw.complete(plan_bundle()), SchemaViolationError);
    CHECK(transport->seen.size() == 3);
}

TEST_CASE("code fences are tolerated") {
    auto transport = std::make_shared<FlakyTransport>();
    transport->replies = {"```json\n{\"subtasks\":[]}\n```"};
    ReasonerGateway gw(std::make_shared<RemoteChatBackend>(remote_config(), transport));
    CHECK(gw.complete(plan_bundle()).attempt_count == 1);
}

TEST_CASE("schema validator") {
    auto s = plan_schema();
    CHECK_FALSE(validate_schema(s, Value::parse(R"({"subtasks":[{"goal":"g"}]})")));
    CHECK(validate_schema(s, Value::parse(R"({"subtasks":[{}]})")));
    CHECK(validate_schema(s, Value::parse(R"({"subtasks":"x"})")));
    auto e = Value::parse(R"({"type":"string","enum":["a","b"]})");
    CHECK_FALSE(validate_schema(e, "a"));
    CHECK(validate_schema(e, "c"));
    auto multi = Value::parse(R"({"type":["integer","null"]})");
    CHECK_FALSE(validate_schema(multi, Value()));
    CHECK(validate_schema(multi, 1.5));
}

TEST_CASE("fingerprints: determinism, ordering, and no collisions on single-fragment edits") {
    auto a = plan_bundle();
    auto b = plan_bundle();
    CHECK(fingerprint(a) == fingerprint(b));

    a.add("x", "1").add("y", "2");
    b.add("y", "2").add("x", "1");
    CHECK(fingerprint(a) != fingerprint(b));

    std::mt19937_64 rng(7);
    auto word = [&] {
        std::string s;
        for (int i = 0; i < 8; ++i) s.push_back(static_cast<char>('a' + rng() % 26));
        return s;
    };
    std::set<std::string> seen;
    for (int i = 0; i < 1000; ++i) {
        PromptBundle p = plan_bundle();
        for (int f = 0; f < 4; ++f) p.add(word(), word());
        PromptBundle q = p;
        auto idx = rng() % q.context_fragments.size();
        q.context_fragments[idx].text += word();
        auto fp = fingerprint(p), fq = fingerprint(q);
        CHECK(fp != fq);
        seen.insert(fp);
        seen.insert(fq);
    }
    CHECK(seen.size() == 2000);
}

TEST_CASE("config validation") {
    BackendConfig c;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c.script_path = "x.json";
    CHECK_NOTHROW(c.validate());
    c.kind = BackendConfig::Kind::remote_chat;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("in-flight cap bounds concurrent remote requests") {
    class SlowTransport : public ChatTransport {
    public:
        std::atomic<int> current{0}, peak{0};
        std::string post(const ChatRequest&) override {
            int now = ++current;
            int p = peak.load();
            while (now > p && !peak.compare_exchange_weak(p, now)) {}
            std::this_thread::sleep_for(std::chrono::milliseconds(20));
            --current;
            return R"({"content":"{\"subtasks\":[]}"})";
        }
    };
    auto transport = std::make_shared<SlowTransport>();
    auto cfg = remote_config();
    cfg.max_in_flight = 2;
    ReasonerGateway gw(std::make_shared<RemoteChatBackend>(cfg, transport));
    std::vector<std::thread> threads;
    for (int i = 0; i < 8; ++i) threads.emplace_back([&] { gw.complete(plan_bundle()); });
    for (auto& t : threads) t.join();
    CHECK(transport->peak.load() <= 2);
}

TEST_CASE("http chat transport against a local endpoint") {
    httplib::Server srv;
    Value received;
    srv.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        received = Value::parse(req.body);
        res.set_content(R"({"choices":[{"message":{"role":"assistant","content":"{\"subtasks\":[{\"goal\":\"g\"}]}"}}]})",
                        "application/json");
    });
    int port = srv.bind_to_any_port("127.0.0.1");
    std::thread th([&] { srv.listen_after_bind(); });
    srv.wait_until_ready();
    auto cfg = remote_config();
    cfg.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
    ReasonerGateway gw(std::make_shared<RemoteChatBackend>(cfg));
    auto out = gw.complete(plan_bundle());
    srv.stop();
    th.join();
    CHECK(out.structured_value["subtasks"][0]["goal"] == "g");
    CHECK(received["messages"].size() == 2);
    CHECK(received["max_tokens"] == 1024);
}

TEST_CASE("recording replays through the scripted backend") {
    Value script = Value::parse(R"({"default":{"output":{"subtasks":[{"goal":"r"}]}}})");
    auto rec = std::make_shared<RecordingBackend>(std::make_shared<ScriptedBackend>(script));
    ReasonerGateway gw(rec);
    auto first = gw.complete(plan_bundle());
    ReasonerGateway replay(std::make_shared<ScriptedBackend>(rec->recording()));
    CHECK(replay.complete(plan_bundle()).structured_value == first.structured_value);
}
