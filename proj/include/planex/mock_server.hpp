#pragma once

#include "planex/registry.hpp"
#include "planex/value.hpp"

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

namespace httplib {
class Server;
}

namespace planex {

// Serves any number of OpenAPI documents on one local port, each under
// /<app_id>. Requests are checked against the operation's parameters and
// request body (400 on a structural violation). Responses come from the
// operation's "x-mock" block when present, otherwise they are synthesized
// from the first 2xx response schema.
//
// x-mock forms:
//   {"response": <json>}
//   {"by": "<param>", "cases": {"<value>": <json>, ...}, "default": <json>}
//   {"status": 201, ...}
// Inside a response, the string "$param:<name>" is replaced by the argument
// and "$digest" by a short hash of all arguments.
class MockAppServer {
public:
    MockAppServer();
    ~MockAppServer();
    MockAppServer(const MockAppServer&) = delete;
    MockAppServer& operator=(const MockAppServer&) = delete;

    void add_app(const std::string& app_id, const Value& openapi_document);

    // Forces `status` for one operation key; 0 clears the override.
    void set_status_override(const std::string& app_id, const std::string& operation_key, int status);

    void start();
    void stop();
    int port() const { return port_; }
    std::string base_url(const std::string& app_id) const;

    std::size_t request_count() const;
    std::size_t client_error_count() const;

private:
    struct Route {
        SourceOperation op;
        std::vector<std::string> segments;
        int override_status = 0;
    };
    struct App {
        std::vector<Route> routes;
    };

    void handle(const std::string& method, const std::string& path, const std::multimap<std::string, std::string>& query,
                const std::string& body, int& status, std::string& reply);

    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
    int port_ = 0;
    mutable std::mutex mu_;
    std::map<std::string, App> apps_;
    std::size_t requests_ = 0;
    std::size_t client_errors_ = 0;
};

// Deterministic example value for a (resolved) JSON schema.
Value synthesize_from_schema(const Value& schema, int depth = 0);

}  // namespace planex
