#pragma once

#include "planex/eval.hpp"
#include "planex/trajectory.hpp"

#include <map>
#include <memory>
#include <string>
#include <thread>

namespace httplib {
class Server;
}

namespace planex {

struct InsightResponse {
    int status = 200;
    Value body;
};

// Read-mostly HTTP view over completed runs, their trajectories and the
// error labels attached to them.
//
//   GET  /runs                                   paginated run summaries
//   GET  /runs/{id}                              run record
//   GET  /runs/{id}/metrics                      MetricsSummary
//   GET  /runs/{id}/tasks/{tid}/trajectory       paginated events
//   GET  /runs/{id}/classifications              paginated labels
//   GET  /compare?base=..&new=..                 ComparisonReport
//   POST /classifications                        record a label (201)
//   GET  /taxonomy                               allowed labels
//
// Paginated bodies are {"items", "total", "limit", "offset"}; limit defaults
// to 50 and is capped at 1000. Unknown ids give 404, bad input 422.
class InsightService {
public:
    InsightService(RunStore& runs, ClassificationStore& labels, TrajectoryStore& trajectories);
    ~InsightService();
    InsightService(const InsightService&) = delete;
    InsightService& operator=(const InsightService&) = delete;

    InsightResponse handle(const std::string& method, const std::string& path,
                           const std::map<std::string, std::string>& query, const std::string& body = "");

    // Binds 127.0.0.1 (or `host`); port 0 picks a free port.
    int start(int port = 0, const std::string& host = "127.0.0.1");
    void stop();
    int port() const { return port_; }

private:
    RunStore& runs_;
    ClassificationStore& labels_;
    TrajectoryStore& trajectories_;
    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
    int port_ = 0;
};

}  // namespace planex
