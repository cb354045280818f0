#include "planex/insight.hpp"

#include "planex/errors.hpp"

#include "httplib.h"

#include <charconv>

namespace planex {

namespace {

constexpr std::size_t kDefaultLimit = 50;
constexpr std::size_t kMaxLimit = 1000;

struct HttpFailure {
    int status;
    std::string message;
};

std::vector<std::string> split_path(const std::string& path) {
    std::vector<std::string> out;
    std::size_t start = 1;
    while (start <= path.size()) {
        auto end = path.find('/', start);
        if (end == std::string::npos) end = path.size();
        if (end > start) out.push_back(path.substr(start, end - start));
        start = end + 1;
    }
    return out;
}

std::size_t number_param(const std::map<std::string, std::string>& q, const char* name, std::size_t fallback) {
    auto it = q.find(name);
    if (it == q.end()) return fallback;
    std::size_t v = 0;
    const auto& s = it->second;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) throw HttpFailure{422, std::string(name) + " must be a non-negative integer"};
    return v;
}

Value paginate(const Value& items, const std::map<std::string, std::string>& q) {
    const auto limit = number_param(q, "limit", kDefaultLimit);
    const auto offset = number_param(q, "offset", 0);
    if (limit == 0 || limit > kMaxLimit) throw HttpFailure{422, "limit must be between 1 and 1000"};
    Value page = Value::array();
    for (std::size_t i = offset; i < items.size() && page.size() < limit; ++i) page.push_back(items[i]);
    return Value{{"items", page}, {"total", items.size()}, {"limit", limit}, {"offset", offset}};
}

Value run_summary(const RunRecord& run) {
    std::size_t ok = 0;
    for (const auto& [_, r] : run.results) ok += r.status == TaskStatus::success;
    return Value{{"run_id", run.run_id},
                 {"agent_version", run.agent_version},
                 {"sample", run.sample.to_json()},
                 {"started_at", run.started_at},
                 {"finished_at", run.finished_at},
                 {"tasks", run.results.size()},
                 {"successes", ok}};
}

}  // namespace

InsightService::InsightService(RunStore& runs, ClassificationStore& labels, TrajectoryStore& trajectories)
    : runs_(runs), labels_(labels), trajectories_(trajectories) {}

InsightService::~InsightService() { stop(); }

InsightResponse InsightService::handle(const std::string& method, const std::string& path,
                                       const std::map<std::string, std::string>& query, const std::string& body) {
    const auto parts = split_path(path);
    auto load_run = [&](const std::string& id) {
        try {
            return runs_.load(id);
        } catch (const UnknownRunError& e) {
            throw HttpFailure{404, e.what()};
        }
    };
    try {
        if (method == "POST") {
            if (parts != std::vector<std::string>{"classifications"}) throw HttpFailure{404, "no such endpoint"};
            Value doc = Value::parse(body, nullptr, false);
            if (doc.is_discarded() || !doc.is_object()) throw HttpFailure{422, "body must be a JSON object"};
            for (const char* f : {"run_id", "task_id", "label"}) {
                if (!doc.contains(f) || !doc[f].is_string()) throw HttpFailure{422, std::string(f) + " is required"};
            }
            for (const char* f : {"note", "author"}) {
                if (doc.contains(f) && !doc[f].is_string()) throw HttpFailure{422, std::string(f) + " must be a string"};
            }
            try {
                auto c = labels_.record(ErrorClassification::from_json(doc));
                return {201, c.to_json()};
            } catch (const UnknownRunError& e) {
                throw HttpFailure{404, e.what()};
            } catch (const UnknownTaskError& e) {
                throw HttpFailure{404, e.what()};
            } catch (const Error& e) {
                throw HttpFailure{422, e.what()};
            }
        }
        if (method != "GET") throw HttpFailure{405, "method not allowed"};

        if (parts == std::vector<std::string>{"runs"}) {
            Value items = Value::array();
            for (const auto& id : runs_.run_ids()) items.push_back(run_summary(load_run(id)));
            return {200, paginate(items, query)};
        }
        if (parts == std::vector<std::string>{"taxonomy"}) return {200, Value{{"labels", labels_.taxonomy()}}};
        if (parts == std::vector<std::string>{"compare"}) {
            auto b = query.find("base");
            auto n = query.find("new");
            if (b == query.end() || n == query.end()) throw HttpFailure{422, "base and new are required"};
            return {200, compare_runs(load_run(b->second), load_run(n->second)).to_json()};
        }
        if (parts.size() >= 2 && parts[0] == "runs") {
            const auto run = load_run(parts[1]);
            if (parts.size() == 2) return {200, run.to_json()};
            if (parts.size() == 3 && parts[2] == "metrics") {
                try {
                    return {200, compute_metrics(run).to_json()};
                } catch (const EmptyRunError& e) {
                    throw HttpFailure{422, e.what()};
                }
            }
            if (parts.size() == 3 && parts[2] == "classifications") {
                Value items = Value::array();
                for (const auto& c : labels_.list(run.run_id)) items.push_back(c.to_json());
                return {200, paginate(items, query)};
            }
            if (parts.size() == 5 && parts[2] == "tasks" && parts[4] == "trajectory") {
                const auto& tid = parts[3];
                if (!run.results.count(tid)) throw HttpFailure{404, "run " + run.run_id + " has no task " + tid};
                std::vector<TrajectoryEvent> events;
                try {
                    events = trajectories_.load(run.run_id, tid);
                } catch (const UnknownTrajectoryError& e) {
                    throw HttpFailure{404, e.what()};
                }
                Value items = Value::array();
                for (const auto& e : events) items.push_back(e.to_json());
                auto page = paginate(items, query);
                page["run_id"] = run.run_id;
                page["task_id"] = tid;
                return {200, page};
            }
        }
        throw HttpFailure{404, "no such endpoint"};
    } catch (const HttpFailure& f) {
        return {f.status, Value{{"error", f.message}}};
    }
}

int InsightService::start(int port, const std::string& host) {
    if (server_) throw Error("insight service already running");
    server_ = std::make_unique<httplib::Server>();
    auto route = [this](const httplib::Request& req, httplib::Response& res) {
        std::map<std::string, std::string> q;
        for (const auto& [k, v] : req.params) q.emplace(k, v);
        auto r = handle(req.method, req.path, q, req.body);
        res.status = r.status;
        res.set_content(r.body.dump(), "application/json");
    };
    server_->Get(".*", route);
    server_->Post(".*", route);
    server_->Put(".*", route);
    server_->Delete(".*", route);
    port_ = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
    if (port_ < 0) {
        server_.reset();
        throw ConfigError("cannot bind " + host + ":" + std::to_string(port));
    }
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    return port_;
}

void InsightService::stop() {
    if (!server_) return;
    server_->stop();
    if (thread_.joinable()) thread_.join();
    server_.reset();
}

}  // namespace planex
