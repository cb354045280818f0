#pragma once

#include "planex/value.hpp"

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace planex {

enum class AgentRole {
    plan_controller,
    api_planner,
    shortlister,
    code_agent,
    browser_planner,
    action_agent,
    extraction_agent,
    judge,
    context,
};

enum class EventKind { observation, decision, action, result, reflection };

std::string_view to_string(AgentRole r);
std::string_view to_string(EventKind k);
AgentRole agent_role_from_string(std::string_view s);
EventKind event_kind_from_string(std::string_view s);

struct TrajectoryEvent {
    std::string run_id;
    std::string task_id;
    std::int64_t seq = 0;
    AgentRole agent = AgentRole::plan_controller;
    EventKind kind = EventKind::observation;
    Value payload;
    double wall_ms = 0.0;

    Value to_json(bool with_wall = true) const;
    static TrajectoryEvent from_json(const Value& j);
};

// Returns a description of the first problem: seq must start at 0 and
// increase by one, and all events must share (run_id, task_id).
std::optional<std::string> audit_sequence(const std::vector<TrajectoryEvent>& events);

// Canonical text of a trajectory without wall-clock fields, one event per line.
std::string canonical_trajectory(const std::vector<TrajectoryEvent>& events);

// Append-only event log, one JSON line per event, one file per (run, task)
// under <root>/<run_id>/trajectories/. Every append is flushed before
// returning. Concurrent appends to different tasks are independent.
class TrajectoryStore {
public:
    explicit TrajectoryStore(std::filesystem::path root);
    ~TrajectoryStore();
    TrajectoryStore(const TrajectoryStore&) = delete;
    TrajectoryStore& operator=(const TrajectoryStore&) = delete;

    // Throws SequenceGapError unless event.seq == last seq + 1 (0 for a new stream).
    void append(const TrajectoryEvent& event);

    // Throws UnknownTrajectoryError. A torn trailing line is ignored.
    std::vector<TrajectoryEvent> load(const std::string& run_id, const std::string& task_id) const;

    bool exists(const std::string& run_id, const std::string& task_id) const;
    std::vector<std::string> task_ids(const std::string& run_id) const;
    const std::filesystem::path& root() const { return root_; }

private:
    struct Stream;
    std::filesystem::path file_for(const std::string& run_id, const std::string& task_id) const;
    Stream& stream_for(const std::string& run_id, const std::string& task_id);

    std::filesystem::path root_;
    std::mutex mu_;
    std::map<std::pair<std::string, std::string>, std::unique_ptr<Stream>> streams_;
};

// Per-task event emitter. Keeps the events in memory and forwards them to
// the store when one is attached.
class Tracer {
public:
    Tracer(std::string run_id, std::string task_id, TrajectoryStore* store = nullptr);

    const TrajectoryEvent& emit(AgentRole agent, EventKind kind, Value payload);

    const std::vector<TrajectoryEvent>& events() const { return events_; }
    const std::string& run_id() const { return run_id_; }
    const std::string& task_id() const { return task_id_; }

private:
    std::string run_id_;
    std::string task_id_;
    TrajectoryStore* store_;
    std::chrono::steady_clock::time_point start_;
    std::vector<TrajectoryEvent> events_;
};

// Filesystem-safe encoding of an identifier.
std::string safe_file_name(std::string_view id);
std::string from_safe_file_name(std::string_view name);

}  // namespace planex
