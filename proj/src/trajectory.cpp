#include "planex/trajectory.hpp"

#include "planex/errors.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdio>
#include <fstream>

namespace planex {

namespace {

constexpr std::array<std::string_view, 9> kRoles = {"plan_controller", "api_planner",      "shortlister",
                                                    "code_agent",      "browser_planner",  "action_agent",
                                                    "extraction_agent", "judge",           "context"};
constexpr std::array<std::string_view, 5> kKinds = {"observation", "decision", "action", "result", "reflection"};

void check_id(const std::string& id, const char* what) {
    if (id.empty()) throw Error(std::string(what) + " must be nonempty");
}

std::vector<TrajectoryEvent> read_events(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::vector<TrajectoryEvent> out;
    std::size_t start = 0;
    while (start < content.size()) {
        auto end = content.find('\n', start);
        if (end == std::string::npos) break;  // torn tail from an interrupted write
        auto line = std::string_view(content).substr(start, end - start);
        start = end + 1;
        if (line.empty()) continue;
        try {
            out.push_back(TrajectoryEvent::from_json(Value::parse(line)));
        } catch (const Value::exception&) {
            if (start >= content.size()) break;
            throw Error("corrupt trajectory line in " + file.string());
        }
    }
    return out;
}

}  // namespace

std::string_view to_string(AgentRole r) { return kRoles[static_cast<std::size_t>(r)]; }
std::string_view to_string(EventKind k) { return kKinds[static_cast<std::size_t>(k)]; }

AgentRole agent_role_from_string(std::string_view s) {
    for (std::size_t i = 0; i < kRoles.size(); ++i) {
        if (kRoles[i] == s) return static_cast<AgentRole>(i);
    }
    throw Error("unknown agent role: " + std::string(s));
}

EventKind event_kind_from_string(std::string_view s) {
    for (std::size_t i = 0; i < kKinds.size(); ++i) {
        if (kKinds[i] == s) return static_cast<EventKind>(i);
    }
    throw Error("unknown event kind: " + std::string(s));
}

Value TrajectoryEvent::to_json(bool with_wall) const {
    Value j{{"run_id", run_id}, {"task_id", task_id}, {"seq", seq},
            {"agent", to_string(agent)}, {"kind", to_string(kind)}, {"payload", payload}};
    if (with_wall) j["wall_ms"] = wall_ms;
    return j;
}

TrajectoryEvent TrajectoryEvent::from_json(const Value& j) {
    TrajectoryEvent e;
    e.run_id = j.at("run_id").get<std::string>();
    e.task_id = j.at("task_id").get<std::string>();
    e.seq = j.at("seq").get<std::int64_t>();
    e.agent = agent_role_from_string(j.at("agent").get<std::string>());
    e.kind = event_kind_from_string(j.at("kind").get<std::string>());
    e.payload = j.value("payload", Value());
    e.wall_ms = j.value("wall_ms", 0.0);
    return e;
}

std::optional<std::string> audit_sequence(const std::vector<TrajectoryEvent>& events) {
    for (std::size_t i = 0; i < events.size(); ++i) {
        if (events[i].seq != static_cast<std::int64_t>(i)) {
            return "event " + std::to_string(i) + " has seq " + std::to_string(events[i].seq);
        }
        if (events[i].run_id != events[0].run_id || events[i].task_id != events[0].task_id) {
            return "event " + std::to_string(i) + " belongs to another stream";
        }
    }
    return std::nullopt;
}

std::string canonical_trajectory(const std::vector<TrajectoryEvent>& events) {
    std::string out;
    for (const auto& e : events) out += e.to_json(false).dump() + "\n";
    return out;
}

std::string safe_file_name(std::string_view id) {
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    for (char c : id) {
        auto u = static_cast<unsigned char>(c);
        if (std::isalnum(u) || c == '-' || c == '_' || (c == '.' && !out.empty())) {
            out.push_back(c);
        } else {
            out.push_back('%');
            out.push_back(kHex[u >> 4]);
            out.push_back(kHex[u & 0xf]);
        }
    }
    return out;
}

std::string from_safe_file_name(std::string_view name) {
    std::string out;
    for (std::size_t i = 0; i < name.size(); ++i) {
        if (name[i] == '%' && i + 2 < name.size()) {
            out.push_back(static_cast<char>(std::stoi(std::string(name.substr(i + 1, 2)), nullptr, 16)));
            i += 2;
        } else {
            out.push_back(name[i]);
        }
    }
    return out;
}

struct TrajectoryStore::Stream {
    std::mutex mu;
    std::FILE* file = nullptr;
    std::int64_t next_seq = 0;

    ~Stream() {
        if (file) std::fclose(file);
    }
};

TrajectoryStore::TrajectoryStore(std::filesystem::path root) : root_(std::move(root)) {
    std::filesystem::create_directories(root_);
}

TrajectoryStore::~TrajectoryStore() = default;

std::filesystem::path TrajectoryStore::file_for(const std::string& run_id, const std::string& task_id) const {
    return root_ / safe_file_name(run_id) / "trajectories" / (safe_file_name(task_id) + ".jsonl");
}

TrajectoryStore::Stream& TrajectoryStore::stream_for(const std::string& run_id, const std::string& task_id) {
    std::lock_guard lock(mu_);
    auto& slot = streams_[{run_id, task_id}];
    if (!slot) {
        auto path = file_for(run_id, task_id);
        std::filesystem::create_directories(path.parent_path());
        auto s = std::make_unique<Stream>();
        if (std::filesystem::exists(path)) {
            auto existing = read_events(path);
            s->next_seq = existing.empty() ? 0 : existing.back().seq + 1;
            // drop a torn tail so the next line starts clean
            std::ifstream in(path, std::ios::binary);
            std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
            auto last = content.rfind('\n');
            auto keep = last == std::string::npos ? 0 : last + 1;
            if (keep != content.size()) std::filesystem::resize_file(path, keep);
        }
        s->file = std::fopen(path.c_str(), "ab");
        if (!s->file) throw Error("cannot open trajectory file " + path.string());
        slot = std::move(s);
    }
    return *slot;
}

void TrajectoryStore::append(const TrajectoryEvent& event) {
    check_id(event.run_id, "run_id");
    check_id(event.task_id, "task_id");
    auto& s = stream_for(event.run_id, event.task_id);
    std::lock_guard lock(s.mu);
    if (event.seq != s.next_seq) {
        throw SequenceGapError("expected seq " + std::to_string(s.next_seq) + " for " + event.run_id + "/" +
                               event.task_id + ", got " + std::to_string(event.seq));
    }
    auto line = event.to_json().dump() + "\n";
    if (std::fwrite(line.data(), 1, line.size(), s.file) != line.size() || std::fflush(s.file) != 0) {
        throw Error("trajectory write failed");
    }
    ++s.next_seq;
}

std::vector<TrajectoryEvent> TrajectoryStore::load(const std::string& run_id, const std::string& task_id) const {
    auto path = file_for(run_id, task_id);
    if (!std::filesystem::exists(path)) throw UnknownTrajectoryError("no trajectory for " + run_id + "/" + task_id);
    return read_events(path);
}

bool TrajectoryStore::exists(const std::string& run_id, const std::string& task_id) const {
    return std::filesystem::exists(file_for(run_id, task_id));
}

std::vector<std::string> TrajectoryStore::task_ids(const std::string& run_id) const {
    std::vector<std::string> out;
    auto dir = root_ / safe_file_name(run_id) / "trajectories";
    if (!std::filesystem::exists(dir)) return out;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.path().extension() == ".jsonl") out.push_back(from_safe_file_name(entry.path().stem().string()));
    }
    std::sort(out.begin(), out.end());
    return out;
}

Tracer::Tracer(std::string run_id, std::string task_id, TrajectoryStore* store)
    : run_id_(std::move(run_id)), task_id_(std::move(task_id)), store_(store), start_(std::chrono::steady_clock::now()) {}

const TrajectoryEvent& Tracer::emit(AgentRole agent, EventKind kind, Value payload) {
    TrajectoryEvent e;
    e.run_id = run_id_;
    e.task_id = task_id_;
    e.seq = static_cast<std::int64_t>(events_.size());
    e.agent = agent;
    e.kind = kind;
    e.payload = std::move(payload);
    e.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
    if (store_) store_->append(e);
    events_.push_back(std::move(e));
    return events_.back();
}

}  // namespace planex
