#pragma once

// Forks a writer that appends trajectory events to a store and reports each
// acknowledged sequence number over a pipe. The parent SIGKILLs it mid-run
// and then checks what survived on disk.

#include "planex/trajectory.hpp"

#include <csignal>
#include <filesystem>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

namespace killtest {

struct Outcome {
    long acknowledged = -1;  // highest seq the writer saw return from append
    long on_disk = 0;        // events loaded after the kill
    bool killed = false;
    std::string audit;       // empty when the per-task audit passes
    bool ok() const { return killed && on_disk >= acknowledged + 1 && audit.empty(); }
};

inline Outcome run(const std::filesystem::path& root, long kill_after, const std::string& run_id = "kill-run",
                   const std::string& task_id = "task-0") {
    Outcome out;
    int fds[2];
    if (pipe(fds) != 0) return out;
    pid_t pid = fork();
    if (pid == 0) {
        close(fds[0]);
        planex::TrajectoryStore store(root);
        planex::Tracer tracer(run_id, task_id, &store);
        for (long i = 0;; ++i) {
            const auto& e = tracer.emit(planex::AgentRole::plan_controller, planex::EventKind::action,
                                        planex::Value{{"i", i}, {"pad", std::string(64 + i % 200, 'x')}});
            long seq = e.seq;
            if (write(fds[1], &seq, sizeof seq) != sizeof seq) _exit(3);
        }
    }
    close(fds[1]);
    long seq = -1;
    while (read(fds[0], &seq, sizeof seq) == sizeof seq) {
        out.acknowledged = seq;
        if (seq >= kill_after) break;
    }
    kill(pid, SIGKILL);
    int status = 0;
    waitpid(pid, &status, 0);
    out.killed = WIFSIGNALED(status) && WTERMSIG(status) == SIGKILL;
    while (read(fds[0], &seq, sizeof seq) == sizeof seq) out.acknowledged = seq;
    close(fds[0]);

    planex::TrajectoryStore reader(root);
    auto events = reader.load(run_id, task_id);
    out.on_disk = static_cast<long>(events.size());
    out.audit = planex::audit_sequence(events).value_or("");
    return out;
}

}  // namespace killtest
