#pragma once

#include "planex/orchestrator.hpp"
#include "planex/task.hpp"
#include "planex/trajectory.hpp"
#include "planex/world.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace planex {

enum class SampleName { initial, nano, micro, mini, full };
enum class Selection { per_template_representatives, template_coverage_50, all_templates, all_tasks };

std::string_view to_string(SampleName n);
std::string_view to_string(Selection s);
SampleName sample_name_from_string(std::string_view s);
Selection selection_from_string(std::string_view s);

struct SampleSpec {
    SampleName name = SampleName::full;
    std::size_t size = 0;
    Selection selection = Selection::all_tasks;
    std::uint64_t seed = 0;

    // The bundled ladder: initial 22, nano 44, micro 90, mini 190, full 812.
    static SampleSpec ladder(SampleName name, std::uint64_t seed = 0);

    Value to_json() const;
    static SampleSpec from_json(const Value& j);
};

struct ManifestTask {
    Task task;
    std::string template_id;
    std::string domain;
    std::string kind;
    // Substring the final answer must contain for the task to count as a success.
    std::string expected;
    std::optional<int> level;
    std::optional<std::string> split;

    static ManifestTask from_json(const Value& j);
};

struct Manifest {
    std::string name;
    std::vector<ManifestTask> tasks;

    std::size_t template_count() const;
    const ManifestTask* find(const std::string& task_id) const;

    static Manifest from_json(const Value& j);
    static Manifest load(const std::filesystem::path& path);
};

// Templates are shuffled per domain and interleaved across domains; each
// template's instances are shuffled. The draw order takes the first instance
// of every template, then the second, and so on, and a sample is a prefix of
// that order. Samples of one seed are therefore nested.
std::vector<ManifestTask> draw_sample(const Manifest& manifest, const SampleSpec& spec);

enum class TaskStatus { success, failure, error };
std::string_view to_string(TaskStatus s);
TaskStatus task_status_from_string(std::string_view s);

struct TaskResult {
    TaskStatus status = TaskStatus::failure;
    int steps = 0;
    double duration_ms = 0.0;
    std::string template_id;
    std::optional<int> level;
    std::optional<std::string> split;
    std::optional<std::string> note;

    Value to_json() const;
    static TaskResult from_json(const Value& j);
};

// Equal in everything but the wall-clock duration.
bool same_outcome(const TaskResult& a, const TaskResult& b);
bool same_results(const std::map<std::string, TaskResult>& a, const std::map<std::string, TaskResult>& b);

struct RunRecord {
    std::string run_id;
    std::string agent_version;
    SampleSpec sample;
    std::map<std::string, TaskResult> results;
    std::string started_at;
    std::string finished_at;

    Value to_json() const;
    static RunRecord from_json(const Value& j);
};

struct SliceMetrics {
    double task_goal_completion = 0.0;
    double scenario_goal_completion = 0.0;
    double avg_interactions = 0.0;
    std::size_t tasks = 0;
    std::size_t templates = 0;

    Value to_json() const;
};

struct MetricsSummary {
    double task_completion_rate = 0.0;
    double scenario_completion_rate = 0.0;
    double avg_interactions = 0.0;
    std::size_t tasks = 0;
    std::size_t successes = 0;
    std::size_t templates = 0;
    // split -> totals over the split; split -> level -> slice
    std::map<std::string, SliceMetrics> per_split;
    std::map<std::string, std::map<int, SliceMetrics>> per_level;

    Value to_json() const;
};

// Error results count as failures. Throws EmptyRunError.
MetricsSummary compute_metrics(const RunRecord& run);

struct ComparisonReport {
    std::string base_run;
    std::string new_run;
    std::set<std::string> resolved;
    std::set<std::string> regressed;
    std::set<std::string> newly_covered;
    std::set<std::string> persistent_failures;
    std::set<std::string> persistent_passes;
    // in base but absent from new; not part of the partition
    std::set<std::string> dropped;

    Value to_json() const;
};

ComparisonReport compare_runs(const RunRecord& base, const RunRecord& next);

struct BenchmarkOptions {
    int workers = 1;
    std::string run_id = "run";
    std::string agent_version = "dev";
    RunnerConfig config;
    TrajectoryStore* trajectories = nullptr;
    // Tasks whose execution throws, for exercising isolation.
    std::set<std::string> crash_tasks;
};

// Runs every task once across `workers` isolated world instances. Sites are
// mined before any worker starts so every worker sees the same knowledge.
RunRecord run_benchmark(const std::vector<ManifestTask>& tasks, const World& world, const SampleSpec& sample,
                        const BenchmarkOptions& options);

std::string utc_timestamp();

// Completed runs as <root>/<run_id>/run.json next to their trajectories.
class RunStore {
public:
    explicit RunStore(std::filesystem::path root);

    void save(const RunRecord& run);
    // Throws UnknownRunError.
    RunRecord load(const std::string& run_id) const;
    bool exists(const std::string& run_id) const;
    std::vector<std::string> run_ids() const;
    const std::filesystem::path& root() const { return root_; }

private:
    std::filesystem::path root_;
    mutable std::mutex mu_;
    mutable std::map<std::string, RunRecord> cache_;
};

struct ErrorClassification {
    std::string run_id;
    std::string task_id;
    std::string label;
    std::string note;
    std::string author;
    std::string created_at;

    Value to_json() const;
    static ErrorClassification from_json(const Value& j);
};

std::vector<std::string> default_taxonomy();

// Labels appended to <root>/<run_id>/classifications.jsonl.
class ClassificationStore {
public:
    ClassificationStore(const RunStore& runs, std::vector<std::string> taxonomy = default_taxonomy());

    // Stamps created_at. Throws UnknownRunError / UnknownTaskError, and
    // Error for an empty or unknown label.
    ErrorClassification record(ErrorClassification c);
    std::vector<ErrorClassification> list(const std::string& run_id) const;
    const std::vector<std::string>& taxonomy() const { return taxonomy_; }

private:
    const RunStore& runs_;
    std::vector<std::string> taxonomy_;
    mutable std::mutex mu_;
};

}  // namespace planex
