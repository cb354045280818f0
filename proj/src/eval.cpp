#include "planex/eval.hpp"

#include "planex/errors.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <ctime>
#include <fstream>
#include <random>
#include <thread>

namespace planex {

namespace {

Value read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read " + path.string());
    return Value::parse(in);
}

void write_atomic(const std::filesystem::path& path, const std::string& text) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        out << text;
    }
    std::filesystem::rename(tmp, path);
}

double pct(std::size_t num, std::size_t den) { return den == 0 ? 0.0 : 100.0 * static_cast<double>(num) / static_cast<double>(den); }

SliceMetrics tally(const std::vector<const TaskResult*>& rs) {
    SliceMetrics m;
    std::map<std::string, bool> templates;
    std::size_t ok = 0;
    long steps = 0;
    for (const auto* r : rs) {
        const bool pass = r->status == TaskStatus::success;
        ok += pass;
        steps += r->steps;
        auto [it, fresh] = templates.emplace(r->template_id, pass);
        if (!fresh) it->second = it->second && pass;
    }
    std::size_t full = 0;
    for (const auto& [_, all] : templates) full += all;
    m.tasks = rs.size();
    m.templates = templates.size();
    m.task_goal_completion = pct(ok, rs.size());
    m.scenario_goal_completion = pct(full, templates.size());
    m.avg_interactions = rs.empty() ? 0.0 : static_cast<double>(steps) / static_cast<double>(rs.size());
    return m;
}

}  // namespace

std::string_view to_string(SampleName n) {
    switch (n) {
        case SampleName::initial: return "initial";
        case SampleName::nano: return "nano";
        case SampleName::micro: return "micro";
        case SampleName::mini: return "mini";
        case SampleName::full: return "full";
    }
    return "?";
}

std::string_view to_string(Selection s) {
    switch (s) {
        case Selection::per_template_representatives: return "per_template_representatives";
        case Selection::template_coverage_50: return "template_coverage_50";
        case Selection::all_templates: return "all_templates";
        case Selection::all_tasks: return "all_tasks";
    }
    return "?";
}

SampleName sample_name_from_string(std::string_view s) {
    for (auto n : {SampleName::initial, SampleName::nano, SampleName::micro, SampleName::mini, SampleName::full}) {
        if (to_string(n) == s) return n;
    }
    throw ConfigError("unknown sample '" + std::string(s) + "'");
}

Selection selection_from_string(std::string_view s) {
    for (auto n : {Selection::per_template_representatives, Selection::template_coverage_50, Selection::all_templates,
                   Selection::all_tasks}) {
        if (to_string(n) == s) return n;
    }
    throw ConfigError("unknown selection '" + std::string(s) + "'");
}

SampleSpec SampleSpec::ladder(SampleName name, std::uint64_t seed) {
    switch (name) {
        case SampleName::initial: return {name, 22, Selection::per_template_representatives, seed};
        case SampleName::nano: return {name, 44, Selection::per_template_representatives, seed};
        case SampleName::micro: return {name, 90, Selection::template_coverage_50, seed};
        case SampleName::mini: return {name, 190, Selection::all_templates, seed};
        case SampleName::full: return {name, 812, Selection::all_tasks, seed};
    }
    return {};
}

Value SampleSpec::to_json() const {
    return Value{{"name", to_string(name)}, {"size", size}, {"selection", to_string(selection)}, {"seed", seed}};
}

SampleSpec SampleSpec::from_json(const Value& j) {
    SampleSpec s;
    s.name = sample_name_from_string(j.at("name").get<std::string>());
    s.size = j.at("size").get<std::size_t>();
    s.selection = selection_from_string(j.at("selection").get<std::string>());
    s.seed = j.value("seed", std::uint64_t{0});
    return s;
}

ManifestTask ManifestTask::from_json(const Value& j) {
    ManifestTask m;
    m.task = Task::from_json(j);
    m.template_id = j.at("template_id").get<std::string>();
    m.domain = j.value("domain", "");
    m.kind = j.value("kind", "");
    m.expected = j.value("expected", "");
    if (j.contains("level")) m.level = j["level"].get<int>();
    if (j.contains("split")) m.split = j["split"].get<std::string>();
    return m;
}

std::size_t Manifest::template_count() const {
    std::set<std::string> t;
    for (const auto& m : tasks) t.insert(m.template_id);
    return t.size();
}

const ManifestTask* Manifest::find(const std::string& task_id) const {
    for (const auto& m : tasks) {
        if (m.task.id == task_id) return &m;
    }
    return nullptr;
}

Manifest Manifest::from_json(const Value& j) {
    Manifest m;
    m.name = j.value("name", "");
    std::set<std::string> ids;
    for (const auto& t : j.at("tasks")) {
        m.tasks.push_back(ManifestTask::from_json(t));
        if (!ids.insert(m.tasks.back().task.id).second) throw ConfigError("duplicate task id " + m.tasks.back().task.id);
    }
    return m;
}

Manifest Manifest::load(const std::filesystem::path& path) { return from_json(read_json(path)); }

std::vector<ManifestTask> draw_sample(const Manifest& manifest, const SampleSpec& spec) {
    const std::size_t size = spec.selection == Selection::all_tasks && spec.size == 0 ? manifest.tasks.size() : spec.size;
    if (size > manifest.tasks.size()) {
        throw ManifestTooSmallError("manifest has " + std::to_string(manifest.tasks.size()) + " tasks, sample needs " +
                                    std::to_string(size));
    }
    const std::size_t templates = manifest.template_count();
    switch (spec.selection) {
        case Selection::per_template_representatives:
            if (size > templates) throw ManifestTooSmallError("more representatives requested than templates");
            break;
        case Selection::template_coverage_50:
            if (2 * size < templates) throw ManifestTooSmallError("sample too small to cover half of the templates");
            break;
        case Selection::all_templates:
            if (size < templates) throw ManifestTooSmallError("sample too small to cover every template");
            break;
        case Selection::all_tasks:
            if (size != manifest.tasks.size()) throw ManifestTooSmallError("all_tasks needs the whole manifest");
            break;
    }

    std::mt19937_64 rng(spec.seed);
    std::map<std::string, std::vector<std::size_t>> by_template;
    std::map<std::string, std::vector<std::string>> by_domain;
    for (std::size_t i = 0; i < manifest.tasks.size(); ++i) {
        const auto& t = manifest.tasks[i];
        auto& bucket = by_template[t.template_id];
        if (bucket.empty()) by_domain[t.domain].push_back(t.template_id);
        bucket.push_back(i);
    }
    for (auto& [_, tpls] : by_domain) std::shuffle(tpls.begin(), tpls.end(), rng);
    for (auto& [_, idx] : by_template) std::shuffle(idx.begin(), idx.end(), rng);
    std::vector<std::string> domains;
    for (const auto& [d, _] : by_domain) domains.push_back(d);
    std::shuffle(domains.begin(), domains.end(), rng);

    std::vector<std::string> order;
    for (std::size_t round = 0; order.size() < templates; ++round) {
        for (const auto& d : domains) {
            const auto& tpls = by_domain[d];
            if (round < tpls.size()) order.push_back(tpls[round]);
        }
    }
    std::vector<ManifestTask> out;
    for (std::size_t pass = 0; out.size() < size; ++pass) {
        for (const auto& t : order) {
            if (out.size() == size) break;
            const auto& idx = by_template[t];
            if (pass < idx.size()) out.push_back(manifest.tasks[idx[pass]]);
        }
    }
    return out;
}

std::string_view to_string(TaskStatus s) {
    switch (s) {
        case TaskStatus::success: return "success";
        case TaskStatus::failure: return "failure";
        case TaskStatus::error: return "error";
    }
    return "?";
}

TaskStatus task_status_from_string(std::string_view s) {
    if (s == "success") return TaskStatus::success;
    if (s == "failure") return TaskStatus::failure;
    if (s == "error") return TaskStatus::error;
    throw ConfigError("unknown task status '" + std::string(s) + "'");
}

Value TaskResult::to_json() const {
    Value j{{"status", to_string(status)}, {"steps", steps}, {"duration_ms", duration_ms}, {"template_id", template_id}};
    if (level) j["level"] = *level;
    if (split) j["split"] = *split;
    if (note) j["note"] = *note;
    return j;
}

TaskResult TaskResult::from_json(const Value& j) {
    TaskResult r;
    r.status = task_status_from_string(j.at("status").get<std::string>());
    r.steps = j.value("steps", 0);
    r.duration_ms = j.value("duration_ms", 0.0);
    r.template_id = j.at("template_id").get<std::string>();
    if (j.contains("level")) r.level = j["level"].get<int>();
    if (j.contains("split")) r.split = j["split"].get<std::string>();
    if (j.contains("note")) r.note = j["note"].get<std::string>();
    return r;
}

bool same_outcome(const TaskResult& a, const TaskResult& b) {
    return a.status == b.status && a.steps == b.steps && a.template_id == b.template_id && a.level == b.level &&
           a.split == b.split && a.note == b.note;
}

bool same_results(const std::map<std::string, TaskResult>& a, const std::map<std::string, TaskResult>& b) {
    if (a.size() != b.size()) return false;
    for (auto ia = a.begin(), ib = b.begin(); ia != a.end(); ++ia, ++ib) {
        if (ia->first != ib->first || !same_outcome(ia->second, ib->second)) return false;
    }
    return true;
}

Value RunRecord::to_json() const {
    Value res = Value::object();
    for (const auto& [id, r] : results) res[id] = r.to_json();
    return Value{{"run_id", run_id},         {"agent_version", agent_version}, {"sample", sample.to_json()},
                 {"results", res},           {"started_at", started_at},       {"finished_at", finished_at}};
}

RunRecord RunRecord::from_json(const Value& j) {
    RunRecord r;
    r.run_id = j.at("run_id").get<std::string>();
    r.agent_version = j.value("agent_version", "");
    r.sample = SampleSpec::from_json(j.at("sample"));
    for (const auto& [id, v] : j.at("results").items()) r.results[id] = TaskResult::from_json(v);
    r.started_at = j.value("started_at", "");
    r.finished_at = j.value("finished_at", "");
    return r;
}

Value SliceMetrics::to_json() const {
    return Value{{"task_goal_completion", task_goal_completion},
                 {"scenario_goal_completion", scenario_goal_completion},
                 {"avg_interactions", avg_interactions},
                 {"tasks", tasks},
                 {"templates", templates}};
}

Value MetricsSummary::to_json() const {
    Value splits = Value::object();
    for (const auto& [s, m] : per_split) splits[s] = m.to_json();
    Value levels = Value::object();
    for (const auto& [s, by_level] : per_level) {
        for (const auto& [l, m] : by_level) levels[s][std::to_string(l)] = m.to_json();
    }
    return Value{{"task_completion_rate", task_completion_rate},
                 {"scenario_completion_rate", scenario_completion_rate},
                 {"avg_interactions", avg_interactions},
                 {"tasks", tasks},
                 {"successes", successes},
                 {"templates", templates},
                 {"per_split", splits},
                 {"per_level", levels}};
}

MetricsSummary compute_metrics(const RunRecord& run) {
    if (run.results.empty()) throw EmptyRunError("run " + run.run_id + " has no results");
    std::vector<const TaskResult*> all;
    std::map<std::string, std::vector<const TaskResult*>> by_split;
    std::map<std::string, std::map<int, std::vector<const TaskResult*>>> by_level;
    for (const auto& [_, r] : run.results) {
        all.push_back(&r);
        if (r.split) by_split[*r.split].push_back(&r);
        if (r.level) by_level[r.split.value_or("all")][*r.level].push_back(&r);
    }
    auto overall = tally(all);
    MetricsSummary m;
    m.tasks = overall.tasks;
    m.templates = overall.templates;
    m.successes = static_cast<std::size_t>(std::count_if(all.begin(), all.end(), [](const TaskResult* r) {
        return r->status == TaskStatus::success;
    }));
    m.task_completion_rate = overall.task_goal_completion;
    m.scenario_completion_rate = overall.scenario_goal_completion;
    m.avg_interactions = overall.avg_interactions;
    for (const auto& [s, rs] : by_split) m.per_split[s] = tally(rs);
    for (const auto& [s, levels] : by_level) {
        for (const auto& [l, rs] : levels) m.per_level[s][l] = tally(rs);
    }
    return m;
}

Value ComparisonReport::to_json() const {
    return Value{{"base_run", base_run},
                 {"new_run", new_run},
                 {"resolved", resolved},
                 {"regressed", regressed},
                 {"newly_covered", newly_covered},
                 {"persistent_failures", persistent_failures},
                 {"persistent_passes", persistent_passes},
                 {"dropped", dropped}};
}

ComparisonReport compare_runs(const RunRecord& base, const RunRecord& next) {
    ComparisonReport r;
    r.base_run = base.run_id;
    r.new_run = next.run_id;
    for (const auto& [id, now] : next.results) {
        const bool pass = now.status == TaskStatus::success;
        auto before = base.results.find(id);
        if (before == base.results.end()) {
            r.newly_covered.insert(id);
            continue;
        }
        const bool was = before->second.status == TaskStatus::success;
        if (was && pass) r.persistent_passes.insert(id);
        else if (was) r.regressed.insert(id);
        else if (pass) r.resolved.insert(id);
        else r.persistent_failures.insert(id);
    }
    for (const auto& [id, _] : base.results) {
        if (!next.results.count(id)) r.dropped.insert(id);
    }
    return r;
}

std::string utc_timestamp() {
    auto now = std::chrono::system_clock::now();
    auto t = std::chrono::system_clock::to_time_t(now);
    auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
    char out[48];
    std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms));
    return out;
}

RunRecord run_benchmark(const std::vector<ManifestTask>& tasks, const World& world, const SampleSpec& sample,
                        const BenchmarkOptions& options) {
    if (options.workers < 1) throw ConfigError("workers must be at least 1");
    std::set<std::string> ids;
    for (const auto& t : tasks) {
        if (!ids.insert(t.task.id).second) throw ConfigError("duplicate task id " + t.task.id);
    }
    RunRecord run;
    run.run_id = options.run_id;
    run.agent_version = options.agent_version;
    run.sample = sample;
    run.started_at = utc_timestamp();

    KnowledgeStore knowledge;
    premine(world, knowledge, options.config.sitemap_budget);

    std::vector<TaskResult> results(tasks.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        WorldInstance instance(world, &knowledge, options.trajectories, options.config);
        for (std::size_t i = next++; i < tasks.size(); i = next++) {
            const auto& mt = tasks[i];
            TaskResult r;
            r.template_id = mt.template_id;
            r.level = mt.level;
            r.split = mt.split;
            const auto start = std::chrono::steady_clock::now();
            try {
                if (options.crash_tasks.count(mt.task.id)) throw std::runtime_error("injected crash");
                auto out = run_task(mt.task, instance.env(), options.run_id);
                r.steps = out.steps;
                const bool answered = out.completed && out.final_answer.find(mt.expected) != std::string::npos;
                r.status = answered ? TaskStatus::success : TaskStatus::failure;
                if (!out.completed) r.note = out.abort_reason.value_or("aborted");
                else if (!answered) r.note = "unexpected answer";
            } catch (const std::exception& e) {
                r.status = TaskStatus::error;
                r.note = e.what();
            }
            r.duration_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
            results[i] = std::move(r);
        }
    };
    const auto n = std::min<std::size_t>(static_cast<std::size_t>(options.workers), std::max<std::size_t>(tasks.size(), 1));
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < n; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    for (std::size_t i = 0; i < tasks.size(); ++i) run.results[tasks[i].task.id] = std::move(results[i]);
    run.finished_at = utc_timestamp();
    return run;
}

RunStore::RunStore(std::filesystem::path root) : root_(std::move(root)) { std::filesystem::create_directories(root_); }

void RunStore::save(const RunRecord& run) {
    if (run.run_id.empty()) throw ConfigError("run id is empty");
    std::lock_guard lock(mu_);
    auto dir = root_ / safe_file_name(run.run_id);
    std::filesystem::create_directories(dir);
    write_atomic(dir / "run.json", run.to_json().dump(1) + "\n");
    cache_[run.run_id] = run;
}

RunRecord RunStore::load(const std::string& run_id) const {
    std::lock_guard lock(mu_);
    if (auto it = cache_.find(run_id); it != cache_.end()) return it->second;
    auto path = root_ / safe_file_name(run_id) / "run.json";
    if (!std::filesystem::exists(path)) throw UnknownRunError("unknown run " + run_id);
    auto run = RunRecord::from_json(read_json(path));
    cache_[run_id] = run;
    return run;
}

bool RunStore::exists(const std::string& run_id) const {
    return std::filesystem::exists(root_ / safe_file_name(run_id) / "run.json");
}

std::vector<std::string> RunStore::run_ids() const {
    std::vector<std::string> out;
    for (const auto& e : std::filesystem::directory_iterator(root_)) {
        if (e.is_directory() && std::filesystem::exists(e.path() / "run.json")) {
            out.push_back(from_safe_file_name(e.path().filename().string()));
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

Value ErrorClassification::to_json() const {
    return Value{{"run_id", run_id}, {"task_id", task_id}, {"label", label},
                 {"note", note},     {"author", author},   {"created_at", created_at}};
}

ErrorClassification ErrorClassification::from_json(const Value& j) {
    ErrorClassification c;
    c.run_id = j.at("run_id").get<std::string>();
    c.task_id = j.at("task_id").get<std::string>();
    c.label = j.at("label").get<std::string>();
    c.note = j.value("note", "");
    c.author = j.value("author", "");
    c.created_at = j.value("created_at", "");
    return c;
}

std::vector<std::string> default_taxonomy() {
    return {"grounding-failure", "popup-obstruction", "shortlist-miss",   "variable-loss",
            "reflection-miss",   "plan-error",        "extraction-error", "harness-error"};
}

ClassificationStore::ClassificationStore(const RunStore& runs, std::vector<std::string> taxonomy)
    : runs_(runs), taxonomy_(std::move(taxonomy)) {
    if (taxonomy_.empty()) throw ConfigError("taxonomy is empty");
}

ErrorClassification ClassificationStore::record(ErrorClassification c) {
    if (c.label.empty()) throw Error("label is empty");
    if (std::find(taxonomy_.begin(), taxonomy_.end(), c.label) == taxonomy_.end()) {
        throw Error("label '" + c.label + "' is not in the taxonomy");
    }
    auto run = runs_.load(c.run_id);
    if (!run.results.count(c.task_id)) throw UnknownTaskError("run " + c.run_id + " has no task " + c.task_id);
    c.created_at = utc_timestamp();
    std::lock_guard lock(mu_);
    std::ofstream out(runs_.root() / safe_file_name(c.run_id) / "classifications.jsonl", std::ios::app);
    out << c.to_json().dump() << "\n";
    out.flush();
    return c;
}

std::vector<ErrorClassification> ClassificationStore::list(const std::string& run_id) const {
    if (!runs_.exists(run_id)) throw UnknownRunError("unknown run " + run_id);
    std::lock_guard lock(mu_);
    std::vector<ErrorClassification> out;
    std::ifstream in(runs_.root() / safe_file_name(run_id) / "classifications.jsonl");
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            out.push_back(ErrorClassification::from_json(Value::parse(line)));
        } catch (const Value::exception&) {
            // torn last line
        }
    }
    return out;
}

}  // namespace planex
