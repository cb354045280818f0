#include "planex/errors.hpp"
#include "planex/eval.hpp"
#include "planex/insight.hpp"
#include "planex/orchestrator.hpp"
#include "planex/registry.hpp"
#include "planex/world.hpp"

#include "CLI11.hpp"

#include <csignal>
#include <fstream>
#include <iostream>
#include <thread>

using namespace planex;

namespace {

Value read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path);
    return Value::parse(in);
}

RunRecord load_run(const std::string& store, const std::string& ref) {
    if (std::filesystem::is_regular_file(ref)) return RunRecord::from_json(read_json(ref));
    return RunStore(store).load(ref);
}

std::shared_ptr<Backend> backend_from(const std::string& endpoint, const std::string& model, const std::string& script) {
    if (endpoint.empty()) {
        if (script.empty()) return nullptr;
        return std::make_shared<ScriptedBackend>(ScriptedBackend::from_file(script));
    }
    BackendConfig cfg;
    cfg.kind = BackendConfig::Kind::remote_chat;
    cfg.endpoint = endpoint;
    if (!model.empty()) cfg.model_name = model;
    cfg.validate();
    return make_backend(cfg);
}

volatile std::sig_atomic_t g_stop = 0;

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"planex agent runner"};
    app.require_subcommand(1);
    std::string data_dir = PLANEX_DATA_DIR;
    std::string store = "runs";
    app.add_option("--data", data_dir, "directory with world/ and manifest/")->capture_default_str();
    app.add_option("--store", store, "run store directory")->capture_default_str();

    // run a benchmark sample
    auto* run = app.add_subcommand("run", "run a benchmark sample over the simulated world");
    std::string sample_name = "nano", run_id, manifest_path;
    std::uint64_t seed = 0;
    int workers = 1;
    run->add_option("--sample", sample_name, "initial, nano, micro, mini or full")->capture_default_str();
    run->add_option("--seed", seed)->capture_default_str();
    run->add_option("--workers", workers)->capture_default_str();
    run->add_option("--run-id", run_id);
    run->add_option("--manifest", manifest_path, "defaults to <data>/manifest/tasks_812.json");

    // run one task
    auto* task_cmd = app.add_subcommand("task", "run a single task document and print the outcome");
    std::string task_file, endpoint, model, script;
    task_cmd->add_option("file", task_file)->required();
    task_cmd->add_option("--endpoint", endpoint, "chat-completion URL; scripted replay when empty");
    task_cmd->add_option("--model", model);
    task_cmd->add_option("--script", script, "reasoner script instead of the world's");

    auto* metrics = app.add_subcommand("metrics", "completion metrics of a stored run or run file");
    std::string metrics_ref;
    metrics->add_option("run", metrics_ref)->required();

    auto* compare = app.add_subcommand("compare", "compare two runs");
    std::string base_ref, new_ref;
    compare->add_option("base", base_ref)->required();
    compare->add_option("new", new_ref)->required();

    auto* serve = app.add_subcommand("serve", "serve the run store over HTTP");
    int port = 8080;
    std::string host = "127.0.0.1";
    serve->add_option("--port", port)->capture_default_str();
    serve->add_option("--host", host)->capture_default_str();

    auto* registry = app.add_subcommand("registry", "ingest OpenAPI documents");
    registry->require_subcommand(1);
    auto* ingest = registry->add_subcommand("ingest", "ingest documents and print the minimized tools");
    std::vector<std::string> specs;
    std::string base_url = "http://localhost";
    ingest->add_option("specs", specs, "OpenAPI JSON files; the app id is the file stem")->required();
    ingest->add_option("--base-url", base_url)->capture_default_str();
    auto* search = registry->add_subcommand("search", "search tools across documents");
    std::string query;
    std::size_t k = 5;
    search->add_option("query", query)->required();
    search->add_option("specs", specs)->required();
    search->add_option("-k", k)->capture_default_str();

    auto* replay = app.add_subcommand("replay", "print the stored trajectory of one task");
    std::string replay_run, replay_task;
    replay->add_option("run", replay_run)->required();
    replay->add_option("task", replay_task)->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            auto manifest = Manifest::load(manifest_path.empty() ? data_dir + "/manifest/tasks_812.json" : manifest_path);
            auto spec = SampleSpec::ladder(sample_name_from_string(sample_name), seed);
            auto tasks = draw_sample(manifest, spec);
            auto world = load_world(data_dir + "/world");
            TrajectoryStore trajectories(store);
            BenchmarkOptions opt;
            opt.workers = workers;
            opt.run_id = run_id.empty() ? sample_name + "-" + std::to_string(seed) : run_id;
            opt.trajectories = &trajectories;
            auto record = run_benchmark(tasks, world, spec, opt);
            RunStore(store).save(record);
            auto m = compute_metrics(record);
            std::cout << record.run_id << ": " << m.successes << "/" << m.tasks << " tasks, "
                      << m.task_completion_rate << "% task, " << m.scenario_completion_rate << "% scenario\n";
        } else if (*task_cmd) {
            auto world = load_world(data_dir + "/world");
            KnowledgeStore knowledge;
            premine(world, knowledge);
            TrajectoryStore trajectories(store);
            WorldInstance inst(world, &knowledge, &trajectories, {}, backend_from(endpoint, model, script));
            auto task = Task::from_json(read_json(task_file));
            auto out = run_task(task, inst.env(), "adhoc");
            Value doc{{"task_id", out.task_id}, {"completed", out.completed}, {"final_answer", out.final_answer},
                      {"steps", out.steps}, {"variables", out.state.variables.to_json()}};
            if (out.abort_reason) doc["abort_reason"] = *out.abort_reason;
            std::cout << doc.dump(2) << "\n";
            return out.completed ? 0 : 2;
        } else if (*metrics) {
            std::cout << compute_metrics(load_run(store, metrics_ref)).to_json().dump(2) << "\n";
        } else if (*compare) {
            std::cout << compare_runs(load_run(store, base_ref), load_run(store, new_ref)).to_json().dump(2) << "\n";
        } else if (*serve) {
            RunStore runs(store);
            TrajectoryStore trajectories(store);
            ClassificationStore labels(runs);
            InsightService svc(runs, labels, trajectories);
            std::signal(SIGINT, [](int) { g_stop = 1; });
            std::signal(SIGTERM, [](int) { g_stop = 1; });
            int bound = svc.start(port, host);
            std::cout << "listening on http://" << host << ":" << bound << std::endl;
            while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(200));
            svc.stop();
        } else if (*registry) {
            Registry reg;
            for (const auto& path : specs) {
                auto stem = std::filesystem::path(path).stem().string();
                reg.ingest_spec(read_json(path).dump(), stem, base_url);
            }
            if (*ingest) {
                std::cout << reg.export_text();
            } else {
                for (const auto& hit : reg.search(query, std::optional<std::string>{}, k)) {
                    std::cout << hit.tool_id << "\t" << hit.score << "\t" << hit.snippet << "\n";
                }
            }
        } else if (*replay) {
            TrajectoryStore trajectories(store);
            for (const auto& e : trajectories.load(replay_run, replay_task)) std::cout << e.to_json().dump() << "\n";
        }
    } catch (const Error& e) {
        std::cerr << e.kind() << ": " << e.what() << "\n";
        return 1;
    }
    return 0;
}
