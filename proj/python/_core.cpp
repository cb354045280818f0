// Thin binding layer. Structured values cross the boundary as JSON text;
// the Python package converts them to and from plain objects.

#include "planex/errors.hpp"
#include "planex/eval.hpp"
#include "planex/orchestrator.hpp"
#include "planex/step_program.hpp"
#include "planex/world.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <fstream>

namespace py = pybind11;
using namespace planex;

namespace {

class NoTools : public ToolInvoker {
public:
    ToolResponse invoke(const std::string& tool_id, const Value&) override { throw UnknownToolError(tool_id); }
};

std::string run_world_task(const std::string& world_dir, const std::string& task_json, const std::string& run_id) {
    auto world = load_world(world_dir);
    KnowledgeStore knowledge;
    premine(world, knowledge);
    WorldInstance inst(world, &knowledge, nullptr);
    auto out = run_task(Task::from_json(Value::parse(task_json)), inst.env(), run_id);
    Value events = Value::array();
    for (const auto& e : out.events) events.push_back(e.to_json());
    Value doc{{"task_id", out.task_id},
              {"completed", out.completed},
              {"final_answer", out.final_answer},
              {"steps", out.steps},
              {"variables", out.state.variables.to_json()},
              {"events", events}};
    doc["abort_reason"] = out.abort_reason ? Value(*out.abort_reason) : Value();
    return doc.dump();
}

std::string run_sample(const std::string& data_dir, const std::string& sample, std::uint64_t seed, int workers,
                       const std::string& run_id) {
    auto manifest = Manifest::load(data_dir + "/manifest/tasks_812.json");
    auto spec = SampleSpec::ladder(sample_name_from_string(sample), seed);
    BenchmarkOptions opt;
    opt.workers = workers;
    opt.run_id = run_id;
    py::gil_scoped_release release;
    return run_benchmark(draw_sample(manifest, spec), load_world(data_dir + "/world"), spec, opt).to_json().dump();
}

std::vector<std::string> sample_ids(const std::string& manifest_path, const std::string& sample, std::uint64_t seed) {
    std::vector<std::string> out;
    for (const auto& t : draw_sample(Manifest::load(manifest_path), SampleSpec::ladder(sample_name_from_string(sample), seed))) {
        out.push_back(t.task.id);
    }
    return out;
}

std::string metrics(const std::string& run_json) {
    return compute_metrics(RunRecord::from_json(Value::parse(run_json))).to_json().dump();
}

std::string compare(const std::string& base_json, const std::string& new_json) {
    return compare_runs(RunRecord::from_json(Value::parse(base_json)), RunRecord::from_json(Value::parse(new_json)))
        .to_json()
        .dump();
}

std::string execute(const std::string& source, const std::string& variables_json) {
    std::vector<Variable> vars;
    const auto given = Value::parse(variables_json);
    for (const auto& [k, v] : given.items()) vars.push_back(Variable::make(k, v));
    NoTools tools;
    auto r = execute_program(parse_program(source), VariableStore(vars), tools);
    Value returned = Value::object();
    for (const auto& v : r.returned) returned[v.name] = v.value;
    Value doc{{"status", to_string(r.status)}, {"returned", returned}};
    doc["diagnostic"] = r.diagnostic ? Value(*r.diagnostic) : Value();
    return doc.dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "planex native core";

    // errors keep their kind name on the Python side
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::set_error(PyExc_RuntimeError, (std::string(e.kind()) + ": " + e.what()).c_str());
        } catch (const Value::exception& e) {
            py::set_error(PyExc_ValueError, e.what());
        }
    });

    m.def("run_world_task", &run_world_task, py::arg("world_dir"), py::arg("task_json"), py::arg("run_id") = "adhoc");
    m.def("run_sample", &run_sample, py::arg("data_dir"), py::arg("sample"), py::arg("seed") = 0, py::arg("workers") = 1,
          py::arg("run_id") = "run");
    m.def("sample_ids", &sample_ids, py::arg("manifest_path"), py::arg("sample"), py::arg("seed") = 0);
    m.def("metrics", &metrics, py::arg("run_json"));
    m.def("compare", &compare, py::arg("base_json"), py::arg("new_json"));
    m.def("execute", &execute, py::arg("source"), py::arg("variables_json") = "{}");
}
