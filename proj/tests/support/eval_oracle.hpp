#pragma once

// Independent reference computations for run metrics and run comparison,
// plus a generator of random runs. Deliberately written without the library's
// helpers: plain counting and std set algorithms.

#include "planex/eval.hpp"

#include <algorithm>
#include <iterator>
#include <random>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

namespace oracle {

struct Tally {
    double task_rate = 0;
    double scenario_rate = 0;
    double avg_steps = 0;
};

inline Tally tally(const planex::RunRecord& run) {
    std::unordered_map<std::string, int> failures_per_template;
    long passed = 0, steps = 0;
    for (const auto& entry : run.results) {
        const auto& r = entry.second;
        const int fail = r.status == planex::TaskStatus::success ? 0 : 1;
        passed += 1 - fail;
        steps += r.steps;
        failures_per_template[r.template_id] += fail;
    }
    long clean = 0;
    for (const auto& kv : failures_per_template) clean += kv.second == 0;
    const double n = static_cast<double>(run.results.size());
    return Tally{100.0 * passed / n, 100.0 * clean / static_cast<double>(failures_per_template.size()), steps / n};
}

struct Buckets {
    std::set<std::string> resolved, regressed, newly_covered, persistent_failures, persistent_passes, dropped;
};

inline Buckets compare(const planex::RunRecord& base, const planex::RunRecord& next) {
    auto ids_where = [](const planex::RunRecord& r, int want) {
        std::set<std::string> out;
        for (const auto& [id, res] : r.results) {
            const int pass = res.status == planex::TaskStatus::success;
            if (want < 0 || want == pass) out.insert(id);
        }
        return out;
    };
    auto inter = [](const std::set<std::string>& a, const std::set<std::string>& b) {
        std::set<std::string> out;
        std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::inserter(out, out.end()));
        return out;
    };
    auto minus = [](const std::set<std::string>& a, const std::set<std::string>& b) {
        std::set<std::string> out;
        std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::inserter(out, out.end()));
        return out;
    };
    const auto base_all = ids_where(base, -1), base_pass = ids_where(base, 1), base_fail = ids_where(base, 0);
    const auto new_all = ids_where(next, -1), new_pass = ids_where(next, 1), new_fail = ids_where(next, 0);
    Buckets b;
    b.resolved = inter(base_fail, new_pass);
    b.regressed = inter(base_pass, new_fail);
    b.newly_covered = minus(new_all, base_all);
    b.persistent_failures = inter(base_fail, new_fail);
    b.persistent_passes = inter(base_pass, new_pass);
    b.dropped = minus(base_all, new_all);
    return b;
}

// A run over a random subset of a shared id space "t0".."t{space-1}".
inline planex::RunRecord random_run(std::mt19937_64& rng, const std::string& run_id, std::size_t tasks, std::size_t space,
                                    std::size_t templates) {
    std::vector<std::size_t> ids(space);
    for (std::size_t i = 0; i < space; ++i) ids[i] = i;
    std::shuffle(ids.begin(), ids.end(), rng);
    planex::RunRecord run;
    run.run_id = run_id;
    run.sample = planex::SampleSpec{planex::SampleName::full, tasks, planex::Selection::all_tasks, 0};
    std::uniform_int_distribution<int> status(0, 2), steps(0, 30);
    for (std::size_t i = 0; i < tasks; ++i) {
        planex::TaskResult r;
        const int s = status(rng);
        r.status = s == 0 ? planex::TaskStatus::success : s == 1 ? planex::TaskStatus::failure : planex::TaskStatus::error;
        if (status(rng) == 0) r.status = planex::TaskStatus::success;
        r.steps = steps(rng);
        r.template_id = "tpl" + std::to_string(ids[i] % templates);
        run.results["t" + std::to_string(ids[i])] = r;
    }
    return run;
}

}  // namespace oracle
