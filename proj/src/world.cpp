#include "planex/world.hpp"

#include "planex/errors.hpp"

#include <algorithm>
#include <fstream>

namespace planex {

namespace {

Value read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read " + path.string());
    try {
        return Value::parse(in);
    } catch (const Value::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

std::vector<std::filesystem::path> json_files(const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> out;
    if (!std::filesystem::is_directory(dir)) return out;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        if (e.path().extension() == ".json") out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

World load_world(const std::filesystem::path& dir) {
    World w;
    for (const auto& p : json_files(dir / "apps")) w.apps[p.stem().string()] = read_json(p);
    for (const auto& p : json_files(dir / "sites")) {
        auto site = SiteGraph::from_json(read_json(p));
        w.sites.emplace(site.site, std::move(site));
    }
    if (std::filesystem::exists(dir / "script.json")) w.script = read_json(dir / "script.json");
    if (w.apps.empty() && w.sites.empty()) throw ConfigError("world at " + dir.string() + " is empty");
    return w;
}

void premine(const World& world, KnowledgeStore& store, int budget) {
    for (const auto& [id, site] : world.sites) {
        SimBrowser driver(site);
        store.put(mine_sitemap(id, site.page(site.entry).url, driver, budget));
    }
}

WorldInstance::WorldInstance(const World& world, KnowledgeStore* knowledge, TrajectoryStore* trajectories,
                             RunnerConfig config, std::shared_ptr<Backend> backend)
    : reasoner_(backend ? std::move(backend) : std::make_shared<ScriptedBackend>(world.script)) {
    for (const auto& [id, doc] : world.apps) server_.add_app(id, doc);
    server_.start();
    for (const auto& [id, doc] : world.apps) registry_.ingest_spec(doc.dump(), id, server_.base_url(id));
    env_.registry = &registry_;
    env_.reasoner = &reasoner_;
    env_.knowledge = knowledge;
    env_.trajectories = trajectories;
    env_.sites = world.sites;
    env_.config = config;
}

WorldInstance::~WorldInstance() { server_.stop(); }

}  // namespace planex
