#pragma once

#include "planex/context.hpp"
#include "planex/mock_server.hpp"
#include "planex/orchestrator.hpp"
#include "planex/reasoner.hpp"
#include "planex/registry.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <string>

namespace planex {

// Bundled simulated world: OpenAPI apps served by a mock server, browsable
// sites, and a reasoner script.
//
//   <dir>/apps/<app_id>.json    OpenAPI documents
//   <dir>/sites/<site>.json     SiteGraph documents, keyed by their "site"
//   <dir>/script.json           ScriptedBackend document
struct World {
    std::map<std::string, Value> apps;
    std::map<std::string, SiteGraph> sites;
    Value script;
};

World load_world(const std::filesystem::path& dir);

// Mines every site of the world into `store`.
void premine(const World& world, KnowledgeStore& store, int budget = 10);

// One isolated, running copy of a world: its own mock server, registry and
// scripted reasoner. Stores are shared and owned by the caller.
class WorldInstance {
public:
    WorldInstance(const World& world, KnowledgeStore* knowledge, TrajectoryStore* trajectories, RunnerConfig config = {},
                  std::shared_ptr<Backend> backend = nullptr);
    ~WorldInstance();
    WorldInstance(const WorldInstance&) = delete;
    WorldInstance& operator=(const WorldInstance&) = delete;

    Environment& env() { return env_; }
    MockAppServer& server() { return server_; }
    Registry& registry() { return registry_; }
    ReasonerGateway& reasoner() { return reasoner_; }

private:
    MockAppServer server_;
    Registry registry_;
    ReasonerGateway reasoner_;
    Environment env_;
};

}  // namespace planex
