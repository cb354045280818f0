#pragma once

#include "planex/browser.hpp"
#include "planex/reasoner.hpp"
#include "planex/registry.hpp"
#include "planex/task.hpp"

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

namespace planex {

struct RefinedIntent {
    enum class Quality { clear, paraphrased, ambiguous };

    std::string original;
    std::string refined;
    Quality quality = Quality::clear;
    std::optional<std::string> notes;
};

std::string_view to_string(RefinedIntent::Quality q);

// Capitalized tokens and numbers of an utterance.
std::vector<std::string> named_entities(std::string_view utterance);

// Reasoner-assessed utterance quality. A paraphrase that drops a named
// entity is rejected and the original is kept (quality clear).
RefinedIntent assess_and_paraphrase(const std::string& utterance, ReasonerGateway& reasoner,
                                    const std::string& task_id = "");

struct NavigationNode {
    std::string url;
    std::string title;
    std::vector<std::string> links;  // outgoing link labels

    friend bool operator==(const NavigationNode&, const NavigationNode&) = default;
};

struct NavigationKnowledge {
    std::string app_id;
    std::vector<NavigationNode> nodes;
    long mined_at_seq = 0;
    int budget_used = 0;

    Value to_json() const;
    static NavigationKnowledge from_json(const Value& j);
};

std::string origin_of(const std::string& url);

// Breadth-first over link elements, reading link targets from the element
// value. Visits at most `budget` pages of the entry's origin.
NavigationKnowledge mine_sitemap(const std::string& app_id, const std::string& app_entry, BrowserDriver& driver, int budget);

// Knowledge persisted as one JSON document per app under `dir`.
class KnowledgeStore {
public:
    KnowledgeStore() = default;
    explicit KnowledgeStore(std::filesystem::path dir);

    void put(const NavigationKnowledge& k);
    std::optional<NavigationKnowledge> get(const std::string& app_id) const;
    std::vector<std::string> app_ids() const;

private:
    std::optional<std::filesystem::path> dir_;
    mutable std::shared_mutex mu_;
    std::map<std::string, NavigationKnowledge> cache_;
};

struct ContextBundle {
    enum class Provenance { sitemap, registry, utterance_notes };

    std::vector<ContextFragment> fragments;
    std::vector<Provenance> provenance;

    std::size_t total_size() const;
    Value to_json() const;
};

inline constexpr std::size_t kContextCharBudget = 4000;

ContextBundle enrich(const RefinedIntent& intent, const Task& task, const KnowledgeStore& knowledge,
                     const Registry* registry, std::size_t char_budget = kContextCharBudget);

// Lexical overlap between a sitemap node and an intent, used for ranking.
int sitemap_overlap(const NavigationNode& node, const std::string& intent);

}  // namespace planex
