#include "planex/context.hpp"

#include "planex/errors.hpp"

#include <algorithm>
#include <cctype>
#include <deque>
#include <fstream>
#include <set>

namespace planex {

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::vector<std::string> raw_tokens(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        if (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-') {
            cur.push_back(c);
        } else if (!cur.empty()) {
            out.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(cur);
    for (auto& t : out) {
        while (!t.empty() && (t.back() == '.' || t.back() == '-')) t.pop_back();
    }
    out.erase(std::remove(out.begin(), out.end(), std::string()), out.end());
    return out;
}

std::string page_title(const PageContent& content) {
    std::size_t start = 0;
    while (start < content.markdown.size()) {
        auto end = content.markdown.find('\n', start);
        if (end == std::string::npos) end = content.markdown.size();
        auto line = content.markdown.substr(start, end - start);
        if (line.rfind("# ", 0) == 0) return line.substr(2);
        start = end + 1;
    }
    return content.url;
}

}  // namespace

std::string_view to_string(RefinedIntent::Quality q) {
    switch (q) {
        case RefinedIntent::Quality::clear: return "clear";
        case RefinedIntent::Quality::paraphrased: return "paraphrased";
        case RefinedIntent::Quality::ambiguous: return "ambiguous";
    }
    return "?";
}

std::vector<std::string> named_entities(std::string_view utterance) {
    std::vector<std::string> out;
    for (const auto& t : raw_tokens(utterance)) {
        bool cap = std::isupper(static_cast<unsigned char>(t[0]));
        bool digit = std::any_of(t.begin(), t.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
        if (cap || digit) out.push_back(t);
    }
    return out;
}

RefinedIntent assess_and_paraphrase(const std::string& utterance, ReasonerGateway& reasoner, const std::string& task_id) {
    if (utterance.find_first_not_of(" \t\r\n") == std::string::npos) throw EmptyUtteranceError("utterance is empty");
    PromptBundle b;
    b.agent = "context";
    b.task_id = task_id;
    b.role_preamble = "You review user requests before planning.";
    b.instructions =
        "Rate the request as clear, paraphrased or ambiguous. For paraphrased, rewrite it as a complete question keeping "
        "every name and number. For ambiguous, explain what is missing in notes.";
    b.add("utterance", utterance);
    b.output_schema = Value::parse(R"({"type":"object","properties":{"quality":{"enum":["clear","paraphrased","ambiguous"]},
        "refined":{"type":"string"},"notes":{"type":"string"}},"required":["quality"]})");
    auto out = reasoner.complete(b).structured_value;

    RefinedIntent r;
    r.original = utterance;
    r.refined = utterance;
    const auto q = out["quality"].get<std::string>();
    if (q == "ambiguous") {
        r.quality = RefinedIntent::Quality::ambiguous;
        auto notes = out.value("notes", "");
        r.notes = notes.empty() ? "request is ambiguous" : notes;
        return r;
    }
    if (q == "paraphrased") {
        auto refined = out.value("refined", "");
        auto refined_tokens = raw_tokens(lower(refined));
        std::set<std::string> have(refined_tokens.begin(), refined_tokens.end());
        std::vector<std::string> missing;
        for (const auto& e : named_entities(utterance)) {
            if (!have.count(lower(e))) missing.push_back(e);
        }
        if (!refined.empty() && missing.empty()) {
            r.quality = RefinedIntent::Quality::paraphrased;
            r.refined = refined;
            return r;
        }
        r.notes = refined.empty() ? "empty paraphrase discarded" : "paraphrase dropped " + missing.front();
    }
    r.quality = RefinedIntent::Quality::clear;
    return r;
}

Value NavigationKnowledge::to_json() const {
    Value nodes_json = Value::array();
    for (const auto& n : nodes) nodes_json.push_back({{"url", n.url}, {"title", n.title}, {"links", n.links}});
    return Value{{"app_id", app_id}, {"nodes", nodes_json}, {"mined_at_seq", mined_at_seq}, {"budget_used", budget_used}};
}

NavigationKnowledge NavigationKnowledge::from_json(const Value& j) {
    NavigationKnowledge k;
    k.app_id = j.at("app_id").get<std::string>();
    for (const auto& n : j.at("nodes")) {
        k.nodes.push_back(NavigationNode{n.at("url").get<std::string>(), n.value("title", ""),
                                         n.value("links", std::vector<std::string>{})});
    }
    k.mined_at_seq = j.value("mined_at_seq", 0L);
    k.budget_used = j.value("budget_used", 0);
    return k;
}

std::string origin_of(const std::string& url) {
    auto scheme = url.find("://");
    if (scheme == std::string::npos) return "";
    auto slash = url.find('/', scheme + 3);
    return slash == std::string::npos ? url : url.substr(0, slash);
}

NavigationKnowledge mine_sitemap(const std::string& app_id, const std::string& app_entry, BrowserDriver& driver, int budget) {
    if (budget < 1) throw Error("sitemap budget must be at least 1");
    if (!driver.is_open()) throw SessionClosedError("browser session is closed");
    const auto origin = origin_of(app_entry);
    NavigationKnowledge k;
    k.app_id = app_id;
    std::deque<std::string> queue{app_entry};
    std::set<std::string> seen{app_entry};
    while (!queue.empty() && k.budget_used < budget) {
        auto url = queue.front();
        queue.pop_front();
        driver.navigate(url);
        auto obs = driver.snapshot();
        ++k.budget_used;
        k.mined_at_seq = obs.capture_seq;
        NavigationNode node;
        node.url = obs.url;
        node.title = page_title(driver.page_content());
        for (const auto& n : obs.ax_tree) {
            if (n.role != "link" || n.parent) continue;
            node.links.push_back(n.name);
            if (!n.value || origin_of(*n.value) != origin) continue;
            if (seen.insert(*n.value).second) queue.push_back(*n.value);
        }
        k.nodes.push_back(std::move(node));
    }
    return k;
}

KnowledgeStore::KnowledgeStore(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(*dir_);
    for (const auto& entry : std::filesystem::directory_iterator(*dir_)) {
        if (entry.path().extension() != ".json") continue;
        std::ifstream in(entry.path());
        try {
            auto k = NavigationKnowledge::from_json(Value::parse(in));
            cache_[k.app_id] = std::move(k);
        } catch (const Value::exception&) {
            // unreadable entries are re-mined on demand
        }
    }
}

void KnowledgeStore::put(const NavigationKnowledge& k) {
    std::unique_lock lock(mu_);
    cache_[k.app_id] = k;
    if (!dir_) return;
    auto path = *dir_ / (safe_file_name(k.app_id) + ".json");
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp);
        out << k.to_json().dump(2) << "\n";
    }
    std::filesystem::rename(tmp, path);
}

std::optional<NavigationKnowledge> KnowledgeStore::get(const std::string& app_id) const {
    std::shared_lock lock(mu_);
    auto it = cache_.find(app_id);
    if (it == cache_.end()) return std::nullopt;
    return it->second;
}

std::vector<std::string> KnowledgeStore::app_ids() const {
    std::shared_lock lock(mu_);
    std::vector<std::string> out;
    for (const auto& [k, _] : cache_) out.push_back(k);
    return out;
}

std::size_t ContextBundle::total_size() const {
    std::size_t n = 0;
    for (const auto& f : fragments) n += f.label.size() + f.text.size();
    return n;
}

Value ContextBundle::to_json() const {
    Value j = Value::array();
    for (std::size_t i = 0; i < fragments.size(); ++i) {
        const char* p = provenance[i] == Provenance::sitemap ? "sitemap"
                        : provenance[i] == Provenance::registry ? "registry"
                                                                 : "utterance_notes";
        j.push_back({{"label", fragments[i].label}, {"text", fragments[i].text}, {"provenance", p}});
    }
    return j;
}

int sitemap_overlap(const NavigationNode& node, const std::string& intent) {
    std::string text = node.title;
    for (const auto& l : node.links) text += " " + l;
    auto a = index_terms(text);
    auto b = index_terms(intent);
    std::set<std::string> sa(a.begin(), a.end());
    std::set<std::string> sb(b.begin(), b.end());
    int n = 0;
    for (const auto& t : sb) n += static_cast<int>(sa.count(t));
    return n;
}

ContextBundle enrich(const RefinedIntent& intent, const Task& task, const KnowledgeStore& knowledge,
                     const Registry* registry, std::size_t char_budget) {
    struct Candidate {
        ContextFragment fragment;
        ContextBundle::Provenance provenance;
        int overlap;
        std::size_t order;
    };
    std::vector<Candidate> candidates;
    std::set<std::pair<std::string, std::string>> seen;
    auto add = [&](std::string label, std::string text, ContextBundle::Provenance p, int overlap) {
        if (!seen.insert({label, sha256_hex(text)}).second) return;
        candidates.push_back(Candidate{{std::move(label), std::move(text)}, p, overlap, candidates.size()});
    };

    if (registry) {
        std::string titles;
        for (const auto& app : task.apps_in_scope) {
            if (auto m = registry->manifest(app)) {
                titles += app + ": " + m->title;
                if (!m->description.empty()) titles += " - " + m->description;
                titles += "\n";
            }
        }
        if (!titles.empty()) add("applications", titles, ContextBundle::Provenance::registry, 0);
    }
    std::vector<Candidate> sitemap;
    for (const auto& app : task.apps_in_scope) {
        auto k = knowledge.get(app);
        if (!k) continue;
        for (const auto& node : k->nodes) {
            int overlap = sitemap_overlap(node, intent.refined);
            if (overlap == 0) continue;
            std::string text = "page \"" + node.title + "\" at " + node.url;
            if (!node.links.empty()) {
                text += " links:";
                for (const auto& l : node.links) text += " [" + l + "]";
            }
            add("sitemap:" + app, text, ContextBundle::Provenance::sitemap, overlap);
        }
    }
    if (intent.notes) add("utterance_notes", *intent.notes, ContextBundle::Provenance::utterance_notes, 0);

    auto size_of = [](const std::vector<Candidate>& cs) {
        std::size_t n = 0;
        for (const auto& c : cs) n += c.fragment.label.size() + c.fragment.text.size();
        return n;
    };
    // drop lowest-overlap sitemap fragments first, later ones before earlier ones on ties
    while (size_of(candidates) > char_budget) {
        auto victim = candidates.end();
        for (auto it = candidates.begin(); it != candidates.end(); ++it) {
            if (it->provenance != ContextBundle::Provenance::sitemap) continue;
            if (victim == candidates.end() || it->overlap < victim->overlap ||
                (it->overlap == victim->overlap && it->order > victim->order)) {
                victim = it;
            }
        }
        if (victim == candidates.end()) victim = candidates.end() - 1;
        candidates.erase(victim);
    }
    std::stable_sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
        auto rank = [](const Candidate& c) { return c.provenance == ContextBundle::Provenance::registry ? 0
                                                    : c.provenance == ContextBundle::Provenance::sitemap ? 1
                                                                                                          : 2; };
        if (rank(a) != rank(b)) return rank(a) < rank(b);
        if (a.overlap != b.overlap) return a.overlap > b.overlap;
        return a.order < b.order;
    });

    ContextBundle bundle;
    for (auto& c : candidates) {
        bundle.fragments.push_back(std::move(c.fragment));
        bundle.provenance.push_back(c.provenance);
    }
    return bundle;
}

}  // namespace planex
