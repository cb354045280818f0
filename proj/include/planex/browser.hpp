#pragma once

#include "planex/reasoner.hpp"
#include "planex/task.hpp"
#include "planex/value.hpp"
#include "planex/variables.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace planex {

struct Bounds {
    int x = 0, y = 0, w = 0, h = 0;
    friend bool operator==(const Bounds&, const Bounds&) = default;
};

struct AxNode {
    int node_id = 0;
    std::string role;
    std::string name;
    std::optional<std::string> value;
    Bounds bounds;
    std::optional<int> occluded_by;
    // Enclosing dialog for nodes that belong to an overlay.
    std::optional<int> parent;

    Value to_json() const;
    friend bool operator==(const AxNode&, const AxNode&) = default;
};

struct Observation {
    std::string url;
    std::vector<AxNode> ax_tree;
    std::string screenshot_ref;
    bool overlay_present = false;
    long capture_seq = 0;

    const AxNode* find(int node_id) const;
    Value to_json() const;
    // Compact text rendering for planner prompts.
    std::string render() const;
};

struct BrowserAction {
    // press_escape is used only to dismiss overlays
    enum class Kind { click, type, select, go_back, finish, press_escape };

    Kind kind = Kind::click;
    std::optional<int> target;
    std::optional<std::string> text;
    std::optional<std::string> option;

    // Throws Error when required fields are missing.
    void validate() const;
    Value to_json() const;
};

std::string_view to_string(BrowserAction::Kind k);

struct ActionOutcome {
    BrowserAction applied;
    bool success = false;
    std::optional<std::string> feedback;
    int attempts = 1;
    Observation new_observation;
};

struct PageContent {
    std::string markdown;
    std::string screenshot_ref;
    std::string url;
};

struct DispatchResult {
    bool accepted = false;
    std::string feedback;
};

// Browser adapter contract. A real-browser adapter speaks a remote-control
// wire protocol behind this interface; tests use SimBrowser.
class BrowserDriver {
public:
    virtual ~BrowserDriver() = default;
    virtual Observation snapshot() = 0;
    virtual PageContent page_content() = 0;
    virtual DispatchResult dispatch(const BrowserAction& action) = 0;
    virtual void navigate(const std::string& url) = 0;
    virtual std::string current_url() const = 0;
    virtual void close() = 0;
    virtual bool is_open() const = 0;
};

// Deterministic page graph.
//
// Site document:
//   { "site": id, "origin": "http://host", "entry": page_id,
//     "pages": [ { "id", "url", "title", "markdown",
//                  "nodes": [ {"id", "role", "name", "value"?, "bounds": [x,y,w,h], "options"?: [...]} ],
//                  "overlay"?: { "dismissable": bool,
//                                "nodes": [ dialog node, children with "parent": dialog id ] },
//                  "transitions": { "<node id>": page_id } } ] }
struct SiteGraph {
    struct Page {
        std::string id;
        std::string url;
        std::string title;
        std::string markdown;
        std::vector<AxNode> nodes;
        std::map<int, std::vector<std::string>> options;
        std::vector<AxNode> overlay_nodes;
        bool overlay_dismissable = true;
        std::map<int, std::string> transitions;
    };

    std::string site;
    std::string origin;
    std::string entry;
    std::map<std::string, Page> pages;

    const Page& page(const std::string& id) const;
    const Page* page_by_url(const std::string& url) const;

    static SiteGraph from_json(const Value& j);
    static SiteGraph from_file(const std::filesystem::path& path);
};

class SimBrowser : public BrowserDriver {
public:
    explicit SimBrowser(SiteGraph graph);
    SimBrowser(SiteGraph graph, const std::string& start_page);

    Observation snapshot() override;
    PageContent page_content() override;
    DispatchResult dispatch(const BrowserAction& action) override;
    void navigate(const std::string& url) override;
    std::string current_url() const override;
    void close() override { open_ = false; }
    bool is_open() const override { return open_; }

    const std::string& page_id() const { return current_; }
    const SiteGraph& graph() const { return graph_; }

private:
    void require_open() const;
    void enter(const std::string& page_id);

    SiteGraph graph_;
    std::string current_;
    std::vector<std::string> history_;
    bool overlay_active_ = false;
    std::map<int, std::string> values_;
    long capture_seq_ = 0;
    bool open_ = true;
};

// Interaction verb of an instruction ("click", "type", "select").
BrowserAction::Kind instruction_verb(const std::string& instruction);

int ground(const std::string& instruction, const Observation& obs, ReasonerGateway& reasoner,
           const std::string& task_id = "");

// Grounding plus a feedback loop of at most kActionAttempts attempts.
// Occluded targets trigger a dismissal of the occluding dialog first.
inline constexpr int kActionAttempts = 3;
ActionOutcome act(const std::string& instruction, const Observation& obs, BrowserDriver& driver, ReasonerGateway& reasoner,
                  const AgentContext* ctx = nullptr);

struct Answer {
    std::string text;
    std::vector<std::string> citations;
};

Answer extract(const std::string& question, const PageContent& content, ReasonerGateway& reasoner,
               const std::string& task_id = "");

Observation snapshot(BrowserDriver& driver);
PageContent to_page_content(BrowserDriver& driver);

struct BrowserDecision {
    enum class Kind { act, extract, finish };

    Kind kind = Kind::finish;
    std::string instruction;  // act
    std::string question;     // extract
    bool success = false;     // finish
    std::string answer;       // finish
    Value outputs = Value::object();

    Value to_json() const;
};

BrowserDecision plan_browser_step(const SubTask& subtask, const Observation& obs, const ShortTermMemory& stm,
                                  const VariableStore& inputs, const AgentContext& ctx, int iteration,
                                  const std::optional<std::string>& hint);

struct JudgeVerdict {
    bool approve = true;
    std::string hint;
};

// A decision is risky when it repeats an action that already failed twice,
// or finishes successfully without any extraction in the history.
bool is_risky(const ShortTermMemory& history, const BrowserDecision& proposed);

JudgeVerdict judge(const ShortTermMemory& history, const BrowserDecision& proposed, ReasonerGateway& reasoner,
                   const std::string& task_id = "");

SubTaskResult run_browser_subtask(const SubTask& subtask, const VariableStore& inputs, BrowserDriver& driver,
                                  const AgentContext& ctx);

}  // namespace planex
