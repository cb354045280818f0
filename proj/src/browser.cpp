#include "planex/browser.hpp"

#include "planex/errors.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>

namespace planex {

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

bool is_close_name(const std::string& name) {
    auto n = lower(name);
    return n.find("close") != std::string::npos || n.find("dismiss") != std::string::npos || n == "×" || n == "x";
}

AxNode node_from_json(const Value& j) {
    AxNode n;
    n.node_id = j.at("id").get<int>();
    n.role = j.at("role").get<std::string>();
    n.name = j.value("name", "");
    if (j.contains("value") && j["value"].is_string()) n.value = j["value"].get<std::string>();
    if (auto b = j.find("bounds"); b != j.end() && b->is_array() && b->size() == 4) {
        n.bounds = Bounds{(*b)[0].get<int>(), (*b)[1].get<int>(), (*b)[2].get<int>(), (*b)[3].get<int>()};
    }
    if (j.contains("parent")) n.parent = j["parent"].get<int>();
    return n;
}

std::optional<std::string> quoted(const std::string& s) {
    auto a = s.find('"');
    if (a == std::string::npos) return std::nullopt;
    auto b = s.find('"', a + 1);
    if (b == std::string::npos) return std::nullopt;
    return s.substr(a + 1, b - a - 1);
}

std::string strip_quoted(std::string s) {
    while (true) {
        auto a = s.find('"');
        if (a == std::string::npos) return s;
        auto b = s.find('"', a + 1);
        if (b == std::string::npos) return s;
        s.erase(a, b - a + 1);
    }
}

bool role_fits(BrowserAction::Kind verb, const std::string& role) {
    static const std::set<std::string> clickable = {"button", "link", "checkbox", "tab", "menuitem", "radio"};
    static const std::set<std::string> typable = {"textbox", "searchbox"};
    static const std::set<std::string> selectable = {"combobox", "listbox"};
    switch (verb) {
        case BrowserAction::Kind::type: return typable.count(role) != 0;
        case BrowserAction::Kind::select: return selectable.count(role) != 0;
        default: return clickable.count(role) != 0;
    }
}

bool contains_word(const std::string& haystack, const std::string& needle) {
    std::size_t pos = 0;
    while ((pos = haystack.find(needle, pos)) != std::string::npos) {
        bool left = pos == 0 || !std::isalnum(static_cast<unsigned char>(haystack[pos - 1]));
        auto end = pos + needle.size();
        bool right = end >= haystack.size() || !std::isalnum(static_cast<unsigned char>(haystack[end]));
        if (left && right) return true;
        ++pos;
    }
    return false;
}

Value coerce_answer(const std::string& text) {
    if (!text.empty() && (std::isdigit(static_cast<unsigned char>(text[0])) || text[0] == '-')) {
        try {
            auto v = Value::parse(text);
            if (v.is_number()) return v;
        } catch (const Value::parse_error&) {
        }
    }
    return text;
}

std::string render_inputs(const VariableStore& vars) {
    std::string out;
    for (const auto& v : vars.all()) out += v.name + " = " + v.value.dump() + "\n";
    return out;
}

}  // namespace

Value AxNode::to_json() const {
    Value j{{"node_id", node_id}, {"role", role}, {"name", name}, {"bounds", {bounds.x, bounds.y, bounds.w, bounds.h}}};
    if (value) j["value"] = *value;
    if (occluded_by) j["occluded_by"] = *occluded_by;
    if (parent) j["parent"] = *parent;
    return j;
}

const AxNode* Observation::find(int node_id) const {
    for (const auto& n : ax_tree) {
        if (n.node_id == node_id) return &n;
    }
    return nullptr;
}

Value Observation::to_json() const {
    Value nodes = Value::array();
    for (const auto& n : ax_tree) nodes.push_back(n.to_json());
    return Value{{"url", url}, {"ax_tree", nodes}, {"screenshot_ref", screenshot_ref},
                 {"overlay_present", overlay_present}, {"capture_seq", capture_seq}};
}

std::string Observation::render() const {
    std::string out = "url: " + url + "\n";
    if (overlay_present) out += "overlay: present\n";
    for (const auto& n : ax_tree) {
        out += "[" + std::to_string(n.node_id) + "] " + n.role + " \"" + n.name + "\"";
        if (n.value) out += " value=\"" + *n.value + "\"";
        if (n.occluded_by) out += " occluded_by=" + std::to_string(*n.occluded_by);
        out += "\n";
    }
    return out;
}

std::string_view to_string(BrowserAction::Kind k) {
    switch (k) {
        case BrowserAction::Kind::click: return "click";
        case BrowserAction::Kind::type: return "type";
        case BrowserAction::Kind::select: return "select";
        case BrowserAction::Kind::go_back: return "go_back";
        case BrowserAction::Kind::finish: return "finish";
        case BrowserAction::Kind::press_escape: return "press_escape";
    }
    return "?";
}

void BrowserAction::validate() const {
    switch (kind) {
        case Kind::click:
        case Kind::press_escape:
            if (!target) throw Error(std::string(to_string(kind)) + " requires a target");
            break;
        case Kind::type:
            if (!target || !text) throw Error("type requires a target and text");
            break;
        case Kind::select:
            if (!target || !option) throw Error("select requires a target and an option");
            break;
        default: break;
    }
}

Value BrowserAction::to_json() const {
    Value j{{"kind", to_string(kind)}};
    if (target) j["target"] = *target;
    if (text) j["text"] = *text;
    if (option) j["option"] = *option;
    return j;
}

const SiteGraph::Page& SiteGraph::page(const std::string& id) const {
    auto it = pages.find(id);
    if (it == pages.end()) throw FixtureError("site " + site + " has no page " + id);
    return it->second;
}

const SiteGraph::Page* SiteGraph::page_by_url(const std::string& url) const {
    for (const auto& [_, p] : pages) {
        if (p.url == url) return &p;
    }
    return nullptr;
}

SiteGraph SiteGraph::from_json(const Value& j) {
    SiteGraph g;
    try {
        g.site = j.at("site").get<std::string>();
        g.origin = j.at("origin").get<std::string>();
        g.entry = j.at("entry").get<std::string>();
        for (const auto& pj : j.at("pages")) {
            Page p;
            p.id = pj.at("id").get<std::string>();
            p.url = pj.at("url").get<std::string>();
            p.title = pj.value("title", p.id);
            p.markdown = pj.value("markdown", "");
            std::set<int> ids;
            for (const auto& nj : pj.value("nodes", Value::array())) {
                auto n = node_from_json(nj);
                if (!ids.insert(n.node_id).second) throw FixtureError("duplicate node id on page " + p.id);
                if (nj.contains("options")) p.options[n.node_id] = nj["options"].get<std::vector<std::string>>();
                p.nodes.push_back(std::move(n));
            }
            if (auto ov = pj.find("overlay"); ov != pj.end() && ov->is_object()) {
                p.overlay_dismissable = ov->value("dismissable", true);
                for (const auto& nj : ov->at("nodes")) {
                    auto n = node_from_json(nj);
                    if (!ids.insert(n.node_id).second) throw FixtureError("duplicate node id on page " + p.id);
                    p.overlay_nodes.push_back(std::move(n));
                }
                if (p.overlay_nodes.empty() || p.overlay_nodes.front().role != "dialog") {
                    throw FixtureError("overlay on page " + p.id + " must start with a dialog node");
                }
            }
            const auto transitions = pj.value("transitions", Value::object());
            for (const auto& [k, v] : transitions.items()) {
                p.transitions[std::stoi(k)] = v.get<std::string>();
            }
            g.pages[p.id] = std::move(p);
        }
    } catch (const Value::exception& e) {
        throw FixtureError(std::string("malformed site graph: ") + e.what());
    }
    for (const auto& [id, p] : g.pages) {
        for (const auto& [_, target] : p.transitions) {
            if (!g.pages.count(target)) throw FixtureError("page " + id + " transitions to unknown page " + target);
        }
    }
    g.page(g.entry);
    return g;
}

SiteGraph SiteGraph::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FixtureError("cannot open site graph " + path.string());
    try {
        return from_json(Value::parse(in));
    } catch (const Value::parse_error& e) {
        throw FixtureError("site graph " + path.string() + " does not parse: " + e.what());
    }
}

SimBrowser::SimBrowser(SiteGraph graph) : SimBrowser(graph, graph.entry) {}

SimBrowser::SimBrowser(SiteGraph graph, const std::string& start_page) : graph_(std::move(graph)) {
    graph_.page(start_page);
    current_ = start_page;
    overlay_active_ = !graph_.page(start_page).overlay_nodes.empty();
}

void SimBrowser::require_open() const {
    if (!open_) throw SessionClosedError("browser session is closed");
}

void SimBrowser::enter(const std::string& page_id) {
    history_.push_back(current_);
    current_ = page_id;
    overlay_active_ = !graph_.page(page_id).overlay_nodes.empty();
    values_.clear();
}

Observation SimBrowser::snapshot() {
    require_open();
    const auto& p = graph_.page(current_);
    Observation obs;
    obs.url = p.url;
    obs.capture_seq = ++capture_seq_;
    obs.screenshot_ref = "sim://" + graph_.site + "/" + p.id + "#" + std::to_string(obs.capture_seq);
    obs.overlay_present = overlay_active_;
    const int dialog = overlay_active_ ? p.overlay_nodes.front().node_id : 0;
    for (auto n : p.nodes) {
        if (auto it = values_.find(n.node_id); it != values_.end()) n.value = it->second;
        if (overlay_active_) n.occluded_by = dialog;
        obs.ax_tree.push_back(std::move(n));
    }
    if (overlay_active_) {
        for (const auto& n : p.overlay_nodes) obs.ax_tree.push_back(n);
    }
    return obs;
}

PageContent SimBrowser::page_content() {
    require_open();
    const auto& p = graph_.page(current_);
    return PageContent{p.markdown, "sim://" + graph_.site + "/" + p.id + "#" + std::to_string(capture_seq_), p.url};
}

DispatchResult SimBrowser::dispatch(const BrowserAction& action) {
    require_open();
    action.validate();
    const auto& p = graph_.page(current_);
    auto find_node = [&](int id) -> std::pair<const AxNode*, bool> {
        for (const auto& n : p.nodes) {
            if (n.node_id == id) return {&n, false};
        }
        if (overlay_active_) {
            for (const auto& n : p.overlay_nodes) {
                if (n.node_id == id) return {&n, true};
            }
        }
        return {nullptr, false};
    };

    switch (action.kind) {
        case BrowserAction::Kind::go_back:
            if (history_.empty()) return {false, "no previous page"};
            current_ = history_.back();
            history_.pop_back();
            overlay_active_ = false;
            values_.clear();
            return {true, "went back"};
        case BrowserAction::Kind::finish: return {true, "finished"};
        case BrowserAction::Kind::press_escape:
            if (!overlay_active_) return {false, "nothing to dismiss"};
            if (!p.overlay_dismissable) return {false, "escape did not close the dialog"};
            overlay_active_ = false;
            return {true, "dialog closed"};
        default: break;
    }

    auto [node, in_overlay] = find_node(*action.target);
    if (!node) return {false, "no element with id " + std::to_string(*action.target)};
    if (overlay_active_ && !in_overlay) {
        return {false, "element " + std::to_string(node->node_id) + " is covered by dialog " +
                           std::to_string(p.overlay_nodes.front().node_id)};
    }
    switch (action.kind) {
        case BrowserAction::Kind::click: {
            if (in_overlay && is_close_name(node->name)) {
                if (!p.overlay_dismissable) return {false, "dialog did not close"};
                overlay_active_ = false;
                return {true, "dialog closed"};
            }
            auto t = p.transitions.find(node->node_id);
            if (t == p.transitions.end()) return {false, "click on \"" + node->name + "\" had no effect"};
            enter(t->second);
            return {true, "navigated to " + graph_.page(t->second).url};
        }
        case BrowserAction::Kind::type:
            if (node->role != "textbox" && node->role != "searchbox") return {false, "element is not editable"};
            values_[node->node_id] = *action.text;
            return {true, "typed into \"" + node->name + "\""};
        case BrowserAction::Kind::select: {
            auto opts = p.options.find(node->node_id);
            if (opts == p.options.end()) return {false, "element has no options"};
            if (std::find(opts->second.begin(), opts->second.end(), *action.option) == opts->second.end()) {
                return {false, "option \"" + *action.option + "\" not available"};
            }
            values_[node->node_id] = *action.option;
            return {true, "selected \"" + *action.option + "\""};
        }
        default: return {false, "unsupported action"};
    }
}

void SimBrowser::navigate(const std::string& url) {
    require_open();
    const auto* p = graph_.page_by_url(url);
    if (!p) throw FixtureError("site " + graph_.site + " has no page at " + url);
    enter(p->id);
}

std::string SimBrowser::current_url() const {
    require_open();
    return graph_.page(current_).url;
}

BrowserAction::Kind instruction_verb(const std::string& instruction) {
    auto l = lower(instruction);
    auto first = l.substr(0, l.find(' '));
    if (first == "type" || first == "enter" || first == "fill") return BrowserAction::Kind::type;
    if (first == "select" || first == "choose" || first == "pick") return BrowserAction::Kind::select;
    if (first == "back" || l.rfind("go back", 0) == 0) return BrowserAction::Kind::go_back;
    return BrowserAction::Kind::click;
}

int ground(const std::string& instruction, const Observation& obs, ReasonerGateway& reasoner, const std::string& task_id) {
    if (obs.ax_tree.empty()) throw TargetNotFoundError("observation has no elements");
    const auto verb = instruction_verb(instruction);
    const auto text = lower(strip_quoted(instruction));
    std::vector<const AxNode*> best;
    std::size_t best_len = 0;
    for (const auto& n : obs.ax_tree) {
        if (n.name.empty() || !role_fits(verb, n.role)) continue;
        auto name = lower(n.name);
        if (!contains_word(text, name)) continue;
        if (name.size() > best_len) {
            best.clear();
            best_len = name.size();
        }
        if (name.size() == best_len) best.push_back(&n);
    }
    if (best.empty()) throw TargetNotFoundError("no element matches \"" + instruction + "\"");
    if (best.size() == 1) return best.front()->node_id;

    PromptBundle b;
    b.agent = "action_agent";
    b.task_id = task_id;
    b.role_preamble = "You locate interface elements.";
    b.instructions = "Several elements match the instruction. Reply with the node_id to use, or null if none is clearly right.";
    std::string listing;
    for (const auto* n : best) listing += "[" + std::to_string(n->node_id) + "] " + n->role + " \"" + n->name + "\"\n";
    b.add("instruction", instruction).add("candidates", listing);
    b.output_schema = Value::parse(
        R"({"type":"object","properties":{"node_id":{"type":["integer","null"]}},"required":["node_id"]})");
    auto out = reasoner.complete(b).structured_value;
    if (out["node_id"].is_number_integer()) {
        int id = out["node_id"].get<int>();
        for (const auto* n : best) {
            if (n->node_id == id) return id;
        }
    }
    throw AmbiguousTargetError(std::to_string(best.size()) + " elements match \"" + instruction + "\"");
}

Observation snapshot(BrowserDriver& driver) { return driver.snapshot(); }
PageContent to_page_content(BrowserDriver& driver) { return driver.page_content(); }

ActionOutcome act(const std::string& instruction, const Observation& obs, BrowserDriver& driver, ReasonerGateway& reasoner,
                  const AgentContext* ctx) {
    if (!driver.is_open()) throw SessionClosedError("browser session is closed");
    const auto verb = instruction_verb(instruction);
    const std::string task_id = ctx ? ctx->task_id : "";
    auto trace = [&](Value payload) {
        if (ctx) ctx->trace(AgentRole::action_agent, EventKind::action, std::move(payload));
    };

    Observation current = obs;
    std::string feedback;
    for (int attempt = 1; attempt <= kActionAttempts; ++attempt) {
        BrowserAction action;
        action.kind = verb;
        if (verb != BrowserAction::Kind::go_back) {
            int target = ground(instruction, current, reasoner, task_id);
            const auto* node = current.find(target);
            if (node->occluded_by) {
                BrowserAction dismiss;
                const int dialog = *node->occluded_by;
                for (const auto& n : current.ax_tree) {
                    if (n.parent == dialog && is_close_name(n.name)) {
                        dismiss.kind = BrowserAction::Kind::click;
                        dismiss.target = n.node_id;
                        break;
                    }
                }
                if (!dismiss.target) {
                    dismiss.kind = BrowserAction::Kind::press_escape;
                    dismiss.target = dialog;
                }
                auto r = driver.dispatch(dismiss);
                trace(Value{{"attempt", attempt}, {"dismissal", true}, {"action", dismiss.to_json()},
                            {"accepted", r.accepted}, {"feedback", r.feedback}});
                feedback = r.accepted ? "dismissed dialog " + std::to_string(dialog)
                                      : "element " + std::to_string(target) + " is covered by dialog " +
                                            std::to_string(dialog) + " (" + r.feedback + ")";
                current = driver.snapshot();
                continue;
            }
            action.target = target;
            if (verb == BrowserAction::Kind::type) {
                action.text = quoted(instruction).value_or("");
            } else if (verb == BrowserAction::Kind::select) {
                action.option = quoted(instruction).value_or("");
            }
        }
        auto r = driver.dispatch(action);
        trace(Value{{"attempt", attempt}, {"dismissal", false}, {"action", action.to_json()},
                    {"accepted", r.accepted}, {"feedback", r.feedback}});
        if (r.accepted) {
            return ActionOutcome{action, true, r.feedback, attempt, driver.snapshot()};
        }
        feedback = r.feedback;
        current = driver.snapshot();
    }
    throw ActionFailedError(feedback, kActionAttempts);
}

Answer extract(const std::string& question, const PageContent& content, ReasonerGateway& reasoner,
               const std::string& task_id) {
    if (content.markdown.find_first_not_of(" \t\r\n") == std::string::npos) {
        throw NotOnPageError("page is empty");
    }
    PromptBundle b;
    b.agent = "extraction_agent";
    b.task_id = task_id;
    b.role_preamble = "You answer questions about a web page.";
    b.instructions = "Answer the question using only the page content below. Quote the supporting text.";
    b.add("question", question).add("page", content.markdown);
    b.output_schema = Value::parse(R"({"type":"object","properties":{"found":{"type":"boolean"},"answer":{"type":"string"},
        "citations":{"type":"array","items":{"type":"string"}}},"required":["found"]})");
    auto out = reasoner.complete(b).structured_value;
    if (!out["found"].get<bool>()) throw NotOnPageError("the page does not answer: " + question);
    Answer a;
    a.text = out.value("answer", "");
    for (const auto& c : out.value("citations", Value::array())) {
        auto s = c.get<std::string>();
        if (content.markdown.find(s) != std::string::npos) a.citations.push_back(s);
    }
    return a;
}

Value BrowserDecision::to_json() const {
    switch (kind) {
        case Kind::act: return Value{{"decision", "act"}, {"instruction", instruction}};
        case Kind::extract: return Value{{"decision", "extract"}, {"question", question}};
        case Kind::finish: {
            Value j{{"decision", "finish"}, {"success", success}, {"answer", answer}};
            if (!outputs.empty()) j["outputs"] = outputs;
            return j;
        }
    }
    return Value();
}

BrowserDecision plan_browser_step(const SubTask& subtask, const Observation& obs, const ShortTermMemory& stm,
                                  const VariableStore& inputs, const AgentContext& ctx, int iteration,
                                  const std::optional<std::string>& hint) {
    if (iteration >= ctx.step_cap) {
        BrowserDecision d;
        d.kind = BrowserDecision::Kind::finish;
        d.success = false;
        d.answer = "step cap reached";
        return d;
    }
    PromptBundle b;
    b.agent = "browser_planner";
    b.task_id = ctx.task_id;
    b.cursor = iteration;
    b.role_preamble = "You plan one browser step at a time.";
    b.instructions =
        "Choose the next step: act (one click, type or select instruction), extract (a question about the current page), "
        "or finish (with success, an answer and outputs for the declared variables).";
    b.add("goal", "goal: " + subtask.goal + "\nproduces: " + Value(subtask.produces).dump());
    if (!inputs.empty()) b.add("inputs", render_inputs(inputs));
    b.add("observation", obs.render());
    if (!stm.entries().empty()) b.add("memory", stm.render());
    if (hint) b.add("hint", *hint);
    for (const auto& g : ctx.guidance) b.context_fragments.push_back(g);
    b.output_schema = Value::parse(R"({"type":"object","properties":{
        "decision":{"enum":["act","extract","finish"]},"instruction":{"type":"string"},"question":{"type":"string"},
        "success":{"type":"boolean"},"answer":{"type":"string"},"outputs":{"type":"object"}},"required":["decision"]})");
    auto out = ctx.reasoner->complete(b).structured_value;
    BrowserDecision d;
    const auto kind = out["decision"].get<std::string>();
    if (kind == "act") {
        d.kind = BrowserDecision::Kind::act;
        d.instruction = out.value("instruction", "");
    } else if (kind == "extract") {
        d.kind = BrowserDecision::Kind::extract;
        d.question = out.value("question", "");
    } else {
        d.kind = BrowserDecision::Kind::finish;
        d.success = out.value("success", false);
        d.answer = out.value("answer", "");
        d.outputs = out.value("outputs", Value::object());
    }
    return d;
}

bool is_risky(const ShortTermMemory& history, const BrowserDecision& proposed) {
    if (proposed.kind == BrowserDecision::Kind::act) {
        int failures = 0;
        for (const auto& [decision, outcome] : history.entries()) {
            if (decision.value("decision", "") == "act" && decision.value("instruction", "") == proposed.instruction &&
                outcome.rfind("failed", 0) == 0) {
                ++failures;
            }
        }
        return failures >= 2;
    }
    if (proposed.kind == BrowserDecision::Kind::finish && proposed.success) {
        for (const auto& [_, outcome] : history.entries()) {
            if (outcome.rfind("ok", 0) == 0 || outcome.rfind("answer", 0) == 0) return false;
        }
        return true;
    }
    return false;
}

JudgeVerdict judge(const ShortTermMemory& history, const BrowserDecision& proposed, ReasonerGateway& reasoner,
                   const std::string& task_id) {
    if (!is_risky(history, proposed)) return JudgeVerdict{true, ""};
    PromptBundle b;
    b.agent = "judge";
    b.task_id = task_id;
    b.role_preamble = "You review risky agent decisions.";
    b.instructions = "Approve the proposed decision or return a short hint for a better one.";
    b.add("proposed", proposed.to_json().dump()).add("history", history.render());
    b.output_schema = Value::parse(
        R"({"type":"object","properties":{"verdict":{"enum":["approve","revise"]},"hint":{"type":"string"}},"required":["verdict"]})");
    auto out = reasoner.complete(b).structured_value;
    if (out["verdict"] == "approve") return JudgeVerdict{true, ""};
    return JudgeVerdict{false, out.value("hint", "revise the decision")};
}

SubTaskResult run_browser_subtask(const SubTask& subtask, const VariableStore& inputs, BrowserDriver& driver,
                                  const AgentContext& ctx) {
    ShortTermMemory stm(ctx.stm_cap);
    std::optional<std::string> hint;
    std::optional<std::string> last_answer;
    int iteration = 0;
    try {
        while (true) {
            if (!driver.is_open()) return SubTaskResult::failure(subtask.id, "browser session closed", iteration);
            auto obs = driver.snapshot();
            ctx.trace(AgentRole::browser_planner, EventKind::observation,
                      Value{{"url", obs.url}, {"capture_seq", obs.capture_seq}, {"overlay_present", obs.overlay_present},
                            {"elements", obs.ax_tree.size()}});
            auto decision = plan_browser_step(subtask, obs, stm, inputs, ctx, iteration, hint);
            hint.reset();
            ctx.trace(AgentRole::browser_planner, EventKind::decision, decision.to_json());
            if (iteration >= ctx.step_cap) return SubTaskResult::failure(subtask.id, "step cap reached", iteration);

            if (is_risky(stm, decision)) {
                auto verdict = judge(stm, decision, *ctx.reasoner, ctx.task_id);
                ctx.trace(AgentRole::judge, EventKind::reflection,
                          Value{{"approve", verdict.approve}, {"hint", verdict.hint}});
                if (!verdict.approve) {
                    stm.append(decision.to_json(), "revised: " + verdict.hint);
                    hint = verdict.hint;
                    ++iteration;
                    continue;
                }
            }
            ++iteration;

            switch (decision.kind) {
                case BrowserDecision::Kind::act:
                    try {
                        auto outcome = act(decision.instruction, obs, driver, *ctx.reasoner, &ctx);
                        stm.append(decision.to_json(), "ok: " + outcome.feedback.value_or("") + " (attempts " +
                                                           std::to_string(outcome.attempts) + ")");
                    } catch (const ActionFailedError& e) {
                        stm.append(decision.to_json(), "failed: " + e.feedback());
                    } catch (const TargetNotFoundError& e) {
                        stm.append(decision.to_json(), std::string("failed: ") + e.what());
                    } catch (const AmbiguousTargetError& e) {
                        stm.append(decision.to_json(), std::string("failed: ") + e.what());
                    }
                    break;
                case BrowserDecision::Kind::extract: {
                    auto content = driver.page_content();
                    try {
                        auto answer = extract(decision.question, content, *ctx.reasoner, ctx.task_id);
                        last_answer = answer.text;
                        ctx.trace(AgentRole::extraction_agent, EventKind::result,
                                  Value{{"answer", answer.text}, {"citations", answer.citations}});
                        stm.append(decision.to_json(), "answer: " + answer.text);
                    } catch (const NotOnPageError& e) {
                        ctx.trace(AgentRole::extraction_agent, EventKind::result, Value{{"error", e.what()}});
                        stm.append(decision.to_json(), "failed: not on page");
                    }
                    break;
                }
                case BrowserDecision::Kind::finish: {
                    if (!decision.success) {
                        return SubTaskResult::failure(subtask.id, decision.answer.empty() ? "gave up" : decision.answer,
                                                      iteration);
                    }
                    SubTaskResult r;
                    r.subtask_id = subtask.id;
                    r.status = SubTaskResult::Status::succeeded;
                    r.step_count = iteration;
                    const std::string answer = !decision.answer.empty() ? decision.answer : last_answer.value_or("");
                    for (const auto& name : subtask.produces) {
                        if (decision.outputs.contains(name)) {
                            r.produced.push_back(Variable::make(name, decision.outputs[name], subtask.id));
                        } else if (subtask.produces.size() == 1 && !answer.empty()) {
                            r.produced.push_back(Variable::make(name, coerce_answer(answer), subtask.id));
                        } else {
                            return SubTaskResult::failure(subtask.id, "missing output " + name, iteration);
                        }
                    }
                    if (!answer.empty()) r.answer = answer;
                    return r;
                }
            }
        }
    } catch (const Error& e) {
        return SubTaskResult::failure(subtask.id, std::string(e.kind()) + ": " + e.what(), iteration);
    }
}

}  // namespace planex
