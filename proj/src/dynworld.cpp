#include "togglebench/dynworld.hpp"

#include <algorithm>
#include <cerrno>
#include <csignal>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

#include <httplib.h>
#include <json.hpp>

#include "togglebench/match.hpp"
#include "togglebench/util.hpp"

namespace togglebench {

namespace {

using json = nlohmann::json;

struct ItemDef {
    enum class Sem { Toggle, Nav, App };
    std::string label;
    WidgetKind kind = WidgetKind::ListItem;
    Sem sem = Sem::Nav;
    std::string target;  // toggle key, screen id, or app key
};

struct ScreenDef {
    std::string id;
    std::optional<std::string> parent;
    std::vector<ItemDef> items;
};

struct AppDef {
    std::string key;
    std::string display;
    std::string home_screen;
};

const std::vector<AppDef>& apps() {
    static const std::vector<AppDef> v = {
        {"chrome", "Chrome", "chrome-home"},
        {"youtube", "YouTube", "youtube-home"},
    };
    return v;
}

const std::vector<ScreenDef>& graph() {
    using Sem = ItemDef::Sem;
    static const std::vector<ScreenDef> v = {
        {"home",
         std::nullopt,
         {{"Settings", WidgetKind::ListItem, Sem::Nav, "settings"},
          {"Chrome", WidgetKind::Button, Sem::App, "chrome"},
          {"YouTube", WidgetKind::Button, Sem::App, "youtube"}}},
        {"settings",
         "home",
         {{"Network & internet", WidgetKind::ListItem, Sem::Nav, "network"},
          {"Sound", WidgetKind::ListItem, Sem::Nav, "sound"},
          {"Clock", WidgetKind::ListItem, Sem::Nav, "clock"}}},
        {"network",
         "settings",
         {{"Wi-Fi", WidgetKind::Toggle, Sem::Toggle, "wifi"},
          {"Bluetooth", WidgetKind::Toggle, Sem::Toggle, "bluetooth"}}},
        {"sound",
         "settings",
         {{"Do Not Disturb", WidgetKind::Toggle, Sem::Toggle, "do-not-disturb"}}},
        {"clock",
         "settings",
         {{"Alarm 9:00 AM", WidgetKind::Toggle, Sem::Toggle, "alarm-9am"}}},
        {"chrome-home",
         "home",
         {{"Settings", WidgetKind::ListItem, Sem::Nav, "chrome-settings"}}},
        {"chrome-settings",
         "chrome-home",
         {{"Payment methods", WidgetKind::ListItem, Sem::Nav, "chrome-payments"},
          {"Privacy and security", WidgetKind::ListItem, Sem::Nav, "chrome-privacy"}}},
        {"chrome-payments",
         "chrome-settings",
         {{"Save and fill payment methods", WidgetKind::Toggle, Sem::Toggle,
           "payment-methods"}}},
        {"chrome-privacy",
         "chrome-settings",
         {{"Always use secure connections", WidgetKind::Toggle, Sem::Toggle,
           "secure-connections"}}},
        {"youtube-home",
         "home",
         {{"Settings", WidgetKind::ListItem, Sem::Nav, "youtube-settings"}}},
        {"youtube-settings",
         "youtube-home",
         {{"Captions", WidgetKind::Toggle, Sem::Toggle, "captions"}}},
    };
    return v;
}

const ScreenDef& screen_def(std::string_view id) {
    for (const ScreenDef& s : graph()) {
        if (s.id == id) return s;
    }
    throw Error("world state references unknown screen '" + std::string(id) + "'");
}

constexpr BBox kBackBox{20, 20, 180, 90};

BBox item_box(std::size_t row) {
    const int y0 = 140 + 150 * static_cast<int>(row);
    return BBox{60, y0, 940, y0 + 100};
}

// Build order fixes the click-resolution order: back button first, then rows.
std::vector<std::pair<Widget, const ItemDef*>> screen_widgets(const WorldState& state) {
    const ScreenDef& def = screen_def(state.current_screen);
    std::vector<std::pair<Widget, const ItemDef*>> out;
    if (def.parent) {
        out.push_back({Widget{kBackBox, "Back", WidgetKind::Button, std::nullopt}, nullptr});
    }
    for (std::size_t i = 0; i < def.items.size(); ++i) {
        const ItemDef& item = def.items[i];
        Widget w{item_box(i), item.label, item.kind, std::nullopt};
        if (item.sem == ItemDef::Sem::Toggle) {
            auto it = state.toggles.find(item.target);
            if (it == state.toggles.end())
                throw Error("screen references unknown toggle '" + item.target + "'");
            w.state = it->second;
        }
        out.push_back({std::move(w), &item});
    }
    return out;
}

Observation build_observation(const WorldState& state) {
    Observation obs;
    obs.screen_id = state.current_screen;
    obs.instruction = state.instruction;
    for (auto& [widget, item] : screen_widgets(state)) {
        (void)item;
        obs.widgets.push_back(widget);
    }
    return obs;
}

std::string render_instruction(const std::string& tmpl,
                               const std::map<std::string, std::string>& params) {
    std::string out = tmpl;
    for (const auto& [key, value] : params) out = replace_all(std::move(out), "{" + key + "}", value);
    return out;
}

DynTask toggle_task(std::string id, std::string instruction, std::string feature, bool desired,
                    bool verify) {
    DynTask t;
    t.task_id = std::move(id);
    t.instruction_template = instruction;
    t.instruction = std::move(instruction);
    t.initial_toggles[feature] = verify ? desired : !desired;
    SubtaskSpec s;
    s.kind = SubtaskSpec::Kind::Toggle;
    s.feature = std::move(feature);
    s.desired = desired;
    t.subtasks.push_back(std::move(s));
    return t;
}

json subtask_to_json(const SubtaskSpec& s) {
    if (s.kind == SubtaskSpec::Kind::Toggle) {
        return {{"kind", "toggle"}, {"feature", s.feature}, {"desired", s.desired}};
    }
    return {{"kind", "app-open"}, {"app", s.app}};
}

SubtaskSpec subtask_from_json(const json& j) {
    SubtaskSpec s;
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "toggle") {
        s.kind = SubtaskSpec::Kind::Toggle;
        s.feature = j.at("feature").get<std::string>();
        s.desired = j.at("desired").get<bool>();
    } else if (kind == "app-open") {
        s.kind = SubtaskSpec::Kind::AppOpen;
        s.app = j.at("app").get<std::string>();
    } else {
        throw ConfigError("unknown subtask kind '" + kind + "'");
    }
    return s;
}

json widget_to_json(const Widget& w) {
    json j = {{"bbox", {w.bbox.x_min, w.bbox.y_min, w.bbox.x_max, w.bbox.y_max}},
              {"label", w.label},
              {"kind", std::string(to_string(w.kind))}};
    if (w.state) j["state"] = *w.state ? "on" : "off";
    return j;
}

Widget widget_from_json(const json& j) {
    Widget w;
    const auto& b = j.at("bbox");
    w.bbox = BBox{b.at(0).get<int>(), b.at(1).get<int>(), b.at(2).get<int>(), b.at(3).get<int>()};
    w.label = j.at("label").get<std::string>();
    const std::string kind = j.at("kind").get<std::string>();
    auto k = widget_kind_from_string(kind);
    if (!k) throw ConfigError("unknown widget kind '" + kind + "'");
    w.kind = *k;
    if (j.contains("state")) w.state = j.at("state").get<std::string>() == "on";
    return w;
}

json observation_to_json(const Observation& obs) {
    json widgets = json::array();
    for (const Widget& w : obs.widgets) widgets.push_back(widget_to_json(w));
    return {{"screen_id", obs.screen_id},
            {"widgets", std::move(widgets)},
            {"instruction", obs.instruction}};
}

Observation observation_from_json_obj(const json& j) {
    Observation obs;
    obs.screen_id = j.at("screen_id").get<std::string>();
    obs.instruction = j.at("instruction").get<std::string>();
    for (const json& w : j.at("widgets")) obs.widgets.push_back(widget_from_json(w));
    return obs;
}

// Parseable, known-verb, well-formed: the only replies the world can run.
std::optional<Action> executable_action(const Dialect& d, const std::string& raw) {
    const ParseResult pr = d.parse(raw);
    if (!pr.ok()) return std::nullopt;
    const Action& a = pr.action();
    if (a.type == ActionType::Other || !a.well_formed()) return std::nullopt;
    return a;
}

}  // namespace

std::string_view to_string(WidgetKind k) {
    switch (k) {
        case WidgetKind::Toggle: return "toggle";
        case WidgetKind::Button: return "button";
        case WidgetKind::ListItem: return "list-item";
    }
    return "button";
}

std::optional<WidgetKind> widget_kind_from_string(std::string_view s) {
    if (s == "toggle") return WidgetKind::Toggle;
    if (s == "button") return WidgetKind::Button;
    if (s == "list-item") return WidgetKind::ListItem;
    return std::nullopt;
}

std::string_view to_string(Termination t) {
    switch (t) {
        case Termination::AgentCompleted: return "agent-completed";
        case Termination::BudgetExhausted: return "budget-exhausted";
        case Termination::ProtocolError: return "protocol-error";
    }
    return "protocol-error";
}

bool SubtaskSpec::satisfied(const WorldState& state) const {
    if (kind == Kind::Toggle) {
        auto it = state.toggles.find(feature);
        return it != state.toggles.end() && it->second == desired;
    }
    return state.opened_app.has_value() && openapp_match(*state.opened_app, app);
}

bool DynTask::is_verify() const {
    return task_id.size() > 6 && task_id.ends_with("Verify");
}

const std::vector<DynTask>& default_tasks() {
    static const std::vector<DynTask> tasks = [] {
        std::vector<DynTask> v;
        v.push_back(toggle_task("SystemBluetoothTurnOff", "Turn bluetooth off.", "bluetooth",
                                false, false));
        v.push_back(toggle_task("SystemBluetoothTurnOffVerify", "Turn bluetooth off.",
                                "bluetooth", false, true));
        v.push_back(toggle_task("SystemBluetoothTurnOn", "Turn bluetooth on.", "bluetooth",
                                true, false));
        v.push_back(toggle_task("SystemBluetoothTurnOnVerify", "Turn bluetooth on.",
                                "bluetooth", true, true));
        v.push_back(toggle_task("SystemWifiTurnOff", "Turn wifi off.", "wifi", false, false));
        v.push_back(toggle_task("SystemWifiTurnOffVerify", "Turn wifi off.", "wifi", false,
                                true));
        v.push_back(toggle_task("SystemWifiTurnOn", "Turn wifi on.", "wifi", true, false));
        v.push_back(toggle_task("SystemWifiTurnOnVerify", "Turn wifi on.", "wifi", true, true));

        DynTask combo;
        combo.task_id = "TurnOffWifiAndTurnOnBluetooth";
        combo.instruction_template = "Turn off WiFi, then enable bluetooth";
        combo.instruction = combo.instruction_template;
        combo.initial_toggles = {{"wifi", true}, {"bluetooth", false}};
        SubtaskSpec wifi_off;
        wifi_off.kind = SubtaskSpec::Kind::Toggle;
        wifi_off.feature = "wifi";
        wifi_off.desired = false;
        SubtaskSpec bt_on;
        bt_on.kind = SubtaskSpec::Kind::Toggle;
        bt_on.feature = "bluetooth";
        bt_on.desired = true;
        combo.subtasks = {wifi_off, bt_on};
        v.push_back(std::move(combo));

        DynTask open;
        open.task_id = "TurnOnWifiAndOpenApp";
        open.instruction_template = "Turn on Wifi, then open the {app_name} app";
        open.params = {{"app_name", "Chrome"}};
        open.instruction = render_instruction(open.instruction_template, open.params);
        open.initial_toggles = {{"wifi", false}};
        SubtaskSpec wifi_on;
        wifi_on.kind = SubtaskSpec::Kind::Toggle;
        wifi_on.feature = "wifi";
        wifi_on.desired = true;
        SubtaskSpec app;
        app.kind = SubtaskSpec::Kind::AppOpen;
        app.app = "Chrome";
        open.subtasks = {wifi_on, app};
        v.push_back(std::move(open));

        v.push_back(toggle_task("TurnOnAlarm9AM", "Trun on alarm at 9:00 AM.", "alarm-9am",
                                true, false));
        v.push_back(toggle_task("TurnOffAlarm9AM", "Trun off alarm at 9:00 AM.", "alarm-9am",
                                false, false));
        v.push_back(toggle_task("TurnOnCaptionYoutube", "Turn on captions in Youtube's settings.",
                                "captions", true, false));
        v.push_back(toggle_task("TurnOffCaptionYoutube",
                                "Turn off captions in Youtube's settings.", "captions", false,
                                false));
        v.push_back(toggle_task("TurnOnDoNotDisturb", "Turn on Do not Disturb", "do-not-disturb",
                                true, false));
        v.push_back(toggle_task("TurnOffDoNotDisturb", "Turn off Do not Disturb",
                                "do-not-disturb", false, false));
        v.push_back(toggle_task("TurnOnSaveAndFillPaymentMethodsChrome",
                                "Turn on save and fill payment methods in Chrome's settings.",
                                "payment-methods", true, false));
        v.push_back(toggle_task("TurnOffSaveAndFillPaymentMethodsChrome",
                                "Turn off save and fill payment methods in Chrome's settings.",
                                "payment-methods", false, false));
        v.push_back(toggle_task(
            "TurnOnAlwaysSecureConnChrome",
            "Turn on Always use the secure connections in Chrome's   settings.",
            "secure-connections", true, false));
        v.push_back(toggle_task(
            "TurnOffAlwaysSecureConnChrome",
            "Turn off Always use the secure connections in Chrome's   settings.",
            "secure-connections", false, false));
        return v;
    }();
    return tasks;
}

std::string tasks_to_json(const std::vector<DynTask>& tasks) {
    json arr = json::array();
    for (const DynTask& t : tasks) {
        json subtasks = json::array();
        for (const SubtaskSpec& s : t.subtasks) subtasks.push_back(subtask_to_json(s));
        json jt = {{"task_id", t.task_id},
                   {"instruction_template", t.instruction_template},
                   {"initial_toggles", t.initial_toggles},
                   {"subtasks", std::move(subtasks)}};
        if (!t.params.empty()) jt["params"] = t.params;
        arr.push_back(std::move(jt));
    }
    return json{{"tasks", std::move(arr)}}.dump(2) + "\n";
}

std::vector<DynTask> load_tasks(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open task registry " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("invalid task registry " + path + ": " + e.what());
    }
    std::vector<DynTask> out;
    try {
        for (const json& jt : j.at("tasks")) {
            DynTask t;
            t.task_id = jt.at("task_id").get<std::string>();
            t.instruction_template = jt.at("instruction_template").get<std::string>();
            if (jt.contains("params"))
                t.params = jt.at("params").get<std::map<std::string, std::string>>();
            t.instruction = render_instruction(t.instruction_template, t.params);
            t.initial_toggles = jt.at("initial_toggles").get<std::map<std::string, bool>>();
            for (const json& js : jt.at("subtasks")) t.subtasks.push_back(subtask_from_json(js));
            if (t.subtasks.empty())
                throw ConfigError("task " + t.task_id + " declares no subtasks");
            out.push_back(std::move(t));
        }
    } catch (const json::exception& e) {
        throw ConfigError("invalid task registry " + path + ": " + e.what());
    }
    return out;
}

const DynTask& find_task(const std::vector<DynTask>& tasks, std::string_view task_id) {
    for (const DynTask& t : tasks) {
        if (t.task_id == task_id) return t;
    }
    std::string known;
    for (const DynTask& t : tasks) {
        if (!known.empty()) known += ", ";
        known += t.task_id;
    }
    throw ConfigError("unknown task '" + std::string(task_id) + "'; registered tasks: " + known);
}

const std::vector<std::string>& toggle_features() {
    static const std::vector<std::string> v = {
        "wifi",     "bluetooth",       "do-not-disturb",    "alarm-9am",
        "captions", "payment-methods", "secure-connections"};
    return v;
}

const std::vector<std::string>& screen_ids() {
    static const std::vector<std::string> v = [] {
        std::vector<std::string> ids;
        for (const ScreenDef& s : graph()) ids.push_back(s.id);
        return ids;
    }();
    return v;
}

std::string_view screen_of_feature(std::string_view feature) {
    for (const ScreenDef& s : graph()) {
        for (const ItemDef& item : s.items) {
            if (item.sem == ItemDef::Sem::Toggle && item.target == feature) return s.id;
        }
    }
    throw ConfigError("unknown toggle feature '" + std::string(feature) + "'");
}

std::string_view feature_label(std::string_view feature) {
    for (const ScreenDef& s : graph()) {
        for (const ItemDef& item : s.items) {
            if (item.sem == ItemDef::Sem::Toggle && item.target == feature) return item.label;
        }
    }
    throw ConfigError("unknown toggle feature '" + std::string(feature) + "'");
}

std::optional<std::string> parent_screen(std::string_view screen_id) {
    return screen_def(screen_id).parent;
}

std::string entry_label(std::string_view child_screen) {
    const ScreenDef& child = screen_def(child_screen);
    if (!child.parent) throw ConfigError("screen '" + child.id + "' has no parent entry");
    for (const ItemDef& item : screen_def(*child.parent).items) {
        if (item.sem == ItemDef::Sem::Nav && item.target == child_screen) return item.label;
        if (item.sem == ItemDef::Sem::App) {
            for (const AppDef& app : apps()) {
                if (app.key == item.target && app.home_screen == child_screen) return item.label;
            }
        }
    }
    throw ConfigError("no entry widget leads to screen '" + child.id + "'");
}

Observation observe(const WorldState& state) { return build_observation(state); }

std::pair<WorldState, Observation> reset(const DynTask& task, std::uint64_t seed) {
    WorldState s;
    for (const std::string& f : toggle_features())
        s.toggles[f] = (mix64(fnv1a64(f) ^ seed) & 1) != 0;
    for (const auto& [key, value] : task.initial_toggles) {
        if (s.toggles.find(key) == s.toggles.end())
            throw ConfigError("task " + task.task_id + " references unknown toggle '" + key +
                              "'");
        s.toggles[key] = value;
    }
    s.current_screen = "home";
    s.task_id = task.task_id;
    s.instruction = task.instruction;
    return {s, build_observation(s)};
}

StepResult step(const WorldState& state, const Action& action) {
    if (action.type == ActionType::Other || !action.well_formed())
        throw Error("world step requires a well-formed canonical action");

    WorldState next = state;
    bool done = false;
    std::optional<Termination> termination;

    switch (action.type) {
        case ActionType::Completed:
            done = true;
            termination = Termination::AgentCompleted;
            break;
        case ActionType::Click: {
            for (auto& [widget, item] : screen_widgets(state)) {
                if (!widget.bbox.contains(*action.point)) continue;
                if (item == nullptr) {  // back button
                    if (auto p = parent_screen(state.current_screen)) next.current_screen = *p;
                } else if (item->sem == ItemDef::Sem::Toggle) {
                    next.toggles[item->target] = !state.toggles.at(item->target);
                } else if (item->sem == ItemDef::Sem::Nav) {
                    next.current_screen = item->target;
                } else {
                    for (const AppDef& app : apps()) {
                        if (app.key == item->target) {
                            next.current_screen = app.home_screen;
                            next.opened_app = app.key;
                        }
                    }
                }
                break;
            }
            break;  // no widget hit: state unchanged, step still consumed
        }
        case ActionType::Press: {
            if (auto p = parent_screen(state.current_screen)) next.current_screen = *p;
            break;
        }
        case ActionType::OpenApp: {
            for (const AppDef& app : apps()) {
                if (openapp_match(*action.app_name, app.display)) {
                    next.current_screen = app.home_screen;
                    next.opened_app = app.key;
                    break;
                }
            }
            break;
        }
        case ActionType::Scroll:
        case ActionType::Type:
            break;  // every screen fits one page; typing has no target here
        case ActionType::Other:
            break;  // unreachable, rejected above
    }

    next.step_count = state.step_count + 1;
    if (!done && next.step_count >= next.budget) {
        done = true;
        termination = Termination::BudgetExhausted;
    }
    Observation obs = build_observation(next);
    return {std::move(next), std::move(obs), done, termination};
}

EpisodeScore score_episode(const DynTask& task, const WorldState& final_state) {
    EpisodeScore score;
    score.total = static_cast<int>(task.subtasks.size());
    for (const SubtaskSpec& s : task.subtasks) {
        if (s.satisfied(final_state)) ++score.satisfied;
    }
    score.success_ratio = score.total == 0 ? 0.0
                                           : static_cast<double>(score.satisfied) / score.total;
    return score;
}

std::string to_json_string(const Observation& observation) {
    return observation_to_json(observation).dump();
}

Observation observation_from_json(std::string_view text) {
    try {
        return observation_from_json_obj(json::parse(text));
    } catch (const json::exception& e) {
        throw AgentProtocolError(std::string("bad observation JSON: ") + e.what());
    }
}

std::string to_json_string(const AgentRequest& request) {
    return json{{"task_id", request.task_id},
                {"instruction", request.instruction},
                {"observation", observation_to_json(request.observation)},
                {"history", request.history},
                {"error", request.error}}
        .dump();
}

AgentRequest agent_request_from_json(std::string_view text) {
    try {
        const json j = json::parse(text);
        AgentRequest r;
        r.task_id = j.at("task_id").get<std::string>();
        r.instruction = j.at("instruction").get<std::string>();
        r.observation = observation_from_json_obj(j.at("observation"));
        if (j.contains("history")) r.history = j.at("history").get<std::vector<std::string>>();
        if (j.contains("error")) r.error = j.at("error").get<std::string>();
        return r;
    } catch (const json::exception& e) {
        throw AgentProtocolError(std::string("bad agent request JSON: ") + e.what());
    }
}

ScriptedPolicyAgent::ScriptedPolicyAgent(bool always_toggle, std::string dialect)
    : always_toggle_(always_toggle), dialect_(std::move(dialect)) {}

std::string_view ScriptedPolicyAgent::id() const {
    return always_toggle_ ? "builtin:always-toggle" : "builtin:optimal";
}

void ScriptedPolicyAgent::episode_begin(const DynTask& task) {
    goals_.clear();
    next_goal_ = 0;
    for (const SubtaskSpec& s : task.subtasks) {
        Goal g;
        if (s.kind == SubtaskSpec::Kind::AppOpen) {
            g.is_app = true;
            g.app = s.app;
        } else {
            g.feature = s.feature;
            g.desired = s.desired;
        }
        goals_.push_back(std::move(g));
    }
}

namespace {

const Widget* find_widget(const Observation& obs, std::string_view label) {
    for (const Widget& w : obs.widgets) {
        if (w.label == label) return &w;
    }
    return nullptr;
}

Action nav_toward(const Observation& obs, std::string_view target_screen) {
    std::vector<std::string> chain;  // home .. target
    for (std::optional<std::string> s = std::string(target_screen); s; s = parent_screen(*s))
        chain.push_back(*s);
    std::reverse(chain.begin(), chain.end());
    const auto it = std::find(chain.begin(), chain.end(), obs.screen_id);
    if (it == chain.end() || it + 1 == chain.end()) return Action::press();
    const Widget* w = find_widget(obs, entry_label(*(it + 1)));
    if (!w) return Action::press();
    return Action::click(w->bbox.center());
}

}  // namespace

std::string ScriptedPolicyAgent::act(const AgentRequest& request) {
    const Dialect& d = dialect(dialect_);
    for (;;) {
        if (next_goal_ >= goals_.size()) return d.format(Action::completed());
        const Goal& goal = goals_[next_goal_];
        if (goal.is_app) {
            ++next_goal_;
            return d.format(Action::open_app(goal.app));
        }
        const std::string_view target = screen_of_feature(goal.feature);
        if (request.observation.screen_id != target)
            return d.format(nav_toward(request.observation, target));
        const Widget* w = find_widget(request.observation, feature_label(goal.feature));
        if (!w || !w->state)
            throw AgentProtocolError("expected toggle '" + goal.feature + "' on screen '" +
                                     request.observation.screen_id + "'");
        if (always_toggle_ || *w->state != goal.desired) {
            ++next_goal_;
            return d.format(Action::click(w->bbox.center()));
        }
        ++next_goal_;  // already as desired: no click, fall through to the next goal
    }
}

SubprocessAgent::SubprocessAgent(std::string command, int reply_timeout_ms)
    : command_(std::move(command)), reply_timeout_ms_(reply_timeout_ms) {}

SubprocessAgent::~SubprocessAgent() {
    if (to_child_ >= 0) close(to_child_);
    if (pid_ >= 0) {
        int status = 0;
        for (int i = 0; i < 20; ++i) {
            if (waitpid(static_cast<pid_t>(pid_), &status, WNOHANG) != 0) {
                pid_ = -1;
                break;
            }
            usleep(100 * 1000);
        }
        if (pid_ >= 0) {
            kill(static_cast<pid_t>(pid_), SIGKILL);
            waitpid(static_cast<pid_t>(pid_), &status, 0);
        }
    }
    if (from_child_ >= 0) close(from_child_);
}

void SubprocessAgent::ensure_started() {
    if (pid_ >= 0) return;
    std::signal(SIGPIPE, SIG_IGN);
    int to_pipe[2];
    int from_pipe[2];
    if (pipe(to_pipe) != 0) throw AgentProtocolError("cannot create agent pipe");
    if (pipe(from_pipe) != 0) {
        close(to_pipe[0]);
        close(to_pipe[1]);
        throw AgentProtocolError("cannot create agent pipe");
    }
    const pid_t pid = fork();
    if (pid < 0) {
        close(to_pipe[0]);
        close(to_pipe[1]);
        close(from_pipe[0]);
        close(from_pipe[1]);
        throw AgentProtocolError("cannot fork agent process");
    }
    if (pid == 0) {
        dup2(to_pipe[0], STDIN_FILENO);
        dup2(from_pipe[1], STDOUT_FILENO);
        close(to_pipe[0]);
        close(to_pipe[1]);
        close(from_pipe[0]);
        close(from_pipe[1]);
        execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
        _exit(127);
    }
    close(to_pipe[0]);
    close(from_pipe[1]);
    to_child_ = to_pipe[1];
    from_child_ = from_pipe[0];
    pid_ = pid;
}

std::string SubprocessAgent::read_line() {
    for (;;) {
        const std::size_t nl = buffer_.find('\n');
        if (nl != std::string::npos) {
            std::string line = buffer_.substr(0, nl);
            buffer_.erase(0, nl + 1);
            return line;
        }
        pollfd pfd{from_child_, POLLIN, 0};
        const int rc = poll(&pfd, 1, reply_timeout_ms_);
        if (rc == 0) throw AgentProtocolError("agent reply timed out");
        if (rc < 0) throw AgentProtocolError("agent pipe poll failed");
        char chunk[4096];
        const ssize_t n = read(from_child_, chunk, sizeof(chunk));
        if (n == 0) {
            // EOF before any reply means the command never came up; that is
            // a launch failure, not an in-episode protocol violation.
            if (!replied_once_) {
                throw ConfigError("agent command produced no output (failed to start?): " +
                                  command_);
            }
            throw AgentProtocolError("agent process closed its output");
        }
        if (n < 0) {
            if (errno == EINTR) continue;
            throw AgentProtocolError("agent pipe read failed");
        }
        buffer_.append(chunk, static_cast<std::size_t>(n));
    }
}

std::string SubprocessAgent::act(const AgentRequest& request) {
    ensure_started();
    const std::string line = to_json_string(request) + "\n";
    std::size_t written = 0;
    while (written < line.size()) {
        const ssize_t n = write(to_child_, line.data() + written, line.size() - written);
        if (n < 0) {
            if (errno == EINTR) continue;
            // same first-contact rule as read_line: a command that dies
            // before ever answering is a launch failure
            if (!replied_once_) {
                throw ConfigError("agent command exited before accepting input "
                                  "(failed to start?): " +
                                  command_);
            }
            throw AgentProtocolError("agent stdin closed");
        }
        written += static_cast<std::size_t>(n);
    }
    const std::string reply = read_line();
    replied_once_ = true;
    try {
        const json j = json::parse(reply);
        return j.at("action").get<std::string>();
    } catch (const json::exception& e) {
        throw AgentProtocolError(std::string("bad agent reply: ") + e.what());
    }
}

HttpAgent::HttpAgent(std::string url, int reply_timeout_ms)
    : url_(std::move(url)), reply_timeout_ms_(reply_timeout_ms) {}

std::string HttpAgent::act(const AgentRequest& request) {
    const std::size_t scheme = url_.find("://");
    if (scheme == std::string::npos) throw ConfigError("agent url must include a scheme: " + url_);
    const std::size_t path_start = url_.find('/', scheme + 3);
    const std::string base = path_start == std::string::npos ? url_ : url_.substr(0, path_start);
    const std::string path = path_start == std::string::npos ? "/" : url_.substr(path_start);

    httplib::Client client(base);
    client.set_connection_timeout(0, reply_timeout_ms_ * 1000LL);
    client.set_read_timeout(reply_timeout_ms_ / 1000, (reply_timeout_ms_ % 1000) * 1000);
    const auto res = client.Post(path, to_json_string(request), "application/json");
    if (!res) {
        if (!replied_once_) throw ConfigError("agent endpoint unreachable: " + url_);
        throw AgentProtocolError("agent endpoint unreachable: " + url_);
    }
    if (res->status != 200)
        throw AgentProtocolError("agent endpoint returned status " +
                                 std::to_string(res->status));
    replied_once_ = true;
    try {
        const json j = json::parse(res->body);
        return j.at("action").get<std::string>();
    } catch (const json::exception& e) {
        throw AgentProtocolError(std::string("bad agent reply: ") + e.what());
    }
}

EpisodeResult run_episode(AgentAdapter& agent, const DynTask& task, const SuiteConfig& config) {
    if (config.budget <= 0) throw ConfigError("step budget must be positive");
    const Dialect& d = dialect(config.dialect);
    agent.episode_begin(task);
    auto [state, obs] = reset(task, config.seed);
    state.budget = config.budget;

    EpisodeResult result;
    result.task_id = task.task_id;
    result.termination = Termination::BudgetExhausted;

    std::vector<std::string> history;
    bool done = false;
    while (!done) {
        AgentRequest request;
        request.task_id = task.task_id;
        request.instruction = state.instruction;
        request.observation = obs;
        request.history = history;

        std::string raw;
        std::optional<Action> action;
        try {
            raw = agent.act(request);
            action = executable_action(d, raw);
            if (!action) {
                AgentRequest retry = request;
                retry.error = "unparseable or non-executable action: " + raw;
                raw = agent.act(retry);
                action = executable_action(d, raw);
            }
        } catch (const AgentProtocolError& e) {
            raw = std::string("<transport error: ") + e.what() + ">";
            action.reset();
        }
        if (!action) {
            result.transcript.push_back({obs, raw, std::nullopt});
            result.termination = Termination::ProtocolError;
            break;
        }

        result.transcript.push_back({obs, raw, action});
        history.push_back(raw);
        StepResult sr = step(state, *action);
        state = std::move(sr.state);
        obs = std::move(sr.observation);
        done = sr.done;
        if (sr.termination) result.termination = *sr.termination;
    }

    result.steps_taken = state.step_count;
    result.success_ratio = score_episode(task, state).success_ratio;
    return result;
}

namespace {

void persist_transcript(const std::string& dir, const EpisodeResult& episode) {
    std::filesystem::create_directories(dir);
    const std::string path = dir + "/" + episode.task_id + ".jsonl";
    std::ofstream out(path);
    if (!out) throw IoError("cannot write transcript " + path);
    out << json{{"task_id", episode.task_id},
                {"success_ratio", episode.success_ratio},
                {"steps_taken", episode.steps_taken},
                {"termination", std::string(to_string(episode.termination))}}
               .dump()
        << '\n';
    const Dialect& canon = dialect("canonical");
    for (std::size_t i = 0; i < episode.transcript.size(); ++i) {
        const TranscriptEntry& entry = episode.transcript[i];
        json line = {{"step", i},
                     {"observation", json::parse(to_json_string(entry.observation))},
                     {"raw", entry.raw_response}};
        line["action"] = entry.action ? json(canon.format(*entry.action)) : json(nullptr);
        out << line.dump() << '\n';
    }
    if (!out) throw IoError("cannot write transcript " + path);
}

}  // namespace

std::string format_rate(double mean_score, double sum_ratios, int task_count) {
    return format_number(mean_score) + "_{" + format_number(sum_ratios) + "/" +
           std::to_string(task_count) + "}";
}

std::string SuiteReport::format_rate() const {
    return togglebench::format_rate(mean_score, sum_ratios, task_count);
}

SuiteReport run_suite(AgentAdapter& agent, const std::vector<DynTask>& tasks,
                      const SuiteConfig& config) {
    if (tasks.empty()) throw ConfigError("task list is empty");
    SuiteReport report;
    report.task_count = static_cast<int>(tasks.size());
    for (const DynTask& task : tasks) {
        EpisodeResult episode = run_episode(agent, task, config);
        report.sum_ratios += episode.success_ratio;
        if (episode.success_ratio == 1.0) ++report.full_successes;
        if (!config.transcript_dir.empty()) persist_transcript(config.transcript_dir, episode);
        report.episodes.push_back(std::move(episode));
    }
    report.mean_score = 100.0 * report.sum_ratios / report.task_count;
    return report;
}

}  // namespace togglebench
