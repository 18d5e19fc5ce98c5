#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "togglebench/action.hpp"

namespace togglebench {

inline constexpr int kDefaultStepBudget = 15;

enum class WidgetKind { Toggle, Button, ListItem };

std::string_view to_string(WidgetKind k);
std::optional<WidgetKind> widget_kind_from_string(std::string_view s);

struct Widget {
    BBox bbox;
    std::string label;
    WidgetKind kind = WidgetKind::Button;
    std::optional<bool> state;  // toggles only; mirrors the world state
};

// What an agent sees each step. Boxes live on the [0,1000] grid and never
// overlap within a screen.
struct Observation {
    std::string screen_id;
    std::vector<Widget> widgets;
    std::string instruction;
};

struct WorldState {
    std::map<std::string, bool> toggles;
    std::string current_screen = "home";
    std::optional<std::string> opened_app;  // app key, set by OPENAPP or an app icon
    int step_count = 0;
    int budget = kDefaultStepBudget;
    std::string task_id;
    std::string instruction;
};

// One checkable unit of a task, evaluated against the final world state.
struct SubtaskSpec {
    enum class Kind { Toggle, AppOpen };
    Kind kind = Kind::Toggle;
    std::string feature;  // Toggle: world toggle key
    bool desired = false;
    std::string app;  // AppOpen: app name as worded in the instruction

    bool satisfied(const WorldState& state) const;
};

struct DynTask {
    std::string task_id;
    std::string instruction_template;  // registry text, may contain {param} slots
    std::map<std::string, std::string> params;
    std::string instruction;  // template with params substituted
    std::map<std::string, bool> initial_toggles;
    std::vector<SubtaskSpec> subtasks;

    bool is_verify() const;  // task_id carries the Verify suffix
};

// The 20 bundled tasks. Verify variants start the target toggle in the
// desired state; the others start it in the complement.
const std::vector<DynTask>& default_tasks();

std::vector<DynTask> load_tasks(const std::string& path);
std::string tasks_to_json(const std::vector<DynTask>& tasks);
const DynTask& find_task(const std::vector<DynTask>& tasks, std::string_view task_id);

// Navigation graph introspection, used by the scripted agents and the tests.
const std::vector<std::string>& toggle_features();
const std::vector<std::string>& screen_ids();
std::string_view screen_of_feature(std::string_view feature);
std::string_view feature_label(std::string_view feature);
std::optional<std::string> parent_screen(std::string_view screen_id);
std::string entry_label(std::string_view child_screen);  // widget clicked in the parent

enum class Termination { AgentCompleted, BudgetExhausted, ProtocolError };

std::string_view to_string(Termination t);

// World initialized from the task template. Non-target toggles take
// seed-derived values so agents cannot rely on a fixed ambient state.
std::pair<WorldState, Observation> reset(const DynTask& task, std::uint64_t seed);

// Renders the current screen. Toggle widget states mirror `state.toggles`.
Observation observe(const WorldState& state);

struct StepResult {
    WorldState state;
    Observation observation;
    bool done = false;
    std::optional<Termination> termination;
};

// One transition. CLICK flips toggles, follows list items, launches app
// icons; PRESS goes back; OPENAPP jumps to a matching app; COMPLETED ends
// the episode; anything that hits nothing still consumes the step.
StepResult step(const WorldState& state, const Action& action);

struct EpisodeScore {
    double success_ratio = 0.0;
    int satisfied = 0;
    int total = 0;
};

EpisodeScore score_episode(const DynTask& task, const WorldState& final_state);

struct TranscriptEntry {
    Observation observation;
    std::string raw_response;
    std::optional<Action> action;  // absent when the episode died on protocol
};

struct EpisodeResult {
    std::string task_id;
    double success_ratio = 0.0;
    int steps_taken = 0;
    std::vector<TranscriptEntry> transcript;
    Termination termination = Termination::AgentCompleted;
};

struct AgentRequest {
    std::string task_id;
    std::string instruction;
    Observation observation;
    std::vector<std::string> history;  // prior action texts in the suite dialect
    std::string error;                 // set on the single retry after a bad reply
};

std::string to_json_string(const AgentRequest& request);
AgentRequest agent_request_from_json(std::string_view text);
std::string to_json_string(const Observation& observation);
Observation observation_from_json(std::string_view text);

class AgentAdapter {
public:
    virtual ~AgentAdapter() = default;
    virtual std::string_view id() const = 0;
    virtual void episode_begin(const DynTask& task) { (void)task; }
    // Returns one raw action string. Transport failures throw
    // AgentProtocolError; unparseable replies are the runner's business.
    virtual std::string act(const AgentRequest& request) = 0;
};

// Deterministic policy over the bundled navigation graph: walk to each
// target toggle, read its rendered state, click only when it differs from
// the goal. With always_toggle it clicks the target regardless of state,
// which loses every Verify task.
class ScriptedPolicyAgent : public AgentAdapter {
public:
    explicit ScriptedPolicyAgent(bool always_toggle, std::string dialect = "canonical");
    std::string_view id() const override;
    void episode_begin(const DynTask& task) override;
    std::string act(const AgentRequest& request) override;

private:
    struct Goal {
        bool is_app = false;
        std::string feature;
        bool desired = false;
        std::string app;
    };
    bool always_toggle_;
    std::string dialect_;
    std::vector<Goal> goals_;
    std::size_t next_goal_ = 0;
};

class OptimalScriptedAgent : public ScriptedPolicyAgent {
public:
    explicit OptimalScriptedAgent(std::string dialect = "canonical")
        : ScriptedPolicyAgent(false, std::move(dialect)) {}
};

class AlwaysToggleAgent : public ScriptedPolicyAgent {
public:
    explicit AlwaysToggleAgent(std::string dialect = "canonical")
        : ScriptedPolicyAgent(true, std::move(dialect)) {}
};

// Line-delimited JSON over a child process: one request line in, one
// {"action": ...} line out. The child is spawned lazily and kept for the
// whole suite.
class SubprocessAgent : public AgentAdapter {
public:
    explicit SubprocessAgent(std::string command, int reply_timeout_ms = 30000);
    ~SubprocessAgent() override;
    SubprocessAgent(const SubprocessAgent&) = delete;
    SubprocessAgent& operator=(const SubprocessAgent&) = delete;
    std::string_view id() const override { return "subprocess"; }
    std::string act(const AgentRequest& request) override;

private:
    void ensure_started();
    std::string read_line();

    std::string command_;
    int reply_timeout_ms_;
    long pid_ = -1;
    int to_child_ = -1;
    int from_child_ = -1;
    bool replied_once_ = false;  // separates launch failure from mid-run death
    std::string buffer_;
};

// HTTP POST of the request JSON; expects {"action": ...} back.
class HttpAgent : public AgentAdapter {
public:
    explicit HttpAgent(std::string url, int reply_timeout_ms = 30000);
    std::string_view id() const override { return "http"; }
    std::string act(const AgentRequest& request) override;

private:
    std::string url_;
    int reply_timeout_ms_;
    bool replied_once_ = false;
};

struct SuiteConfig {
    int budget = kDefaultStepBudget;
    std::string dialect = "canonical";
    std::uint64_t seed = 0;
    std::string transcript_dir;  // empty: transcripts kept in memory only
};

struct SuiteReport {
    std::vector<EpisodeResult> episodes;
    int task_count = 0;
    double sum_ratios = 0.0;    // fractional tally, e.g. 8.5 of 20
    double mean_score = 0.0;    // 100 * sum_ratios / task_count
    int full_successes = 0;

    std::string format_rate() const;  // "55_{11/20}"
};

std::string format_rate(double mean_score, double sum_ratios, int task_count);

// Drives one episode: ask, parse, step, until done. An unparseable or
// non-executable reply gets exactly one retry with the error echoed back;
// a second failure (or a transport error) ends the episode as
// protocol-error, scored on the state reached so far.
EpisodeResult run_episode(AgentAdapter& agent, const DynTask& task,
                          const SuiteConfig& config = {});

SuiteReport run_suite(AgentAdapter& agent, const std::vector<DynTask>& tasks,
                      const SuiteConfig& config = {});

}  // namespace togglebench
