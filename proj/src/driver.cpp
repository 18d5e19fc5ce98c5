#include "togglebench/driver.hpp"

#include <stdexcept>
#include <utility>

#include "togglebench/io.hpp"

namespace togglebench {

MatchConfig threshold_config(const std::string& text) {
    if (text == "state-control") return MatchConfig::state_control();
    if (text == "agentic") return MatchConfig::agentic();
    MatchConfig cfg;
    try {
        std::size_t used = 0;
        cfg.click_threshold = std::stod(text, &used);
        if (used != text.size()) throw std::invalid_argument(text);
    } catch (const std::exception&) {
        throw ConfigError("click threshold must be 'state-control', 'agentic', or a number, "
                          "got '" +
                          text + "'");
    }
    cfg.validate();
    return cfg;
}

std::map<std::string, std::string> index_predictions(const std::vector<Prediction>& predictions,
                                                     const std::string& source) {
    std::map<std::string, std::string> by_id;
    for (const Prediction& p : predictions) {
        if (!by_id.emplace(p.sample_id, p.output).second) {
            throw ConfigError(source + ": duplicate prediction for sample '" + p.sample_id +
                              "'");
        }
    }
    return by_id;
}

namespace {

Action prediction_or_gap(const std::map<std::string, std::string>& by_id, const std::string& id,
                         const Dialect& d, bool strict, std::vector<std::string>& missing) {
    const auto it = by_id.find(id);
    if (it == by_id.end()) {
        if (!strict) {
            throw ConfigError("missing prediction for sample '" + id +
                              "' (pass strict to score gaps as non-matches)");
        }
        missing.push_back(id);
        return Action::other("<missing prediction>");
    }
    const ParseResult parsed = parse_action(it->second, d);
    if (!parsed.ok()) return Action::other(it->second);
    return parsed.action();
}

}  // namespace

StateEvalOutcome eval_state_control_files(const std::string& samples_path,
                                          const std::string& predictions_path,
                                          const Dialect& dialect, const MatchConfig& cfg,
                                          bool strict) {
    const auto samples = load_samples(samples_path);
    const auto by_id = index_predictions(load_predictions(predictions_path), predictions_path);

    StateEvalOutcome outcome;
    std::vector<ScoredSample> scored;
    scored.reserve(samples.size());
    for (const Sample& s : samples) {
        const Action pred = prediction_or_gap(by_id, s.sample_id, dialect, strict,
                                              outcome.missing);
        scored.push_back(score_sample(s, pred, cfg));
    }
    outcome.report = eval_state_control(scored, cfg);
    return outcome;
}

AgenticEvalOutcome eval_agentic_files(const std::string& episodes_path,
                                      const std::string& predictions_path,
                                      const Dialect& dialect, const MatchConfig& cfg,
                                      bool strict) {
    const auto episodes = load_episodes(episodes_path);
    const auto by_id = index_predictions(load_predictions(predictions_path), predictions_path);

    AgenticEvalOutcome outcome;
    std::vector<ScoredTrajectory> trajectories;
    trajectories.reserve(episodes.size());
    for (const Episode& e : episodes) {
        ScoredTrajectory t;
        t.episode_id = e.episode_id;
        for (std::size_t i = 0; i < e.steps.size(); ++i) {
            const EpisodeStep& step = e.steps[i];
            const std::string key = e.episode_id + ":" + std::to_string(i);
            ScoredStep s;
            s.gt.action = step.gt_action;
            s.gt.layout = step.layout;
            s.pred = prediction_or_gap(by_id, key, dialect, strict, outcome.missing);
            s.match = match_step(s.gt, s.pred, cfg);
            t.steps.push_back(std::move(s));
        }
        trajectories.push_back(std::move(t));
    }
    outcome.report = eval_agentic(trajectories);
    return outcome;
}

std::unique_ptr<AgentAdapter> make_agent(const std::string& builtin, const std::string& command,
                                         const std::string& url, const std::string& dialect,
                                         int timeout_ms) {
    const int sources =
        (builtin.empty() ? 0 : 1) + (command.empty() ? 0 : 1) + (url.empty() ? 0 : 1);
    if (sources != 1) {
        throw ConfigError("pass exactly one agent source (builtin name, command, or url)");
    }
    if (!builtin.empty()) {
        if (builtin == "builtin:optimal") return std::make_unique<OptimalScriptedAgent>(dialect);
        if (builtin == "builtin:always-toggle") {
            return std::make_unique<AlwaysToggleAgent>(dialect);
        }
        throw ConfigError("unknown agent '" + builtin +
                          "'; builtins are builtin:optimal and builtin:always-toggle");
    }
    if (!command.empty()) return std::make_unique<SubprocessAgent>(command, timeout_ms);
    return std::make_unique<HttpAgent>(url, timeout_ms);
}

}  // namespace togglebench
