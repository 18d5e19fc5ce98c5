#include "togglebench/star.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "togglebench/util.hpp"

namespace togglebench {

namespace {

using json = nlohmann::json;

std::string render_slots(const std::string& tmpl, const std::string& feature,
                         ToggleState current, ToggleState desired) {
    std::string out = replace_all(tmpl, "{feature}", feature);
    out = replace_all(std::move(out), "{current_state}", to_string(current));
    out = replace_all(std::move(out), "{desired_state}", to_string(desired));
    return out;
}

StarChain build_chain(const std::string& feature, ToggleState current, ToggleState desired,
                      Action final_action, const ChainTemplates& t) {
    StarChain chain;
    chain.perceive = render_slots(t.perceive, feature, current, desired);
    chain.analyze = render_slots(t.analyze, feature, current, desired);
    chain.decide = render_slots(current != desired ? t.decide_click : t.decide_completed,
                                feature, current, desired);
    chain.final_action = std::move(final_action);
    return chain;
}

}  // namespace

ChainTemplates ChainTemplates::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open chain template file " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("invalid chain template file " + path + ": " + e.what());
    }
    ChainTemplates t;
    t.perceive = j.value("perceive", t.perceive);
    t.analyze = j.value("analyze", t.analyze);
    t.decide_click = j.value("decide_click", t.decide_click);
    t.decide_completed = j.value("decide_completed", t.decide_completed);
    return t;
}

StarChain synth_chain(const Sample& sample, const ChainTemplates& templates) {
    const ToggleState current = sample.toggle_state;
    const ToggleState desired =
        sample.polarity == Polarity::Positive ? flipped(current) : current;
    return build_chain(sample.feature, current, desired, sample.label_action, templates);
}

std::string render_chain(const StarChain& chain) {
    std::ostringstream os;
    os << "Perceive: " << chain.perceive << '\n'
       << "Analyze: " << chain.analyze << '\n'
       << "Decide: " << chain.decide;
    return os.str();
}

Episode refine_episode(const Episode& episode,
                       const std::vector<ToggleStepAnnotation>& annotations,
                       const ChainTemplates& templates) {
    std::set<std::size_t> seen;
    std::vector<std::string> bad;
    for (const ToggleStepAnnotation& a : annotations) {
        if (a.step_index >= episode.steps.size()) {
            bad.push_back(std::to_string(a.step_index) + " (out of range)");
        } else if (!seen.insert(a.step_index).second) {
            bad.push_back(std::to_string(a.step_index) + " (duplicate)");
        } else if (trim(a.feature).empty()) {
            bad.push_back(std::to_string(a.step_index) + " (missing feature)");
        }
    }
    if (!bad.empty()) {
        std::string joined;
        for (const std::string& b : bad) {
            if (!joined.empty()) joined += ", ";
            joined += b;
        }
        throw Error("refine_episode: bad toggle-step annotations for episode '" +
                    episode.episode_id + "': " + joined);
    }

    Episode out = episode;
    for (const ToggleStepAnnotation& a : annotations) {
        EpisodeStep& step = out.steps[a.step_index];
        const ToggleState current = a.state;
        // CLICK flips the toggle; any other ground truth keeps the state
        const ToggleState desired =
            step.gt_action.type == ActionType::Click ? flipped(current) : current;
        step.reasoning =
            render_chain(build_chain(a.feature, current, desired, step.gt_action, templates));
    }
    return out;
}

std::string_view to_string(HistoryMode m) {
    switch (m) {
        case HistoryMode::TextChain: return "text-chain";
        case HistoryMode::ScreenshotChain: return "screenshot-chain";
        case HistoryMode::None: return "none";
    }
    return "none";
}

std::optional<HistoryMode> history_mode_from_string(std::string_view s) {
    if (s == "text-chain") return HistoryMode::TextChain;
    if (s == "screenshot-chain") return HistoryMode::ScreenshotChain;
    if (s == "none") return HistoryMode::None;
    return std::nullopt;
}

TrainingExample example_from_sample(const Sample& sample, const ChainTemplates& templates) {
    TrainingExample e;
    e.example_id = sample.sample_id;
    e.episode_id = sample.sample_id;
    e.step_index = 0;
    e.instruction = sample.instruction;
    e.image_ref = sample.image_ref;
    e.reasoning = render_chain(synth_chain(sample, templates));
    e.final_action = sample.label_action;
    return e;
}

std::vector<TrainingExample> examples_from_episode(const Episode& episode) {
    std::vector<TrainingExample> out;
    out.reserve(episode.steps.size());
    for (std::size_t i = 0; i < episode.steps.size(); ++i) {
        const EpisodeStep& step = episode.steps[i];
        TrainingExample e;
        e.example_id = episode.episode_id + ":" + std::to_string(i);
        e.episode_id = episode.episode_id;
        e.step_index = static_cast<int>(i);
        e.instruction = step.instruction;
        e.image_ref = step.image_ref;
        e.reasoning = step.reasoning;
        e.final_action = step.gt_action;
        out.push_back(std::move(e));
    }
    return out;
}

void export_training(const std::vector<TrainingExample>& examples, const Dialect& dialect,
                     HistoryMode mode, std::ostream& out) {
    std::vector<const TrainingExample*> ordered;
    ordered.reserve(examples.size());
    for (const TrainingExample& e : examples) ordered.push_back(&e);
    std::stable_sort(ordered.begin(), ordered.end(), [](const auto* a, const auto* b) {
        if (a->episode_id != b->episode_id) return a->episode_id < b->episode_id;
        return a->step_index < b->step_index;
    });

    std::map<std::string, std::vector<const TrainingExample*>> history;
    for (const TrainingExample* e : ordered) {
        std::string action_text;
        try {
            action_text = dialect.format(e->final_action);
        } catch (const UnsupportedActionError& err) {
            throw ExportError("example " + e->example_id + ": " + err.what());
        }
        const ParseResult back = dialect.parse(action_text);
        if (!back.ok() || !(back.action() == e->final_action)) {
            throw ExportError("example " + e->example_id +
                              ": action text does not round-trip through dialect '" +
                              std::string(dialect.name()) + "': " + action_text);
        }

        json h;
        auto& prior = history[e->episode_id];
        if (mode == HistoryMode::TextChain) {
            json actions = json::array();
            for (const TrainingExample* p : prior) actions.push_back(dialect.format(p->final_action));
            h = {{"mode", std::string(to_string(mode))}, {"actions", std::move(actions)}};
        } else if (mode == HistoryMode::ScreenshotChain) {
            json refs = json::array();
            for (const TrainingExample* p : prior) refs.push_back(p->image_ref);
            h = {{"mode", std::string(to_string(mode))}, {"image_refs", std::move(refs)}};
        } else {
            h = {{"mode", std::string(to_string(mode))}};
        }
        prior.push_back(e);

        const json line = {
            {"example_id", e->example_id},
            {"episode_id", e->episode_id},
            {"step_index", e->step_index},
            {"instruction", e->instruction},
            {"image_ref", e->image_ref},
            {"history", std::move(h)},
            {"reasoning", e->reasoning},
            {"dialect", std::string(dialect.name())},
            {"action_text", action_text},
        };
        out << line.dump() << '\n';
    }
    if (!out) throw ExportError("training export stream failed");
}

}  // namespace togglebench
