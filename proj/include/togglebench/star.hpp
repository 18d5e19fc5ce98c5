#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "togglebench/builder.hpp"

namespace togglebench {

// Three-step reasoning chain: perceive the current state, analyze the
// desired state, decide by comparing the two.
struct StarChain {
    std::string perceive;
    std::string analyze;
    std::string decide;
    Action final_action;
};

// Sentence templates with {feature}, {current_state}, {desired_state} slots.
struct ChainTemplates {
    std::string perceive = "The {feature} toggle on this screen is currently {current_state}.";
    std::string analyze = "The instruction asks for {feature} to be {desired_state}.";
    std::string decide_click =
        "The current state ({current_state}) differs from the desired state "
        "({desired_state}), so the toggle must be clicked to change it.";
    std::string decide_completed =
        "The current state ({current_state}) already equals the desired state "
        "({desired_state}), so no click is needed and the task is complete.";

    static ChainTemplates load(const std::string& path);
};

StarChain synth_chain(const Sample& sample, const ChainTemplates& templates = {});

// "Perceive: ...\nAnalyze: ...\nDecide: ..."
std::string render_chain(const StarChain& chain);

struct EpisodeStep {
    std::string instruction;
    std::string image_ref;
    std::string reasoning;
    Action gt_action;
    std::vector<BBox> layout;
};

struct Episode {
    std::string episode_id;
    std::vector<EpisodeStep> steps;
};

// Sidecar annotation marking one episode step as a toggle interaction.
struct ToggleStepAnnotation {
    std::size_t step_index = 0;
    ToggleState state = ToggleState::Off;
    std::string feature;
};

// Replaces reasoning on exactly the annotated steps; everything else is
// copied through untouched. The desired state is read off the step's
// ground-truth action (CLICK changes the toggle, anything else keeps it).
Episode refine_episode(const Episode& episode,
                       const std::vector<ToggleStepAnnotation>& annotations,
                       const ChainTemplates& templates = {});

enum class HistoryMode { TextChain, ScreenshotChain, None };

std::string_view to_string(HistoryMode m);
std::optional<HistoryMode> history_mode_from_string(std::string_view s);

struct TrainingExample {
    std::string example_id;
    std::string episode_id;  // groups steps; equals example_id for single-step samples
    int step_index = 0;
    std::string instruction;
    std::string image_ref;
    std::string reasoning;
    Action final_action;
};

TrainingExample example_from_sample(const Sample& sample, const ChainTemplates& templates = {});
std::vector<TrainingExample> examples_from_episode(const Episode& episode);

// Writes one JSON line per example with history drawn from earlier steps of
// the same episode. Every emitted action text is parsed back and compared to
// the example's action; any mismatch aborts with ExportError.
void export_training(const std::vector<TrainingExample>& examples, const Dialect& dialect,
                     HistoryMode mode, std::ostream& out);

}  // namespace togglebench
