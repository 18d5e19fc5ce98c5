#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "togglebench/action.hpp"
#include "togglebench/annotate.hpp"

namespace togglebench {

enum class Polarity { Positive, Negative };

std::string_view to_string(Polarity p);

// One benchmark sample. A positive sample asks the agent to change the
// toggle (label CLICK at the toggle center); a negative sample asks for the
// state the toggle is already in (label COMPLETED).
struct Sample {
    std::string sample_id;
    std::string screen_id;
    std::string image_ref;
    Polarity polarity = Polarity::Positive;
    std::string instruction;
    Action label_action;
    BBox toggle_box;
    ToggleState toggle_state = ToggleState::Off;
    std::string feature;
    std::vector<BBox> layout;  // screen widget boxes; defaults to {toggle_box}
};

// Instruction phrasing. The default set is exactly one template per verb;
// optional paraphrases participate only when paraphrase is set, selected by
// a stable hash of the sample key.
struct InstructionTemplates {
    std::vector<std::string> turn_on = {"Turn on {feature}"};
    std::vector<std::string> turn_off = {"Turn off {feature}"};
    bool paraphrase = false;

    std::string render(bool want_on, const std::string& feature,
                       const std::string& sample_key) const;

    // JSON file {"turn_on": [...], "turn_off": [...], "paraphrase": bool};
    // absent keys keep the defaults.
    static InstructionTemplates load(const std::string& path);
};

std::pair<Sample, Sample> expand_quadruplet(const ToggleQuadruplet& q,
                                            const InstructionTemplates& templates = {});

struct SplitManifest {
    std::uint64_t seed = 0;
    double ratio = 0.9;
    std::vector<std::string> train_ids;  // quadruplet-level keys, sorted
    std::vector<std::string> test_ids;
};

// Key under which both samples of a quadruplet travel together.
std::string quadruplet_key(const Sample& s);
std::string quadruplet_key(const ToggleQuadruplet& q);

// Deterministic hash split at quadruplet granularity. Both polarities of a
// quadruplet land in the same side, so each side is exactly balanced.
SplitManifest split_dataset(const std::vector<Sample>& samples, std::uint64_t seed,
                            double ratio = 0.9);

std::pair<std::vector<Sample>, std::vector<Sample>> apply_split(
    const std::vector<Sample>& samples, const SplitManifest& manifest);

}  // namespace togglebench
