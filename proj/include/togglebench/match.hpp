#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "togglebench/action.hpp"

namespace togglebench {

// Exact-match configuration. The click threshold is the only knob that
// differs between the two evaluation regimes.
struct MatchConfig {
    double click_threshold = 0.04;
    std::string distance_metric = "euclidean-normalized";
    std::string stemmer = "porter";

    static MatchConfig state_control() { return MatchConfig{}; }
    static MatchConfig agentic() {
        MatchConfig c;
        c.click_threshold = 0.14;
        return c;
    }

    // Throws ConfigError unless 0 < click_threshold < 1 and the metric and
    // stemmer identifiers are recognized.
    void validate() const;
};

enum class MatchReason {
    TypeMismatch,
    BBoxHit,
    DistancePass,
    DistanceFail,
    ParamPass,
    ParamMismatch,
};

struct MatchResult {
    bool type_match = false;
    bool exact_match = false;
    MatchReason reason = MatchReason::TypeMismatch;
};

std::string_view to_string(MatchReason r);

// Ground-truth step: the reference action plus the screen's layout boxes in
// normalized [0,1000] coordinates.
struct GroundTruthStep {
    Action action;
    std::vector<BBox> layout;
};

std::string porter_stem(std::string_view word);

// lowercase, whitespace-tokenize, stem each token, rejoin with single spaces
std::string normalize_app_name(std::string_view name);

// Symmetric containment on stem-normalized names.
bool openapp_match(std::string_view gt_name, std::string_view pred_name);

// Case-insensitive equality after trimming leading/trailing whitespace.
// Interior whitespace is significant.
bool type_text_match(std::string_view gt_text, std::string_view pred_text);

// A predicted click matches when it lands inside the smallest layout box
// containing the ground-truth point; with no such box (or a miss), when the
// normalized euclidean distance is strictly below the threshold.
MatchResult click_match(Point gt_point, const std::vector<BBox>& layout, Point pred_point,
                        const MatchConfig& cfg);

double click_distance(Point gt_point, Point pred_point);

// Smallest-area layout box containing p; ties keep the earliest box.
// Returns -1 when no box contains p.
int containing_box_index(Point p, const std::vector<BBox>& layout);

MatchResult match_step(const GroundTruthStep& gt, const Action& pred, const MatchConfig& cfg);

}  // namespace togglebench
