#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "togglebench/builder.hpp"
#include "togglebench/match.hpp"

namespace togglebench {

struct ScoredSample {
    Polarity polarity = Polarity::Positive;
    GroundTruthStep gt;
    Action pred;
    MatchResult match;
    Point positive_click_point;  // toggle location, feeds N-FPR
};

struct StateControlCounts {
    std::size_t positives = 0;
    std::size_t negatives = 0;
    std::size_t type_match = 0;
    std::size_t exact_match = 0;
    std::size_t p_click = 0;      // positives predicted CLICK
    std::size_t p_exact = 0;      // positives exactly matched
    std::size_t p_completed = 0;  // positives predicted COMPLETED (false negatives)
    std::size_t n_completed = 0;  // negatives predicted COMPLETED
    std::size_t n_click = 0;      // negatives predicted CLICK (false positive types)
    std::size_t n_click_hit = 0;  // negatives whose CLICK lands on the toggle
};

// Bucket metrics are nullopt when their bucket is empty; they are never
// silently reported as zero.
struct StateControlReport {
    double o_tmr = 0.0;
    double o_amr = 0.0;
    std::optional<double> p_tmr, p_amr, p_fnr;
    std::optional<double> n_amr, n_fptr, n_fpr;
    StateControlCounts counts;
};

struct ScoredStep {
    GroundTruthStep gt;
    Action pred;
    MatchResult match;
};

struct ScoredTrajectory {
    std::string episode_id;
    std::vector<ScoredStep> steps;
};

struct AgenticReport {
    double tmr = 0.0;
    double amr = 0.0;
    double tsr = 0.0;
    std::optional<double> gmr;  // nullopt when no ground-truth CLICK steps exist
    std::size_t step_count = 0;
    std::size_t trajectory_count = 0;
    std::size_t click_step_count = 0;
};

// cfg drives the N-FPR click re-check against the toggle location.
StateControlReport eval_state_control(const std::vector<ScoredSample>& samples,
                                      const MatchConfig& cfg = MatchConfig::state_control());

AgenticReport eval_agentic(const std::vector<ScoredTrajectory>& trajectories);

// Bridges a benchmark sample and a raw prediction into a ScoredSample.
ScoredSample score_sample(const Sample& sample, const Action& pred, const MatchConfig& cfg);

std::string to_json_lines(const StateControlReport& report);
std::string to_table(const StateControlReport& report);
std::string to_json_lines(const AgenticReport& report);
std::string to_table(const AgenticReport& report);

}  // namespace togglebench
