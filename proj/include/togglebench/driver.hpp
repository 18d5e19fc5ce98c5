#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "togglebench/dynworld.hpp"
#include "togglebench/io.hpp"
#include "togglebench/metrics.hpp"

namespace togglebench {

// File-level operations shared by the command-line tool and the python
// bindings. Everything here speaks paths and plain strings.

// Accepts the preset names "state-control" and "agentic", or a bare number.
MatchConfig threshold_config(const std::string& text);

// sample_id -> raw output text; duplicate ids are an error.
std::map<std::string, std::string> index_predictions(const std::vector<Prediction>& predictions,
                                                     const std::string& source);

struct StateEvalOutcome {
    StateControlReport report;
    std::vector<std::string> missing;  // sample ids scored as non-matches under strict
};

struct AgenticEvalOutcome {
    AgenticReport report;
    std::vector<std::string> missing;  // "<episode_id>:<step_index>" keys
};

// Without strict, a missing prediction raises ConfigError; with it, the id
// is recorded and the step scores as a guaranteed non-match.
StateEvalOutcome eval_state_control_files(const std::string& samples_path,
                                          const std::string& predictions_path,
                                          const Dialect& dialect, const MatchConfig& cfg,
                                          bool strict);

AgenticEvalOutcome eval_agentic_files(const std::string& episodes_path,
                                      const std::string& predictions_path,
                                      const Dialect& dialect, const MatchConfig& cfg,
                                      bool strict);

// Exactly one of builtin ("builtin:optimal" / "builtin:always-toggle"),
// command, or url may be nonempty.
std::unique_ptr<AgentAdapter> make_agent(const std::string& builtin, const std::string& command,
                                         const std::string& url, const std::string& dialect,
                                         int timeout_ms);

}  // namespace togglebench
