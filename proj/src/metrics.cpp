#include "togglebench/metrics.hpp"

#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "togglebench/util.hpp"

namespace togglebench {

namespace {

using json = nlohmann::json;

double ratio(std::size_t num, std::size_t den) {
    return static_cast<double>(num) / static_cast<double>(den);
}

std::optional<double> bucket(std::size_t num, std::size_t den) {
    if (den == 0) return std::nullopt;
    return ratio(num, den);
}

}  // namespace

StateControlReport eval_state_control(const std::vector<ScoredSample>& samples,
                                      const MatchConfig& cfg) {
    if (samples.empty()) {
        throw Error("eval_state_control: empty sample list");
    }
    StateControlCounts c;
    for (const ScoredSample& s : samples) {
        if (s.polarity == Polarity::Positive) {
            if (s.gt.action.type != ActionType::Click) {
                throw Error("positive sample must carry a CLICK ground truth");
            }
            c.positives += 1;
            if (s.pred.type == ActionType::Click) c.p_click += 1;
            if (s.pred.type == ActionType::Completed) c.p_completed += 1;
            if (s.match.exact_match) c.p_exact += 1;
        } else {
            if (s.gt.action.type != ActionType::Completed) {
                throw Error("negative sample must carry a COMPLETED ground truth");
            }
            c.negatives += 1;
            if (s.pred.type == ActionType::Completed) c.n_completed += 1;
            if (s.pred.type == ActionType::Click) {
                c.n_click += 1;
                if (s.pred.point &&
                    click_match(s.positive_click_point, s.gt.layout, *s.pred.point, cfg)
                        .exact_match) {
                    c.n_click_hit += 1;
                }
            }
        }
        if (s.match.type_match) c.type_match += 1;
        if (s.match.exact_match) c.exact_match += 1;
    }

    // integer-count forms of the weighted-average identities; a violation
    // means the match results are inconsistent with the ground-truth types
    if (c.type_match != c.p_click + c.n_completed ||
        c.exact_match != c.p_exact + c.n_completed) {
        throw Error("eval_state_control: match results inconsistent with sample polarity");
    }

    const std::size_t total = c.positives + c.negatives;
    StateControlReport r;
    r.counts = c;
    r.o_tmr = ratio(c.type_match, total);
    r.o_amr = ratio(c.exact_match, total);
    r.p_tmr = bucket(c.p_click, c.positives);
    r.p_amr = bucket(c.p_exact, c.positives);
    r.p_fnr = bucket(c.p_completed, c.positives);
    r.n_amr = bucket(c.n_completed, c.negatives);
    r.n_fptr = bucket(c.n_click, c.negatives);
    r.n_fpr = bucket(c.n_click_hit, c.negatives);
    return r;
}

AgenticReport eval_agentic(const std::vector<ScoredTrajectory>& trajectories) {
    if (trajectories.empty()) {
        throw Error("eval_agentic: empty trajectory list");
    }
    AgenticReport r;
    std::size_t type_match = 0;
    std::size_t exact_match = 0;
    std::size_t perfect_trajectories = 0;
    std::size_t click_exact = 0;
    for (const ScoredTrajectory& t : trajectories) {
        if (t.steps.empty()) {
            throw Error("eval_agentic: trajectory '" + t.episode_id + "' has no steps");
        }
        bool all_exact = true;
        for (const ScoredStep& s : t.steps) {
            r.step_count += 1;
            if (s.match.type_match) type_match += 1;
            if (s.match.exact_match) exact_match += 1;
            all_exact = all_exact && s.match.exact_match;
            if (s.gt.action.type == ActionType::Click) {
                r.click_step_count += 1;
                if (s.match.exact_match) click_exact += 1;
            }
        }
        if (all_exact) perfect_trajectories += 1;
    }
    r.trajectory_count = trajectories.size();
    r.tmr = ratio(type_match, r.step_count);
    r.amr = ratio(exact_match, r.step_count);
    r.tsr = ratio(perfect_trajectories, r.trajectory_count);
    r.gmr = bucket(click_exact, r.click_step_count);
    return r;
}

ScoredSample score_sample(const Sample& sample, const Action& pred, const MatchConfig& cfg) {
    ScoredSample s;
    s.polarity = sample.polarity;
    s.gt.action = sample.label_action;
    s.gt.layout = sample.layout.empty() ? std::vector<BBox>{sample.toggle_box} : sample.layout;
    s.pred = pred;
    s.match = match_step(s.gt, pred, cfg);
    s.positive_click_point = sample.toggle_box.center();
    return s;
}

// ---------------------------------------------------------------------------
// Report rendering
// ---------------------------------------------------------------------------

namespace {

json metric_line(const std::string& name, double value) {
    return json{{"metric", name}, {"value", value}};
}

json metric_line(const std::string& name, const std::optional<double>& value) {
    if (value) return json{{"metric", name}, {"value", *value}};
    return json{{"metric", name}, {"value", nullptr}};
}

std::string table_cell(const std::optional<double>& value) {
    if (!value) return "n/a";
    std::ostringstream os;
    os << std::fixed << std::setprecision(4) << *value;
    return os.str();
}

std::string table_cell(double value) { return table_cell(std::optional<double>(value)); }

void table_row(std::ostringstream& os, const std::string& name, const std::string& value) {
    os << std::left << std::setw(8) << name << "  " << value << '\n';
}

}  // namespace

std::string to_json_lines(const StateControlReport& r) {
    std::ostringstream os;
    os << metric_line("o_tmr", r.o_tmr).dump() << '\n';
    os << metric_line("o_amr", r.o_amr).dump() << '\n';
    os << metric_line("p_tmr", r.p_tmr).dump() << '\n';
    os << metric_line("p_amr", r.p_amr).dump() << '\n';
    os << metric_line("p_fnr", r.p_fnr).dump() << '\n';
    os << metric_line("n_amr", r.n_amr).dump() << '\n';
    os << metric_line("n_fptr", r.n_fptr).dump() << '\n';
    os << metric_line("n_fpr", r.n_fpr).dump() << '\n';
    os << json{{"counts",
                {{"positives", r.counts.positives},
                 {"negatives", r.counts.negatives},
                 {"type_match", r.counts.type_match},
                 {"exact_match", r.counts.exact_match},
                 {"p_click", r.counts.p_click},
                 {"p_exact", r.counts.p_exact},
                 {"p_completed", r.counts.p_completed},
                 {"n_completed", r.counts.n_completed},
                 {"n_click", r.counts.n_click},
                 {"n_click_hit", r.counts.n_click_hit}}}}
              .dump()
       << '\n';
    return os.str();
}

std::string to_table(const StateControlReport& r) {
    std::ostringstream os;
    os << "metric    value\n";
    table_row(os, "O-TMR", table_cell(r.o_tmr));
    table_row(os, "O-AMR", table_cell(r.o_amr));
    table_row(os, "P-TMR", table_cell(r.p_tmr));
    table_row(os, "P-AMR", table_cell(r.p_amr));
    table_row(os, "P-FNR", table_cell(r.p_fnr));
    table_row(os, "N-AMR", table_cell(r.n_amr));
    table_row(os, "N-FPTR", table_cell(r.n_fptr));
    table_row(os, "N-FPR", table_cell(r.n_fpr));
    os << "samples   " << (r.counts.positives + r.counts.negatives) << " ("
       << r.counts.positives << " positive, " << r.counts.negatives << " negative)\n";
    return os.str();
}

std::string to_json_lines(const AgenticReport& r) {
    std::ostringstream os;
    os << metric_line("tmr", r.tmr).dump() << '\n';
    os << metric_line("amr", r.amr).dump() << '\n';
    os << metric_line("tsr", r.tsr).dump() << '\n';
    os << metric_line("gmr", r.gmr).dump() << '\n';
    os << json{{"counts",
                {{"steps", r.step_count},
                 {"trajectories", r.trajectory_count},
                 {"click_steps", r.click_step_count}}}}
              .dump()
       << '\n';
    return os.str();
}

std::string to_table(const AgenticReport& r) {
    std::ostringstream os;
    os << "metric    value\n";
    table_row(os, "TMR", table_cell(r.tmr));
    table_row(os, "AMR", table_cell(r.amr));
    table_row(os, "TSR", table_cell(r.tsr));
    table_row(os, "GMR", table_cell(r.gmr));
    os << "steps     " << r.step_count << " in " << r.trajectory_count << " trajectories, "
       << r.click_step_count << " ground-truth clicks\n";
    return os.str();
}

}  // namespace togglebench
