#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <fstream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "togglebench/annotate.hpp"
#include "togglebench/builder.hpp"
#include "togglebench/driver.hpp"
#include "togglebench/dynworld.hpp"
#include "togglebench/io.hpp"
#include "togglebench/match.hpp"
#include "togglebench/star.hpp"

namespace py = pybind11;
using namespace togglebench;

namespace {

std::vector<BBox> boxes_from_lists(const std::vector<std::vector<int>>& raw) {
    std::vector<BBox> out;
    out.reserve(raw.size());
    for (const auto& b : raw) {
        if (b.size() != 4) throw ConfigError("a box needs [x_min, y_min, x_max, y_max]");
        const BBox box{b[0], b[1], b[2], b[3]};
        if (!box.valid()) throw ConfigError("invalid box " + box.key());
        out.push_back(box);
    }
    return out;
}

py::dict action_to_dict(const Action& a) {
    py::dict d;
    d["type"] = std::string(to_string(a.type));
    d["point"] = a.point ? py::object(py::make_tuple(a.point->x, a.point->y))
                         : py::object(py::none());
    d["direction"] = a.direction ? py::object(py::str(std::string(to_string(*a.direction))))
                                 : py::object(py::none());
    d["text"] = a.text ? py::object(py::str(*a.text)) : py::object(py::none());
    d["app_name"] = a.app_name ? py::object(py::str(*a.app_name)) : py::object(py::none());
    d["raw"] = a.raw;
    return d;
}

py::dict match_to_dict(const MatchResult& m) {
    py::dict d;
    d["type_match"] = m.type_match;
    d["exact_match"] = m.exact_match;
    d["reason"] = std::string(to_string(m.reason));
    return d;
}

py::object opt(const std::optional<double>& v) {
    return v ? py::object(py::float_(*v)) : py::object(py::none());
}

py::dict state_report_to_dict(const StateControlReport& r) {
    py::dict d;
    d["o_tmr"] = r.o_tmr;
    d["o_amr"] = r.o_amr;
    d["p_tmr"] = opt(r.p_tmr);
    d["p_amr"] = opt(r.p_amr);
    d["p_fnr"] = opt(r.p_fnr);
    d["n_amr"] = opt(r.n_amr);
    d["n_fptr"] = opt(r.n_fptr);
    d["n_fpr"] = opt(r.n_fpr);
    py::dict counts;
    counts["positives"] = r.counts.positives;
    counts["negatives"] = r.counts.negatives;
    counts["type_match"] = r.counts.type_match;
    counts["exact_match"] = r.counts.exact_match;
    counts["p_click"] = r.counts.p_click;
    counts["p_exact"] = r.counts.p_exact;
    counts["p_completed"] = r.counts.p_completed;
    counts["n_completed"] = r.counts.n_completed;
    counts["n_click"] = r.counts.n_click;
    counts["n_click_hit"] = r.counts.n_click_hit;
    d["counts"] = counts;
    return d;
}

py::dict agentic_report_to_dict(const AgenticReport& r) {
    py::dict d;
    d["tmr"] = r.tmr;
    d["amr"] = r.amr;
    d["tsr"] = r.tsr;
    d["gmr"] = opt(r.gmr);
    d["step_count"] = r.step_count;
    d["trajectory_count"] = r.trajectory_count;
    d["click_step_count"] = r.click_step_count;
    return d;
}

ChainTemplates chain_templates(const std::string& path) {
    return path.empty() ? ChainTemplates{} : ChainTemplates::load(path);
}

HistoryMode history_mode(const std::string& name) {
    const auto mode = history_mode_from_string(name);
    if (!mode) {
        throw ConfigError("history mode must be text-chain, screenshot-chain, or none, got '" +
                          name + "'");
    }
    return *mode;
}

std::size_t write_training(const std::vector<TrainingExample>& examples,
                           const std::string& dialect_name, const std::string& history_mode_name,
                           const std::string& out_path) {
    std::ofstream out(out_path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + out_path);
    export_training(examples, dialect(dialect_name), history_mode(history_mode_name), out);
    return examples.size();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "GUI toggle state-control benchmark toolkit";

    const py::object base = py::register_exception<Error>(m, "Error");
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<IoError>(m, "IoError", base.ptr());
    py::register_exception<UnknownDialectError>(m, "UnknownDialectError", base.ptr());
    py::register_exception<UnsupportedActionError>(m, "UnsupportedActionError", base.ptr());
    py::register_exception<AnnotatorError>(m, "AnnotatorError", base.ptr());
    py::register_exception<CheckpointError>(m, "CheckpointError", base.ptr());
    py::register_exception<ExportError>(m, "ExportError", base.ptr());
    py::register_exception<AgentProtocolError>(m, "AgentProtocolError", base.ptr());

    m.def("dialect_names", &dialect_names, "Registered action dialect names.");

    m.def(
        "parse_action",
        [](const std::string& text, const std::string& dialect_name) {
            const ParseResult r = parse_action(text, dialect(dialect_name));
            py::dict d;
            d["ok"] = r.ok();
            if (r.ok()) {
                d["action"] = action_to_dict(r.action());
            } else {
                d["error"] = r.error().message;
                d["offset"] = r.error().offset;
            }
            return d;
        },
        py::arg("text"), py::arg("dialect") = "canonical",
        "Parse one action string; never raises on malformed input.");

    m.def(
        "translate_action",
        [](const std::string& text, const std::string& from, const std::string& to) {
            const ParseResult r = parse_action(text, dialect(from));
            if (!r.ok()) throw ConfigError("unparseable action: " + r.error().message);
            return format_action(r.action(), dialect(to));
        },
        py::arg("text"), py::arg("from_dialect"), py::arg("to_dialect"),
        "Re-express one action string in another dialect.");

    m.def("porter_stem", [](const std::string& w) { return porter_stem(w); }, py::arg("word"));
    m.def("normalize_app_name", [](const std::string& n) { return normalize_app_name(n); },
          py::arg("name"));
    m.def("openapp_match", [](const std::string& a, const std::string& b) {
              return openapp_match(a, b);
          },
          py::arg("gt_name"), py::arg("pred_name"));
    m.def("type_text_match", [](const std::string& a, const std::string& b) {
              return type_text_match(a, b);
          },
          py::arg("gt_text"), py::arg("pred_text"));
    m.def(
        "click_distance",
        [](int gx, int gy, int px, int py_) {
            return click_distance(Point{gx, gy}, Point{px, py_});
        },
        py::arg("gt_x"), py::arg("gt_y"), py::arg("pred_x"), py::arg("pred_y"),
        "Normalized euclidean distance between two [0,1000] grid points.");

    m.def(
        "match_actions",
        [](const std::string& gt, const std::string& pred,
           const std::vector<std::vector<int>>& layout, const std::string& click_threshold,
           const std::string& dialect_name) {
            const Dialect& d = dialect(dialect_name);
            const ParseResult gt_parsed = parse_action(gt, d);
            if (!gt_parsed.ok() || !gt_parsed.action().well_formed() ||
                gt_parsed.action().type == ActionType::Other) {
                throw ConfigError("ground truth must be a well-formed action: " + gt);
            }
            GroundTruthStep step;
            step.action = gt_parsed.action();
            step.layout = boxes_from_lists(layout);
            const ParseResult pred_parsed = parse_action(pred, d);
            const Action pred_action =
                pred_parsed.ok() ? pred_parsed.action() : Action::other(pred);
            return match_to_dict(match_step(step, pred_action, threshold_config(click_threshold)));
        },
        py::arg("gt"), py::arg("pred"), py::arg("layout") = std::vector<std::vector<int>>{},
        py::arg("click_threshold") = "state-control", py::arg("dialect") = "canonical",
        "Score one prediction against one ground-truth action.");

    m.def(
        "annotate_records",
        [](const std::string& records_path, const std::string& out_path,
           const std::string& drops_path, bool mock, std::uint64_t seed, double iou_dedup,
           bool strict_feature_match, int max_retries, int workers,
           const std::string& checkpoint, bool resume, bool restart) {
            const auto records = load_screen_records(records_path);
            std::unique_ptr<AnnotatorClient> a;
            std::unique_ptr<AnnotatorClient> b;
            if (mock) {
                a = std::make_unique<ScriptedAnnotator>("mock-a", seed);
                b = std::make_unique<ScriptedAnnotator>("mock-b", seed);
            } else {
                a = HttpAnnotatorClient::from_env("A");
                b = HttpAnnotatorClient::from_env("B");
            }
            PipelineConfig cfg;
            cfg.seed = seed;
            cfg.iou_dedup = iou_dedup;
            cfg.strict_feature_match = strict_feature_match;
            cfg.max_retries = max_retries;
            cfg.workers = workers;
            cfg.checkpoint_path = checkpoint;
            cfg.resume = resume;
            cfg.restart = restart;
            const PipelineResult result = run_pipeline(records, *a, *b, cfg);
            save_quadruplets(result.quadruplets, out_path);
            if (!drops_path.empty()) save_drops(result.drops, drops_path);
            py::dict d;
            d["boxes"] = result.audit.boxes_total;
            d["retained"] = result.audit.retained;
            d["not_toggle"] = result.audit.not_toggle;
            d["state_disagreement"] = result.audit.state_disagreement;
            d["feature_disagreement"] = result.audit.feature_disagreement;
            d["annotator_error"] = result.audit.annotator_error;
            d["interrupted"] = result.interrupted;
            return d;
        },
        py::arg("records"), py::arg("out"), py::arg("drops") = "", py::arg("mock") = true,
        py::arg("seed") = 0, py::arg("iou_dedup") = 0.9,
        py::arg("strict_feature_match") = false, py::arg("max_retries") = 3,
        py::arg("workers") = 4, py::arg("checkpoint") = "", py::arg("resume") = false,
        py::arg("restart") = false,
        "Run the two-annotator agreement pipeline; returns the retention funnel.");

    m.def(
        "expand_quadruplets_file",
        [](const std::string& quads_path, const std::string& out_path,
           const std::string& templates_path) {
            const auto quads = load_quadruplets(quads_path);
            const InstructionTemplates templates = templates_path.empty()
                                                       ? InstructionTemplates{}
                                                       : InstructionTemplates::load(templates_path);
            std::vector<Sample> samples;
            samples.reserve(quads.size() * 2);
            for (const ToggleQuadruplet& q : quads) {
                auto [pos, neg] = expand_quadruplet(q, templates);
                samples.push_back(std::move(pos));
                samples.push_back(std::move(neg));
            }
            save_samples(samples, out_path);
            return samples.size();
        },
        py::arg("quadruplets"), py::arg("out"), py::arg("templates") = "",
        "Expand every quadruplet into its positive/negative sample pair.");

    m.def(
        "split_samples_file",
        [](const std::string& samples_path, const std::string& manifest_out,
           const std::string& train_out, const std::string& test_out, std::uint64_t seed,
           double ratio) {
            const auto samples = load_samples(samples_path);
            const SplitManifest manifest = split_dataset(samples, seed, ratio);
            if (!manifest_out.empty()) save_split_manifest(manifest, manifest_out);
            auto [train, test] = apply_split(samples, manifest);
            if (!train_out.empty()) save_samples(train, train_out);
            if (!test_out.empty()) save_samples(test, test_out);
            return py::make_tuple(train.size(), test.size());
        },
        py::arg("samples"), py::arg("manifest_out") = "", py::arg("train_out") = "",
        py::arg("test_out") = "", py::arg("seed") = 0, py::arg("ratio") = 0.9,
        "Deterministic pair-coherent split; returns (train_count, test_count).");

    m.def(
        "synth_from_samples",
        [](const std::string& samples_path, const std::string& out_path,
           const std::string& dialect_name, const std::string& history_mode_name,
           const std::string& templates_path) {
            const auto samples = load_samples(samples_path);
            const ChainTemplates templates = chain_templates(templates_path);
            std::vector<TrainingExample> examples;
            examples.reserve(samples.size());
            for (const Sample& s : samples) examples.push_back(example_from_sample(s, templates));
            return write_training(examples, dialect_name, history_mode_name, out_path);
        },
        py::arg("samples"), py::arg("out"), py::arg("dialect") = "canonical",
        py::arg("history_mode") = "none", py::arg("templates") = "",
        "Write one reasoning-chain training example per sample.");

    m.def(
        "refine_episodes_file",
        [](const std::string& episodes_path, const std::string& annotations_path,
           const std::string& out_episodes, const std::string& out_training,
           const std::string& dialect_name, const std::string& history_mode_name,
           const std::string& templates_path) {
            const auto episodes = load_episodes(episodes_path);
            std::map<std::string, std::vector<ToggleStepAnnotation>> annotations;
            if (!annotations_path.empty()) {
                annotations = load_toggle_annotations(annotations_path);
            }
            const ChainTemplates templates = chain_templates(templates_path);
            std::vector<Episode> refined;
            refined.reserve(episodes.size());
            for (const Episode& e : episodes) {
                const auto it = annotations.find(e.episode_id);
                refined.push_back(refine_episode(
                    e, it == annotations.end() ? std::vector<ToggleStepAnnotation>{} : it->second,
                    templates));
            }
            if (!out_episodes.empty()) save_episodes(refined, out_episodes);
            std::size_t examples_written = 0;
            if (!out_training.empty()) {
                std::vector<TrainingExample> examples;
                for (const Episode& e : refined) {
                    const auto batch = examples_from_episode(e);
                    examples.insert(examples.end(), batch.begin(), batch.end());
                }
                examples_written =
                    write_training(examples, dialect_name, history_mode_name, out_training);
            }
            return py::make_tuple(refined.size(), examples_written);
        },
        py::arg("episodes"), py::arg("annotations") = "", py::arg("out_episodes") = "",
        py::arg("out_training") = "", py::arg("dialect") = "canonical",
        py::arg("history_mode") = "none", py::arg("templates") = "",
        "Rewrite annotated toggle steps with synthesized reasoning chains.");

    m.def(
        "eval_state_control_files",
        [](const std::string& samples_path, const std::string& predictions_path,
           const std::string& click_threshold, const std::string& dialect_name, bool strict) {
            const StateEvalOutcome outcome =
                eval_state_control_files(samples_path, predictions_path, dialect(dialect_name),
                                         threshold_config(click_threshold), strict);
            py::dict d = state_report_to_dict(outcome.report);
            d["missing"] = outcome.missing;
            return d;
        },
        py::arg("samples"), py::arg("predictions"),
        py::arg("click_threshold") = "state-control", py::arg("dialect") = "canonical",
        py::arg("strict") = false,
        "Score a prediction file against a sample file; returns all eight metrics.");

    m.def(
        "eval_agentic_files",
        [](const std::string& episodes_path, const std::string& predictions_path,
           const std::string& click_threshold, const std::string& dialect_name, bool strict) {
            const AgenticEvalOutcome outcome =
                eval_agentic_files(episodes_path, predictions_path, dialect(dialect_name),
                                   threshold_config(click_threshold), strict);
            py::dict d = agentic_report_to_dict(outcome.report);
            d["missing"] = outcome.missing;
            return d;
        },
        py::arg("episodes"), py::arg("predictions"), py::arg("click_threshold") = "agentic",
        py::arg("dialect") = "canonical", py::arg("strict") = false,
        "Score per-step predictions keyed '<episode_id>:<step_index>'.");

    m.def(
        "run_dynamic_suite",
        [](const std::string& agent, const std::string& agent_cmd, const std::string& agent_url,
           const std::vector<std::string>& task_ids, const std::string& tasks_file, int budget,
           std::uint64_t seed, const std::string& dialect_name, const std::string& transcript_dir,
           int timeout_ms) {
            std::vector<DynTask> tasks =
                tasks_file.empty() ? default_tasks() : load_tasks(tasks_file);
            if (!task_ids.empty()) {
                std::vector<DynTask> selected;
                selected.reserve(task_ids.size());
                for (const std::string& id : task_ids) selected.push_back(find_task(tasks, id));
                tasks = std::move(selected);
            }
            const auto adapter = make_agent(agent, agent_cmd, agent_url, dialect_name, timeout_ms);
            SuiteConfig cfg;
            cfg.budget = budget;
            cfg.dialect = dialect_name;
            cfg.seed = seed;
            cfg.transcript_dir = transcript_dir;
            const SuiteReport report = run_suite(*adapter, tasks, cfg);
            py::list episodes;
            for (const EpisodeResult& e : report.episodes) {
                py::dict row;
                row["task_id"] = e.task_id;
                row["success_ratio"] = e.success_ratio;
                row["steps_taken"] = e.steps_taken;
                row["termination"] = std::string(to_string(e.termination));
                episodes.append(row);
            }
            py::dict d;
            d["episodes"] = episodes;
            d["task_count"] = report.task_count;
            d["sum_ratios"] = report.sum_ratios;
            d["mean_score"] = report.mean_score;
            d["full_successes"] = report.full_successes;
            d["rate"] = report.format_rate();
            return d;
        },
        py::arg("agent") = "", py::arg("agent_cmd") = "", py::arg("agent_url") = "",
        py::arg("tasks") = std::vector<std::string>{}, py::arg("tasks_file") = "",
        py::arg("budget") = kDefaultStepBudget, py::arg("seed") = 0,
        py::arg("dialect") = "canonical", py::arg("transcript_dir") = "",
        py::arg("timeout_ms") = 30000,
        "Run an agent through the simulated toggle-world suite; returns per-task results.");
}
