#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "togglebench/annotate.hpp"
#include "togglebench/builder.hpp"
#include "togglebench/driver.hpp"
#include "togglebench/dynworld.hpp"
#include "togglebench/io.hpp"
#include "togglebench/star.hpp"
#include "togglebench/util.hpp"

namespace {

using namespace togglebench;
using nlohmann::json;

std::string read_text_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    out << content;
    if (!out) throw IoError("write failed: " + path);
}

void emit_report(const std::string& table, const std::string& json_lines,
                 const std::string& format, const std::string& out_path) {
    if (format == "table") {
        std::cout << table;
    } else if (format == "json-lines") {
        std::cout << json_lines;
    } else {
        throw ConfigError("--report-format must be 'table' or 'json-lines', got '" + format +
                          "'");
    }
    if (!out_path.empty()) write_text_file(out_path, json_lines);
}

void report_missing(const std::vector<std::string>& missing) {
    for (const std::string& id : missing) {
        std::cerr << "missing prediction (scored as non-match): " << id << "\n";
    }
}

// ---------------------------------------------------------------------------
// annotate
// ---------------------------------------------------------------------------

struct AnnotateArgs {
    std::string records;
    std::string out;
    std::string drops;
    bool mock = false;
    std::uint64_t seed = 0;
    std::string checkpoint;
    bool resume = false;
    bool restart = false;
    bool strict_feature_match = false;
    double iou_dedup = 0.9;
    int max_retries = 3;
    int workers = 4;
    std::string identify_prompt_path;
    std::string state_feature_prompt_path;
    std::size_t stop_after_boxes = 0;
};

int cmd_annotate(const AnnotateArgs& args) {
    const auto records = load_screen_records(args.records);

    std::unique_ptr<AnnotatorClient> a;
    std::unique_ptr<AnnotatorClient> b;
    if (args.mock) {
        a = std::make_unique<ScriptedAnnotator>("mock-a", args.seed);
        b = std::make_unique<ScriptedAnnotator>("mock-b", args.seed);
    } else {
        a = HttpAnnotatorClient::from_env("A");
        b = HttpAnnotatorClient::from_env("B");
    }

    PipelineConfig cfg;
    cfg.seed = args.seed;
    cfg.iou_dedup = args.iou_dedup;
    cfg.strict_feature_match = args.strict_feature_match;
    cfg.max_retries = args.max_retries;
    cfg.workers = args.workers;
    cfg.checkpoint_path = args.checkpoint;
    cfg.resume = args.resume;
    cfg.restart = args.restart;
    cfg.stop_after_boxes = args.stop_after_boxes;
    if (!args.identify_prompt_path.empty()) {
        cfg.identify_prompt = read_text_file(args.identify_prompt_path);
    }
    if (!args.state_feature_prompt_path.empty()) {
        cfg.state_feature_prompt = read_text_file(args.state_feature_prompt_path);
    }

    const PipelineResult result = run_pipeline(records, *a, *b, cfg);
    save_quadruplets(result.quadruplets, args.out);
    const std::string drops_path = args.drops.empty() ? args.out + ".drops.jsonl" : args.drops;
    save_drops(result.drops, drops_path);

    const AuditCounts& c = result.audit;
    std::cout << "boxes                 " << c.boxes_total << "\n"
              << "retained              " << c.retained << "\n"
              << "not-toggle            " << c.not_toggle << "\n"
              << "state-disagreement    " << c.state_disagreement << "\n"
              << "feature-disagreement  " << c.feature_disagreement << "\n"
              << "annotator-error       " << c.annotator_error << "\n";
    if (result.interrupted) std::cout << "interrupted: checkpoint holds partial progress\n";
    std::cout << "quadruplets: " << args.out << "\ndrops: " << drops_path << "\n";

    if (c.boxes_total > 0 && c.annotator_error == c.boxes_total) {
        std::cerr << "error: every annotation unit failed; check the annotator endpoints\n";
        return 1;
    }
    return 0;
}

// ---------------------------------------------------------------------------
// build
// ---------------------------------------------------------------------------

struct BuildArgs {
    std::string quadruplets;
    std::string out;
    std::string templates;
    std::uint64_t seed = 0;
    double ratio = 0.9;
    std::string manifest;
    std::string train_out;
    std::string test_out;
};

int cmd_build(const BuildArgs& args) {
    const auto quadruplets = load_quadruplets(args.quadruplets);
    const InstructionTemplates templates =
        args.templates.empty() ? InstructionTemplates{} : InstructionTemplates::load(args.templates);

    std::vector<Sample> samples;
    samples.reserve(quadruplets.size() * 2);
    for (const ToggleQuadruplet& q : quadruplets) {
        auto [pos, neg] = expand_quadruplet(q, templates);
        samples.push_back(std::move(pos));
        samples.push_back(std::move(neg));
    }
    save_samples(samples, args.out);
    std::cout << "expanded " << quadruplets.size() << " quadruplets into " << samples.size()
              << " samples: " << args.out << "\n";

    if (!args.manifest.empty() || !args.train_out.empty() || !args.test_out.empty()) {
        const SplitManifest manifest = split_dataset(samples, args.seed, args.ratio);
        if (!args.manifest.empty()) {
            save_split_manifest(manifest, args.manifest);
            std::cout << "split manifest: " << args.manifest << "\n";
        }
        auto [train, test] = apply_split(samples, manifest);
        if (!args.train_out.empty()) {
            save_samples(train, args.train_out);
            std::cout << "train split (" << train.size() << " samples): " << args.train_out
                      << "\n";
        }
        if (!args.test_out.empty()) {
            save_samples(test, args.test_out);
            std::cout << "test split (" << test.size() << " samples): " << args.test_out << "\n";
        }
    }
    return 0;
}

// ---------------------------------------------------------------------------
// star-synth
// ---------------------------------------------------------------------------

struct StarSynthArgs {
    std::string samples;
    std::string episodes;
    std::string annotations;
    std::string out;
    std::string out_episodes;
    std::string dialect_name = "canonical";
    std::string history_mode = "none";
    std::string templates;
};

int cmd_star_synth(const StarSynthArgs& args) {
    if (args.samples.empty() == args.episodes.empty()) {
        throw ConfigError("pass exactly one of --samples or --episodes");
    }
    const auto mode = history_mode_from_string(args.history_mode);
    if (!mode) {
        throw ConfigError("--history-mode must be text-chain, screenshot-chain, or none, got '" +
                          args.history_mode + "'");
    }
    const Dialect& d = dialect(args.dialect_name);
    const ChainTemplates templates =
        args.templates.empty() ? ChainTemplates{} : ChainTemplates::load(args.templates);

    std::vector<TrainingExample> examples;
    std::vector<Episode> refined;

    if (!args.samples.empty()) {
        if (args.out.empty()) throw ConfigError("--samples mode needs --out");
        const auto samples = load_samples(args.samples);
        examples.reserve(samples.size());
        for (const Sample& s : samples) examples.push_back(example_from_sample(s, templates));
    } else {
        const auto episodes = load_episodes(args.episodes);
        std::map<std::string, std::vector<ToggleStepAnnotation>> annotations;
        if (!args.annotations.empty()) annotations = load_toggle_annotations(args.annotations);
        refined.reserve(episodes.size());
        for (const Episode& e : episodes) {
            const auto it = annotations.find(e.episode_id);
            refined.push_back(refine_episode(
                e, it == annotations.end() ? std::vector<ToggleStepAnnotation>{} : it->second,
                templates));
        }
        if (!args.out_episodes.empty()) save_episodes(refined, args.out_episodes);
        for (const Episode& e : refined) {
            const auto from_episode = examples_from_episode(e);
            examples.insert(examples.end(), from_episode.begin(), from_episode.end());
        }
    }

    if (!args.out.empty()) {
        std::ofstream out(args.out, std::ios::trunc);
        if (!out) throw IoError("cannot write " + args.out);
        export_training(examples, d, *mode, out);
        std::cout << "wrote " << examples.size() << " training examples: " << args.out << "\n";
    }
    if (!refined.empty() && !args.out_episodes.empty()) {
        std::cout << "wrote " << refined.size() << " refined episodes: " << args.out_episodes
                  << "\n";
    }
    return 0;
}

// ---------------------------------------------------------------------------
// eval-state
// ---------------------------------------------------------------------------

struct EvalStateArgs {
    std::string samples;
    std::string predictions;
    std::string dialect_name = "canonical";
    std::string click_threshold = "state-control";
    std::string report_format = "table";
    std::string out;
    bool strict = false;
};

int cmd_eval_state(const EvalStateArgs& args) {
    const StateEvalOutcome outcome =
        eval_state_control_files(args.samples, args.predictions, dialect(args.dialect_name),
                                 threshold_config(args.click_threshold), args.strict);
    report_missing(outcome.missing);
    emit_report(to_table(outcome.report), to_json_lines(outcome.report), args.report_format,
                args.out);
    return 0;
}

// ---------------------------------------------------------------------------
// eval-agentic
// ---------------------------------------------------------------------------

struct EvalAgenticArgs {
    std::string episodes;
    std::string predictions;
    std::string dialect_name = "canonical";
    std::string click_threshold = "agentic";
    std::string report_format = "table";
    std::string out;
    bool strict = false;
};

int cmd_eval_agentic(const EvalAgenticArgs& args) {
    const AgenticEvalOutcome outcome =
        eval_agentic_files(args.episodes, args.predictions, dialect(args.dialect_name),
                           threshold_config(args.click_threshold), args.strict);
    report_missing(outcome.missing);
    emit_report(to_table(outcome.report), to_json_lines(outcome.report), args.report_format,
                args.out);
    return 0;
}

// ---------------------------------------------------------------------------
// eval-dynamic
// ---------------------------------------------------------------------------

struct EvalDynamicArgs {
    std::string agent;  // builtin:optimal | builtin:always-toggle
    std::string agent_cmd;
    std::string agent_url;
    std::vector<std::string> tasks;
    std::string tasks_file;
    int budget = kDefaultStepBudget;
    std::uint64_t seed = 0;
    std::string dialect_name = "canonical";
    std::string transcripts_dir;
    std::string out;
    int timeout_ms = 30000;
};

int cmd_eval_dynamic(const EvalDynamicArgs& args) {
    std::vector<DynTask> tasks =
        args.tasks_file.empty() ? default_tasks() : load_tasks(args.tasks_file);
    if (!args.tasks.empty()) {
        std::vector<DynTask> selected;
        selected.reserve(args.tasks.size());
        for (const std::string& id : args.tasks) selected.push_back(find_task(tasks, id));
        tasks = std::move(selected);
    }

    const std::unique_ptr<AgentAdapter> agent = make_agent(
        args.agent, args.agent_cmd, args.agent_url, args.dialect_name, args.timeout_ms);

    SuiteConfig cfg;
    cfg.budget = args.budget;
    cfg.dialect = args.dialect_name;
    cfg.seed = args.seed;
    cfg.transcript_dir = args.transcripts_dir;

    const SuiteReport report = run_suite(*agent, tasks, cfg);

    std::ostringstream lines;
    for (const EpisodeResult& e : report.episodes) {
        lines << json{{"task_id", e.task_id},
                      {"success_ratio", e.success_ratio},
                      {"steps_taken", e.steps_taken},
                      {"termination", std::string(to_string(e.termination))}}
                     .dump()
              << '\n';
    }
    lines << json{{"task_count", report.task_count},
                  {"sum_ratios", report.sum_ratios},
                  {"mean_score", report.mean_score},
                  {"full_successes", report.full_successes},
                  {"rate", report.format_rate()}}
                 .dump()
          << '\n';

    std::ostringstream table;
    table << std::left << std::setw(42) << "task" << "  ratio  steps  termination\n";
    for (const EpisodeResult& e : report.episodes) {
        table << std::left << std::setw(42) << e.task_id << "  " << std::setw(5)
              << format_number(e.success_ratio) << "  " << std::setw(5) << e.steps_taken << "  "
              << to_string(e.termination) << "\n";
    }
    table << "rate: " << report.format_rate() << "\n";

    std::cout << table.str();
    if (!args.out.empty()) write_text_file(args.out, lines.str());
    if (!args.transcripts_dir.empty()) {
        std::cout << "transcripts: " << args.transcripts_dir << "\n";
    }
    return 0;
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

struct ReportArgs {
    std::string metrics;
    std::string out;
};

int cmd_report(const ReportArgs& args) {
    std::ifstream in(args.metrics);
    if (!in) throw IoError("cannot open " + args.metrics);
    std::ostringstream table;
    table << "metric    value\n";
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            throw ConfigError(args.metrics + ":" + std::to_string(line_no) + ": invalid JSON");
        }
        if (j.contains("metric")) {
            const std::string name = j["metric"].get<std::string>();
            std::string value;
            if (j["value"].is_null()) {
                value = "n/a";
            } else if (j["value"].is_number()) {
                std::ostringstream v;
                v << std::fixed << std::setprecision(4) << j["value"].get<double>();
                value = v.str();
            } else {
                value = j["value"].dump();
            }
            table << std::left << std::setw(8) << name << "  " << value << '\n';
        } else if (j.contains("counts")) {
            table << "counts    " << j["counts"].dump() << '\n';
        } else if (j.contains("task_id")) {
            table << std::left << std::setw(8) << "task" << "  "
                  << j["task_id"].get<std::string>() << " "
                  << format_number(j.value("success_ratio", 0.0)) << '\n';
        } else if (j.contains("rate")) {
            table << std::left << std::setw(8) << "rate" << "  "
                  << j["rate"].get<std::string>() << '\n';
        }
    }
    std::cout << table.str();
    if (!args.out.empty()) write_text_file(args.out, table.str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"GUI toggle state-control benchmark toolkit"};
    app.require_subcommand(1);

    AnnotateArgs annotate_args;
    CLI::App* annotate = app.add_subcommand(
        "annotate", "Run the two-annotator agreement pipeline over screen records");
    annotate->add_option("--records", annotate_args.records, "Screen records JSONL")->required();
    annotate->add_option("--out", annotate_args.out, "Output quadruplets JSONL")->required();
    annotate->add_option("--drops", annotate_args.drops,
                         "Drop audit JSONL (default: <out>.drops.jsonl)");
    annotate->add_flag("--mock-annotators", annotate_args.mock,
                       "Use the deterministic scripted annotators instead of HTTP endpoints");
    annotate->add_option("--seed", annotate_args.seed, "Seed for mock annotators and hashing");
    annotate->add_option("--checkpoint", annotate_args.checkpoint, "Checkpoint file path");
    annotate->add_flag("--resume", annotate_args.resume, "Continue an existing checkpoint");
    annotate->add_flag("--restart", annotate_args.restart, "Discard an existing checkpoint");
    annotate->add_flag("--strict-feature-match", annotate_args.strict_feature_match,
                       "Compare feature names byte-for-byte instead of case/space-insensitively");
    annotate->add_option("--iou-dedup", annotate_args.iou_dedup,
                         "IoU cutoff for box deduplication");
    annotate->add_option("--max-retries", annotate_args.max_retries,
                         "Transport retries per annotator call");
    annotate->add_option("--workers", annotate_args.workers, "Worker threads");
    annotate->add_option("--identify-prompt", annotate_args.identify_prompt_path,
                         "Toggle-identification prompt template file");
    annotate->add_option("--state-feature-prompt", annotate_args.state_feature_prompt_path,
                         "State/feature prompt template file");
    annotate->add_option("--stop-after-boxes", annotate_args.stop_after_boxes,
                         "Stop after N units (testing hook)");

    BuildArgs build_args;
    CLI::App* build =
        app.add_subcommand("build", "Expand quadruplets into the positive/negative sample set");
    build->add_option("--quadruplets", build_args.quadruplets, "Quadruplets JSONL")->required();
    build->add_option("--out", build_args.out, "Output samples JSONL")->required();
    build->add_option("--templates", build_args.templates, "Instruction templates JSON");
    build->add_option("--seed", build_args.seed, "Split seed");
    build->add_option("--ratio", build_args.ratio, "Train fraction for the split");
    build->add_option("--manifest", build_args.manifest, "Write the split manifest here");
    build->add_option("--train", build_args.train_out, "Write train-side samples here");
    build->add_option("--test", build_args.test_out, "Write test-side samples here");

    StarSynthArgs star_args;
    CLI::App* star = app.add_subcommand(
        "star-synth", "Synthesize reasoning-chain supervision for samples or episodes");
    star->add_option("--samples", star_args.samples, "Samples JSONL (single-step mode)");
    star->add_option("--episodes", star_args.episodes, "Episodes JSONL (refinement mode)");
    star->add_option("--annotations", star_args.annotations,
                     "Toggle-step sidecar JSONL for refinement");
    star->add_option("--out", star_args.out, "Training examples JSONL");
    star->add_option("--out-episodes", star_args.out_episodes, "Refined episodes JSONL");
    star->add_option("--dialect", star_args.dialect_name, "Action dialect for emitted text");
    star->add_option("--history-mode", star_args.history_mode,
                     "History context: text-chain, screenshot-chain, or none");
    star->add_option("--templates", star_args.templates, "Chain template JSON file");

    EvalStateArgs eval_state_args;
    CLI::App* eval_state = app.add_subcommand(
        "eval-state", "Score static predictions against state-control samples");
    eval_state->add_option("--samples", eval_state_args.samples, "Samples JSONL")->required();
    eval_state->add_option("--predictions", eval_state_args.predictions, "Predictions JSONL")
        ->required();
    eval_state->add_option("--dialect", eval_state_args.dialect_name, "Prediction dialect");
    eval_state->add_option("--click-threshold", eval_state_args.click_threshold,
                           "'state-control' (0.04), 'agentic' (0.14), or a number");
    eval_state->add_option("--report-format", eval_state_args.report_format,
                           "stdout format: table or json-lines");
    eval_state->add_option("--out", eval_state_args.out, "Also write json-lines report here");
    eval_state->add_flag("--strict", eval_state_args.strict,
                         "Score missing predictions as non-matches instead of failing");

    EvalAgenticArgs eval_agentic_args;
    CLI::App* eval_agentic_cmd = app.add_subcommand(
        "eval-agentic", "Score per-step predictions against ground-truth episodes");
    eval_agentic_cmd->add_option("--episodes", eval_agentic_args.episodes, "Episodes JSONL")
        ->required();
    eval_agentic_cmd
        ->add_option("--predictions", eval_agentic_args.predictions,
                     "Predictions JSONL keyed '<episode_id>:<step_index>'")
        ->required();
    eval_agentic_cmd->add_option("--dialect", eval_agentic_args.dialect_name,
                                 "Prediction dialect");
    eval_agentic_cmd->add_option("--click-threshold", eval_agentic_args.click_threshold,
                                 "'state-control' (0.04), 'agentic' (0.14), or a number");
    eval_agentic_cmd->add_option("--report-format", eval_agentic_args.report_format,
                                 "stdout format: table or json-lines");
    eval_agentic_cmd->add_option("--out", eval_agentic_args.out,
                                 "Also write json-lines report here");
    eval_agentic_cmd->add_flag("--strict", eval_agentic_args.strict,
                               "Score missing predictions as non-matches instead of failing");

    EvalDynamicArgs eval_dynamic_args;
    CLI::App* eval_dynamic = app.add_subcommand(
        "eval-dynamic", "Run a live agent through the simulated toggle-world task suite");
    eval_dynamic->add_option("--agent", eval_dynamic_args.agent,
                             "Bundled agent: builtin:optimal or builtin:always-toggle");
    eval_dynamic->add_option("--agent-cmd", eval_dynamic_args.agent_cmd,
                             "Agent subprocess command (line-delimited JSON over stdio)");
    eval_dynamic->add_option("--agent-url", eval_dynamic_args.agent_url,
                             "Agent HTTP endpoint (POST request JSON, {\"action\": ...} back)");
    eval_dynamic->add_option("--tasks", eval_dynamic_args.tasks,
                             "Run only these task ids (comma separated or repeated)")
        ->delimiter(',');
    eval_dynamic->add_option("--tasks-file", eval_dynamic_args.tasks_file,
                             "Task registry JSON (default: built-in registry)");
    eval_dynamic->add_option("--budget", eval_dynamic_args.budget, "Step budget per episode");
    eval_dynamic->add_option("--seed", eval_dynamic_args.seed,
                             "Seed for ambient (non-target) toggle states");
    eval_dynamic->add_option("--dialect", eval_dynamic_args.dialect_name,
                             "Dialect the agent speaks");
    eval_dynamic->add_option("--transcripts-dir", eval_dynamic_args.transcripts_dir,
                             "Write one transcript file per episode here");
    eval_dynamic->add_option("--out", eval_dynamic_args.out, "Write json-lines results here");
    eval_dynamic->add_option("--timeout-ms", eval_dynamic_args.timeout_ms,
                             "Agent reply timeout in milliseconds");

    ReportArgs report_args;
    CLI::App* report =
        app.add_subcommand("report", "Render a json-lines metric report as an aligned table");
    report->add_option("--metrics", report_args.metrics, "json-lines report file")->required();
    report->add_option("--out", report_args.out, "Also write the table here");

    CLI11_PARSE(app, argc, argv);

    try {
        if (annotate->parsed()) return cmd_annotate(annotate_args);
        if (build->parsed()) return cmd_build(build_args);
        if (star->parsed()) return cmd_star_synth(star_args);
        if (eval_state->parsed()) return cmd_eval_state(eval_state_args);
        if (eval_agentic_cmd->parsed()) return cmd_eval_agentic(eval_agentic_args);
        if (eval_dynamic->parsed()) return cmd_eval_dynamic(eval_dynamic_args);
        if (report->parsed()) return cmd_report(report_args);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
