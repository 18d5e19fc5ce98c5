#include "togglebench/io.hpp"

#include <fstream>
#include <functional>
#include <sstream>

#include <json.hpp>

#include "togglebench/util.hpp"

namespace togglebench {

namespace {

using json = nlohmann::json;

[[noreturn]] void line_error(const std::string& path, std::size_t line_no,
                             const std::string& what) {
    throw ConfigError(path + ":" + std::to_string(line_no) + ": " + what);
}

void for_each_json_line(const std::string& path,
                        const std::function<void(const json&, std::size_t)>& fn) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) line_error(path, line_no, "invalid JSON");
        if (!j.is_object()) line_error(path, line_no, "expected a JSON object");
        fn(j, line_no);
    }
}

template <typename T>
void write_lines(const std::vector<T>& items, const std::string& path,
                 const std::function<json(const T&)>& encode) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    for (const T& item : items) out << encode(item).dump() << '\n';
    if (!out) throw IoError("write failed: " + path);
}

std::string require_string(const json& j, const char* field, const std::string& path,
                           std::size_t line_no) {
    if (!j.contains(field) || !j[field].is_string()) {
        line_error(path, line_no, std::string("missing string field '") + field + "'");
    }
    return j[field].get<std::string>();
}

json bbox_to_json(const BBox& b) { return json::array({b.x_min, b.y_min, b.x_max, b.y_max}); }

BBox bbox_from_json(const json& j, const std::string& path, std::size_t line_no) {
    if (!j.is_array() || j.size() != 4 || !j[0].is_number_integer()) {
        line_error(path, line_no, "box must be [x_min, y_min, x_max, y_max]");
    }
    const BBox b{j[0].get<int>(), j[1].get<int>(), j[2].get<int>(), j[3].get<int>()};
    if (!b.valid()) line_error(path, line_no, "box " + b.key() + " is not a valid [0,1000] box");
    return b;
}

std::vector<BBox> boxes_from_json(const json& j, const std::string& path, std::size_t line_no) {
    if (!j.is_array()) line_error(path, line_no, "expected an array of boxes");
    std::vector<BBox> out;
    out.reserve(j.size());
    for (const json& b : j) out.push_back(bbox_from_json(b, path, line_no));
    return out;
}

json boxes_to_json(const std::vector<BBox>& boxes) {
    json out = json::array();
    for (const BBox& b : boxes) out.push_back(bbox_to_json(b));
    return out;
}

// Pixel corners become normalized corners; clamping keeps off-screen source
// boxes loadable rather than fatal.
std::vector<BBox> pixel_boxes_from_json(const json& j, ScreenDims dims, const std::string& path,
                                        std::size_t line_no) {
    if (!j.is_array()) line_error(path, line_no, "expected an array of pixel boxes");
    std::vector<BBox> out;
    out.reserve(j.size());
    for (const json& b : j) {
        if (!b.is_array() || b.size() != 4) {
            line_error(path, line_no, "pixel box must be [x_min, y_min, x_max, y_max]");
        }
        const NormalizedPoint lo = normalize_point(b[0].get<double>(), b[1].get<double>(), dims);
        const NormalizedPoint hi = normalize_point(b[2].get<double>(), b[3].get<double>(), dims);
        const BBox box{lo.point.x, lo.point.y, hi.point.x, hi.point.y};
        if (!box.valid()) {
            line_error(path, line_no, "pixel box normalizes to an invalid box " + box.key());
        }
        out.push_back(box);
    }
    return out;
}

std::string action_text(const Action& a) { return format_action(a, dialect("canonical")); }

// Ground-truth actions must be real, fully-parameterized verbs; the OTHER
// bucket is reserved for agent predictions.
Action action_from_text(const std::string& text, const std::string& path, std::size_t line_no) {
    const ParseResult r = parse_action(text, dialect("canonical"));
    if (!r.ok() || r.action().type == ActionType::Other || !r.action().well_formed()) {
        line_error(path, line_no, "unparseable canonical action: " + text);
    }
    return r.action();
}

ToggleState state_from_token(const std::string& token, const std::string& path,
                             std::size_t line_no) {
    const auto state = toggle_state_from_string(token);
    if (!state) line_error(path, line_no, "unknown toggle state '" + token + "'");
    return *state;
}

}  // namespace

std::vector<ScreenRecord> load_screen_records(const std::string& path) {
    std::vector<ScreenRecord> records;
    for_each_json_line(path, [&](const json& j, std::size_t line_no) {
        ScreenRecord r;
        r.screen_id = require_string(j, "screen_id", path, line_no);
        r.image_ref = j.value("image_ref", "");
        r.screen_width = j.value("screen_width", kCoordMax);
        r.screen_height = j.value("screen_height", kCoordMax);
        r.source_dataset = j.value("source_dataset", "");
        r.source_instruction = j.value("source_instruction", "");
        const ScreenDims dims{r.screen_width, r.screen_height};
        const auto load_boxes = [&](const char* field, const char* px_field) {
            if (j.contains(field) && j.contains(px_field)) {
                line_error(path, line_no,
                           std::string("record carries both '") + field + "' and '" + px_field +
                               "'; pick one coordinate system");
            }
            if (j.contains(field)) return boxes_from_json(j[field], path, line_no);
            if (j.contains(px_field)) {
                return pixel_boxes_from_json(j[px_field], dims, path, line_no);
            }
            return std::vector<BBox>{};
        };
        r.original_boxes = load_boxes("original_boxes", "original_boxes_px");
        r.parsed_boxes = load_boxes("parsed_boxes", "parsed_boxes_px");
        records.push_back(std::move(r));
    });
    return records;
}

void save_screen_records(const std::vector<ScreenRecord>& records, const std::string& path) {
    write_lines<ScreenRecord>(records, path, [](const ScreenRecord& r) {
        return json{{"screen_id", r.screen_id},
                    {"image_ref", r.image_ref},
                    {"screen_width", r.screen_width},
                    {"screen_height", r.screen_height},
                    {"original_boxes", boxes_to_json(r.original_boxes)},
                    {"parsed_boxes", boxes_to_json(r.parsed_boxes)},
                    {"source_dataset", r.source_dataset},
                    {"source_instruction", r.source_instruction}};
    });
}

std::vector<ToggleQuadruplet> load_quadruplets(const std::string& path) {
    std::vector<ToggleQuadruplet> out;
    for_each_json_line(path, [&](const json& j, std::size_t line_no) {
        ToggleQuadruplet q;
        q.screen_id = require_string(j, "screen_id", path, line_no);
        q.image_ref = j.value("image_ref", "");
        if (!j.contains("box")) line_error(path, line_no, "missing field 'box'");
        q.box = bbox_from_json(j["box"], path, line_no);
        q.state = state_from_token(require_string(j, "state", path, line_no), path, line_no);
        q.feature = require_string(j, "feature", path, line_no);
        out.push_back(std::move(q));
    });
    return out;
}

void save_quadruplets(const std::vector<ToggleQuadruplet>& quadruplets,
                      const std::string& path) {
    write_lines<ToggleQuadruplet>(quadruplets, path, [](const ToggleQuadruplet& q) {
        return json{{"screen_id", q.screen_id},
                    {"image_ref", q.image_ref},
                    {"box", bbox_to_json(q.box)},
                    {"state", std::string(to_string(q.state))},
                    {"feature", q.feature}};
    });
}

void save_drops(const std::vector<DropRecord>& drops, const std::string& path) {
    write_lines<DropRecord>(drops, path, [](const DropRecord& d) {
        return json{{"screen_id", d.screen_id},
                    {"box", bbox_to_json(d.box)},
                    {"disposition", std::string(to_string(d.disposition))},
                    {"detail", d.detail}};
    });
}

std::vector<DropRecord> load_drops(const std::string& path) {
    std::vector<DropRecord> out;
    for_each_json_line(path, [&](const json& j, std::size_t line_no) {
        DropRecord d;
        d.screen_id = require_string(j, "screen_id", path, line_no);
        d.box = bbox_from_json(j.at("box"), path, line_no);
        const std::string disposition = require_string(j, "disposition", path, line_no);
        const auto parsed = disposition_from_string(disposition);
        if (!parsed) line_error(path, line_no, "unknown disposition '" + disposition + "'");
        d.disposition = *parsed;
        d.detail = j.value("detail", "");
        out.push_back(std::move(d));
    });
    return out;
}

std::vector<Sample> load_samples(const std::string& path) {
    std::vector<Sample> out;
    for_each_json_line(path, [&](const json& j, std::size_t line_no) {
        Sample s;
        s.sample_id = require_string(j, "sample_id", path, line_no);
        s.screen_id = require_string(j, "screen_id", path, line_no);
        s.image_ref = j.value("image_ref", "");
        const std::string polarity = require_string(j, "polarity", path, line_no);
        if (polarity == "positive") {
            s.polarity = Polarity::Positive;
        } else if (polarity == "negative") {
            s.polarity = Polarity::Negative;
        } else {
            line_error(path, line_no, "unknown polarity '" + polarity + "'");
        }
        s.instruction = require_string(j, "instruction", path, line_no);
        s.label_action =
            action_from_text(require_string(j, "label_action", path, line_no), path, line_no);
        if (!j.contains("toggle_box")) line_error(path, line_no, "missing field 'toggle_box'");
        s.toggle_box = bbox_from_json(j["toggle_box"], path, line_no);
        s.toggle_state =
            state_from_token(require_string(j, "toggle_state", path, line_no), path, line_no);
        s.feature = require_string(j, "feature", path, line_no);
        if (j.contains("layout")) s.layout = boxes_from_json(j["layout"], path, line_no);
        out.push_back(std::move(s));
    });
    return out;
}

void save_samples(const std::vector<Sample>& samples, const std::string& path) {
    write_lines<Sample>(samples, path, [](const Sample& s) {
        return json{{"sample_id", s.sample_id},
                    {"screen_id", s.screen_id},
                    {"image_ref", s.image_ref},
                    {"polarity", std::string(to_string(s.polarity))},
                    {"instruction", s.instruction},
                    {"label_action", action_text(s.label_action)},
                    {"toggle_box", bbox_to_json(s.toggle_box)},
                    {"toggle_state", std::string(to_string(s.toggle_state))},
                    {"feature", s.feature},
                    {"layout", boxes_to_json(s.layout)}};
    });
}

std::vector<Prediction> load_predictions(const std::string& path) {
    std::vector<Prediction> out;
    for_each_json_line(path, [&](const json& j, std::size_t line_no) {
        Prediction p;
        p.sample_id = require_string(j, "sample_id", path, line_no);
        if (!j.contains("output") || !j["output"].is_string()) {
            line_error(path, line_no, "missing string field 'output'");
        }
        p.output = j["output"].get<std::string>();
        out.push_back(std::move(p));
    });
    return out;
}

void save_predictions(const std::vector<Prediction>& predictions, const std::string& path) {
    write_lines<Prediction>(predictions, path, [](const Prediction& p) {
        return json{{"sample_id", p.sample_id}, {"output", p.output}};
    });
}

SplitManifest load_split_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    const json j = json::parse(buffer.str(), nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        throw ConfigError(path + ": not a JSON object");
    }
    if (!j.contains("seed") || !j.contains("ratio") || !j.contains("train_ids") ||
        !j.contains("test_ids")) {
        throw ConfigError(path + ": manifest needs seed, ratio, train_ids, test_ids");
    }
    SplitManifest m;
    m.seed = j["seed"].get<std::uint64_t>();
    m.ratio = j["ratio"].get<double>();
    m.train_ids = j["train_ids"].get<std::vector<std::string>>();
    m.test_ids = j["test_ids"].get<std::vector<std::string>>();
    return m;
}

void save_split_manifest(const SplitManifest& manifest, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    out << json{{"seed", manifest.seed},
                {"ratio", manifest.ratio},
                {"train_ids", manifest.train_ids},
                {"test_ids", manifest.test_ids}}
               .dump(2)
        << '\n';
    if (!out) throw IoError("write failed: " + path);
}

std::vector<Episode> load_episodes(const std::string& path) {
    std::vector<Episode> out;
    for_each_json_line(path, [&](const json& j, std::size_t line_no) {
        Episode e;
        e.episode_id = require_string(j, "episode_id", path, line_no);
        if (!j.contains("steps") || !j["steps"].is_array()) {
            line_error(path, line_no, "missing array field 'steps'");
        }
        for (const json& sj : j["steps"]) {
            if (!sj.is_object()) line_error(path, line_no, "steps must be objects");
            EpisodeStep step;
            step.instruction = sj.value("instruction", "");
            step.image_ref = sj.value("image_ref", "");
            step.reasoning = sj.value("reasoning", "");
            if (!sj.contains("gt_action") || !sj["gt_action"].is_string()) {
                line_error(path, line_no, "step needs a 'gt_action' string");
            }
            step.gt_action =
                action_from_text(sj["gt_action"].get<std::string>(), path, line_no);
            if (sj.contains("layout")) step.layout = boxes_from_json(sj["layout"], path, line_no);
            e.steps.push_back(std::move(step));
        }
        out.push_back(std::move(e));
    });
    return out;
}

void save_episodes(const std::vector<Episode>& episodes, const std::string& path) {
    write_lines<Episode>(episodes, path, [](const Episode& e) {
        json steps = json::array();
        for (const EpisodeStep& s : e.steps) {
            steps.push_back(json{{"instruction", s.instruction},
                                 {"image_ref", s.image_ref},
                                 {"reasoning", s.reasoning},
                                 {"gt_action", action_text(s.gt_action)},
                                 {"layout", boxes_to_json(s.layout)}});
        }
        return json{{"episode_id", e.episode_id}, {"steps", std::move(steps)}};
    });
}

std::map<std::string, std::vector<ToggleStepAnnotation>> load_toggle_annotations(
    const std::string& path) {
    std::map<std::string, std::vector<ToggleStepAnnotation>> out;
    for_each_json_line(path, [&](const json& j, std::size_t line_no) {
        const std::string episode_id = require_string(j, "episode_id", path, line_no);
        if (out.count(episode_id)) {
            line_error(path, line_no, "duplicate annotations for episode '" + episode_id + "'");
        }
        if (!j.contains("toggle_steps") || !j["toggle_steps"].is_array()) {
            line_error(path, line_no, "missing array field 'toggle_steps'");
        }
        std::vector<ToggleStepAnnotation> annotations;
        for (const json& aj : j["toggle_steps"]) {
            if (!aj.is_object() || !aj.contains("step_index")) {
                line_error(path, line_no, "toggle step needs a 'step_index'");
            }
            ToggleStepAnnotation a;
            a.step_index = aj["step_index"].get<std::size_t>();
            a.state =
                state_from_token(require_string(aj, "state", path, line_no), path, line_no);
            a.feature = require_string(aj, "feature", path, line_no);
            annotations.push_back(std::move(a));
        }
        out.emplace(episode_id, std::move(annotations));
    });
    return out;
}

void save_toggle_annotations(
    const std::map<std::string, std::vector<ToggleStepAnnotation>>& annotations,
    const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    for (const auto& [episode_id, steps] : annotations) {
        json arr = json::array();
        for (const ToggleStepAnnotation& a : steps) {
            arr.push_back(json{{"step_index", a.step_index},
                               {"state", std::string(to_string(a.state))},
                               {"feature", a.feature}});
        }
        out << json{{"episode_id", episode_id}, {"toggle_steps", std::move(arr)}}.dump()
            << '\n';
    }
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace togglebench
