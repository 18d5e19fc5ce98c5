#include "togglebench/annotate.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <future>
#include <mutex>
#include <regex>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "togglebench/util.hpp"

namespace togglebench {

namespace {

using json = nlohmann::json;

}  // namespace

std::string_view to_string(ToggleState s) { return s == ToggleState::On ? "on" : "off"; }

std::optional<ToggleState> toggle_state_from_string(std::string_view s) {
    const std::string l = to_lower(trim(s));
    if (l == "on") return ToggleState::On;
    if (l == "off") return ToggleState::Off;
    return std::nullopt;
}

ToggleState flipped(ToggleState s) {
    return s == ToggleState::On ? ToggleState::Off : ToggleState::On;
}

std::string_view to_string(Disposition d) {
    switch (d) {
        case Disposition::Retained: return "retained";
        case Disposition::NotToggle: return "not-toggle";
        case Disposition::StateDisagreement: return "state-disagreement";
        case Disposition::FeatureDisagreement: return "feature-disagreement";
        case Disposition::AnnotatorFailure: return "annotator-error";
    }
    return "annotator-error";
}

std::optional<Disposition> disposition_from_string(std::string_view s) {
    for (const Disposition d :
         {Disposition::Retained, Disposition::NotToggle, Disposition::StateDisagreement,
          Disposition::FeatureDisagreement, Disposition::AnnotatorFailure}) {
        if (to_string(d) == s) return d;
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// HTTP annotator client
// ---------------------------------------------------------------------------

HttpAnnotatorClient::HttpAnnotatorClient(std::string id, std::string base_url,
                                         std::string api_key, std::string model)
    : id_(std::move(id)), api_key_(std::move(api_key)), model_(std::move(model)) {
    const auto scheme_end = base_url.find("://");
    const std::size_t authority_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
    const auto path_start = base_url.find('/', authority_start);
    if (path_start == std::string::npos) {
        host_ = base_url;
        path_ = "/";
    } else {
        host_ = base_url.substr(0, path_start);
        path_ = base_url.substr(path_start);
    }
    if (host_.empty()) throw ConfigError("annotator endpoint URL is empty");
}

std::unique_ptr<HttpAnnotatorClient> HttpAnnotatorClient::from_env(const std::string& role) {
    const auto getenv_or = [](const std::string& name, const char* fallback) {
        const char* v = std::getenv(name.c_str());
        return v ? std::string(v) : std::string(fallback);
    };
    const std::string prefix = "TOGGLEBENCH_ANNOTATOR_" + role + "_";
    const std::string url = getenv_or(prefix + "URL", "");
    if (url.empty()) {
        throw ConfigError(prefix + "URL is not set (pass --mock-annotators to run without "
                                   "external annotators)");
    }
    return std::make_unique<HttpAnnotatorClient>(
        "annotator-" + role, url, getenv_or(prefix + "KEY", ""),
        getenv_or(prefix + "MODEL", "default"));
}

std::string HttpAnnotatorClient::complete(const AnnotatorRequest& request) {
    json message = {{"role", "user"}, {"text", request.prompt}};
    if (!request.image_ref.empty()) message["image_ref"] = request.image_ref;
    if (request.highlight) {
        message["highlight"] = {
            {"box",
             {request.highlight->box.x_min, request.highlight->box.y_min,
              request.highlight->box.x_max, request.highlight->box.y_max}},
            {"stroke", request.highlight->stroke},
        };
    }
    const json body = {
        {"model", model_},
        {"temperature", 0},
        {"messages", json::array({message})},
    };

    httplib::Client client(host_);
    client.set_connection_timeout(10, 0);
    client.set_read_timeout(60, 0);
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
    const auto res = client.Post(path_, headers, body.dump(), "application/json");
    if (!res) {
        throw AnnotatorError(id_ + ": transport failure talking to " + host_);
    }
    if (res->status != 200) {
        throw AnnotatorError(id_ + ": endpoint returned status " + std::to_string(res->status));
    }
    const json reply = json::parse(res->body, nullptr, false);
    if (reply.is_discarded() || !reply.contains("text") || !reply["text"].is_string()) {
        throw AnnotatorError(id_ + ": malformed endpoint response body");
    }
    return reply["text"].get<std::string>();
}

// ---------------------------------------------------------------------------
// Scripted annotator
// ---------------------------------------------------------------------------

namespace {

std::mutex g_script_mutex;

const std::vector<std::string>& mock_features() {
    static const std::vector<std::string> features = {
        "Wi-Fi",         "Bluetooth", "Do Not Disturb", "Captions",
        "Airplane Mode", "Location",  "Dark Theme",     "Notifications",
    };
    return features;
}

}  // namespace

ScriptedAnnotator::ScriptedAnnotator(std::string id, std::uint64_t seed)
    : id_(std::move(id)), seed_(seed) {}

std::string ScriptedAnnotator::request_key(const AnnotatorRequest& request,
                                           const std::string& annotator_id) {
    std::string box_key = request.highlight ? request.highlight->box.key() : "none";
    return request.screen_id + "|" + box_key + "|" + request.stage + "|" + annotator_id;
}

void ScriptedAnnotator::script(const std::string& key, std::string response) {
    std::lock_guard lock(g_script_mutex);
    if (!script_.count(key)) {
        script_[key] = std::move(response);
    } else {
        // queue further responses behind a separator; complete() pops in order
        script_[key] += '\x1e';
        script_[key] += response;
    }
}

std::string ScriptedAnnotator::complete(const AnnotatorRequest& request) {
    const std::string key = request_key(request, id_);
    std::lock_guard lock(g_script_mutex);
    auto it = script_.find(key);
    if (it != script_.end()) {
        const auto sep = it->second.find('\x1e');
        if (sep == std::string::npos) return it->second;
        std::string head = it->second.substr(0, sep);
        it->second.erase(0, sep + 1);
        return head;
    }
    return fallback(request);
}

std::string ScriptedAnnotator::fallback(const AnnotatorRequest& request) const {
    const std::string box_key = request.highlight ? request.highlight->box.key() : "none";
    const std::string base_key = request.screen_id + "|" + box_key + "|" + request.stage;
    const std::uint64_t base = mix64(fnv1a64(base_key) ^ seed_);
    const std::uint64_t mine = mix64(fnv1a64(base_key + "|" + id_) ^ seed_);

    if (request.stage == "identify") {
        const bool consensus_yes = base % 4 != 3;
        const bool dissent = mine % 8 == 0;
        const bool yes = consensus_yes != dissent;
        std::ostringstream os;
        os << "The outlined widget " << (yes ? "looks like a switch." : "is not a switch.")
           << "\nVERDICT: " << (yes ? "YES" : "NO");
        return os.str();
    }

    const auto& features = mock_features();
    bool on = (base >> 8) & 1;
    std::size_t feature_index = (base >> 16) % features.size();
    std::string feature = features[feature_index];
    const std::uint64_t variant = mine % 16;
    if (variant == 0) {
        on = !on;  // state disagreement
    } else if (variant == 1) {
        feature = features[(feature_index + 1) % features.size()];  // feature disagreement
    } else if (variant <= 3) {
        feature = to_lower(feature);  // agrees only after normalization
    }
    std::ostringstream os;
    os << "Reading the widget:\nSTATE: " << (on ? "on" : "off") << "\nFEATURE: " << feature;
    return os.str();
}

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

std::string PipelineConfig::default_identify_prompt() {
    return "You are inspecting a mobile UI screenshot. One widget is outlined with a colored "
           "box.\nQuestion: is the outlined widget a binary toggle, i.e. a switch that is "
           "either on or off?\nAnswer on the last line in exactly this form:\nVERDICT: YES\n"
           "or\nVERDICT: NO";
}

std::string PipelineConfig::default_state_feature_prompt() {
    return "You are inspecting a mobile UI screenshot. The outlined widget is a binary "
           "toggle.\nReport the toggle's current state and the name of the feature it "
           "controls.\nAnswer on the last two lines in exactly this form:\nSTATE: on or off\n"
           "FEATURE: the feature name";
}

std::vector<BBox> merge_boxes(const std::vector<BBox>& original, const std::vector<BBox>& parsed,
                              double iou_cutoff) {
    std::vector<BBox> kept;
    kept.reserve(original.size() + parsed.size());
    const auto consider = [&](const BBox& candidate) {
        for (const BBox& existing : kept) {
            if (iou(existing, candidate) >= iou_cutoff) return;
        }
        kept.push_back(candidate);
    };
    for (const BBox& b : original) consider(b);
    for (const BBox& b : parsed) consider(b);
    return kept;
}

namespace {

void sleep_backoff(int backoff_ms, int attempt) {
    if (backoff_ms <= 0) return;
    std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms * (attempt + 1)));
}

struct AskResult {
    std::string raw;
    std::vector<std::string> groups;  // [0] is the full match
};

// One annotator query with transport retries plus a single format re-prompt.
// Capture groups are copied out while the response is still alive; an
// std::smatch must not outlive the searched string.
AskResult ask(AnnotatorClient& client, AnnotatorRequest request, const std::regex& pattern,
              const PipelineConfig& cfg) {
    for (int prompt_round = 0; prompt_round < 2; ++prompt_round) {
        std::string response;
        for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
            try {
                response = client.complete(request);
                break;
            } catch (const AnnotatorError&) {
                if (attempt == cfg.max_retries) throw;
                sleep_backoff(cfg.backoff_ms, attempt);
            }
        }
        std::smatch m;
        if (std::regex_search(response, m, pattern)) {
            AskResult out;
            out.groups.reserve(m.size());
            for (const auto& group : m) out.groups.push_back(group.str());
            out.raw = std::move(response);
            return out;
        }
        request.prompt += "\n\nYour previous reply did not follow the required format. "
                          "Reply again using exactly the required format.";
    }
    throw AnnotatorError(client.id() + ": response did not contain the required verdict");
}

AnnotatorRequest make_request(const ScreenRecord& record, const BBox& box,
                              const PipelineConfig& cfg, const std::string& stage) {
    AnnotatorRequest req;
    req.prompt = stage == "identify"
                     ? (cfg.identify_prompt.empty() ? PipelineConfig::default_identify_prompt()
                                                    : cfg.identify_prompt)
                     : (cfg.state_feature_prompt.empty()
                            ? PipelineConfig::default_state_feature_prompt()
                            : cfg.state_feature_prompt);
    req.image_ref = record.image_ref;
    req.highlight = Highlight{box, "red-4px"};
    req.screen_id = record.screen_id;
    req.stage = stage;
    return req;
}

struct ParsedStateFeature {
    ToggleState state;
    std::string feature;
    std::string raw;
};

ParsedStateFeature query_state_feature(AnnotatorClient& client, const ScreenRecord& record,
                                       const BBox& box, const PipelineConfig& cfg) {
    const std::regex pattern(cfg.state_feature_pattern,
                             std::regex::ECMAScript | std::regex::icase);
    AskResult reply = ask(client, make_request(record, box, cfg, "state-feature"), pattern, cfg);
    if (reply.groups.size() < 3) {
        throw AnnotatorError(client.id() + ": state-feature pattern needs two capture groups");
    }
    ParsedStateFeature out;
    const auto state = toggle_state_from_string(reply.groups[1]);
    if (!state) throw AnnotatorError(client.id() + ": unrecognized state token");
    out.state = *state;
    out.feature = std::string(trim(reply.groups[2]));
    out.raw = std::move(reply.raw);
    return out;
}

}  // namespace

bool identify_toggle(const ScreenRecord& record, const BBox& box, AnnotatorClient& a,
                     AnnotatorClient& b, const PipelineConfig& cfg) {
    const std::regex pattern(cfg.identify_pattern, std::regex::ECMAScript | std::regex::icase);
    const auto query = [&](AnnotatorClient& client) {
        const AskResult reply = ask(client, make_request(record, box, cfg, "identify"), pattern,
                                    cfg);
        if (reply.groups.size() < 2) {
            throw AnnotatorError(client.id() + ": identify pattern needs a capture group");
        }
        return to_lower(reply.groups[1]) == "yes";
    };
    auto fut = std::async(std::launch::async, query, std::ref(a));
    const bool b_yes = query(b);
    const bool a_yes = fut.get();
    return a_yes && b_yes;
}

StateFeatureResult annotate_state_feature(const ScreenRecord& record, const BBox& box,
                                          AnnotatorClient& a, AnnotatorClient& b,
                                          const PipelineConfig& cfg) {
    auto fut = std::async(std::launch::async, query_state_feature, std::ref(a), std::cref(record),
                          std::cref(box), std::cref(cfg));
    const ParsedStateFeature vb = query_state_feature(b, record, box, cfg);
    const ParsedStateFeature va = fut.get();

    StateFeatureResult result;
    if (va.state != vb.state) {
        result.drop = Disposition::StateDisagreement;
        result.detail = std::string(to_string(va.state)) + " vs " + std::string(to_string(vb.state));
        return result;
    }
    const std::string fa = cfg.strict_feature_match ? va.feature : normalize_label(va.feature);
    const std::string fb = cfg.strict_feature_match ? vb.feature : normalize_label(vb.feature);
    if (fa != fb) {
        result.drop = Disposition::FeatureDisagreement;
        result.detail = "'" + va.feature + "' vs '" + vb.feature + "'";
        return result;
    }
    if (fa.empty()) {
        result.drop = Disposition::FeatureDisagreement;
        result.detail = "empty feature name";
        return result;
    }
    ToggleQuadruplet q;
    q.screen_id = record.screen_id;
    q.image_ref = record.image_ref;
    q.box = box;
    q.state = va.state;
    q.feature = fa;
    result.quadruplet = std::move(q);
    result.drop = Disposition::Retained;
    return result;
}

namespace {

struct Unit {
    const ScreenRecord* record;
    BBox box;
    std::string key;
};

struct UnitOutcome {
    Disposition disposition = Disposition::NotToggle;
    std::optional<ToggleQuadruplet> quadruplet;
    std::string detail;
};

std::uint64_t config_fingerprint(const PipelineConfig& cfg, const std::string& id_a,
                                 const std::string& id_b) {
    std::ostringstream os;
    os << cfg.seed << '|' << cfg.iou_dedup << '|' << cfg.strict_feature_match << '|'
       << cfg.identify_prompt << '|' << cfg.state_feature_prompt << '|' << cfg.identify_pattern
       << '|' << cfg.state_feature_pattern << '|' << id_a << '|' << id_b;
    return fnv1a64(os.str());
}

json outcome_to_json(const std::string& screen_id, const BBox& box, const UnitOutcome& o) {
    json j = {
        {"screen_id", screen_id},
        {"box", {box.x_min, box.y_min, box.x_max, box.y_max}},
        {"disposition", std::string(to_string(o.disposition))},
    };
    if (!o.detail.empty()) j["detail"] = o.detail;
    if (o.quadruplet) {
        j["state"] = std::string(to_string(o.quadruplet->state));
        j["feature"] = o.quadruplet->feature;
        j["image_ref"] = o.quadruplet->image_ref;
    }
    return j;
}

Disposition checkpoint_disposition(const std::string& s) {
    const auto d = disposition_from_string(s);
    if (!d) throw CheckpointError("unknown disposition '" + s + "' in checkpoint");
    return *d;
}

std::map<std::string, UnitOutcome> load_checkpoint(const std::string& path,
                                                   std::uint64_t fingerprint) {
    std::ifstream in(path);
    if (!in) throw CheckpointError("cannot open checkpoint " + path);
    std::string line;
    if (!std::getline(in, line)) throw CheckpointError("checkpoint is empty: " + path);
    const json header = json::parse(line, nullptr, false);
    if (header.is_discarded() || !header.is_object() || header.value("version", 0) != 1 ||
        !header.contains("fingerprint")) {
        throw CheckpointError("corrupt checkpoint header in " + path);
    }
    if (header["fingerprint"].get<std::uint64_t>() != fingerprint) {
        throw CheckpointError("checkpoint " + path +
                              " was produced under a different configuration; rerun with "
                              "--restart to discard it");
    }
    std::map<std::string, UnitOutcome> done;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains("screen_id") ||
            !j.contains("box") || !j.contains("disposition")) {
            throw CheckpointError("corrupt checkpoint line " + std::to_string(line_no) + " in " +
                                  path);
        }
        const auto& b = j["box"];
        if (!b.is_array() || b.size() != 4) {
            throw CheckpointError("corrupt checkpoint line " + std::to_string(line_no) + " in " +
                                  path);
        }
        const BBox box{b[0].get<int>(), b[1].get<int>(), b[2].get<int>(), b[3].get<int>()};
        UnitOutcome o;
        o.disposition = checkpoint_disposition(j["disposition"].get<std::string>());
        o.detail = j.value("detail", "");
        if (o.disposition == Disposition::Retained) {
            ToggleQuadruplet q;
            q.screen_id = j["screen_id"].get<std::string>();
            q.image_ref = j.value("image_ref", "");
            q.box = box;
            const auto state = toggle_state_from_string(j.value("state", ""));
            if (!state || !j.contains("feature")) {
                throw CheckpointError("corrupt retained entry at checkpoint line " +
                                      std::to_string(line_no));
            }
            q.state = *state;
            q.feature = j["feature"].get<std::string>();
            o.quadruplet = std::move(q);
        }
        done[j["screen_id"].get<std::string>() + "|" + box.key()] = std::move(o);
    }
    return done;
}

}  // namespace

PipelineResult run_pipeline(const std::vector<ScreenRecord>& records, AnnotatorClient& a,
                            AnnotatorClient& b, const PipelineConfig& cfg) {
    std::vector<Unit> units;
    for (const ScreenRecord& record : records) {
        for (const BBox& box : merge_boxes(record.original_boxes, record.parsed_boxes,
                                           cfg.iou_dedup)) {
            Unit u{&record, box, record.screen_id + "|" + box.key()};
            units.push_back(std::move(u));
        }
    }
    // duplicate (screen, box) keys collapse to one work unit
    {
        std::map<std::string, bool> seen;
        std::vector<Unit> unique;
        unique.reserve(units.size());
        for (auto& u : units) {
            if (seen.emplace(u.key, true).second) unique.push_back(std::move(u));
        }
        units = std::move(unique);
    }

    const std::uint64_t fingerprint = config_fingerprint(cfg, a.id(), b.id());
    std::map<std::string, UnitOutcome> done;
    std::ofstream checkpoint;
    if (!cfg.checkpoint_path.empty()) {
        const bool exists = static_cast<bool>(std::ifstream(cfg.checkpoint_path));
        if (exists && cfg.resume && !cfg.restart) {
            done = load_checkpoint(cfg.checkpoint_path, fingerprint);
            checkpoint.open(cfg.checkpoint_path, std::ios::app);
        } else if (exists && !cfg.restart) {
            throw CheckpointError("checkpoint " + cfg.checkpoint_path +
                                  " already exists; pass --resume to continue it or --restart "
                                  "to discard it");
        } else {
            checkpoint.open(cfg.checkpoint_path, std::ios::trunc);
            if (!checkpoint) {
                throw IoError("cannot write checkpoint " + cfg.checkpoint_path);
            }
            checkpoint << json{{"version", 1}, {"fingerprint", fingerprint}}.dump() << std::endl;
        }
        if (!checkpoint) throw IoError("cannot open checkpoint " + cfg.checkpoint_path);
    }

    std::vector<const Unit*> pending;
    for (const Unit& u : units) {
        if (!done.count(u.key)) pending.push_back(&u);
    }

    std::mutex sink_mutex;
    std::atomic<std::size_t> next{0};
    const std::size_t limit = cfg.stop_after_boxes == 0
                                  ? pending.size()
                                  : std::min(cfg.stop_after_boxes, pending.size());

    const auto process_unit = [&](const Unit& u) {
        UnitOutcome outcome;
        try {
            if (!identify_toggle(*u.record, u.box, a, b, cfg)) {
                outcome.disposition = Disposition::NotToggle;
            } else {
                StateFeatureResult sf = annotate_state_feature(*u.record, u.box, a, b, cfg);
                outcome.disposition = sf.drop;
                outcome.detail = sf.detail;
                outcome.quadruplet = std::move(sf.quadruplet);
            }
        } catch (const AnnotatorError& e) {
            outcome.disposition = Disposition::AnnotatorFailure;
            outcome.detail = e.what();
        }
        std::lock_guard lock(sink_mutex);
        if (checkpoint.is_open()) {
            checkpoint << outcome_to_json(u.record->screen_id, u.box, outcome).dump()
                       << std::endl;
        }
        done[u.key] = std::move(outcome);
    };

    const auto worker = [&]() {
        while (true) {
            const std::size_t mine = next.fetch_add(1);
            if (mine >= limit) return;
            process_unit(*pending[mine]);
        }
    };

    const int worker_count =
        std::max(1, std::min<int>(cfg.workers, static_cast<int>(limit == 0 ? 1 : limit)));
    if (limit > 0) {
        std::vector<std::thread> threads;
        threads.reserve(static_cast<std::size_t>(worker_count));
        for (int i = 0; i < worker_count; ++i) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }

    PipelineResult result;
    result.interrupted = limit < pending.size();
    for (const Unit& u : units) {
        const auto it = done.find(u.key);
        if (it == done.end()) continue;  // interrupted before this unit
        const UnitOutcome& o = it->second;
        result.audit.boxes_total += 1;
        switch (o.disposition) {
            case Disposition::Retained:
                result.audit.retained += 1;
                result.quadruplets.push_back(*o.quadruplet);
                break;
            case Disposition::NotToggle:
                result.audit.not_toggle += 1;
                result.drops.push_back({u.record->screen_id, u.box, o.disposition, o.detail});
                break;
            case Disposition::StateDisagreement:
                result.audit.state_disagreement += 1;
                result.drops.push_back({u.record->screen_id, u.box, o.disposition, o.detail});
                break;
            case Disposition::FeatureDisagreement:
                result.audit.feature_disagreement += 1;
                result.drops.push_back({u.record->screen_id, u.box, o.disposition, o.detail});
                break;
            case Disposition::AnnotatorFailure:
                result.audit.annotator_error += 1;
                result.drops.push_back({u.record->screen_id, u.box, o.disposition, o.detail});
                break;
        }
    }

    const auto by_key = [](const auto& lhs, const auto& rhs) {
        if (lhs.screen_id != rhs.screen_id) return lhs.screen_id < rhs.screen_id;
        return lhs.box.key() < rhs.box.key();
    };
    std::sort(result.quadruplets.begin(), result.quadruplets.end(), by_key);
    std::sort(result.drops.begin(), result.drops.end(), by_key);
    return result;
}

}  // namespace togglebench
