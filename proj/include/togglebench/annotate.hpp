#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "togglebench/action.hpp"

namespace togglebench {

enum class ToggleState { Off, On };

std::string_view to_string(ToggleState s);
std::optional<ToggleState> toggle_state_from_string(std::string_view s);
ToggleState flipped(ToggleState s);

// One screen of an ingested source dataset. Boxes are stored normalized to
// the [0,1000] grid; loaders convert pixel inputs via normalize_point.
struct ScreenRecord {
    std::string screen_id;
    std::string image_ref;
    int screen_width = kCoordMax;
    int screen_height = kCoordMax;
    std::vector<BBox> original_boxes;
    std::vector<BBox> parsed_boxes;
    std::string source_dataset;
    std::string source_instruction;
};

// The retained annotation unit: screen, toggle box, current state, feature.
struct ToggleQuadruplet {
    std::string screen_id;
    std::string image_ref;
    BBox box;
    ToggleState state = ToggleState::Off;
    std::string feature;
};

struct AnnotatorVerdict {
    std::string annotator_id;
    bool is_toggle = false;
    std::optional<ToggleState> state;
    std::optional<std::string> feature;
    std::string raw_response;
};

struct Highlight {
    BBox box;
    std::string stroke = "red-4px";
};

struct AnnotatorRequest {
    std::string prompt;
    std::string image_ref;
    std::optional<Highlight> highlight;
    // routing metadata; deterministic mocks key their behaviour off it
    std::string screen_id;
    std::string stage;  // "identify" or "state-feature"
};

class AnnotatorClient {
public:
    virtual ~AnnotatorClient() = default;
    virtual std::string id() const = 0;
    // Returns the raw completion text. Throws AnnotatorError on transport
    // failure; never retries internally.
    virtual std::string complete(const AnnotatorRequest& request) = 0;
};

// Chat-completion style JSON/HTTP client. Request body:
//   {"model": ..., "temperature": 0,
//    "messages": [{"role": "user", "text": ..., "image_ref": ...,
//                  "highlight": {"box": [x0,y0,x1,y1], "stroke": ...}}]}
// Response body: {"text": "..."}.
class HttpAnnotatorClient final : public AnnotatorClient {
public:
    HttpAnnotatorClient(std::string id, std::string base_url, std::string api_key,
                        std::string model);

    // Reads TOGGLEBENCH_ANNOTATOR_<ROLE>_URL / _KEY / _MODEL, role "A" or "B".
    static std::unique_ptr<HttpAnnotatorClient> from_env(const std::string& role);

    std::string id() const override { return id_; }
    std::string complete(const AnnotatorRequest& request) override;

private:
    std::string id_;
    std::string host_;
    std::string path_;
    std::string api_key_;
    std::string model_;
};

// Deterministic mock annotator. Responses come from an explicit script when
// one is present for the request key, otherwise from a seeded hash of the
// request so that full runs are reproducible. Keys look like
//   "<screen_id>|<box.key()>|<stage>|<annotator_id>".
class ScriptedAnnotator final : public AnnotatorClient {
public:
    ScriptedAnnotator(std::string id, std::uint64_t seed);

    void script(const std::string& key, std::string response);
    static std::string request_key(const AnnotatorRequest& request,
                                   const std::string& annotator_id);

    std::string id() const override { return id_; }
    std::string complete(const AnnotatorRequest& request) override;

private:
    std::string fallback(const AnnotatorRequest& request) const;

    std::string id_;
    std::uint64_t seed_;
    std::map<std::string, std::string> script_;
};

enum class Disposition {
    Retained,
    NotToggle,
    StateDisagreement,
    FeatureDisagreement,
    AnnotatorFailure,
};

std::string_view to_string(Disposition d);
std::optional<Disposition> disposition_from_string(std::string_view s);

struct DropRecord {
    std::string screen_id;
    BBox box;
    Disposition disposition = Disposition::NotToggle;
    std::string detail;
};

struct AuditCounts {
    std::size_t boxes_total = 0;
    std::size_t retained = 0;
    std::size_t not_toggle = 0;
    std::size_t state_disagreement = 0;
    std::size_t feature_disagreement = 0;
    std::size_t annotator_error = 0;

    bool conserved() const {
        return boxes_total ==
               retained + not_toggle + state_disagreement + feature_disagreement + annotator_error;
    }
};

struct PipelineConfig {
    double iou_dedup = 0.9;
    bool strict_feature_match = false;
    int max_retries = 3;
    int backoff_ms = 250;
    int workers = 4;
    std::uint64_t seed = 0;
    std::string checkpoint_path;  // empty disables checkpointing
    bool resume = false;
    bool restart = false;
    std::string identify_prompt;       // empty uses the builtin template
    std::string state_feature_prompt;  // empty uses the builtin template
    std::string identify_pattern = R"(VERDICT:\s*(YES|NO))";
    std::string state_feature_pattern = R"(STATE:\s*(on|off)[\s;,]+FEATURE:\s*([^\r\n]+))";
    std::size_t stop_after_boxes = 0;  // test hook; 0 means run to completion

    static std::string default_identify_prompt();
    static std::string default_state_feature_prompt();
};

struct PipelineResult {
    std::vector<ToggleQuadruplet> quadruplets;  // sorted by (screen_id, box)
    std::vector<DropRecord> drops;              // sorted the same way
    AuditCounts audit;
    bool interrupted = false;
};

// Union of original and parsed boxes with IoU-based dedup: a candidate is
// dropped when it overlaps an already-kept box at IoU >= cutoff, so
// originals win over parsed duplicates.
std::vector<BBox> merge_boxes(const std::vector<BBox>& original, const std::vector<BBox>& parsed,
                              double iou_cutoff = 0.9);

// Both annotators must independently call the box a toggle.
bool identify_toggle(const ScreenRecord& record, const BBox& box, AnnotatorClient& a,
                     AnnotatorClient& b, const PipelineConfig& cfg);

struct StateFeatureResult {
    std::optional<ToggleQuadruplet> quadruplet;
    Disposition drop = Disposition::Retained;  // StateDisagreement / FeatureDisagreement on drop
    std::string detail;
};

// Retains the quadruplet iff both annotators agree on state and on the
// (normalized) feature name.
StateFeatureResult annotate_state_feature(const ScreenRecord& record, const BBox& box,
                                          AnnotatorClient& a, AnnotatorClient& b,
                                          const PipelineConfig& cfg);

PipelineResult run_pipeline(const std::vector<ScreenRecord>& records, AnnotatorClient& a,
                            AnnotatorClient& b, const PipelineConfig& cfg);

}  // namespace togglebench
