#pragma once

#include <map>
#include <string>
#include <vector>

#include "togglebench/annotate.hpp"
#include "togglebench/builder.hpp"
#include "togglebench/star.hpp"

namespace togglebench {

// Line-delimited JSON readers and writers for every dataset that crosses a
// process boundary. Actions travel as canonical-dialect text. Boxes travel
// as [x_min, y_min, x_max, y_max] on the normalized [0,1000] grid; screen
// records may instead carry `original_boxes_px` / `parsed_boxes_px` in pixel
// coordinates, which the loader converts through normalize_point using the
// record's screen_width and screen_height.
//
// Readers skip blank lines and throw IoError when the file cannot be opened
// and ConfigError (tagged "<path>:<line>") on malformed content. Writers
// throw IoError on any stream failure.

struct Prediction {
    std::string sample_id;
    std::string output;  // raw agent text, parsed at evaluation time
};

std::vector<ScreenRecord> load_screen_records(const std::string& path);
void save_screen_records(const std::vector<ScreenRecord>& records, const std::string& path);

std::vector<ToggleQuadruplet> load_quadruplets(const std::string& path);
void save_quadruplets(const std::vector<ToggleQuadruplet>& quadruplets, const std::string& path);

void save_drops(const std::vector<DropRecord>& drops, const std::string& path);
std::vector<DropRecord> load_drops(const std::string& path);

std::vector<Sample> load_samples(const std::string& path);
void save_samples(const std::vector<Sample>& samples, const std::string& path);

std::vector<Prediction> load_predictions(const std::string& path);
void save_predictions(const std::vector<Prediction>& predictions, const std::string& path);

// Single-object JSON file, not line-delimited.
SplitManifest load_split_manifest(const std::string& path);
void save_split_manifest(const SplitManifest& manifest, const std::string& path);

// One JSON line per episode, steps inline.
std::vector<Episode> load_episodes(const std::string& path);
void save_episodes(const std::vector<Episode>& episodes, const std::string& path);

// Sidecar marking which episode steps are toggle interactions. One line per
// episode; a repeated episode_id is an error.
std::map<std::string, std::vector<ToggleStepAnnotation>> load_toggle_annotations(
    const std::string& path);
void save_toggle_annotations(
    const std::map<std::string, std::vector<ToggleStepAnnotation>>& annotations,
    const std::string& path);

}  // namespace togglebench
