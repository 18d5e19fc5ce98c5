#include "togglebench/builder.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <json.hpp>

#include "togglebench/util.hpp"

namespace togglebench {

std::string_view to_string(Polarity p) {
    return p == Polarity::Positive ? "positive" : "negative";
}

namespace {

std::string fill_feature(const std::string& tmpl, const std::string& feature) {
    std::string out = tmpl;
    const std::string slot = "{feature}";
    const auto pos = out.find(slot);
    if (pos == std::string::npos) {
        throw ConfigError("instruction template lacks a {feature} slot: " + tmpl);
    }
    out.replace(pos, slot.size(), feature);
    return out;
}

}  // namespace

std::string InstructionTemplates::render(bool want_on, const std::string& feature,
                                         const std::string& sample_key) const {
    const auto& pool = want_on ? turn_on : turn_off;
    if (pool.empty()) throw ConfigError("instruction template set is empty");
    std::size_t index = 0;
    if (paraphrase && pool.size() > 1) {
        index = mix64(fnv1a64(sample_key)) % pool.size();
    }
    return fill_feature(pool[index], feature);
}

InstructionTemplates InstructionTemplates::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open instruction template file " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("instruction template file " + path + ": " + e.what());
    }
    if (!j.is_object()) throw ConfigError("instruction template file " + path + ": not an object");
    InstructionTemplates t;
    if (j.contains("turn_on")) t.turn_on = j["turn_on"].get<std::vector<std::string>>();
    if (j.contains("turn_off")) t.turn_off = j["turn_off"].get<std::vector<std::string>>();
    t.paraphrase = j.value("paraphrase", t.paraphrase);
    return t;
}

std::string quadruplet_key(const Sample& s) { return s.screen_id + ":" + s.toggle_box.key(); }

std::string quadruplet_key(const ToggleQuadruplet& q) {
    return q.screen_id + ":" + q.box.key();
}

std::pair<Sample, Sample> expand_quadruplet(const ToggleQuadruplet& q,
                                            const InstructionTemplates& templates) {
    if (trim(q.feature).empty()) {
        throw ConfigError("quadruplet " + quadruplet_key(q) + " has an empty feature name");
    }
    if (!q.box.valid()) {
        throw ConfigError("quadruplet " + quadruplet_key(q) + " has an invalid box");
    }

    const std::string key = quadruplet_key(q);
    const bool currently_on = q.state == ToggleState::On;

    Sample positive;
    positive.sample_id = key + ":pos";
    positive.screen_id = q.screen_id;
    positive.image_ref = q.image_ref;
    positive.polarity = Polarity::Positive;
    // positive: the desired state differs from the current one, so act
    positive.instruction = templates.render(!currently_on, q.feature, positive.sample_id);
    positive.label_action = Action::click(q.box.center());
    positive.toggle_box = q.box;
    positive.toggle_state = q.state;
    positive.feature = q.feature;
    positive.layout = {q.box};

    Sample negative;
    negative.sample_id = key + ":neg";
    negative.screen_id = q.screen_id;
    negative.image_ref = q.image_ref;
    negative.polarity = Polarity::Negative;
    // negative: the desired state is already in effect, so stop
    negative.instruction = templates.render(currently_on, q.feature, negative.sample_id);
    negative.label_action = Action::completed();
    negative.toggle_box = q.box;
    negative.toggle_state = q.state;
    negative.feature = q.feature;
    negative.layout = {q.box};

    return {std::move(positive), std::move(negative)};
}

SplitManifest split_dataset(const std::vector<Sample>& samples, std::uint64_t seed,
                            double ratio) {
    if (!(ratio > 0.0 && ratio < 1.0)) {
        throw ConfigError("split ratio must lie strictly between 0 and 1");
    }
    std::set<std::string> keys;
    for (const Sample& s : samples) keys.insert(quadruplet_key(s));

    SplitManifest manifest;
    manifest.seed = seed;
    manifest.ratio = ratio;
    for (const std::string& key : keys) {
        const std::uint64_t h = mix64(fnv1a64(key) ^ seed);
        // top 53 bits as a uniform draw in [0,1)
        const double draw = static_cast<double>(h >> 11) * 0x1.0p-53;
        if (draw < ratio) {
            manifest.train_ids.push_back(key);
        } else {
            manifest.test_ids.push_back(key);
        }
    }
    return manifest;
}

std::pair<std::vector<Sample>, std::vector<Sample>> apply_split(
    const std::vector<Sample>& samples, const SplitManifest& manifest) {
    const std::set<std::string> train(manifest.train_ids.begin(), manifest.train_ids.end());
    const std::set<std::string> test(manifest.test_ids.begin(), manifest.test_ids.end());
    std::pair<std::vector<Sample>, std::vector<Sample>> out;
    for (const Sample& s : samples) {
        const std::string key = quadruplet_key(s);
        if (train.count(key)) {
            out.first.push_back(s);
        } else if (test.count(key)) {
            out.second.push_back(s);
        } else {
            throw ConfigError("sample " + s.sample_id + " is not covered by the split manifest");
        }
    }
    return out;
}

}  // namespace togglebench
