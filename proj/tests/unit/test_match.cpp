#include <doctest.h>

#include <random>
#include <string>
#include <utility>
#include <vector>

#include "togglebench/match.hpp"
#include "togglebench/util.hpp"

using namespace togglebench;

TEST_CASE("porter stemmer reference vectors") {
    // Vectors from the published description of the algorithm.
    const std::vector<std::pair<std::string, std::string>> vectors = {
        {"caresses", "caress"}, {"ponies", "poni"},       {"ties", "ti"},
        {"caress", "caress"},   {"cats", "cat"},          {"feed", "feed"},
        {"agreed", "agre"},     {"plastered", "plaster"}, {"bled", "bled"},
        {"motoring", "motor"},  {"sing", "sing"},         {"conflated", "conflat"},
        {"troubled", "troubl"}, {"sized", "size"},        {"hopping", "hop"},
        {"tanned", "tan"},      {"falling", "fall"},      {"hissing", "hiss"},
        {"fizzed", "fizz"},     {"failing", "fail"},      {"filing", "file"},
        {"happy", "happi"},     {"sky", "sky"},           {"relational", "relat"},
        {"conditional", "condit"},                        {"rational", "ration"},
        {"valenci", "valenc"},  {"hesitanci", "hesit"},
        {"digitizer", "digit"}, {"radicalli", "radic"},
        {"differentli", "differ"},                        {"vileli", "vile"},
        {"analogousli", "analog"},                        {"vietnamization", "vietnam"},
        {"predication", "predic"},                        {"operator", "oper"},
        {"feudalism", "feudal"},{"decisiveness", "decis"},
        {"hopefulness", "hope"},                          {"callousness", "callous"},
        {"formaliti", "formal"},{"sensitiviti", "sensit"},
        {"sensibiliti", "sensibl"},                       {"triplicate", "triplic"},
        {"formative", "form"},  {"formalize", "formal"},  {"electriciti", "electr"},
        {"electrical", "electr"},                         {"hopeful", "hope"},
        {"goodness", "good"},   {"revival", "reviv"},     {"allowance", "allow"},
        {"inference", "infer"}, {"airliner", "airlin"},   {"gyroscopic", "gyroscop"},
        {"adjustable", "adjust"},                         {"defensible", "defens"},
        {"irritant", "irrit"},  {"replacement", "replac"},{"adjustment", "adjust"},
        {"dependent", "depend"},{"adoption", "adopt"},    {"communism", "commun"},
        {"activate", "activ"},  {"angulariti", "angular"},{"homologous", "homolog"},
        {"effective", "effect"},{"bowdlerize", "bowdler"},{"probate", "probat"},
        {"rate", "rate"},       {"cease", "ceas"},        {"controll", "control"},
        {"roll", "roll"},
    };
    for (const auto& [word, expected] : vectors) {
        CHECK_MESSAGE(porter_stem(word) == expected, "stem(", word, ") = ", porter_stem(word));
    }
}

TEST_CASE("porter stemmer vectors used by app-name matching") {
    CHECK(porter_stem("settings") == "set");
    CHECK(porter_stem("setting") == "set");
    CHECK(porter_stem("recorder") == "record");
    CHECK(porter_stem("voice") == "voic");
    CHECK(porter_stem("magazine") == "magazin");
    CHECK(porter_stem("flipsnack") == "flipsnack");
    // length <= 2 is never stemmed
    CHECK(porter_stem("is") == "is");
    CHECK(porter_stem("a") == "a");
}

TEST_CASE("normalize_app_name lowercases, stems, and rejoins") {
    CHECK(normalize_app_name("Voice Recorder") == "voic record");
    CHECK(normalize_app_name("  flipsnack   magazine ") == "flipsnack magazin");
    // tokens with non-letters pass through unstemmed
    CHECK(normalize_app_name("recorder-unrecorder") == "recorder-unrecorder");
    CHECK(normalize_app_name("") == "");
}

TEST_CASE("openapp_match accepts substring containment after stemming") {
    CHECK(openapp_match("voice recorder-unrecorder", "voice recorder"));
    CHECK(openapp_match("Flipsnack", "flipsnack magazine"));
    CHECK(openapp_match("settings", "setting"));
    CHECK(openapp_match("Chrome", "chrome"));
    CHECK_FALSE(openapp_match("chrome", "youtube"));
    CHECK(openapp_match("YouTube Music", "youtube"));
}

TEST_CASE("openapp_match is symmetric") {
    std::mt19937 rng(7);
    const std::vector<std::string> names = {
        "chrome",  "YouTube",        "voice recorder", "Voice Recorder-Unrecorder",
        "setting", "settings",       "flipsnack",      "flipsnack magazine",
        "maps",    "google maps go", "",
    };
    std::uniform_int_distribution<std::size_t> pick(0, names.size() - 1);
    for (int i = 0; i < 500; ++i) {
        const auto& a = names[pick(rng)];
        const auto& b = names[pick(rng)];
        CHECK(openapp_match(a, b) == openapp_match(b, a));
    }
}

TEST_CASE("type_text_match lowercases and trims outer whitespace only") {
    CHECK(type_text_match("Hello World ", "hello world"));
    CHECK(type_text_match("", ""));
    CHECK_FALSE(type_text_match("hello  world", "hello world"));
    CHECK(type_text_match("\tabc\n", "ABC"));
    CHECK(type_text_match("a", " a "));
    CHECK_FALSE(type_text_match("a b", "ab"));
}

TEST_CASE("click_match hits the smallest box containing the ground truth") {
    const MatchConfig cfg = MatchConfig::state_control();

    auto r = click_match(Point{500, 500}, {BBox{480, 480, 520, 520}}, Point{510, 515}, cfg);
    CHECK(r.exact_match);
    CHECK(r.reason == MatchReason::BBoxHit);

    // far corner of a containing box still matches
    r = click_match(Point{500, 500}, {BBox{0, 0, 1000, 1000}}, Point{999, 1}, cfg);
    CHECK(r.exact_match);
    CHECK(r.reason == MatchReason::BBoxHit);

    // the smallest containing box is the one that counts
    const std::vector<BBox> nested = {BBox{0, 0, 1000, 1000}, BBox{480, 480, 520, 520}};
    r = click_match(Point{500, 500}, nested, Point{900, 900}, cfg);
    CHECK_FALSE(r.exact_match);
    CHECK(r.reason == MatchReason::DistanceFail);
    r = click_match(Point{500, 500}, nested, Point{481, 519}, cfg);
    CHECK(r.exact_match);
    CHECK(r.reason == MatchReason::BBoxHit);

    // box edges are inclusive
    r = click_match(Point{500, 500}, {BBox{480, 480, 520, 520}}, Point{520, 480}, cfg);
    CHECK(r.exact_match);
    CHECK(r.reason == MatchReason::BBoxHit);
}

TEST_CASE("click_match falls back to normalized euclidean distance") {
    const MatchConfig strict = MatchConfig::state_control();
    const MatchConfig lenient = MatchConfig::agentic();

    // d = 0.025
    auto r = click_match(Point{500, 500}, {}, Point{525, 500}, strict);
    CHECK(r.exact_match);
    CHECK(r.reason == MatchReason::DistancePass);

    // d = 0.05 fails the strict threshold, passes the lenient one
    r = click_match(Point{500, 500}, {}, Point{550, 500}, strict);
    CHECK_FALSE(r.exact_match);
    CHECK(r.reason == MatchReason::DistanceFail);
    r = click_match(Point{500, 500}, {}, Point{550, 500}, lenient);
    CHECK(r.exact_match);

    // a miss outside the gt box still gets the distance fallback
    r = click_match(Point{500, 500}, {BBox{499, 499, 501, 501}}, Point{510, 500}, strict);
    CHECK(r.exact_match);
    CHECK(r.reason == MatchReason::DistancePass);

    CHECK(click_distance(Point{500, 500}, Point{525, 500}) == doctest::Approx(0.025));
    CHECK(click_distance(Point{0, 0}, Point{1000, 1000}) == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("click threshold is strict") {
    // 0.25 and its square are exact in binary, so d == threshold exactly
    MatchConfig cfg;
    cfg.click_threshold = 0.25;
    auto r = click_match(Point{500, 500}, {}, Point{750, 500}, cfg);
    CHECK_FALSE(r.exact_match);
    cfg.click_threshold = 0.2500001;
    r = click_match(Point{500, 500}, {}, Point{750, 500}, cfg);
    CHECK(r.exact_match);
}

TEST_CASE("click threshold monotonicity") {
    std::mt19937 rng(99);
    std::uniform_int_distribution<int> coord(0, 1000);
    std::uniform_real_distribution<double> thr(0.001, 0.999);
    for (int i = 0; i < 2000; ++i) {
        const Point gt{coord(rng), coord(rng)};
        const Point pred{coord(rng), coord(rng)};
        double t1 = thr(rng);
        double t2 = thr(rng);
        if (t1 > t2) std::swap(t1, t2);
        MatchConfig lo;
        lo.click_threshold = t1;
        MatchConfig hi;
        hi.click_threshold = t2;
        if (click_match(gt, {}, pred, lo).exact_match) {
            CHECK(click_match(gt, {}, pred, hi).exact_match);
        }
    }
}

TEST_CASE("bbox dominance: inside the gt box beats any distance") {
    std::mt19937 rng(1234);
    std::uniform_int_distribution<int> coord(0, 1000);
    MatchConfig cfg;
    cfg.click_threshold = 0.0001;
    for (int i = 0; i < 2000; ++i) {
        int x0 = coord(rng), x1 = coord(rng);
        int y0 = coord(rng), y1 = coord(rng);
        if (x0 > x1) std::swap(x0, x1);
        if (y0 > y1) std::swap(y0, y1);
        const BBox box{x0, y0, x1, y1};
        std::uniform_int_distribution<int> px(x0, x1), py(y0, y1);
        const Point gt{px(rng), py(rng)};
        const Point pred{px(rng), py(rng)};
        const auto r = click_match(gt, {box}, pred, cfg);
        CHECK(r.exact_match);
        CHECK(r.reason == MatchReason::BBoxHit);
    }
}

TEST_CASE("match_step dispatches on the ground-truth action type") {
    const MatchConfig cfg = MatchConfig::state_control();

    auto check = [&](const Action& gt, const Action& pred, bool type_ok, bool exact_ok) {
        const auto r = match_step(GroundTruthStep{gt, {}}, pred, cfg);
        CHECK(r.type_match == type_ok);
        CHECK(r.exact_match == exact_ok);
        if (r.exact_match) CHECK(r.type_match);
    };

    check(Action::press(), Action::press(), true, true);
    check(Action::completed(), Action::completed(), true, true);
    check(Action::other("WAIT"), Action::other("SWIPE"), true, true);
    check(Action::scroll(Direction::Up), Action::scroll(Direction::Up), true, true);
    check(Action::scroll(Direction::Up), Action::scroll(Direction::Down), true, false);
    check(Action::click(Point{1, 1}), Action::completed(), false, false);
    check(Action::type_text("Hi "), Action::type_text("hi"), true, true);
    check(Action::type_text("hi there"), Action::type_text("hithere"), true, false);
    check(Action::open_app("Flipsnack"), Action::open_app("flipsnack magazine"), true, true);
    check(Action::open_app("chrome"), Action::open_app("youtube"), true, false);
    check(Action::click(Point{500, 500}), Action::click(Point{510, 500}), true, true);
    check(Action::click(Point{500, 500}), Action::click(Point{900, 900}), true, false);
}

TEST_CASE("match_step flags missing parameters instead of throwing") {
    const MatchConfig cfg = MatchConfig::state_control();
    Action bare_click;
    bare_click.type = ActionType::Click;
    const auto r = match_step(GroundTruthStep{Action::click(Point{5, 5}), {}}, bare_click, cfg);
    CHECK(r.type_match);
    CHECK_FALSE(r.exact_match);
    CHECK(r.reason == MatchReason::ParamMismatch);
}

TEST_CASE("match_step uses the layout carried by the ground-truth step") {
    const MatchConfig cfg = MatchConfig::state_control();
    GroundTruthStep gt{Action::click(Point{500, 500}), {BBox{400, 400, 600, 600}}};
    const auto r = match_step(gt, Action::click(Point{599, 401}), cfg);
    CHECK(r.exact_match);
    CHECK(r.reason == MatchReason::BBoxHit);
}

TEST_CASE("match config validation") {
    CHECK_NOTHROW(MatchConfig::state_control().validate());
    CHECK_NOTHROW(MatchConfig::agentic().validate());
    MatchConfig bad;
    bad.click_threshold = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad.click_threshold = 1.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = MatchConfig{};
    bad.distance_metric = "manhattan";
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = MatchConfig{};
    bad.stemmer = "none";
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("state-control and agentic presets") {
    CHECK(MatchConfig::state_control().click_threshold == 0.04);
    CHECK(MatchConfig::agentic().click_threshold == 0.14);
}
