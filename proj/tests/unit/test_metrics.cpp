#include <doctest.h>

#include <algorithm>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "togglebench/metrics.hpp"

using namespace togglebench;
using nlohmann::json;

namespace {

Sample make_sample(Polarity polarity, BBox toggle_box, std::vector<BBox> layout = {}) {
    Sample s;
    s.sample_id = "s";
    s.screen_id = "scr";
    s.polarity = polarity;
    s.toggle_box = toggle_box;
    s.layout = std::move(layout);
    s.label_action = polarity == Polarity::Positive ? Action::click(toggle_box.center())
                                                    : Action::completed();
    return s;
}

// Independent aggregation: one straight pass over per-sample match results,
// no shared counting code with eval_state_control.
struct OracleReport {
    double o_tmr, o_amr;
    std::optional<double> p_tmr, p_amr, p_fnr, n_amr, n_fptr, n_fpr;
};

OracleReport oracle_state_control(const std::vector<ScoredSample>& samples,
                                  const MatchConfig& cfg) {
    double tm = 0, em = 0;
    double P = 0, N = 0;
    double p_click = 0, p_exact = 0, p_completed = 0;
    double n_completed = 0, n_click = 0, n_click_hit = 0;
    for (const ScoredSample& s : samples) {
        if (s.match.type_match) tm += 1;
        if (s.match.exact_match) em += 1;
        if (s.polarity == Polarity::Positive) {
            P += 1;
            p_click += s.pred.type == ActionType::Click ? 1 : 0;
            p_exact += s.match.exact_match ? 1 : 0;
            p_completed += s.pred.type == ActionType::Completed ? 1 : 0;
        } else {
            N += 1;
            n_completed += s.pred.type == ActionType::Completed ? 1 : 0;
            if (s.pred.type == ActionType::Click) {
                n_click += 1;
                if (s.pred.point && click_match(s.positive_click_point, s.gt.layout,
                                                *s.pred.point, cfg)
                                        .exact_match) {
                    n_click_hit += 1;
                }
            }
        }
    }
    OracleReport o;
    o.o_tmr = tm / (P + N);
    o.o_amr = em / (P + N);
    if (P > 0) {
        o.p_tmr = p_click / P;
        o.p_amr = p_exact / P;
        o.p_fnr = p_completed / P;
    }
    if (N > 0) {
        o.n_amr = n_completed / N;
        o.n_fptr = n_click / N;
        o.n_fpr = n_click_hit / N;
    }
    return o;
}

bool same(const std::optional<double>& a, const std::optional<double>& b) {
    if (a.has_value() != b.has_value()) return false;
    return !a || *a == *b;  // bit-exact, both sides are count/count
}

ScoredStep make_step(const Action& gt, const Action& pred, std::vector<BBox> layout,
                     const MatchConfig& cfg) {
    ScoredStep s;
    s.gt.action = gt;
    s.gt.layout = std::move(layout);
    s.pred = pred;
    s.match = match_step(s.gt, pred, cfg);
    return s;
}

json parse_metric_lines(const std::string& text) {
    json by_name = json::object();
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        const json j = json::parse(line);
        if (j.contains("metric")) by_name[j["metric"].get<std::string>()] = j["value"];
    }
    return by_name;
}

}  // namespace

TEST_CASE("hand fixture where every state-control metric is one half") {
    const MatchConfig cfg = MatchConfig::state_control();
    const BBox box{400, 400, 600, 600};
    std::vector<ScoredSample> samples;
    // positive, exact click hit
    samples.push_back(score_sample(make_sample(Polarity::Positive, box),
                                   Action::click(box.center()), cfg));
    // positive, predicted COMPLETED: false negative
    samples.push_back(
        score_sample(make_sample(Polarity::Positive, box), Action::completed(), cfg));
    // negative, correct COMPLETED
    samples.push_back(
        score_sample(make_sample(Polarity::Negative, box), Action::completed(), cfg));
    // negative, click that lands on the toggle: counted by N-FPTR and N-FPR
    samples.push_back(
        score_sample(make_sample(Polarity::Negative, box), Action::click({500, 500}), cfg));

    const StateControlReport r = eval_state_control(samples, cfg);
    CHECK(r.o_tmr == 0.5);
    CHECK(r.o_amr == 0.5);
    CHECK(*r.p_tmr == 0.5);
    CHECK(*r.p_amr == 0.5);
    CHECK(*r.p_fnr == 0.5);
    CHECK(*r.n_amr == 0.5);
    CHECK(*r.n_fptr == 0.5);
    CHECK(*r.n_fpr == 0.5);
    CHECK(r.counts.positives == 2);
    CHECK(r.counts.negatives == 2);
    CHECK(r.counts.n_click_hit == 1);
}

TEST_CASE("state-control report matches an independent aggregation on random fixtures") {
    const MatchConfig cfg = MatchConfig::state_control();
    std::mt19937_64 rng(20260822);
    auto coord = [&] { return static_cast<int>(rng() % 1001); };

    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t n = 1000 + rng() % 500;
        std::vector<ScoredSample> scored;
        scored.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            const int x0 = static_cast<int>(rng() % 900);
            const int y0 = static_cast<int>(rng() % 900);
            const BBox box{x0, y0, x0 + 20 + static_cast<int>(rng() % 80),
                           y0 + 20 + static_cast<int>(rng() % 80)};
            std::vector<BBox> layout;
            if (rng() % 3 == 0) layout = {box, BBox{0, 0, 80, 80}};
            Sample s = make_sample(rng() % 2 ? Polarity::Positive : Polarity::Negative, box,
                                   layout);
            Action pred;
            switch (rng() % 5) {
                case 0: pred = Action::click(box.center()); break;
                case 1: pred = Action::click({coord(), coord()}); break;
                case 2: pred = Action::completed(); break;
                case 3: pred = Action::scroll(Direction::Up); break;
                default: pred = Action::press(); break;
            }
            scored.push_back(score_sample(s, pred, cfg));
        }
        const StateControlReport r = eval_state_control(scored, cfg);
        const OracleReport o = oracle_state_control(scored, cfg);
        REQUIRE(r.o_tmr == o.o_tmr);
        REQUIRE(r.o_amr == o.o_amr);
        REQUIRE(same(r.p_tmr, o.p_tmr));
        REQUIRE(same(r.p_amr, o.p_amr));
        REQUIRE(same(r.p_fnr, o.p_fnr));
        REQUIRE(same(r.n_amr, o.n_amr));
        REQUIRE(same(r.n_fptr, o.n_fptr));
        REQUIRE(same(r.n_fpr, o.n_fpr));

        // weighted-average identities, exact in count space
        REQUIRE(r.counts.type_match == r.counts.p_click + r.counts.n_completed);
        REQUIRE(r.counts.exact_match == r.counts.p_exact + r.counts.n_completed);
    }
}

TEST_CASE("state-control report is invariant under sample order") {
    const MatchConfig cfg = MatchConfig::state_control();
    std::mt19937_64 rng(7);
    std::vector<ScoredSample> scored;
    for (int i = 0; i < 200; ++i) {
        const BBox box{100, 100, 300, 300};
        Sample s = make_sample(i % 2 ? Polarity::Positive : Polarity::Negative, box);
        Action pred = i % 3 == 0 ? Action::completed()
                                 : Action::click({static_cast<int>(rng() % 1001),
                                                  static_cast<int>(rng() % 1001)});
        scored.push_back(score_sample(s, pred, cfg));
    }
    const StateControlReport before = eval_state_control(scored, cfg);
    std::shuffle(scored.begin(), scored.end(), rng);
    const StateControlReport after = eval_state_control(scored, cfg);
    CHECK(before.o_tmr == after.o_tmr);
    CHECK(before.o_amr == after.o_amr);
    CHECK(same(before.p_amr, after.p_amr));
    CHECK(same(before.n_fpr, after.n_fpr));
    CHECK(before.counts.n_click_hit == after.counts.n_click_hit);
}

TEST_CASE("inconsistent match fields are rejected, not averaged over") {
    const MatchConfig cfg = MatchConfig::state_control();
    const BBox box{400, 400, 600, 600};
    ScoredSample s = score_sample(make_sample(Polarity::Positive, box),
                                  Action::click(box.center()), cfg);
    s.match.type_match = false;  // contradicts pred.type == Click
    CHECK_THROWS_WITH_AS(eval_state_control({s}, cfg),
                         "eval_state_control: match results inconsistent with sample polarity",
                         Error);
}

TEST_CASE("state-control input validation") {
    const MatchConfig cfg = MatchConfig::state_control();
    CHECK_THROWS_WITH_AS(eval_state_control({}, cfg), "eval_state_control: empty sample list",
                         Error);

    const BBox box{0, 0, 100, 100};
    ScoredSample bad_pos = score_sample(make_sample(Polarity::Positive, box),
                                        Action::completed(), cfg);
    bad_pos.gt.action = Action::completed();
    CHECK_THROWS_WITH_AS(eval_state_control({bad_pos}, cfg),
                         "positive sample must carry a CLICK ground truth", Error);

    ScoredSample bad_neg = score_sample(make_sample(Polarity::Negative, box),
                                        Action::completed(), cfg);
    bad_neg.gt.action = Action::click({5, 5});
    CHECK_THROWS_WITH_AS(eval_state_control({bad_neg}, cfg),
                         "negative sample must carry a COMPLETED ground truth", Error);
}

TEST_CASE("empty buckets report as absent, never as zero") {
    const MatchConfig cfg = MatchConfig::state_control();
    const BBox box{400, 400, 600, 600};
    std::vector<ScoredSample> only_positive = {
        score_sample(make_sample(Polarity::Positive, box), Action::click(box.center()), cfg)};
    const StateControlReport r = eval_state_control(only_positive, cfg);
    CHECK(!r.n_amr.has_value());
    CHECK(!r.n_fptr.has_value());
    CHECK(!r.n_fpr.has_value());
    CHECK(*r.p_amr == 1.0);

    const json by_name = parse_metric_lines(to_json_lines(r));
    CHECK(by_name["n_amr"].is_null());
    CHECK(by_name["n_fpr"].is_null());
    CHECK(by_name["p_amr"].get<double>() == 1.0);

    const std::string table = to_table(r);
    CHECK(table.find("N-AMR     n/a") != std::string::npos);
    CHECK(table.find("P-AMR     1.0000") != std::string::npos);
}

TEST_CASE("score_sample wires layout and toggle point") {
    const MatchConfig cfg = MatchConfig::state_control();
    const BBox box{100, 200, 300, 260};
    Sample s = make_sample(Polarity::Positive, box);
    const ScoredSample scored = score_sample(s, Action::click(box.center()), cfg);
    CHECK(scored.gt.layout == std::vector<BBox>{box});  // defaulted
    CHECK(scored.positive_click_point == box.center());
    CHECK(scored.gt.action == s.label_action);
    CHECK(scored.match.exact_match);

    Sample with_layout = make_sample(Polarity::Positive, box, {box, BBox{0, 0, 50, 50}});
    const ScoredSample scored2 = score_sample(with_layout, Action::click({10, 10}), cfg);
    REQUIRE(scored2.gt.layout.size() == 2);
    // prediction falls in the wrong layout box, so it cannot be exact
    CHECK(scored2.match.type_match);
    CHECK(!scored2.match.exact_match);
}

TEST_CASE("agentic hand fixture") {
    const MatchConfig cfg = MatchConfig::agentic();
    const BBox box{400, 400, 600, 600};
    ScoredTrajectory perfect;
    perfect.episode_id = "ep-perfect";
    perfect.steps = {
        make_step(Action::click(box.center()), Action::click({450, 450}), {box}, cfg),
        make_step(Action::completed(), Action::completed(), {}, cfg),
    };
    ScoredTrajectory flawed;
    flawed.episode_id = "ep-flawed";
    flawed.steps = {
        make_step(Action::click({100, 100}), Action::click({900, 900}), {}, cfg),
        make_step(Action::type_text("alarm"), Action::completed(), {}, cfg),
    };
    const AgenticReport r = eval_agentic({perfect, flawed});
    CHECK(r.step_count == 4);
    CHECK(r.trajectory_count == 2);
    CHECK(r.click_step_count == 2);
    CHECK(r.tmr == 0.75);
    CHECK(r.amr == 0.5);
    CHECK(r.tsr == 0.5);
    CHECK(*r.gmr == 0.5);
}

TEST_CASE("agentic grounding bucket is absent without ground-truth clicks") {
    const MatchConfig cfg = MatchConfig::agentic();
    ScoredTrajectory t;
    t.episode_id = "ep";
    t.steps = {make_step(Action::completed(), Action::completed(), {}, cfg),
               make_step(Action::scroll(Direction::Down), Action::scroll(Direction::Down), {},
                         cfg)};
    const AgenticReport r = eval_agentic({t});
    CHECK(!r.gmr.has_value());
    CHECK(r.tsr == 1.0);

    const json by_name = parse_metric_lines(to_json_lines(r));
    CHECK(by_name["gmr"].is_null());
    CHECK(by_name["tsr"].get<double>() == 1.0);
    CHECK(to_table(r).find("GMR       n/a") != std::string::npos);
}

TEST_CASE("agentic input validation") {
    CHECK_THROWS_WITH_AS(eval_agentic({}), "eval_agentic: empty trajectory list", Error);
    ScoredTrajectory empty;
    empty.episode_id = "hollow";
    CHECK_THROWS_WITH_AS(eval_agentic({empty}),
                         "eval_agentic: trajectory 'hollow' has no steps", Error);
}
