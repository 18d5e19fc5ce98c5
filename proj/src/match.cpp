#include "togglebench/match.hpp"

#include <cctype>
#include <cmath>
#include <limits>

#include "togglebench/util.hpp"

namespace togglebench {

namespace {

// Porter's 1980 suffix-stripping algorithm. Operates on a lowercase ASCII
// buffer; words of length <= 2 are left alone.
class PorterStemmer {
public:
    std::string stem(std::string word) {
        if (word.size() <= 2) return word;
        b_ = std::move(word);
        k_ = static_cast<int>(b_.size()) - 1;
        j_ = 0;
        step1ab();
        step1c();
        step2();
        step3();
        step4();
        step5();
        b_.resize(static_cast<std::size_t>(k_) + 1);
        return std::move(b_);
    }

private:
    std::string b_;
    int k_ = 0;  // last valid index
    int j_ = 0;  // end of the stem the current suffix hangs off

    bool cons(int i) const {
        switch (b_[static_cast<std::size_t>(i)]) {
            case 'a':
            case 'e':
            case 'i':
            case 'o':
            case 'u': return false;
            case 'y': return i == 0 ? true : !cons(i - 1);
            default: return true;
        }
    }

    // Measure of b[0..j]: the m in [C](VC)^m[V].
    int m() const {
        int n = 0;
        int i = 0;
        while (true) {
            if (i > j_) return n;
            if (!cons(i)) break;
            ++i;
        }
        ++i;
        while (true) {
            while (true) {
                if (i > j_) return n;
                if (cons(i)) break;
                ++i;
            }
            ++i;
            ++n;
            while (true) {
                if (i > j_) return n;
                if (!cons(i)) break;
                ++i;
            }
            ++i;
        }
    }

    bool vowel_in_stem() const {
        for (int i = 0; i <= j_; ++i) {
            if (!cons(i)) return true;
        }
        return false;
    }

    bool doublec(int j) const {
        if (j < 1) return false;
        if (b_[static_cast<std::size_t>(j)] != b_[static_cast<std::size_t>(j - 1)]) return false;
        return cons(j);
    }

    bool cvc(int i) const {
        if (i < 2 || !cons(i) || cons(i - 1) || !cons(i - 2)) return false;
        const char ch = b_[static_cast<std::size_t>(i)];
        return ch != 'w' && ch != 'x' && ch != 'y';
    }

    bool ends(std::string_view s) {
        const int len = static_cast<int>(s.size());
        if (len > k_ + 1) return false;
        if (b_.compare(static_cast<std::size_t>(k_ - len + 1), static_cast<std::size_t>(len),
                       s) != 0) {
            return false;
        }
        j_ = k_ - len;
        return true;
    }

    void setto(std::string_view s) {
        b_.resize(static_cast<std::size_t>(j_) + 1);
        b_.append(s);
        k_ = j_ + static_cast<int>(s.size());
    }

    void r(std::string_view s) {
        if (m() > 0) setto(s);
    }

    void step1ab() {
        if (b_[static_cast<std::size_t>(k_)] == 's') {
            if (ends("sses")) {
                k_ -= 2;
            } else if (ends("ies")) {
                setto("i");
            } else if (b_[static_cast<std::size_t>(k_ - 1)] != 's') {
                --k_;
            }
        }
        if (ends("eed")) {
            if (m() > 0) --k_;
        } else if ((ends("ed") || ends("ing")) && vowel_in_stem()) {
            k_ = j_;
            if (ends("at")) {
                setto("ate");
            } else if (ends("bl")) {
                setto("ble");
            } else if (ends("iz")) {
                setto("ize");
            } else if (doublec(k_)) {
                --k_;
                const char ch = b_[static_cast<std::size_t>(k_)];
                if (ch == 'l' || ch == 's' || ch == 'z') ++k_;
            } else if (m() == 1 && cvc(k_)) {
                setto("e");
            }
        }
    }

    void step1c() {
        if (ends("y") && vowel_in_stem()) b_[static_cast<std::size_t>(k_)] = 'i';
    }

    void step2() {
        if (k_ < 1) return;
        switch (b_[static_cast<std::size_t>(k_ - 1)]) {
            case 'a':
                if (ends("ational")) { r("ate"); break; }
                if (ends("tional")) { r("tion"); break; }
                break;
            case 'c':
                if (ends("enci")) { r("ence"); break; }
                if (ends("anci")) { r("ance"); break; }
                break;
            case 'e':
                if (ends("izer")) { r("ize"); break; }
                break;
            case 'l':
                if (ends("abli")) { r("able"); break; }
                if (ends("alli")) { r("al"); break; }
                if (ends("entli")) { r("ent"); break; }
                if (ends("eli")) { r("e"); break; }
                if (ends("ousli")) { r("ous"); break; }
                break;
            case 'o':
                if (ends("ization")) { r("ize"); break; }
                if (ends("ation")) { r("ate"); break; }
                if (ends("ator")) { r("ate"); break; }
                break;
            case 's':
                if (ends("alism")) { r("al"); break; }
                if (ends("iveness")) { r("ive"); break; }
                if (ends("fulness")) { r("ful"); break; }
                if (ends("ousness")) { r("ous"); break; }
                break;
            case 't':
                if (ends("aliti")) { r("al"); break; }
                if (ends("iviti")) { r("ive"); break; }
                if (ends("biliti")) { r("ble"); break; }
                break;
            default: break;
        }
    }

    void step3() {
        switch (b_[static_cast<std::size_t>(k_)]) {
            case 'e':
                if (ends("icate")) { r("ic"); break; }
                if (ends("ative")) { r(""); break; }
                if (ends("alize")) { r("al"); break; }
                break;
            case 'i':
                if (ends("iciti")) { r("ic"); break; }
                break;
            case 'l':
                if (ends("ical")) { r("ic"); break; }
                if (ends("ful")) { r(""); break; }
                break;
            case 's':
                if (ends("ness")) { r(""); break; }
                break;
            default: break;
        }
    }

    void step4() {
        if (k_ < 1) return;
        switch (b_[static_cast<std::size_t>(k_ - 1)]) {
            case 'a':
                if (ends("al")) break;
                return;
            case 'c':
                if (ends("ance")) break;
                if (ends("ence")) break;
                return;
            case 'e':
                if (ends("er")) break;
                return;
            case 'i':
                if (ends("ic")) break;
                return;
            case 'l':
                if (ends("able")) break;
                if (ends("ible")) break;
                return;
            case 'n':
                if (ends("ant")) break;
                if (ends("ement")) break;
                if (ends("ment")) break;
                if (ends("ent")) break;
                return;
            case 'o':
                if (ends("ion") && j_ >= 0 &&
                    (b_[static_cast<std::size_t>(j_)] == 's' ||
                     b_[static_cast<std::size_t>(j_)] == 't')) {
                    break;
                }
                if (ends("ou")) break;
                return;
            case 's':
                if (ends("ism")) break;
                return;
            case 't':
                if (ends("ate")) break;
                if (ends("iti")) break;
                return;
            case 'u':
                if (ends("ous")) break;
                return;
            case 'v':
                if (ends("ive")) break;
                return;
            case 'z':
                if (ends("ize")) break;
                return;
            default: return;
        }
        if (m() > 1) k_ = j_;
    }

    void step5() {
        j_ = k_;
        if (b_[static_cast<std::size_t>(k_)] == 'e') {
            const int a = m();
            if (a > 1 || (a == 1 && !cvc(k_ - 1))) --k_;
        }
        if (b_[static_cast<std::size_t>(k_)] == 'l' && doublec(k_) && m() > 1) --k_;
    }
};

bool is_ascii_letter(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }

}  // namespace

void MatchConfig::validate() const {
    if (!(click_threshold > 0.0 && click_threshold < 1.0)) {
        throw ConfigError("click_threshold must lie strictly between 0 and 1");
    }
    if (distance_metric != "euclidean-normalized") {
        throw ConfigError("unknown distance metric '" + distance_metric + "'");
    }
    if (stemmer != "porter") {
        throw ConfigError("unknown stemmer '" + stemmer + "'");
    }
}

std::string porter_stem(std::string_view word) {
    PorterStemmer stemmer;
    return stemmer.stem(std::string(word));
}

std::string normalize_app_name(std::string_view name) {
    const std::string lowered = to_lower(name);
    std::string out;
    std::size_t i = 0;
    while (i < lowered.size()) {
        while (i < lowered.size() && std::isspace(static_cast<unsigned char>(lowered[i]))) ++i;
        std::size_t start = i;
        while (i < lowered.size() && !std::isspace(static_cast<unsigned char>(lowered[i]))) ++i;
        if (start == i) break;
        std::string token = lowered.substr(start, i - start);
        // The stemmer is defined on letter strings; tokens carrying digits or
        // punctuation pass through unchanged.
        bool letters_only = true;
        for (char c : token) {
            if (!is_ascii_letter(c)) {
                letters_only = false;
                break;
            }
        }
        if (letters_only) {
            PorterStemmer stemmer;
            token = stemmer.stem(std::move(token));
        }
        if (!out.empty()) out += ' ';
        out += token;
    }
    return out;
}

bool openapp_match(std::string_view gt_name, std::string_view pred_name) {
    const std::string a = normalize_app_name(gt_name);
    const std::string b = normalize_app_name(pred_name);
    return a.find(b) != std::string::npos || b.find(a) != std::string::npos;
}

bool type_text_match(std::string_view gt_text, std::string_view pred_text) {
    return to_lower(trim(gt_text)) == to_lower(trim(pred_text));
}

double click_distance(Point gt_point, Point pred_point) {
    const double dx = static_cast<double>(pred_point.x - gt_point.x) / kCoordMax;
    const double dy = static_cast<double>(pred_point.y - gt_point.y) / kCoordMax;
    return std::sqrt(dx * dx + dy * dy);
}

int containing_box_index(Point p, const std::vector<BBox>& layout) {
    int best = -1;
    double best_area = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < layout.size(); ++i) {
        if (!layout[i].contains(p)) continue;
        const double area = layout[i].area();
        if (area < best_area) {
            best_area = area;
            best = static_cast<int>(i);
        }
    }
    return best;
}

std::string_view to_string(MatchReason r) {
    switch (r) {
        case MatchReason::TypeMismatch: return "type-mismatch";
        case MatchReason::BBoxHit: return "bbox-hit";
        case MatchReason::DistancePass: return "distance-pass";
        case MatchReason::DistanceFail: return "distance-fail";
        case MatchReason::ParamPass: return "param-pass";
        case MatchReason::ParamMismatch: return "param-mismatch";
    }
    return "type-mismatch";
}

MatchResult click_match(Point gt_point, const std::vector<BBox>& layout, Point pred_point,
                        const MatchConfig& cfg) {
    MatchResult res;
    res.type_match = true;
    const int box = containing_box_index(gt_point, layout);
    if (box >= 0 && layout[static_cast<std::size_t>(box)].contains(pred_point)) {
        res.exact_match = true;
        res.reason = MatchReason::BBoxHit;
        return res;
    }
    const double d = click_distance(gt_point, pred_point);
    res.exact_match = d < cfg.click_threshold;
    res.reason = res.exact_match ? MatchReason::DistancePass : MatchReason::DistanceFail;
    return res;
}

MatchResult match_step(const GroundTruthStep& gt, const Action& pred, const MatchConfig& cfg) {
    MatchResult res;
    if (pred.type != gt.action.type) {
        res.type_match = false;
        res.exact_match = false;
        res.reason = MatchReason::TypeMismatch;
        return res;
    }
    res.type_match = true;
    switch (gt.action.type) {
        case ActionType::Press:
        case ActionType::Completed:
        case ActionType::Other:
            res.exact_match = true;
            res.reason = MatchReason::ParamPass;
            return res;
        case ActionType::Scroll:
            if (!pred.direction || !gt.action.direction) {
                res.exact_match = false;
                res.reason = MatchReason::ParamMismatch;
                return res;
            }
            res.exact_match = *pred.direction == *gt.action.direction;
            res.reason = res.exact_match ? MatchReason::ParamPass : MatchReason::ParamMismatch;
            return res;
        case ActionType::Type:
            if (!pred.text || !gt.action.text) {
                res.exact_match = false;
                res.reason = MatchReason::ParamMismatch;
                return res;
            }
            res.exact_match = type_text_match(*gt.action.text, *pred.text);
            res.reason = res.exact_match ? MatchReason::ParamPass : MatchReason::ParamMismatch;
            return res;
        case ActionType::OpenApp:
            if (!pred.app_name || !gt.action.app_name) {
                res.exact_match = false;
                res.reason = MatchReason::ParamMismatch;
                return res;
            }
            res.exact_match = openapp_match(*gt.action.app_name, *pred.app_name);
            res.reason = res.exact_match ? MatchReason::ParamPass : MatchReason::ParamMismatch;
            return res;
        case ActionType::Click: {
            if (!pred.point || !gt.action.point) {
                res.exact_match = false;
                res.reason = MatchReason::ParamMismatch;
                return res;
            }
            return click_match(*gt.action.point, gt.layout, *pred.point, cfg);
        }
    }
    return res;
}

}  // namespace togglebench
