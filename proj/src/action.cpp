#include "togglebench/action.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <mutex>
#include <sstream>

#include <json.hpp>

namespace togglebench {

namespace {

using json = nlohmann::json;

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

}  // namespace

bool BBox::valid() const {
    return x_min <= x_max && y_min <= y_max && x_min >= 0 && y_min >= 0 &&
           x_max <= kCoordMax && y_max <= kCoordMax;
}

bool BBox::contains(Point p) const {
    return p.x >= x_min && p.x <= x_max && p.y >= y_min && p.y <= y_max;
}

double BBox::area() const {
    return static_cast<double>(x_max - x_min) * static_cast<double>(y_max - y_min);
}

Point BBox::center() const { return Point{(x_min + x_max) / 2, (y_min + y_max) / 2}; }

std::string BBox::key() const {
    std::ostringstream os;
    os << x_min << '-' << y_min << '-' << x_max << '-' << y_max;
    return os.str();
}

double iou(const BBox& a, const BBox& b) {
    if (a == b) return 1.0;
    const double ix = std::max(0, std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min));
    const double iy = std::max(0, std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min));
    const double inter = ix * iy;
    const double uni = a.area() + b.area() - inter;
    if (uni <= 0.0) return 0.0;  // disjoint degenerate boxes
    return inter / uni;
}

std::string_view to_string(ActionType t) {
    switch (t) {
        case ActionType::Click: return "CLICK";
        case ActionType::Completed: return "COMPLETED";
        case ActionType::Scroll: return "SCROLL";
        case ActionType::Type: return "TYPE";
        case ActionType::OpenApp: return "OPENAPP";
        case ActionType::Press: return "PRESS";
        case ActionType::Other: return "OTHER";
    }
    return "OTHER";
}

std::string_view to_string(Direction d) {
    switch (d) {
        case Direction::Up: return "up";
        case Direction::Down: return "down";
        case Direction::Left: return "left";
        case Direction::Right: return "right";
    }
    return "up";
}

std::optional<ActionType> action_type_from_string(std::string_view s) {
    const std::string u = to_lower(s);
    if (u == "click") return ActionType::Click;
    if (u == "completed") return ActionType::Completed;
    if (u == "scroll") return ActionType::Scroll;
    if (u == "type") return ActionType::Type;
    if (u == "openapp" || u == "open_app") return ActionType::OpenApp;
    if (u == "press") return ActionType::Press;
    if (u == "other") return ActionType::Other;
    return std::nullopt;
}

std::optional<Direction> direction_from_string(std::string_view s) {
    const std::string l = to_lower(s);
    if (l == "up") return Direction::Up;
    if (l == "down") return Direction::Down;
    if (l == "left") return Direction::Left;
    if (l == "right") return Direction::Right;
    return std::nullopt;
}

bool Action::operator==(const Action& other) const {
    if (type != other.type) return false;
    switch (type) {
        case ActionType::Click: return point == other.point;
        case ActionType::Scroll: return direction == other.direction;
        case ActionType::Type: return text == other.text;
        case ActionType::OpenApp: return app_name == other.app_name;
        case ActionType::Completed:
        case ActionType::Press: return true;
        case ActionType::Other: return raw == other.raw;
    }
    return false;
}

bool Action::well_formed() const {
    const bool no_point = !point.has_value();
    const bool no_dir = !direction.has_value();
    const bool no_text = !text.has_value();
    const bool no_app = !app_name.has_value();
    switch (type) {
        case ActionType::Click:
            return point.has_value() && point->in_bounds() && no_dir && no_text && no_app;
        case ActionType::Scroll: return direction.has_value() && no_point && no_text && no_app;
        case ActionType::Type: return text.has_value() && no_point && no_dir && no_app;
        case ActionType::OpenApp: return app_name.has_value() && no_point && no_dir && no_text;
        case ActionType::Completed:
        case ActionType::Press:
        case ActionType::Other: return no_point && no_dir && no_text && no_app;
    }
    return false;
}

Action Action::click(Point p) {
    Action a;
    a.type = ActionType::Click;
    a.point = p;
    return a;
}

Action Action::completed() {
    Action a;
    a.type = ActionType::Completed;
    return a;
}

Action Action::scroll(Direction d) {
    Action a;
    a.type = ActionType::Scroll;
    a.direction = d;
    return a;
}

Action Action::type_text(std::string text) {
    Action a;
    a.type = ActionType::Type;
    a.text = std::move(text);
    return a;
}

Action Action::open_app(std::string name) {
    Action a;
    a.type = ActionType::OpenApp;
    a.app_name = std::move(name);
    return a;
}

Action Action::press() {
    Action a;
    a.type = ActionType::Press;
    return a;
}

Action Action::other(std::string raw) {
    Action a;
    a.type = ActionType::Other;
    a.raw = std::move(raw);
    return a;
}

NormalizedPoint normalize_point(double px, double py, ScreenDims dims) {
    if (dims.width <= 0 || dims.height <= 0) {
        throw ConfigError("normalize_point: screen dimensions must be strictly positive");
    }
    NormalizedPoint out;
    if (px < 0 || px > dims.width || py < 0 || py > dims.height) out.clamped = true;
    const auto norm = [](double v, int dim) {
        const int n = static_cast<int>(std::floor(v * kCoordMax / dim));
        return std::clamp(n, 0, kCoordMax);
    };
    out.point = Point{norm(px, dims.width), norm(py, dims.height)};
    return out;
}

// ---------------------------------------------------------------------------
// Canonical dialect
//
//   CLICK <point>[[x,y]]</point>
//   COMPLETED | PRESS
//   SCROLL up|down|left|right
//   TYPE <text>...</text>
//   OPENAPP <app>...</app>
//
// Unknown leading verbs map to Other with the raw string preserved.
// ---------------------------------------------------------------------------

namespace {

struct Cursor {
    std::string_view raw;
    std::size_t pos = 0;

    void skip_spaces() {
        while (pos < raw.size() && is_space(raw[pos])) ++pos;
    }
    bool literal(std::string_view lit) {
        if (raw.substr(pos, lit.size()) != lit) return false;
        pos += lit.size();
        return true;
    }
    bool at_end() {
        skip_spaces();
        return pos == raw.size();
    }
    std::optional<int> integer() {
        skip_spaces();
        int value = 0;
        const char* first = raw.data() + pos;
        const char* last = raw.data() + raw.size();
        auto [ptr, ec] = std::from_chars(first, last, value);
        if (ec != std::errc() || ptr == first) return std::nullopt;
        pos += static_cast<std::size_t>(ptr - first);
        return value;
    }
    ParseError fail(std::string message) const {
        return ParseError{pos, std::move(message), std::string(raw)};
    }
};

std::string_view leading_verb(std::string_view s, std::size_t start) {
    std::size_t end = start;
    while (end < s.size() &&
           (std::isalpha(static_cast<unsigned char>(s[end])) != 0 || s[end] == '_')) {
        ++end;
    }
    return s.substr(start, end - start);
}

// Parses "<open>content<close>" where content is anchored at the final close
// tag, so any payload round-trips.
std::optional<std::string> tagged_payload(Cursor& c, std::string_view open,
                                          std::string_view close) {
    c.skip_spaces();
    if (!c.literal(open)) return std::nullopt;
    std::string_view rest = c.raw.substr(c.pos);
    if (rest.size() < close.size() || rest.substr(rest.size() - close.size()) != close) {
        return std::nullopt;
    }
    std::string content(rest.substr(0, rest.size() - close.size()));
    c.pos = c.raw.size();
    return content;
}

class CanonicalDialect final : public Dialect {
public:
    std::string_view name() const override { return "canonical"; }

    ParseResult parse(std::string_view input) const override {
        std::string_view body = trim(input);
        const std::size_t base = static_cast<std::size_t>(body.data() - input.data());
        if (body.empty()) return ParseError{0, "empty action string", std::string(input)};

        const std::string_view verb = leading_verb(body, 0);
        if (verb.empty()) {
            return ParseError{base, "expected an action verb", std::string(input)};
        }
        Cursor c{body, verb.size()};
        const auto fail = [&](std::string msg, std::size_t at) {
            return ParseError{base + at, std::move(msg), std::string(input)};
        };

        if (verb == "CLICK") {
            c.skip_spaces();
            const std::size_t point_at = c.pos;
            if (!c.literal("<point>[[")) return fail("expected <point>[[x,y]]</point>", c.pos);
            const auto x = c.integer();
            if (!x) return fail("expected integer x coordinate", c.pos);
            c.skip_spaces();
            if (!c.literal(",")) return fail("expected ',' between coordinates", c.pos);
            const auto y = c.integer();
            if (!y) return fail("expected integer y coordinate", c.pos);
            c.skip_spaces();
            if (!c.literal("]]</point>")) return fail("expected ]]</point>", c.pos);
            if (!c.at_end()) return fail("unexpected trailing input", c.pos);
            const Point p{*x, *y};
            if (!p.in_bounds()) return fail("coordinate out of range [0,1000]", point_at);
            Action a = Action::click(p);
            a.raw = std::string(input);
            return a;
        }
        if (verb == "COMPLETED" || verb == "PRESS") {
            if (!c.at_end()) return fail("unexpected trailing input", c.pos);
            Action a = verb == "COMPLETED" ? Action::completed() : Action::press();
            a.raw = std::string(input);
            return a;
        }
        if (verb == "SCROLL") {
            c.skip_spaces();
            const std::size_t dir_at = c.pos;
            const std::string_view word = leading_verb(body, c.pos);
            const auto dir = direction_from_string(word);
            if (!dir) return fail("expected direction up|down|left|right", dir_at);
            c.pos += word.size();
            if (!c.at_end()) return fail("unexpected trailing input", c.pos);
            Action a = Action::scroll(*dir);
            a.raw = std::string(input);
            return a;
        }
        if (verb == "TYPE") {
            auto payload = tagged_payload(c, "<text>", "</text>");
            if (!payload) return fail("expected <text>...</text>", c.pos);
            Action a = Action::type_text(std::move(*payload));
            a.raw = std::string(input);
            return a;
        }
        if (verb == "OPENAPP") {
            auto payload = tagged_payload(c, "<app>", "</app>");
            if (!payload) return fail("expected <app>...</app>", c.pos);
            Action a = Action::open_app(std::move(*payload));
            a.raw = std::string(input);
            return a;
        }
        // Unknown verb, syntactically valid: preserve for downstream scoring.
        return Action::other(std::string(input));
    }

    std::string format(const Action& a) const override {
        std::ostringstream os;
        switch (a.type) {
            case ActionType::Click:
                if (!a.point) throw UnsupportedActionError("CLICK without point");
                os << "CLICK <point>[[" << a.point->x << ',' << a.point->y << "]]</point>";
                return os.str();
            case ActionType::Completed: return "COMPLETED";
            case ActionType::Press: return "PRESS";
            case ActionType::Scroll:
                if (!a.direction) throw UnsupportedActionError("SCROLL without direction");
                os << "SCROLL " << to_string(*a.direction);
                return os.str();
            case ActionType::Type:
                if (!a.text) throw UnsupportedActionError("TYPE without text");
                os << "TYPE <text>" << *a.text << "</text>";
                return os.str();
            case ActionType::OpenApp:
                if (!a.app_name) throw UnsupportedActionError("OPENAPP without app name");
                os << "OPENAPP <app>" << *a.app_name << "</app>";
                return os.str();
            case ActionType::Other: return a.raw;
        }
        throw UnsupportedActionError("unknown action type");
    }
};

// ---------------------------------------------------------------------------
// "func" dialect — function-call style, illustrative of agents that emit
// python-like calls:  click(point='(500,300)')  scroll(direction='left')
// ---------------------------------------------------------------------------

class FuncDialect final : public Dialect {
public:
    std::string_view name() const override { return "func"; }

    ParseResult parse(std::string_view input) const override {
        std::string_view body = trim(input);
        const std::size_t base = static_cast<std::size_t>(body.data() - input.data());
        if (body.empty()) return ParseError{0, "empty action string", std::string(input)};
        const auto fail = [&](std::string msg, std::size_t at) {
            return ParseError{base + at, std::move(msg), std::string(input)};
        };

        const std::string_view ident = leading_verb(body, 0);
        if (ident.empty()) return fail("expected an action identifier", 0);
        const bool known = ident == "click" || ident == "completed" || ident == "scroll" ||
                           ident == "type" || ident == "open_app" || ident == "press";
        if (!known) return Action::other(std::string(input));
        Cursor c{body, ident.size()};
        c.skip_spaces();
        if (!c.literal("(")) return fail("expected '('", c.pos);

        // key='value' argument, optional.
        c.skip_spaces();
        std::string key;
        std::string value;
        bool has_arg = false;
        if (!c.literal(")")) {
            const std::string_view k = leading_verb(body, c.pos);
            if (k.empty()) return fail("expected argument name", c.pos);
            c.pos += k.size();
            key = std::string(k);
            c.skip_spaces();
            if (!c.literal("=")) return fail("expected '='", c.pos);
            c.skip_spaces();
            if (!c.literal("'")) return fail("expected quoted value", c.pos);
            const std::size_t close = body.find('\'', c.pos);
            if (close == std::string_view::npos) return fail("unterminated quoted value", c.pos);
            value = std::string(body.substr(c.pos, close - c.pos));
            c.pos = close + 1;
            c.skip_spaces();
            if (!c.literal(")")) return fail("expected ')'", c.pos);
            has_arg = true;
        }
        if (!c.at_end()) return fail("unexpected trailing input", c.pos);

        if (ident == "click") {
            if (!has_arg || key != "point") return fail("click requires point='(x,y)'", 0);
            int x = 0;
            int y = 0;
            Cursor pc{value, 0};
            if (!pc.literal("(")) return fail("malformed point value", 0);
            auto px = pc.integer();
            pc.skip_spaces();
            if (!px || !pc.literal(",")) return fail("malformed point value", 0);
            auto py = pc.integer();
            pc.skip_spaces();
            if (!py || !pc.literal(")") || !pc.at_end()) return fail("malformed point value", 0);
            x = *px;
            y = *py;
            if (!Point{x, y}.in_bounds()) return fail("coordinate out of range [0,1000]", 0);
            Action a = Action::click(Point{x, y});
            a.raw = std::string(input);
            return a;
        }
        if (ident == "completed" || ident == "press") {
            if (has_arg) return fail("unexpected argument", 0);
            Action a = ident == "completed" ? Action::completed() : Action::press();
            a.raw = std::string(input);
            return a;
        }
        if (ident == "scroll") {
            if (!has_arg || key != "direction") return fail("scroll requires direction='...'", 0);
            const auto dir = direction_from_string(value);
            if (!dir) return fail("unknown scroll direction", 0);
            Action a = Action::scroll(*dir);
            a.raw = std::string(input);
            return a;
        }
        if (ident == "type") {
            if (!has_arg || key != "text") return fail("type requires text='...'", 0);
            Action a = Action::type_text(value);
            a.raw = std::string(input);
            return a;
        }
        if (ident == "open_app") {
            if (!has_arg || key != "name") return fail("open_app requires name='...'", 0);
            Action a = Action::open_app(value);
            a.raw = std::string(input);
            return a;
        }
        return Action::other(std::string(input));
    }

    std::string format(const Action& a) const override {
        const auto quote = [](const std::string& s) {
            if (s.find('\'') != std::string::npos) {
                throw UnsupportedActionError("func dialect cannot express single quotes");
            }
            return "'" + s + "'";
        };
        std::ostringstream os;
        switch (a.type) {
            case ActionType::Click:
                if (!a.point) throw UnsupportedActionError("CLICK without point");
                os << "click(point='(" << a.point->x << ',' << a.point->y << ")')";
                return os.str();
            case ActionType::Completed: return "completed()";
            case ActionType::Press: return "press()";
            case ActionType::Scroll:
                if (!a.direction) throw UnsupportedActionError("SCROLL without direction");
                os << "scroll(direction=" << quote(std::string(to_string(*a.direction))) << ")";
                return os.str();
            case ActionType::Type:
                if (!a.text) throw UnsupportedActionError("TYPE without text");
                os << "type(text=" << quote(*a.text) << ")";
                return os.str();
            case ActionType::OpenApp:
                if (!a.app_name) throw UnsupportedActionError("OPENAPP without app name");
                os << "open_app(name=" << quote(*a.app_name) << ")";
                return os.str();
            case ActionType::Other: return a.raw;
        }
        throw UnsupportedActionError("unknown action type");
    }
};

// ---------------------------------------------------------------------------
// "json" dialect — {"action":"click","point":[500,300]}
// ---------------------------------------------------------------------------

class JsonDialect final : public Dialect {
public:
    std::string_view name() const override { return "json"; }

    ParseResult parse(std::string_view input) const override {
        json j;
        try {
            j = json::parse(input);
        } catch (const json::parse_error& e) {
            return ParseError{e.byte > 0 ? e.byte - 1 : 0, "invalid JSON", std::string(input)};
        }
        if (!j.is_object() || !j.contains("action") || !j["action"].is_string()) {
            return ParseError{0, "expected object with \"action\" field", std::string(input)};
        }
        const std::string verb = to_lower(j["action"].get<std::string>());
        const auto fail = [&](std::string msg) {
            return ParseError{0, std::move(msg), std::string(input)};
        };

        if (verb == "click") {
            if (!j.contains("point") || !j["point"].is_array() || j["point"].size() != 2 ||
                !j["point"][0].is_number_integer() || !j["point"][1].is_number_integer()) {
                return fail("click requires \"point\": [x,y]");
            }
            const Point p{j["point"][0].get<int>(), j["point"][1].get<int>()};
            if (!p.in_bounds()) return fail("coordinate out of range [0,1000]");
            Action a = Action::click(p);
            a.raw = std::string(input);
            return a;
        }
        if (verb == "completed" || verb == "press") {
            Action a = verb == "completed" ? Action::completed() : Action::press();
            a.raw = std::string(input);
            return a;
        }
        if (verb == "scroll") {
            if (!j.contains("direction") || !j["direction"].is_string()) {
                return fail("scroll requires \"direction\"");
            }
            const auto dir = direction_from_string(j["direction"].get<std::string>());
            if (!dir) return fail("unknown scroll direction");
            Action a = Action::scroll(*dir);
            a.raw = std::string(input);
            return a;
        }
        if (verb == "type") {
            if (!j.contains("text") || !j["text"].is_string()) return fail("type requires \"text\"");
            Action a = Action::type_text(j["text"].get<std::string>());
            a.raw = std::string(input);
            return a;
        }
        if (verb == "open_app" || verb == "openapp") {
            if (!j.contains("name") || !j["name"].is_string()) {
                return fail("open_app requires \"name\"");
            }
            Action a = Action::open_app(j["name"].get<std::string>());
            a.raw = std::string(input);
            return a;
        }
        return Action::other(std::string(input));
    }

    std::string format(const Action& a) const override {
        json j;
        switch (a.type) {
            case ActionType::Click:
                if (!a.point) throw UnsupportedActionError("CLICK without point");
                j = {{"action", "click"}, {"point", {a.point->x, a.point->y}}};
                break;
            case ActionType::Completed: j = {{"action", "completed"}}; break;
            case ActionType::Press: j = {{"action", "press"}}; break;
            case ActionType::Scroll:
                if (!a.direction) throw UnsupportedActionError("SCROLL without direction");
                j = {{"action", "scroll"}, {"direction", std::string(to_string(*a.direction))}};
                break;
            case ActionType::Type:
                if (!a.text) throw UnsupportedActionError("TYPE without text");
                j = {{"action", "type"}, {"text", *a.text}};
                break;
            case ActionType::OpenApp:
                if (!a.app_name) throw UnsupportedActionError("OPENAPP without app name");
                j = {{"action", "open_app"}, {"name", *a.app_name}};
                break;
            case ActionType::Other:
                throw UnsupportedActionError("json dialect cannot express OTHER actions");
        }
        return j.dump();
    }
};

std::vector<const Dialect*>& registry() {
    static const CanonicalDialect canonical;
    static const FuncDialect func;
    static const JsonDialect json_dialect;
    static std::vector<const Dialect*> dialects{&canonical, &func, &json_dialect};
    return dialects;
}

std::mutex& registry_mutex() {
    static std::mutex m;
    return m;
}

}  // namespace

const Dialect& dialect(std::string_view name) {
    std::lock_guard lock(registry_mutex());
    for (const Dialect* d : registry()) {
        if (d->name() == name) return *d;
    }
    std::string known;
    for (const Dialect* d : registry()) {
        if (!known.empty()) known += ", ";
        known += d->name();
    }
    throw UnknownDialectError("unknown dialect '" + std::string(name) + "' (registered: " +
                              known + ")");
}

std::vector<std::string> dialect_names() {
    std::lock_guard lock(registry_mutex());
    std::vector<std::string> names;
    names.reserve(registry().size());
    for (const Dialect* d : registry()) names.emplace_back(d->name());
    return names;
}

void register_dialect(const Dialect* d) {
    std::lock_guard lock(registry_mutex());
    registry().push_back(d);
}

ParseResult parse_action(std::string_view raw, const Dialect& d) { return d.parse(raw); }

std::string format_action(const Action& a, const Dialect& d) { return d.format(a); }

}  // namespace togglebench
