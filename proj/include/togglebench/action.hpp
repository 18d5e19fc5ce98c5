#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "togglebench/util.hpp"

namespace togglebench {

// All screen coordinates are normalized integers in [0, 1000] on both axes.
inline constexpr int kCoordMax = 1000;

struct Point {
    int x = 0;
    int y = 0;

    bool operator==(const Point&) const = default;
    bool in_bounds() const { return x >= 0 && x <= kCoordMax && y >= 0 && y <= kCoordMax; }
};

struct BBox {
    int x_min = 0;
    int y_min = 0;
    int x_max = 0;
    int y_max = 0;

    bool operator==(const BBox&) const = default;
    // x_min <= x_max, y_min <= y_max, all coordinates in [0, 1000].
    bool valid() const;
    // Containment is inclusive of edges.
    bool contains(Point p) const;
    double area() const;
    Point center() const;
    std::string key() const;  // "x_min-y_min-x_max-y_max"
};

// Intersection-over-union in continuous box geometry. Two identical
// degenerate boxes have IoU 1; disjoint degenerate boxes 0.
double iou(const BBox& a, const BBox& b);

enum class ActionType { Click, Completed, Scroll, Type, OpenApp, Press, Other };
enum class Direction { Up, Down, Left, Right };

std::string_view to_string(ActionType t);
std::string_view to_string(Direction d);
std::optional<ActionType> action_type_from_string(std::string_view s);
std::optional<Direction> direction_from_string(std::string_view s);

// Canonical agent action. Exactly the parameter slots required by `type` are
// populated; `raw` preserves the original agent output and does not take part
// in equality except for Other, where it is the only payload.
struct Action {
    ActionType type = ActionType::Other;
    std::optional<Point> point;           // Click
    std::optional<Direction> direction;   // Scroll
    std::optional<std::string> text;      // Type
    std::optional<std::string> app_name;  // OpenApp
    std::string raw;

    bool operator==(const Action& other) const;
    bool well_formed() const;

    static Action click(Point p);
    static Action completed();
    static Action scroll(Direction d);
    static Action type_text(std::string text);
    static Action open_app(std::string name);
    static Action press();
    static Action other(std::string raw);
};

struct ScreenDims {
    int width = 0;
    int height = 0;
};

struct NormalizedPoint {
    Point point;
    bool clamped = false;  // set when the pixel fell outside the screen bounds
};

// floor(px * 1000 / dim), clamped to [0, 1000]. Pixels outside [0, dim] are
// clamped and flagged. Throws ConfigError on non-positive dimensions.
NormalizedPoint normalize_point(double px, double py, ScreenDims dims);

struct ParseError {
    std::size_t offset = 0;  // byte offset where the expectation failed
    std::string message;
    std::string raw;
};

class ParseResult {
public:
    ParseResult(Action action) : value_(std::move(action)) {}
    ParseResult(ParseError error) : value_(std::move(error)) {}

    bool ok() const { return std::holds_alternative<Action>(value_); }
    const Action& action() const { return std::get<Action>(value_); }
    const ParseError& error() const { return std::get<ParseError>(value_); }

private:
    std::variant<Action, ParseError> value_;
};

// A parse/format rule set for one agent-output format. Parsers must accept
// arbitrary byte strings and report failures as ParseError, never by
// throwing; formatters throw UnsupportedActionError for actions the grammar
// cannot express.
class Dialect {
public:
    virtual ~Dialect() = default;
    virtual std::string_view name() const = 0;
    virtual ParseResult parse(std::string_view raw) const = 0;
    virtual std::string format(const Action& action) const = 0;
};

// Registered dialects: "canonical", "func", "json". Lookup throws
// UnknownDialectError listing the registered names.
const Dialect& dialect(std::string_view name);
std::vector<std::string> dialect_names();
// Registration is intended for process startup, before concurrent use.
void register_dialect(const Dialect* dialect);

ParseResult parse_action(std::string_view raw, const Dialect& dialect);
std::string format_action(const Action& action, const Dialect& dialect);

}  // namespace togglebench
