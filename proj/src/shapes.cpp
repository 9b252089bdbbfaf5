#include "findtrack/shapes.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>
#include <vector>

namespace findtrack {

namespace {

// Leg length of the corner cut of Notched, as a fraction of the side. Chosen so the
// fill ratio matches a disk (1 - 0.655^2 / 2 ~= pi / 4).
constexpr double kNotchFraction = 0.655;

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

}  // namespace

Rgb canonical_rgb(ColorName c) {
    switch (c) {
        case ColorName::Red: return {255, 0, 0};
        case ColorName::Green: return {0, 255, 0};
        case ColorName::Blue: return {0, 0, 255};
        case ColorName::Yellow: return {255, 255, 0};
        case ColorName::White: return {255, 255, 255};
    }
    return {};
}

std::string_view color_name(ColorName c) {
    switch (c) {
        case ColorName::Red: return "red";
        case ColorName::Green: return "green";
        case ColorName::Blue: return "blue";
        case ColorName::Yellow: return "yellow";
        case ColorName::White: return "white";
    }
    return "";
}

std::string_view shape_name(Shape s) {
    switch (s) {
        case Shape::Circle: return "circle";
        case Shape::Square: return "square";
        case Shape::Triangle: return "triangle";
        case Shape::Notched: return "notched";
    }
    return "";
}

std::optional<ColorName> parse_color(std::string_view word) {
    const auto w = lower(word);
    for (auto c : kAllColors) {
        if (w == color_name(c)) return c;
    }
    return std::nullopt;
}

std::optional<Shape> parse_shape(std::string_view word) {
    const auto w = lower(word);
    for (auto s : {Shape::Circle, Shape::Square, Shape::Triangle, Shape::Notched}) {
        if (w == shape_name(s)) return s;
    }
    return std::nullopt;
}

bool shape_contains(Shape shape, int size, int x, int y) {
    if (x < 0 || y < 0 || x >= size || y >= size) return false;
    const double cx = x + 0.5;
    const double cy = y + 0.5;
    const double half = size / 2.0;
    switch (shape) {
        case Shape::Square:
            return true;
        case Shape::Circle:
            return (cx - half) * (cx - half) + (cy - half) * (cy - half) <= half * half;
        case Shape::Triangle:
            // apex at the top centre, base along the bottom row
            return std::abs(cx - half) <= (y + 1) / 2.0;
        case Shape::Notched:
            return cx + cy >= kNotchFraction * size;
    }
    return false;
}

BinaryMask rasterize_shape(Shape shape, int size, int left, int top, int width, int height) {
    BinaryMask m(width, height);
    const int x0 = std::max(left, 0);
    const int y0 = std::max(top, 0);
    const int x1 = std::min(left + size, width);
    const int y1 = std::min(top + size, height);
    for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
            if (shape_contains(shape, size, x - left, y - top)) m.set(x, y, true);
        }
    }
    return m;
}

std::int64_t shape_area(Shape shape, int size) {
    std::int64_t n = 0;
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) n += shape_contains(shape, size, x, y) ? 1 : 0;
    }
    return n;
}

std::string Expression::text() const {
    return "the " + std::string(color_name(color)) + " " + (shape ? std::string(shape_name(*shape)) : "any");
}

Expression parse_expression(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::vector<std::string> words;
    for (std::string w; in >> w;) words.push_back(lower(w));
    const auto fail = [&] {
        return Error(ErrorCode::ExpressionParseError,
                     "expected 'the <color> <shape>', got '" + std::string(text) + "'");
    };
    if (words.size() != 3 || words[0] != "the") throw fail();
    const auto color = parse_color(words[1]);
    if (!color) throw fail();
    Expression e;
    e.color = *color;
    if (words[2] == "any") return e;
    const auto shape = parse_shape(words[2]);
    if (!shape || *shape == Shape::Notched) throw fail();
    e.shape = shape;
    return e;
}

}  // namespace findtrack
