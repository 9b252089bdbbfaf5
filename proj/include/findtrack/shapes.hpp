#pragma once

#include "findtrack/core.hpp"

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace findtrack {

enum class ColorName { Red, Green, Blue, Yellow, White };
inline constexpr std::array<ColorName, 5> kAllColors{ColorName::Red, ColorName::Green, ColorName::Blue,
                                                     ColorName::Yellow, ColorName::White};

// Notched is a square with one corner cut away along a staircase diagonal. It has
// no name in the expression grammar and only appears as a scene distractor.
enum class Shape { Circle, Square, Triangle, Notched };
inline constexpr std::array<Shape, 3> kNamedShapes{Shape::Circle, Shape::Square, Shape::Triangle};

Rgb canonical_rgb(ColorName c);
std::string_view color_name(ColorName c);
std::string_view shape_name(Shape s);
std::optional<ColorName> parse_color(std::string_view word);
std::optional<Shape> parse_shape(std::string_view word);

// Membership of local pixel (x, y) in a shape inscribed in a size x size box, sampled
// at pixel centres. Every shape touches all four sides of its box.
bool shape_contains(Shape shape, int size, int x, int y);

// Rasterizes a shape with its box's top-left at (left, top); pixels outside the
// width x height canvas are dropped.
BinaryMask rasterize_shape(Shape shape, int size, int left, int top, int width, int height);

// Pixel count of the full, unclipped shape.
std::int64_t shape_area(Shape shape, int size);

// "the <color> <shape>", where <shape> may be "any".
struct Expression {
    ColorName color = ColorName::Red;
    std::optional<Shape> shape;  // nullopt means "any"

    std::string text() const;
};

Expression parse_expression(std::string_view text);

}  // namespace findtrack
