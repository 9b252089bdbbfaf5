#include "findtrack/backends.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

namespace findtrack {

namespace {

struct BoundingBox {
    int x0 = 0, y0 = 0, x1 = -1, y1 = -1;  // inclusive

    int width() const { return x1 - x0 + 1; }
    int height() const { return y1 - y0 + 1; }
};

BoundingBox bounding_box(const BinaryMask& mask) {
    BoundingBox box{mask.width(), mask.height(), -1, -1};
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            if (!mask(x, y)) continue;
            box.x0 = std::min(box.x0, x);
            box.y0 = std::min(box.y0, y);
            box.x1 = std::max(box.x1, x);
            box.y1 = std::max(box.y1, y);
        }
    }
    return box;
}

std::int64_t exposed_edges(const BinaryMask& mask) {
    std::int64_t edges = 0;
    const int w = mask.width();
    const int h = mask.height();
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!mask(x, y)) continue;
            edges += (x == 0 || !mask(x - 1, y));
            edges += (x == w - 1 || !mask(x + 1, y));
            edges += (y == 0 || !mask(x, y - 1));
            edges += (y == h - 1 || !mask(x, y + 1));
        }
    }
    return edges;
}

}  // namespace

BinaryMask largest_component(const BinaryMask& mask) {
    const int w = mask.width();
    const int h = mask.height();
    std::vector<int> label(static_cast<std::size_t>(w) * h, -1);
    std::vector<int> stack;
    int best_label = -1;
    std::int64_t best_size = 0;
    int next_label = 0;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const int start = y * w + x;
            if (!mask(x, y) || label[start] >= 0) continue;
            const int id = next_label++;
            std::int64_t size = 0;
            label[start] = id;
            stack.push_back(start);
            while (!stack.empty()) {
                const int p = stack.back();
                stack.pop_back();
                ++size;
                const int px = p % w;
                const int py = p / w;
                const auto visit = [&](int nx, int ny) {
                    if (nx < 0 || ny < 0 || nx >= w || ny >= h) return;
                    const int q = ny * w + nx;
                    if (mask(nx, ny) && label[q] < 0) {
                        label[q] = id;
                        stack.push_back(q);
                    }
                };
                visit(px - 1, py);
                visit(px + 1, py);
                visit(px, py - 1);
                visit(px, py + 1);
            }
            // strictly larger: earlier components win ties
            if (size > best_size) {
                best_size = size;
                best_label = id;
            }
        }
    }
    BinaryMask out(w, h);
    if (best_label < 0) return out;
    bool* bits = out.bits().data();
    for (std::size_t i = 0; i < label.size(); ++i) bits[i] = label[i] == best_label;
    return out;
}

double shape_fit_iou(const BinaryMask& mask, Shape shape) {
    const auto box = bounding_box(mask);
    if (box.x1 < 0) return 0.0;
    const int side = std::max(box.width(), box.height());
    const auto area = mask.area();
    const auto ideal_area = shape_area(shape, side);
    double best = 0.0;
    for (int left : {box.x0, box.x1 - side + 1}) {
        for (int top : {box.y0, box.y1 - side + 1}) {
            std::int64_t inter = 0;
            for (int y = box.y0; y <= box.y1; ++y) {
                for (int x = box.x0; x <= box.x1; ++x) {
                    inter += mask(x, y) && shape_contains(shape, side, x - left, y - top);
                }
            }
            const auto uni = area + ideal_area - inter;
            best = std::max(best, static_cast<double>(inter) / static_cast<double>(uni));
        }
    }
    return best;
}

SegmentationResult ColorSegmenter::segment(const Frame& frame, std::string_view text) {
    const auto expr = parse_expression(text);
    const auto target = canonical_rgb(expr.color);
    BinaryMask matched(frame.width(), frame.height());
    constexpr int limit = kColorDistance * kColorDistance;
    for (int y = 0; y < frame.height(); ++y) {
        for (int x = 0; x < frame.width(); ++x) {
            const auto c = frame.at(x, y);
            const int dr = c.r - target.r;
            const int dg = c.g - target.g;
            const int db = c.b - target.b;
            matched.set(x, y, dr * dr + dg * dg + db * db <= limit);
        }
    }
    SegmentationResult result{largest_component(matched), 0.0};
    if (result.mask.empty()) return result;
    if (expr.shape) {
        result.confidence = shape_fit_iou(result.mask, *expr.shape);
    } else {
        for (auto s : kNamedShapes) result.confidence = std::max(result.confidence, shape_fit_iou(result.mask, s));
    }
    return result;
}

Embedding histogram_embed_masked(const Frame& frame, const BinaryMask& mask) {
    require_matches(mask, frame, "histogram_embed_masked");
    const auto area = mask.area();
    if (area == 0) throw Error(ErrorCode::EmptyMask, "cannot embed an empty mask");
    constexpr int bins = HistogramAligner::kBins;
    Embedding e = Embedding::Zero(HistogramAligner::kDim);
    for (int y = 0; y < frame.height(); ++y) {
        for (int x = 0; x < frame.width(); ++x) {
            if (!mask(x, y)) continue;
            const auto c = frame.at(x, y);
            const int bin = (c.r * bins / 256) * bins * bins + (c.g * bins / 256) * bins + c.b * bins / 256;
            e[bin] += 1.0;
        }
    }
    const double a = static_cast<double>(area);
    e.head(bins * bins * bins) /= a;

    const auto box = bounding_box(mask);
    const double bw = box.width();
    const double bh = box.height();
    const double perimeter = static_cast<double>(exposed_edges(mask));
    e[125] = a / (bw * bh);
    e[126] = std::clamp(bw / bh, 0.0, 4.0) / 4.0;
    e[127] = perimeter * perimeter / (4.0 * std::numbers::pi * a);
    return e;
}

HistogramAligner::HistogramAligner() {
    constexpr int n = kPrototypeSize;
    for (auto color : kAllColors) {
        Frame canvas(1, n, n);
        canvas.fill(canonical_rgb(color));
        Embedding any = Embedding::Zero(kDim);
        for (auto shape : kNamedShapes) {
            auto e = histogram_embed_masked(canvas, rasterize_shape(shape, n, 0, 0, n, n));
            any += e;
            prototypes_.emplace(std::make_pair(color, static_cast<int>(shape)), std::move(e));
        }
        prototypes_.emplace(std::make_pair(color, -1), any / static_cast<double>(kNamedShapes.size()));
    }
}

Embedding HistogramAligner::embed_masked_image(const Frame& frame, const BinaryMask& mask) {
    return histogram_embed_masked(frame, mask);
}

Embedding HistogramAligner::embed_text(std::string_view text) {
    const auto expr = parse_expression(text);
    return prototypes_.at({expr.color, expr.shape ? static_cast<int>(*expr.shape) : -1});
}

}  // namespace findtrack
