#include "findtrack/metrics.hpp"

#include <cmath>

namespace findtrack {

namespace {

// Marks every pixel within distance r of a set pixel.
MaskArray dilate_disk(const MaskArray& src, int r) {
    std::vector<std::pair<int, int>> offsets;
    for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
            if (dx * dx + dy * dy <= r * r) offsets.emplace_back(dx, dy);
        }
    }
    const int h = static_cast<int>(src.rows());
    const int w = static_cast<int>(src.cols());
    MaskArray out = MaskArray::Constant(h, w, false);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!src(y, x)) continue;
            for (const auto& [dx, dy] : offsets) {
                const int nx = x + dx;
                const int ny = y + dy;
                if (nx >= 0 && ny >= 0 && nx < w && ny < h) out(ny, nx) = true;
            }
        }
    }
    return out;
}

}  // namespace

double region_j(const BinaryMask& pred, const BinaryMask& gt) {
    require_same_size(pred, gt, "region_j");
    const auto uni = (pred.bits() || gt.bits()).count();
    if (uni == 0) return 1.0;
    const auto inter = (pred.bits() && gt.bits()).count();
    return static_cast<double>(inter) / static_cast<double>(uni);
}

MaskArray boundary(const BinaryMask& mask) {
    const int h = mask.height();
    const int w = mask.width();
    const auto& b = mask.bits();
    MaskArray out = MaskArray::Constant(h, w, false);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!b(y, x)) continue;
            out(y, x) = x == 0 || y == 0 || x == w - 1 || y == h - 1 || !b(y, x - 1) || !b(y, x + 1) ||
                        !b(y - 1, x) || !b(y + 1, x);
        }
    }
    return out;
}

int boundary_tolerance(int width, int height) {
    const double diag = std::hypot(static_cast<double>(width), static_cast<double>(height));
    return std::max(1, static_cast<int>(std::lround(0.008 * diag)));
}

double contour_f(const BinaryMask& pred, const BinaryMask& gt) {
    require_same_size(pred, gt, "contour_f");
    const bool pred_empty = pred.empty();
    const bool gt_empty = gt.empty();
    if (pred_empty && gt_empty) return 1.0;
    if (pred_empty || gt_empty) return 0.0;
    const int r = boundary_tolerance(pred.width(), pred.height());
    const MaskArray pb = boundary(pred);
    const MaskArray gb = boundary(gt);
    const auto pred_hits = (pb && dilate_disk(gb, r)).count();
    const auto gt_hits = (gb && dilate_disk(pb, r)).count();
    const double precision = static_cast<double>(pred_hits) / static_cast<double>(pb.count());
    const double recall = static_cast<double>(gt_hits) / static_cast<double>(gb.count());
    if (precision + recall == 0.0) return 0.0;
    return 2.0 * precision * recall / (precision + recall);
}

SequenceScore evaluate_sequence(const MaskSequence& pred, const MaskSequence& gt) {
    if (pred.size() != gt.size()) {
        throw Error(ErrorCode::LengthMismatch, "prediction has " + std::to_string(pred.size()) +
                                                   " masks, ground truth has " + std::to_string(gt.size()));
    }
    if (gt.empty()) throw Error(ErrorCode::LengthMismatch, "cannot evaluate an empty sequence");
    SequenceScore s;
    for (std::size_t i = 0; i < gt.size(); ++i) {
        s.j += region_j(pred[i], gt[i]);
        s.f += contour_f(pred[i], gt[i]);
    }
    s.j /= static_cast<double>(gt.size());
    s.f /= static_cast<double>(gt.size());
    s.jf = (s.j + s.f) / 2.0;
    return s;
}

void EvalReport::add(std::string name, SequenceScore score) {
    sequences.push_back({std::move(name), score});
    SequenceScore sum;
    for (const auto& e : sequences) {
        sum.j += e.score.j;
        sum.f += e.score.f;
    }
    const auto n = static_cast<double>(sequences.size());
    mean.j = sum.j / n;
    mean.f = sum.f / n;
    mean.jf = (mean.j + mean.f) / 2.0;
}

nlohmann::ordered_json report_json(const EvalReport& report) {
    nlohmann::ordered_json doc;
    doc["sequences"] = nlohmann::ordered_json::array();
    for (const auto& e : report.sequences) {
        nlohmann::ordered_json s;
        s["name"] = e.name;
        s["J"] = e.score.j;
        s["F"] = e.score.f;
        s["JF"] = e.score.jf;
        doc["sequences"].push_back(std::move(s));
    }
    nlohmann::ordered_json m;
    m["J"] = report.mean.j;
    m["F"] = report.mean.f;
    m["JF"] = report.mean.jf;
    doc["mean"] = std::move(m);
    return doc;
}

}  // namespace findtrack
