#pragma once

#include "findtrack/core.hpp"
#include "findtrack/shapes.hpp"

#include <Eigen/Core>

#include <chrono>
#include <map>
#include <memory>
#include <string>
#include <string_view>

namespace findtrack {

using Embedding = Eigen::VectorXd;

struct SegmentationResult {
    BinaryMask mask;
    double confidence = 0.0;  // predicted IoU with the (unknown) ground truth
};

// Per-frame referring segmenter. Implementations must be deterministic and keep no
// state between calls on different frames.
class SegmenterPort {
public:
    virtual ~SegmenterPort() = default;
    virtual SegmentationResult segment(const Frame& frame, std::string_view text) = 0;
    // Whether segment() may be called from several threads at once.
    virtual bool thread_safe() const { return false; }
};

// Vision-text aligner. Embeddings need not be normalized.
class AlignerPort {
public:
    virtual ~AlignerPort() = default;
    virtual Embedding embed_masked_image(const Frame& frame, const BinaryMask& mask) = 0;
    virtual Embedding embed_text(std::string_view text) = 0;
    virtual int embed_dim() const = 0;
    virtual bool thread_safe() const { return false; }
};

// Largest 4-connected component of a mask; ties go to the component whose first
// pixel comes earliest in row-major scan order. Empty input gives an empty mask.
BinaryMask largest_component(const BinaryMask& mask);

// IoU between a mask and the ideal named shape fitted to the mask's bounding box
// (side = longer bbox edge, box slid to each feasible corner, best placement kept).
double shape_fit_iou(const BinaryMask& mask, Shape shape);

// Built-in segmenter for "the <color> <shape>" expressions over synthetic scenes.
//
// Pixels within Euclidean RGB distance 60 of the named colour are matched and the
// largest 4-connected component is kept. Confidence is the IoU between that
// component and the named ideal shape fitted to it (best over the three shapes for
// "any"), so it is 1 for a fully visible object and falls with occlusion.
class ColorSegmenter final : public SegmenterPort {
public:
    static constexpr int kColorDistance = 60;

    SegmentationResult segment(const Frame& frame, std::string_view text) override;
    bool thread_safe() const override { return true; }
};

// Built-in aligner producing 128-dim descriptors:
//   [0, 125)  5x5x5 RGB histogram of the masked pixels, summing to 1
//   125       fill ratio of the mask's bounding box
//   126       bbox aspect ratio (width / height) clamped to [0, 4], divided by 4
//   127       perimeter^2 / (4 pi area), perimeter counted as exposed pixel edges
// Text embeddings are the same descriptor of a solid prototype shape filling a
// 64x64 canvas in the named colour; "any" averages the three shapes.
class HistogramAligner final : public AlignerPort {
public:
    static constexpr int kBins = 5;
    static constexpr int kDim = kBins * kBins * kBins + 3;
    static constexpr int kPrototypeSize = 64;

    HistogramAligner();

    Embedding embed_masked_image(const Frame& frame, const BinaryMask& mask) override;
    Embedding embed_text(std::string_view text) override;
    int embed_dim() const override { return kDim; }
    bool thread_safe() const override { return true; }

private:
    std::map<std::pair<ColorName, int>, Embedding> prototypes_;  // shape -1 = any
};

Embedding histogram_embed_masked(const Frame& frame, const BinaryMask& mask);

struct Backend {
    std::shared_ptr<SegmenterPort> segmenter;
    std::shared_ptr<AlignerPort> aligner;
};

// "builtin:color", "stdio:<command>" or "tcp:<host>:<port>".
Backend make_backend(std::string_view selector,
                     std::chrono::milliseconds timeout = std::chrono::seconds(30));

}  // namespace findtrack
