#include "findtrack/core.hpp"

#include <algorithm>

namespace findtrack {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::LengthMismatch: return "LengthMismatch";
        case ErrorCode::CountMismatch: return "CountMismatch";
        case ErrorCode::MissingFrame: return "MissingFrame";
        case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
        case ErrorCode::IoError: return "IoError";
        case ErrorCode::ExpressionParseError: return "ExpressionParseError";
        case ErrorCode::EmptyMask: return "EmptyMask";
        case ErrorCode::ZeroNormEmbedding: return "ZeroNormEmbedding";
        case ErrorCode::AllCandidatesEmpty: return "AllCandidatesEmpty";
        case ErrorCode::KeyFrameOutOfRange: return "KeyFrameOutOfRange";
        case ErrorCode::HandshakeFailure: return "HandshakeFailure";
        case ErrorCode::ProtocolError: return "ProtocolError";
        case ErrorCode::BackendTimeout: return "BackendTimeout";
        case ErrorCode::BackendError: return "BackendError";
        case ErrorCode::SpecError: return "SpecError";
        case ErrorCode::UnknownScenario: return "UnknownScenario";
    }
    return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

Frame::Frame(int index, int width, int height)
    : Frame(index, width, height,
            std::vector<std::uint8_t>(static_cast<std::size_t>(std::max(width, 0)) *
                                      static_cast<std::size_t>(std::max(height, 0)) * 3)) {}

Frame::Frame(int index, int width, int height, std::vector<std::uint8_t> pixels)
    : index_(index), width_(width), height_(height), pixels_(std::move(pixels)) {
    if (index < 1) throw Error(ErrorCode::InvalidArgument, "frame index must be >= 1");
    if (width < 1 || height < 1) throw Error(ErrorCode::InvalidArgument, "frame dimensions must be positive");
    if (pixels_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3) {
        throw Error(ErrorCode::DimensionMismatch, "pixel buffer length does not match width*height*3");
    }
}

Rgb Frame::at(int x, int y) const {
    const auto i = (static_cast<std::size_t>(y) * width_ + x) * 3;
    return {pixels_[i], pixels_[i + 1], pixels_[i + 2]};
}

void Frame::set(int x, int y, Rgb c) {
    const auto i = (static_cast<std::size_t>(y) * width_ + x) * 3;
    pixels_[i] = c.r;
    pixels_[i + 1] = c.g;
    pixels_[i + 2] = c.b;
}

void Frame::fill(Rgb c) {
    for (std::size_t i = 0; i < pixels_.size(); i += 3) {
        pixels_[i] = c.r;
        pixels_[i + 1] = c.g;
        pixels_[i + 2] = c.b;
    }
}

Eigen::ArrayXXd Frame::channel(int c) const {
    using Interleaved = Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Eigen::Map<const Interleaved, 0, Eigen::Stride<Eigen::Dynamic, 3>> plane(
        pixels_.data() + c, height_, width_, Eigen::Stride<Eigen::Dynamic, 3>(3 * width_, 3));
    return plane.cast<double>() / 255.0;
}

Eigen::ArrayXXd Frame::luminance() const {
    return 0.299 * channel(0) + 0.587 * channel(1) + 0.114 * channel(2);
}

Frame Frame::with_index(int index) const {
    return Frame(index, width_, height_, pixels_);
}

BinaryMask::BinaryMask(int width, int height) {
    if (width < 1 || height < 1) throw Error(ErrorCode::InvalidArgument, "mask dimensions must be positive");
    bits_ = MaskArray::Constant(height, width, false);
}

BinaryMask::BinaryMask(MaskArray bits) : bits_(std::move(bits)) {
    if (bits_.rows() < 1 || bits_.cols() < 1) {
        throw Error(ErrorCode::InvalidArgument, "mask dimensions must be positive");
    }
}

BinaryMask BinaryMask::full(int width, int height) {
    BinaryMask m(width, height);
    m.bits_.setConstant(true);
    return m;
}

VideoSequence::VideoSequence(std::vector<Frame> frames, std::string expression)
    : frames_(std::move(frames)), expression_(std::move(expression)) {
    if (frames_.empty()) throw Error(ErrorCode::InvalidArgument, "video must contain at least one frame");
    if (expression_.empty()) throw Error(ErrorCode::InvalidArgument, "expression must be non-empty");
    for (std::size_t i = 0; i < frames_.size(); ++i) {
        const auto& f = frames_[i];
        if (f.width() != frames_[0].width() || f.height() != frames_[0].height()) {
            throw Error(ErrorCode::DimensionMismatch,
                        "frame " + std::to_string(f.index()) + " differs in size from frame 1");
        }
        if (f.index() != static_cast<int>(i) + 1) {
            throw Error(ErrorCode::MissingFrame, "frame indices must be consecutive from 1, found " +
                                                     std::to_string(f.index()) + " at position " +
                                                     std::to_string(i + 1));
        }
    }
}

const Frame& VideoSequence::frame(int index) const {
    if (index < 1 || index > length()) {
        throw Error(ErrorCode::InvalidArgument, "frame index " + std::to_string(index) + " out of range");
    }
    return frames_[static_cast<std::size_t>(index - 1)];
}

void PipelineConfig::validate() const {
    if (num_candidates < 1) throw Error(ErrorCode::InvalidArgument, "num_candidates must be >= 1");
    if (w1 < 0.0 || w2 < 0.0) throw Error(ErrorCode::InvalidArgument, "score weights must be non-negative");
    if (!(w1 + w2 > 0.0)) throw Error(ErrorCode::InvalidArgument, "w1 + w2 must be positive");
    if (memory_interval < 1) throw Error(ErrorCode::InvalidArgument, "memory_interval must be >= 1");
}

void require_same_size(const BinaryMask& a, const BinaryMask& b, std::string_view what) {
    if (!a.same_size(b)) {
        throw Error(ErrorCode::DimensionMismatch,
                    std::string(what) + ": " + std::to_string(a.width()) + "x" + std::to_string(a.height()) +
                        " vs " + std::to_string(b.width()) + "x" + std::to_string(b.height()));
    }
}

void require_matches(const BinaryMask& m, const Frame& f, std::string_view what) {
    if (m.width() != f.width() || m.height() != f.height()) {
        throw Error(ErrorCode::DimensionMismatch,
                    std::string(what) + ": mask " + std::to_string(m.width()) + "x" + std::to_string(m.height()) +
                        " vs frame " + std::to_string(f.width()) + "x" + std::to_string(f.height()));
    }
}

}  // namespace findtrack
