#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace findtrack {

enum class ErrorCode {
    InvalidArgument,
    DimensionMismatch,
    LengthMismatch,
    CountMismatch,
    MissingFrame,
    UnsupportedFormat,
    IoError,
    ExpressionParseError,
    EmptyMask,
    ZeroNormEmbedding,
    AllCandidatesEmpty,
    KeyFrameOutOfRange,
    HandshakeFailure,
    ProtocolError,
    BackendTimeout,
    BackendError,
    SpecError,
    UnknownScenario,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message);

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

struct Rgb {
    std::uint8_t r = 0;
    std::uint8_t g = 0;
    std::uint8_t b = 0;

    friend bool operator==(const Rgb&, const Rgb&) = default;
};

using MaskArray = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Row-major RGB raster with a 1-based position in its sequence.
class Frame {
public:
    Frame() = default;
    Frame(int index, int width, int height);
    Frame(int index, int width, int height, std::vector<std::uint8_t> pixels);

    int index() const noexcept { return index_; }
    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    const std::vector<std::uint8_t>& pixels() const noexcept { return pixels_; }

    Rgb at(int x, int y) const;
    void set(int x, int y, Rgb c);
    void fill(Rgb c);

    // One colour channel as a height x width array scaled to [0, 1].
    Eigen::ArrayXXd channel(int c) const;
    // Rec. 601 luminance in [0, 1].
    Eigen::ArrayXXd luminance() const;

    Frame with_index(int index) const;

    friend bool operator==(const Frame&, const Frame&) = default;

private:
    int index_ = 1;
    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> pixels_;
};

class BinaryMask {
public:
    BinaryMask() = default;
    BinaryMask(int width, int height);
    explicit BinaryMask(MaskArray bits);

    static BinaryMask full(int width, int height);

    int width() const noexcept { return static_cast<int>(bits_.cols()); }
    int height() const noexcept { return static_cast<int>(bits_.rows()); }
    const MaskArray& bits() const noexcept { return bits_; }
    MaskArray& bits() noexcept { return bits_; }

    bool operator()(int x, int y) const { return bits_(y, x); }
    void set(int x, int y, bool v) { bits_(y, x) = v; }

    std::int64_t area() const { return bits_.count(); }
    bool empty() const { return !bits_.any(); }
    bool same_size(const BinaryMask& o) const { return width() == o.width() && height() == o.height(); }

    friend bool operator==(const BinaryMask& a, const BinaryMask& b) {
        return a.same_size(b) && (a.bits_ == b.bits_).all();
    }

private:
    MaskArray bits_;
};

class VideoSequence {
public:
    VideoSequence(std::vector<Frame> frames, std::string expression);

    int length() const noexcept { return static_cast<int>(frames_.size()); }
    int width() const noexcept { return frames_.front().width(); }
    int height() const noexcept { return frames_.front().height(); }
    const std::string& expression() const noexcept { return expression_; }
    const std::vector<Frame>& frames() const noexcept { return frames_; }
    // 1-based, matching Frame::index().
    const Frame& frame(int index) const;

private:
    std::vector<Frame> frames_;
    std::string expression_;
};

using MaskSequence = std::vector<BinaryMask>;

struct ScoredMask {
    int frame_index = 0;
    BinaryMask mask;
    double confidence = 0.0;
    double alignment = 0.0;
    double score = 0.0;
};

struct PipelineConfig {
    int num_candidates = 5;
    double w1 = 0.5;
    double w2 = 0.5;
    int memory_interval = 3;
    bool long_term_enabled = false;
    std::string backend = "builtin:color";

    void validate() const;
};

void require_same_size(const BinaryMask& a, const BinaryMask& b, std::string_view what);
void require_matches(const BinaryMask& m, const Frame& f, std::string_view what);

}  // namespace findtrack
