#pragma once

#include "findtrack/core.hpp"

#include <Eigen/Core>

#include <deque>
#include <functional>
#include <optional>
#include <vector>

namespace findtrack {

struct ClipPair {
    std::vector<int> forward;   // k, k+1, ..., T
    std::vector<int> backward;  // k, k-1, ..., 1
};

ClipPair split_sequence(int num_frames, int key_frame);

// Fixed constants of the memory tracker.
struct TrackerParams {
    static constexpr int kStride = 4;
    static constexpr int kAppearanceDim = 8;
    static constexpr int kDescriptorDim = kAppearanceDim + 2;
    static constexpr double kPositionWeight = 0.3;
    static constexpr int kTopK = 16;
    static constexpr double kTemperature = 0.05;
    static constexpr int kWorkingCapacity = 8;
    static constexpr int kLongTermCapacity = 64;
};

using Descriptors = Eigen::Matrix<double, Eigen::Dynamic, TrackerParams::kDescriptorDim, Eigen::RowMajor>;

// Per-cell descriptors on a stride-4 grid, cells in row-major order.
struct FeatureGrid {
    int grid_width = 0;
    int grid_height = 0;
    Descriptors keys;
    std::optional<Eigen::VectorXd> labels;  // foreground fraction per cell

    Eigen::Index cells() const { return keys.rows(); }
};

// Per cell: mean RGB, RGB standard deviation and mean |d/dx|, |d/dy| of luminance
// (central differences), L2-normalized as one 8-vector, then the cell position
// (x / gw, y / gh) scaled by 0.3.
FeatureGrid extract_features(const Frame& frame);

// Foreground fraction of each stride-4 cell.
Eigen::VectorXd mask_to_cell_fractions(const BinaryMask& mask);

// Bilinear interpolation of per-cell values at every pixel (height x width).
Eigen::ArrayXXd upsample_bilinear(const Eigen::VectorXd& soft, int grid_width, int grid_height, int width,
                                  int height);

// Bilinear upsampling of per-cell values to pixels, then >= 0.5 is foreground.
BinaryMask soft_to_mask(const Eigen::VectorXd& soft, int grid_width, int grid_height, int width, int height);

inline constexpr double kRefineLow = 0.1;
inline constexpr double kRefineHigh = 0.9;

// Pixel-level boundary refinement of an upsampled label field. Pixels with a value
// in (0.1, 0.9) join whichever side's mean colour is nearer, where the means are
// taken over confident pixels (>= 0.9 or <= 0.1) in the surrounding 3x3 cells.
// Other pixels, and pixels lacking confident neighbours on either side, use the
// 0.5 threshold.
BinaryMask refine_mask(const Frame& frame, const Eigen::ArrayXXd& field);

class MemoryBank {
public:
    MemoryBank(FeatureGrid reference, int memory_interval, bool long_term_enabled);

    const FeatureGrid& reference() const { return reference_; }
    const std::deque<FeatureGrid>& working() const { return working_; }
    const Descriptors& long_term_keys() const { return long_term_keys_; }
    const Eigen::VectorXd& long_term_labels() const { return long_term_labels_; }
    int long_term_size() const { return static_cast<int>(long_term_keys_.rows()); }
    bool long_term_enabled() const { return long_term_enabled_; }
    int memory_interval() const { return memory_interval_; }

    // All stored keys and labels stacked: reference, working (oldest first), long-term.
    const Descriptors& all_keys() const { return all_keys_; }
    const Eigen::VectorXd& all_labels() const { return all_labels_; }

    // Stores the frame when step is a multiple of the memory interval. Returns
    // whether a write happened.
    bool write(FeatureGrid features, const Eigen::VectorXd& soft_labels, int step);

private:
    void consolidate(const FeatureGrid& evicted);
    void rebuild_index();

    FeatureGrid reference_;
    std::deque<FeatureGrid> working_;
    Descriptors long_term_keys_;
    Eigen::VectorXd long_term_labels_;
    Eigen::VectorXd long_term_weights_;
    int memory_interval_;
    bool long_term_enabled_;
    Descriptors all_keys_;
    Eigen::VectorXd all_labels_;
};

// Top-16 softmax readout (temperature 0.05) over every stored cell, using the
// negative half squared distance between descriptors as similarity.
Eigen::VectorXd memory_read(const FeatureGrid& query, const MemoryBank& bank);

struct TrackStep {
    int step = 0;         // 0 for the key frame
    int frame_index = 0;  // Frame::index() of the processed frame
    int working_size = 0;
    int long_term_size = 0;
    double mean_soft_label = 0.0;
    bool wrote = false;
};

using TrackObserver = std::function<void(const TrackStep&)>;

// Tracks a clip whose first frame is the key frame. The first output is the key
// mask itself. Each later mask is the readout upsampled and refined against the
// frame; memory stores the cell fractions of that refined mask.
std::vector<BinaryMask> track_clip(const std::vector<const Frame*>& clip, const BinaryMask& key_mask,
                                   const PipelineConfig& config, const TrackObserver& observer = {});

enum class Schedule { Serial, Concurrent };

struct PropagationObservers {
    TrackObserver forward;
    TrackObserver backward;
};

// Bidirectional propagation from frame key_frame; frame k of the output is key_mask.
MaskSequence propagate(const VideoSequence& video, int key_frame, const BinaryMask& key_mask,
                       const PipelineConfig& config, Schedule schedule = Schedule::Concurrent,
                       const PropagationObservers& observers = {});

}  // namespace findtrack
