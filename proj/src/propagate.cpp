#include "findtrack/propagate.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <future>
#include <limits>

namespace findtrack {

namespace {

using P = TrackerParams;

int grid_dim(int pixels) { return (pixels + P::kStride - 1) / P::kStride; }

// Central differences with replicated borders.
Eigen::ArrayXXd gradient_x(const Eigen::ArrayXXd& img) {
    const auto w = img.cols();
    Eigen::ArrayXXd g(img.rows(), w);
    for (Eigen::Index x = 0; x < w; ++x) {
        const auto l = std::max<Eigen::Index>(x - 1, 0);
        const auto r = std::min<Eigen::Index>(x + 1, w - 1);
        g.col(x) = (img.col(r) - img.col(l)).abs() / 2.0;
    }
    return g;
}

Eigen::ArrayXXd gradient_y(const Eigen::ArrayXXd& img) {
    const auto h = img.rows();
    Eigen::ArrayXXd g(h, img.cols());
    for (Eigen::Index y = 0; y < h; ++y) {
        const auto u = std::max<Eigen::Index>(y - 1, 0);
        const auto d = std::min<Eigen::Index>(y + 1, h - 1);
        g.row(y) = (img.row(d) - img.row(u)).abs() / 2.0;
    }
    return g;
}

// Keeps the k largest (similarity, index) pairs seen so far, sorted descending.
class TopK {
public:
    explicit TopK(int k) : k_(k) {}

    void reset() { size_ = 0; }

    void offer(double sim, Eigen::Index idx) {
        if (size_ == k_ && sim <= sims_[size_ - 1]) return;
        int pos = size_ < k_ ? size_++ : k_ - 1;
        while (pos > 0 && sims_[pos - 1] < sim) {
            sims_[pos] = sims_[pos - 1];
            idx_[pos] = idx_[pos - 1];
            --pos;
        }
        sims_[pos] = sim;
        idx_[pos] = idx;
    }

    int size() const { return size_; }
    double sim(int i) const { return sims_[i]; }
    Eigen::Index index(int i) const { return idx_[i]; }

private:
    int k_;
    int size_ = 0;
    std::array<double, P::kTopK> sims_{};
    std::array<Eigen::Index, P::kTopK> idx_{};
};

}  // namespace

ClipPair split_sequence(int num_frames, int key_frame) {
    if (key_frame < 1 || key_frame > num_frames) {
        throw Error(ErrorCode::KeyFrameOutOfRange,
                    "key frame " + std::to_string(key_frame) + " outside 1.." + std::to_string(num_frames));
    }
    ClipPair clips;
    for (int t = key_frame; t <= num_frames; ++t) clips.forward.push_back(t);
    for (int t = key_frame; t >= 1; --t) clips.backward.push_back(t);
    return clips;
}

FeatureGrid extract_features(const Frame& frame) {
    const int gw = grid_dim(frame.width());
    const int gh = grid_dim(frame.height());
    const std::array<Eigen::ArrayXXd, 3> rgb{frame.channel(0), frame.channel(1), frame.channel(2)};
    const Eigen::ArrayXXd lum = frame.luminance();
    const Eigen::ArrayXXd gx = gradient_x(lum);
    const Eigen::ArrayXXd gy = gradient_y(lum);

    FeatureGrid grid;
    grid.grid_width = gw;
    grid.grid_height = gh;
    grid.keys.resize(static_cast<Eigen::Index>(gw) * gh, P::kDescriptorDim);
    for (int cy = 0; cy < gh; ++cy) {
        const int y0 = cy * P::kStride;
        const int h = std::min(P::kStride, frame.height() - y0);
        for (int cx = 0; cx < gw; ++cx) {
            const int x0 = cx * P::kStride;
            const int w = std::min(P::kStride, frame.width() - x0);
            Eigen::Matrix<double, P::kAppearanceDim, 1> app;
            for (int c = 0; c < 3; ++c) {
                const auto block = rgb[static_cast<std::size_t>(c)].block(y0, x0, h, w);
                const double mean = block.mean();
                app[c] = mean;
                app[3 + c] = std::sqrt((block - mean).square().mean());
            }
            app[6] = gx.block(y0, x0, h, w).mean();
            app[7] = gy.block(y0, x0, h, w).mean();
            const double norm = app.norm();
            if (norm > 0.0) app /= norm;
            auto row = grid.keys.row(static_cast<Eigen::Index>(cy) * gw + cx);
            row.head<P::kAppearanceDim>() = app.transpose();
            row[P::kAppearanceDim] = P::kPositionWeight * cx / gw;
            row[P::kAppearanceDim + 1] = P::kPositionWeight * cy / gh;
        }
    }
    return grid;
}

Eigen::VectorXd mask_to_cell_fractions(const BinaryMask& mask) {
    const int gw = grid_dim(mask.width());
    const int gh = grid_dim(mask.height());
    Eigen::VectorXd frac(static_cast<Eigen::Index>(gw) * gh);
    for (int cy = 0; cy < gh; ++cy) {
        const int y0 = cy * P::kStride;
        const int h = std::min(P::kStride, mask.height() - y0);
        for (int cx = 0; cx < gw; ++cx) {
            const int x0 = cx * P::kStride;
            const int w = std::min(P::kStride, mask.width() - x0);
            const auto count = mask.bits().block(y0, x0, h, w).count();
            frac[static_cast<Eigen::Index>(cy) * gw + cx] = static_cast<double>(count) / (w * h);
        }
    }
    return frac;
}

Eigen::ArrayXXd upsample_bilinear(const Eigen::VectorXd& soft, int grid_width, int grid_height, int width,
                                  int height) {
    if (grid_width != grid_dim(width) || grid_height != grid_dim(height) ||
        soft.size() != static_cast<Eigen::Index>(grid_width) * grid_height) {
        throw Error(ErrorCode::DimensionMismatch, "label grid does not match the requested mask size");
    }
    // Cell c is centred on pixel coordinate stride * c + (stride - 1) / 2.
    struct Tap {
        int i0, i1;
        double t;
    };
    const auto taps = [](int pixels, int cells) {
        std::vector<Tap> out(static_cast<std::size_t>(pixels));
        for (int p = 0; p < pixels; ++p) {
            const double u = std::clamp((p - (P::kStride - 1) / 2.0) / P::kStride, 0.0, cells - 1.0);
            const int i0 = static_cast<int>(std::floor(u));
            const int i1 = std::min(i0 + 1, cells - 1);
            out[static_cast<std::size_t>(p)] = {i0, i1, u - i0};
        }
        return out;
    };
    const auto tx = taps(width, grid_width);
    const auto ty = taps(height, grid_height);
    const auto at = [&](int cx, int cy) { return soft[static_cast<Eigen::Index>(cy) * grid_width + cx]; };
    Eigen::ArrayXXd field(height, width);
    for (int y = 0; y < height; ++y) {
        const auto& vy = ty[static_cast<std::size_t>(y)];
        for (int x = 0; x < width; ++x) {
            const auto& vx = tx[static_cast<std::size_t>(x)];
            const double top = (1.0 - vx.t) * at(vx.i0, vy.i0) + vx.t * at(vx.i1, vy.i0);
            const double bottom = (1.0 - vx.t) * at(vx.i0, vy.i1) + vx.t * at(vx.i1, vy.i1);
            field(y, x) = (1.0 - vy.t) * top + vy.t * bottom;
        }
    }
    return field;
}

BinaryMask soft_to_mask(const Eigen::VectorXd& soft, int grid_width, int grid_height, int width, int height) {
    return BinaryMask(MaskArray(upsample_bilinear(soft, grid_width, grid_height, width, height) >= 0.5));
}

BinaryMask refine_mask(const Frame& frame, const Eigen::ArrayXXd& field) {
    const int w = frame.width();
    const int h = frame.height();
    if (field.rows() != h || field.cols() != w) {
        throw Error(ErrorCode::DimensionMismatch, "label field does not match the frame");
    }
    const int gw = grid_dim(w);
    const int gh = grid_dim(h);
    // Per-cell colour sums of the confident pixels on each side.
    using Stats = Eigen::Array4d;  // r, g, b, count
    std::vector<Stats> fg(static_cast<std::size_t>(gw * gh), Stats::Zero());
    std::vector<Stats> bg(fg);
    const auto cell_of = [&](int x, int y) { return static_cast<std::size_t>((y / P::kStride) * gw + x / P::kStride); };
    const auto pixel = [&](int x, int y) {
        const Rgb c = frame.at(x, y);
        return Stats(c.r, c.g, c.b, 1.0);
    };
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double v = field(y, x);
            if (v >= kRefineHigh) fg[cell_of(x, y)] += pixel(x, y);
            if (v <= kRefineLow) bg[cell_of(x, y)] += pixel(x, y);
        }
    }
    const auto neighbourhood = [&](const std::vector<Stats>& s, int cx, int cy) {
        Stats sum = Stats::Zero();
        for (int y = std::max(0, cy - 1); y <= std::min(gh - 1, cy + 1); ++y) {
            for (int x = std::max(0, cx - 1); x <= std::min(gw - 1, cx + 1); ++x) {
                sum += s[static_cast<std::size_t>(y * gw + x)];
            }
        }
        return sum;
    };
    BinaryMask mask(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double v = field(y, x);
            bool on = v >= 0.5;
            if (v > kRefineLow && v < kRefineHigh) {
                const Stats f = neighbourhood(fg, x / P::kStride, y / P::kStride);
                const Stats b = neighbourhood(bg, x / P::kStride, y / P::kStride);
                if (f[3] > 0.0 && b[3] > 0.0) {
                    const Eigen::Array3d c = pixel(x, y).head<3>();
                    const double df = (c - f.head<3>() / f[3]).square().sum();
                    const double db = (c - b.head<3>() / b[3]).square().sum();
                    on = df < db;
                }
            }
            mask.set(x, y, on);
        }
    }
    return mask;
}

MemoryBank::MemoryBank(FeatureGrid reference, int memory_interval, bool long_term_enabled)
    : reference_(std::move(reference)),
      long_term_keys_(0, P::kDescriptorDim),
      memory_interval_(memory_interval),
      long_term_enabled_(long_term_enabled) {
    if (!reference_.labels || reference_.labels->size() != reference_.cells()) {
        throw Error(ErrorCode::InvalidArgument, "reference entry needs one label per cell");
    }
    if (memory_interval_ < 1) throw Error(ErrorCode::InvalidArgument, "memory interval must be >= 1");
    rebuild_index();
}

bool MemoryBank::write(FeatureGrid features, const Eigen::VectorXd& soft_labels, int step) {
    if (step % memory_interval_ != 0) return false;
    if (soft_labels.size() != features.cells()) {
        throw Error(ErrorCode::DimensionMismatch, "one soft label per cell is required");
    }
    features.labels = soft_labels;
    working_.push_back(std::move(features));
    if (static_cast<int>(working_.size()) > P::kWorkingCapacity) {
        FeatureGrid evicted = std::move(working_.front());
        working_.pop_front();
        if (long_term_enabled_) consolidate(evicted);
    }
    rebuild_index();
    return true;
}

// Inserts every cell of the evicted entry as a unit-weight prototype; whenever that
// overflows the capacity, the two closest prototypes are replaced by their
// weighted mean.
void MemoryBank::consolidate(const FeatureGrid& evicted) {
    constexpr int cap = P::kLongTermCapacity;
    using Row = Eigen::Matrix<double, 1, P::kDescriptorDim>;
    std::vector<Row> keys;
    std::vector<double> labels;
    std::vector<double> weights;
    keys.reserve(cap + 1);
    for (Eigen::Index i = 0; i < long_term_keys_.rows(); ++i) {
        keys.emplace_back(long_term_keys_.row(i));
        labels.push_back(long_term_labels_[i]);
        weights.push_back(long_term_weights_[i]);
    }
    // squared distances, only the upper triangle is read
    Eigen::MatrixXd dist = Eigen::MatrixXd::Zero(cap + 1, cap + 1);
    for (std::size_t i = 0; i < keys.size(); ++i) {
        for (std::size_t j = i + 1; j < keys.size(); ++j) dist(i, j) = (keys[i] - keys[j]).squaredNorm();
    }
    const auto set_dist = [&](std::size_t a, std::size_t b) {
        const auto d = (keys[a] - keys[b]).squaredNorm();
        dist(std::min(a, b), std::max(a, b)) = d;
    };

    for (Eigen::Index c = 0; c < evicted.cells(); ++c) {
        keys.emplace_back(evicted.keys.row(c));
        labels.push_back((*evicted.labels)[c]);
        weights.push_back(1.0);
        const auto last = keys.size() - 1;
        for (std::size_t i = 0; i < last; ++i) set_dist(i, last);
        if (static_cast<int>(keys.size()) <= cap) continue;

        std::size_t bi = 0, bj = 1;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < keys.size(); ++i) {
            for (std::size_t j = i + 1; j < keys.size(); ++j) {
                if (dist(i, j) < best) {
                    best = dist(i, j);
                    bi = i;
                    bj = j;
                }
            }
        }
        const double wsum = weights[bi] + weights[bj];
        keys[bi] = (weights[bi] * keys[bi] + weights[bj] * keys[bj]) / wsum;
        labels[bi] = (weights[bi] * labels[bi] + weights[bj] * labels[bj]) / wsum;
        weights[bi] = wsum;
        // move the last prototype into the freed slot
        const auto tail = keys.size() - 1;
        if (bj != tail) {
            keys[bj] = keys[tail];
            labels[bj] = labels[tail];
            weights[bj] = weights[tail];
        }
        keys.pop_back();
        labels.pop_back();
        weights.pop_back();
        for (std::size_t i = 0; i < keys.size(); ++i) {
            if (i != bi) set_dist(i, bi);
            if (bj < keys.size() && i != bj) set_dist(i, bj);
        }
    }

    const auto n = static_cast<Eigen::Index>(keys.size());
    long_term_keys_.resize(n, P::kDescriptorDim);
    long_term_labels_.resize(n);
    long_term_weights_.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        long_term_keys_.row(i) = keys[static_cast<std::size_t>(i)];
        long_term_labels_[i] = labels[static_cast<std::size_t>(i)];
        long_term_weights_[i] = weights[static_cast<std::size_t>(i)];
    }
}

void MemoryBank::rebuild_index() {
    Eigen::Index total = reference_.cells() + long_term_keys_.rows();
    for (const auto& w : working_) total += w.cells();
    all_keys_.resize(total, P::kDescriptorDim);
    all_labels_.resize(total);
    Eigen::Index at = 0;
    const auto append = [&](const Descriptors& keys, const Eigen::VectorXd& labels) {
        all_keys_.middleRows(at, keys.rows()) = keys;
        all_labels_.segment(at, labels.size()) = labels;
        at += keys.rows();
    };
    append(reference_.keys, *reference_.labels);
    for (const auto& w : working_) append(w.keys, *w.labels);
    append(long_term_keys_, long_term_labels_);
}

Eigen::VectorXd memory_read(const FeatureGrid& query, const MemoryBank& bank) {
    const auto& mem = bank.all_keys();
    const auto& labels = bank.all_labels();
    const Eigen::VectorXd half_mem_sq = 0.5 * mem.rowwise().squaredNorm();
    const int k = static_cast<int>(std::min<Eigen::Index>(P::kTopK, mem.rows()));

    Eigen::VectorXd out(query.cells());
    // small blocks keep the similarity columns in cache; each column is one query cell
    constexpr Eigen::Index kBlock = 32;
    Eigen::MatrixXd sim;
    TopK top(k);
    for (Eigen::Index start = 0; start < query.cells(); start += kBlock) {
        const auto rows = std::min(kBlock, query.cells() - start);
        // -|q - m|^2 / 2 = q.m - |m|^2 / 2 - |q|^2 / 2
        sim.noalias() = mem * query.keys.middleRows(start, rows).transpose();
        sim.colwise() -= half_mem_sq;
        for (Eigen::Index r = 0; r < rows; ++r) {
            // |q|^2 / 2 is shared by the whole column and cancels in the softmax
            top.reset();
            const double* col = sim.col(r).data();
            for (Eigen::Index m = 0; m < mem.rows(); ++m) top.offer(col[m], m);
            const double peak = top.sim(0);
            double wsum = 0.0;
            double acc = 0.0;
            for (int i = 0; i < top.size(); ++i) {
                const double w = std::exp((top.sim(i) - peak) / P::kTemperature);
                wsum += w;
                acc += w * labels[top.index(i)];
            }
            out[start + r] = std::clamp(acc / wsum, 0.0, 1.0);
        }
    }
    return out;
}

std::vector<BinaryMask> track_clip(const std::vector<const Frame*>& clip, const BinaryMask& key_mask,
                                   const PipelineConfig& config, const TrackObserver& observer) {
    if (clip.empty()) return {};
    require_matches(key_mask, *clip.front(), "key mask");
    std::vector<BinaryMask> masks;
    masks.reserve(clip.size());
    masks.push_back(key_mask);

    FeatureGrid reference = extract_features(*clip.front());
    reference.labels = mask_to_cell_fractions(key_mask);
    if (observer) {
        observer({0, clip.front()->index(), 0, 0, reference.labels->mean(), false});
    }
    if (clip.size() == 1) return masks;
    MemoryBank bank(std::move(reference), config.memory_interval, config.long_term_enabled);

    for (std::size_t s = 1; s < clip.size(); ++s) {
        const Frame& frame = *clip[s];
        if (frame.width() != key_mask.width() || frame.height() != key_mask.height()) {
            throw Error(ErrorCode::DimensionMismatch, "clip frames differ in size from the key frame");
        }
        FeatureGrid features = extract_features(frame);
        const Eigen::VectorXd soft = memory_read(features, bank);
        BinaryMask mask = refine_mask(
            frame, upsample_bilinear(soft, features.grid_width, features.grid_height, frame.width(), frame.height()));
        const bool wrote = bank.write(std::move(features), mask_to_cell_fractions(mask), static_cast<int>(s));
        masks.push_back(std::move(mask));
        if (observer) {
            observer({static_cast<int>(s), frame.index(), static_cast<int>(bank.working().size()),
                      bank.long_term_size(), soft.mean(), wrote});
        }
    }
    return masks;
}

MaskSequence propagate(const VideoSequence& video, int key_frame, const BinaryMask& key_mask,
                       const PipelineConfig& config, Schedule schedule, const PropagationObservers& observers) {
    config.validate();
    const auto clips = split_sequence(video.length(), key_frame);
    require_matches(key_mask, video.frame(key_frame), "key mask");

    const auto frames_of = [&](const std::vector<int>& indices) {
        std::vector<const Frame*> out;
        out.reserve(indices.size());
        for (int t : indices) out.push_back(&video.frame(t));
        return out;
    };
    const auto fw_frames = frames_of(clips.forward);
    const auto bw_frames = frames_of(clips.backward);

    std::vector<BinaryMask> fw, bw;
    if (schedule == Schedule::Concurrent) {
        auto pending = std::async(std::launch::async,
                                  [&] { return track_clip(bw_frames, key_mask, config, observers.backward); });
        fw = track_clip(fw_frames, key_mask, config, observers.forward);
        bw = pending.get();
    } else {
        fw = track_clip(fw_frames, key_mask, config, observers.forward);
        bw = track_clip(bw_frames, key_mask, config, observers.backward);
    }

    MaskSequence out(static_cast<std::size_t>(video.length()));
    for (std::size_t i = 0; i < clips.forward.size(); ++i) {
        out[static_cast<std::size_t>(clips.forward[i] - 1)] = std::move(fw[i]);
    }
    for (std::size_t i = 1; i < clips.backward.size(); ++i) {
        out[static_cast<std::size_t>(clips.backward[i] - 1)] = std::move(bw[i]);
    }
    return out;
}

}  // namespace findtrack
