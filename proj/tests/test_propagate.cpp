#include "findtrack/metrics.hpp"
#include "findtrack/propagate.hpp"
#include "findtrack/synthgen.hpp"

#include <doctest.h>

#include <cmath>

using namespace findtrack;
using P = TrackerParams;

namespace {

FeatureGrid grid_of(std::initializer_list<std::array<double, 10>> rows, std::initializer_list<double> labels) {
    FeatureGrid g;
    g.grid_width = static_cast<int>(rows.size());
    g.grid_height = 1;
    g.keys.resize(static_cast<Eigen::Index>(rows.size()), P::kDescriptorDim);
    Eigen::Index i = 0;
    for (const auto& r : rows) {
        for (int k = 0; k < 10; ++k) g.keys(i, k) = r[static_cast<std::size_t>(k)];
        ++i;
    }
    if (labels.size() > 0) g.labels = Eigen::Map<const Eigen::VectorXd>(labels.begin(), static_cast<Eigen::Index>(labels.size()));
    return g;
}

std::vector<const Frame*> clip_of(const VideoSequence& v, int from, int to) {
    std::vector<const Frame*> out;
    const int step = from <= to ? 1 : -1;
    for (int t = from; t != to + step; t += step) out.push_back(&v.frame(t));
    return out;
}

VideoSequence reversed(const VideoSequence& v) {
    std::vector<Frame> frames;
    for (int t = v.length(); t >= 1; --t) frames.push_back(v.frame(t).with_index(v.length() - t + 1));
    return VideoSequence(std::move(frames), v.expression());
}

}  // namespace

TEST_CASE("split examples") {
    const auto c = split_sequence(10, 4);
    CHECK(c.forward == std::vector<int>{4, 5, 6, 7, 8, 9, 10});
    CHECK(c.backward == std::vector<int>{4, 3, 2, 1});
    CHECK(split_sequence(10, 1).backward == std::vector<int>{1});
    CHECK(split_sequence(10, 10).forward == std::vector<int>{10});
    CHECK(split_sequence(1, 1).forward == std::vector<int>{1});
    for (int k : {0, 11}) {
        try {
            split_sequence(10, k);
            FAIL("accepted k=" << k);
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::KeyFrameOutOfRange);
        }
    }
}

TEST_CASE("features of a uniform frame differ only in position") {
    Frame f(1, 17, 9);
    f.fill({90, 90, 90});
    const auto g = extract_features(f);
    CHECK(g.grid_width == 5);
    CHECK(g.grid_height == 3);
    CHECK(g.cells() == 15);
    for (Eigen::Index i = 0; i < g.cells(); ++i) {
        CHECK((g.keys.row(i).head<8>() - g.keys.row(0).head<8>()).norm() == 0.0);
        CHECK(g.keys.row(i).head<8>().norm() == doctest::Approx(1.0));
    }
    CHECK(g.keys(7, 8) == doctest::Approx(0.3 * 2 / 5));
    CHECK(g.keys(7, 9) == doctest::Approx(0.3 * 1 / 3));
    CHECK(extract_features(f).keys == g.keys);
}

TEST_CASE("appearance block of a split cell") {
    // left half white, right half black: mean 0.5, std 0.5 on every channel, and
    // |d/dx| of luminance is 0.5 on the two centre columns
    Frame f(1, 4, 4);
    for (int y = 0; y < 4; ++y) {
        for (int x = 0; x < 2; ++x) f.set(x, y, {255, 255, 255});
    }
    const auto g = extract_features(f);
    Eigen::Matrix<double, 8, 1> expected;
    expected << 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.25, 0.0;
    expected.normalize();
    CHECK((g.keys.row(0).head<8>().transpose() - expected).norm() < 1e-12);
}

TEST_CASE("a red cell is its own nearest neighbour for a red query") {
    Frame f(1, 32, 32);
    f.fill({0, 0, 0});
    for (int y = 12; y < 16; ++y) {
        for (int x = 20; x < 24; ++x) f.set(x, y, {255, 0, 0});
    }
    const auto g = extract_features(f);
    Frame q(1, 32, 32);
    q.fill({255, 0, 0});
    const Eigen::RowVectorXd query = extract_features(q).keys.row(3 * 8 + 5);
    Eigen::Index best = -1;
    double best_d = 1e300;
    for (Eigen::Index i = 0; i < g.cells(); ++i) {
        const double d = (g.keys.row(i) - query).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    CHECK(best == 3 * 8 + 5);
}

TEST_CASE("cell fractions") {
    BinaryMask m(6, 4);
    for (int x = 0; x < 6; ++x) m.set(x, 0, true);
    m.set(5, 3, true);
    const auto f = mask_to_cell_fractions(m);
    REQUIRE(f.size() == 2);
    CHECK(f[0] == 0.25);
    CHECK(f[1] == 3.0 / 8.0);  // partial 2x4 cell
}

TEST_CASE("readout examples") {
    const auto mem = grid_of({{1, 0, 0, 0, 0, 0, 0, 0, 0, 0}, {0, 1, 0, 0, 0, 0, 0, 0, 0.3, 0}}, {1, 1});
    const auto query = grid_of({{0.6, 0.8, 0, 0, 0, 0, 0, 0, 0.1, 0.1}}, {});
    CHECK(memory_read(query, MemoryBank(mem, 3, false))[0] == 1.0);
    auto zeros = mem;
    zeros.labels = Eigen::VectorXd::Zero(2);
    CHECK(memory_read(query, MemoryBank(zeros, 3, false))[0] == 0.0);
}

TEST_CASE("equidistant memory cells split the vote") {
    const auto query = grid_of({{0.5, 0.5, 0, 0, 0, 0, 0, 0, 0, 0}}, {});
    SUBCASE("two cells only") {
        const auto mem = grid_of({{0.75, 0.5, 0, 0, 0, 0, 0, 0, 0, 0}, {0.25, 0.5, 0, 0, 0, 0, 0, 0, 0, 0}}, {1, 0});
        CHECK(memory_read(query, MemoryBank(mem, 3, false))[0] == 0.5);
    }
    SUBCASE("with distant cells") {
        const auto mem = grid_of({{0.75, 0.5, 0, 0, 0, 0, 0, 0, 0, 0},
                                  {0.5, 0.5, 0, 0, 0, 0, 0, 0, 0.25, 0},
                                  {-1, -1, -1, 0, 0, 0, 0, 0, 0, 0},
                                  {0, 0, 0, 0, 0, 0, 3, 3, 0, 0}},
                                 {1, 0, 1, 1});
        // one cell offset along the position axis instead; equal distance 0.25
        CHECK(memory_read(query, MemoryBank(mem, 3, false))[0] == doctest::Approx(0.5).epsilon(1e-12));
    }
}

TEST_CASE("readout is a convex combination") {
    Lcg64 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        FeatureGrid mem;
        mem.grid_width = 40;
        mem.grid_height = 1;
        mem.keys = Descriptors::NullaryExpr(40, P::kDescriptorDim, [&] { return rng.uniform(); });
        mem.labels = Eigen::VectorXd::NullaryExpr(40, [&] { return rng.uniform(); });
        FeatureGrid q = mem;
        q.keys = Descriptors::NullaryExpr(40, P::kDescriptorDim, [&] { return rng.uniform(); });
        q.labels.reset();
        const auto out = memory_read(q, MemoryBank(mem, 3, false));
        CHECK(out.minCoeff() >= mem.labels->minCoeff() - 1e-12);
        CHECK(out.maxCoeff() <= mem.labels->maxCoeff() + 1e-12);
    }
}

TEST_CASE("readout attends to the 16 most similar cells") {
    // 20 cells on a line; the query sits on cell 0. The 16 nearest have label 1,
    // the rest label 0, so only top-k restriction yields exactly 1.
    FeatureGrid mem;
    mem.grid_width = 20;
    mem.grid_height = 1;
    mem.keys = Descriptors::Zero(20, P::kDescriptorDim);
    Eigen::VectorXd labels(20);
    for (int i = 0; i < 20; ++i) {
        mem.keys(i, 0) = 0.01 * i;
        labels[i] = i < 16 ? 1.0 : 0.0;
    }
    mem.labels = labels;
    FeatureGrid q;
    q.grid_width = 1;
    q.grid_height = 1;
    q.keys = Descriptors::Zero(1, P::kDescriptorDim);
    CHECK(memory_read(q, MemoryBank(mem, 3, false))[0] == 1.0);
}

TEST_CASE("soft_to_mask examples") {
    const int w = 22, h = 13;  // partial cells on both axes
    const int gw = 6, gh = 4;
    CHECK(soft_to_mask(Eigen::VectorXd::Ones(gw * gh), gw, gh, w, h) == BinaryMask::full(w, h));
    CHECK(soft_to_mask(Eigen::VectorXd::Zero(gw * gh), gw, gh, w, h).empty());
    CHECK_THROWS_AS(soft_to_mask(Eigen::VectorXd::Zero(gw * gh), gw + 1, gh, w, h), Error);
}

TEST_CASE("soft_to_mask matches a brute-force bilinear evaluation") {
    Lcg64 rng(9);
    for (int trial = 0; trial < 30; ++trial) {
        const int w = rng.uniform_int(1, 40), h = rng.uniform_int(1, 40);
        const int gw = (w + 3) / 4, gh = (h + 3) / 4;
        Eigen::VectorXd soft(gw * gh);
        for (auto& v : soft) v = rng.uniform();
        if (trial == 0) {
            // half-1 / half-0 split at a cell boundary
            for (int i = 0; i < soft.size(); ++i) soft[i] = (i % gw) < gw / 2 ? 1.0 : 0.0;
        }
        const auto m = soft_to_mask(soft, gw, gh, w, h);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                // cell centres at 4c + 1.5; clamp to the outermost centres
                const double u = std::min(std::max((x - 1.5) / 4.0, 0.0), gw - 1.0);
                const double v = std::min(std::max((y - 1.5) / 4.0, 0.0), gh - 1.0);
                const int x0 = static_cast<int>(u), y0 = static_cast<int>(v);
                const int x1 = std::min(x0 + 1, gw - 1), y1 = std::min(y0 + 1, gh - 1);
                const double fx = u - x0, fy = v - y0;
                const auto s = [&](int cx, int cy) { return soft[cy * gw + cx]; };
                const double val = (1 - fy) * ((1 - fx) * s(x0, y0) + fx * s(x1, y0)) +
                                   fy * ((1 - fx) * s(x0, y1) + fx * s(x1, y1));
                REQUIRE(m(x, y) == (val >= 0.5));
            }
        }
        if (trial == 0 && gw >= 2) {
            const int boundary = 4 * (gw / 2);
            for (int y = 0; y < h; ++y) {
                for (int x = 0; x < w; ++x) {
                    if (x < boundary - 4) REQUIRE(m(x, y));
                    if (x >= boundary + 4) REQUIRE(!m(x, y));
                }
            }
        }
    }
}

TEST_CASE("refinement recovers a mask from its own cell fractions") {
    for (int seed = 1; seed <= 6; ++seed) {
        const auto scene = generate(scenario("static", static_cast<std::uint64_t>(seed)));
        const auto& f = scene.video.frame(1);
        const auto frac = mask_to_cell_fractions(scene.gt[0]);
        const auto field = upsample_bilinear(frac, 32, 32, 128, 128);
        CHECK(refine_mask(f, field) == scene.gt[0]);
        CHECK(region_j(soft_to_mask(frac, 32, 32, 128, 128), scene.gt[0]) > 0.9);
    }
}

TEST_CASE("memory write schedule and bounds") {
    Frame f(1, 16, 16);
    f.fill({10, 20, 30});
    FeatureGrid ref = extract_features(f);
    ref.labels = Eigen::VectorXd::Constant(ref.cells(), 0.25);
    const Eigen::VectorXd soft = Eigen::VectorXd::Constant(ref.cells(), 0.75);

    SUBCASE("every third step") {
        MemoryBank bank(ref, 3, false);
        std::vector<int> writes;
        for (int step = 1; step <= 9; ++step) {
            if (bank.write(extract_features(f), soft, step)) writes.push_back(step);
        }
        CHECK(writes == std::vector<int>{3, 6, 9});
        CHECK(bank.working().size() == 3);
    }
    SUBCASE("fifo with a pinned reference") {
        MemoryBank bank(ref, 1, false);
        for (int step = 1; step <= 9; ++step) {
            Frame g = f;
            g.set(0, 0, {static_cast<std::uint8_t>(step), 0, 0});
            bank.write(extract_features(g), soft, step);
            CHECK(bank.working().size() <= 8);
        }
        CHECK(bank.working().size() == 8);
        CHECK(bank.long_term_size() == 0);
        // the oldest survivor is the second write
        Frame second = f;
        second.set(0, 0, {2, 0, 0});
        CHECK(bank.working().front().keys == extract_features(second).keys);
        CHECK(bank.all_keys().topRows(ref.cells()) == ref.keys);
        CHECK(bank.all_labels().head(ref.cells()) == *ref.labels);
        CHECK(bank.all_keys().rows() == 9 * ref.cells());
    }
    SUBCASE("long-term capacity") {
        MemoryBank bank(ref, 1, true);
        Lcg64 rng(1);
        for (int step = 1; step <= 100; ++step) {
            Frame g(1, 16, 16);
            for (int y = 0; y < 16; ++y) {
                for (int x = 0; x < 16; ++x) {
                    g.set(x, y, {static_cast<std::uint8_t>(rng.uniform_int(0, 255)), 40, 40});
                }
            }
            Eigen::VectorXd labels(ref.cells());
            for (auto& v : labels) v = rng.uniform();
            bank.write(extract_features(g), labels, step);
            REQUIRE(bank.working().size() <= 8);
            REQUIRE(bank.long_term_size() <= 64);
            REQUIRE(bank.long_term_labels().size() == bank.long_term_size());
            if (bank.long_term_size() > 0) {
                REQUIRE(bank.long_term_labels().minCoeff() >= 0.0);
                REQUIRE(bank.long_term_labels().maxCoeff() <= 1.0);
            }
        }
        CHECK(bank.long_term_size() == 64);
    }
}

TEST_CASE("long-term prototypes preserve total label mass") {
    Frame f(1, 8, 8);
    f.fill({10, 20, 30});
    FeatureGrid ref = extract_features(f);
    ref.labels = Eigen::VectorXd::Zero(ref.cells());
    MemoryBank bank(ref, 1, true);
    Lcg64 rng(2);
    double mass = 0.0;
    int evicted = 0;
    std::deque<double> pending;
    for (int step = 1; step <= 40; ++step) {
        Frame g(1, 8, 8);
        for (int y = 0; y < 8; ++y) {
            for (int x = 0; x < 8; ++x) g.set(x, y, {static_cast<std::uint8_t>(rng.uniform_int(0, 255)), 0, 0});
        }
        Eigen::VectorXd labels(ref.cells());
        for (auto& v : labels) v = rng.uniform();
        pending.push_back(labels.sum());
        bank.write(extract_features(g), labels, step);
        if (pending.size() > 8) {
            mass += pending.front();
            pending.pop_front();
            evicted += static_cast<int>(ref.cells());
        }
    }
    // prototype weights are not exposed; a weighted mean keeps mass only in
    // aggregate, so compare the mean label instead
    CHECK(bank.long_term_labels().mean() == doctest::Approx(mass / evicted).epsilon(0.15));
}

TEST_CASE("static clip stays on the reference") {
    const auto scene = generate(scenario("static", 2));
    const auto masks = track_clip(clip_of(scene.video, 1, 30), scene.gt[0], PipelineConfig{});
    REQUIRE(masks.size() == 30);
    CHECK(masks[0] == scene.gt[0]);
    for (const auto& m : masks) CHECK(region_j(m, scene.gt[0]) >= 0.99);
}

TEST_CASE("empty reference propagates as empty") {
    const auto scene = generate(scenario("translate", 1));
    const auto masks = track_clip(clip_of(scene.video, 1, 10), BinaryMask(128, 128), PipelineConfig{});
    for (const auto& m : masks) CHECK(m.empty());
}

TEST_CASE("translating object is followed") {
    const auto scene = generate(scenario("translate", 5));
    const auto masks = track_clip(clip_of(scene.video, 1, 10), scene.gt[0], PipelineConfig{});
    for (int t = 0; t < 10; ++t) CHECK(region_j(masks[static_cast<std::size_t>(t)], scene.gt[static_cast<std::size_t>(t)]) >= 0.90);
}

TEST_CASE("observer reports every step") {
    const auto scene = generate(scenario("translate", 2));
    std::vector<TrackStep> steps;
    PipelineConfig c;
    c.long_term_enabled = true;
    c.memory_interval = 1;
    track_clip(clip_of(scene.video, 1, 30), scene.gt[0], c, [&](const TrackStep& s) { steps.push_back(s); });
    REQUIRE(steps.size() == 30);
    for (std::size_t i = 0; i < steps.size(); ++i) {
        CHECK(steps[i].step == static_cast<int>(i));
        CHECK(steps[i].frame_index == static_cast<int>(i) + 1);
        CHECK(steps[i].working_size <= 8);
        CHECK(steps[i].long_term_size <= 64);
        CHECK(steps[i].mean_soft_label >= 0.0);
        CHECK(steps[i].mean_soft_label <= 1.0);
    }
    CHECK(steps.back().long_term_size > 0);
}

TEST_CASE("propagation structure") {
    const auto scene = generate(scenario("occlusion", 3));
    const auto& v = scene.video;
    SUBCASE("key frame output is the key mask") {
        const auto out = propagate(v, 12, scene.gt[11], PipelineConfig{});
        REQUIRE(out.size() == 30);
        CHECK(out[11] == scene.gt[11]);
    }
    SUBCASE("k = 1 equals forward tracking") {
        const auto out = propagate(v, 1, scene.gt[0], PipelineConfig{});
        CHECK(out == track_clip(clip_of(v, 1, 30), scene.gt[0], PipelineConfig{}));
    }
    SUBCASE("serial and concurrent schedules agree") {
        const auto a = propagate(v, 15, scene.gt[14], PipelineConfig{}, Schedule::Serial);
        const auto b = propagate(v, 15, scene.gt[14], PipelineConfig{}, Schedule::Concurrent);
        CHECK(a == b);
    }
    SUBCASE("time reversal") {
        const auto a = propagate(v, 10, scene.gt[9], PipelineConfig{});
        const auto b = propagate(reversed(v), 21, scene.gt[9], PipelineConfig{});
        for (int t = 1; t <= 30; ++t) CHECK(a[static_cast<std::size_t>(t - 1)] == b[static_cast<std::size_t>(30 - t)]);
    }
    SUBCASE("single frame") {
        const VideoSequence one({v.frame(1)}, v.expression());
        const auto out = propagate(one, 1, scene.gt[0], PipelineConfig{});
        REQUIRE(out.size() == 1);
        CHECK(out[0] == scene.gt[0]);
    }
    SUBCASE("bad key frame or mask") {
        CHECK_THROWS_AS(propagate(v, 31, scene.gt[0], PipelineConfig{}), Error);
        CHECK_THROWS_AS(propagate(v, 1, BinaryMask(10, 10), PipelineConfig{}), Error);
    }
}
