#include "findtrack/backends.hpp"
#include "findtrack/identify.hpp"
#include "findtrack/synthgen.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace findtrack;

namespace {

Frame canvas(int w, int h) {
    Frame f(1, w, h);
    f.fill(kBackground);
    return f;
}

void draw(Frame& f, const BinaryMask& m, Rgb c) {
    for (int y = 0; y < m.height(); ++y) {
        for (int x = 0; x < m.width(); ++x) {
            if (m(x, y)) f.set(x, y, c);
        }
    }
}

const Rgb kRed{255, 0, 0};

}  // namespace

TEST_CASE("segmenter finds a fully visible object with confidence 1") {
    for (Shape s : kNamedShapes) {
        Frame f = canvas(64, 64);
        const auto m = rasterize_shape(s, 21, 9, 14, 64, 64);
        draw(f, m, kRed);
        ColorSegmenter seg;
        const auto r = seg.segment(f, "the red " + std::string(shape_name(s)));
        CHECK(r.mask == m);
        CHECK(r.confidence == 1.0);
        CHECK(seg.segment(f, "the red any").confidence == 1.0);
    }
}

TEST_CASE("segmenter on a half-occluded square") {
    SceneSpec spec;
    spec.width = 48;
    spec.height = 48;
    spec.num_frames = 1;
    SceneObject sq;
    sq.color = kRed;
    sq.shape = Shape::Square;
    sq.size = 20;
    sq.path.x = 10;
    sq.path.y = 12;
    spec.objects.push_back(sq);
    Occluder bar;
    bar.width = 10;
    bar.height = 48;
    bar.path.x = 20;
    spec.occluders.push_back(bar);
    const auto scene = generate(spec);

    const auto r = ColorSegmenter().segment(scene.video.frame(1), "the red square");
    CHECK(r.mask == scene.gt[0]);

    // brute force: visible pixels against the square spanned by the longer bbox edge
    int visible = 0, x0 = 48, x1 = -1, y0 = 48, y1 = -1;
    for (int y = 0; y < 48; ++y) {
        for (int x = 0; x < 48; ++x) {
            if (scene.video.frame(1).at(x, y) != kRed) continue;
            ++visible;
            x0 = std::min(x0, x);
            x1 = std::max(x1, x);
            y0 = std::min(y0, y);
            y1 = std::max(y1, y);
        }
    }
    const int side = std::max(x1 - x0 + 1, y1 - y0 + 1);
    CHECK(visible == 200);
    CHECK(r.confidence == doctest::Approx(static_cast<double>(visible) / (side * side)));
    CHECK(r.confidence == doctest::Approx(0.5));
}

TEST_CASE("segmenter confidence falls as occlusion grows") {
    double last = 2.0;
    for (int hidden = 0; hidden <= 15; hidden += 3) {
        Frame f = canvas(40, 40);
        draw(f, rasterize_shape(Shape::Square, 16, 10, 10, 40, 40), kRed);
        for (int y = 0; y < 40; ++y) {
            for (int x = 26 - hidden; x < 26; ++x) f.set(x, y, {255, 255, 255});
        }
        const double pi = ColorSegmenter().segment(f, "the red square").confidence;
        CHECK(pi < last);
        CHECK(pi >= 0.0);
        CHECK(pi <= 1.0);
        last = pi;
    }
}

TEST_CASE("segmenter keeps the largest component, earliest on ties") {
    Frame f = canvas(30, 10);
    draw(f, rasterize_shape(Shape::Square, 4, 20, 2, 30, 10), kRed);
    draw(f, rasterize_shape(Shape::Square, 4, 2, 5, 30, 10), kRed);
    const auto tie = ColorSegmenter().segment(f, "the red square").mask;
    // the right square starts on an earlier row
    CHECK(tie == rasterize_shape(Shape::Square, 4, 20, 2, 30, 10));

    draw(f, rasterize_shape(Shape::Square, 5, 10, 4, 30, 10), kRed);
    CHECK(ColorSegmenter().segment(f, "the red square").mask == rasterize_shape(Shape::Square, 5, 10, 4, 30, 10));
}

TEST_CASE("segmenter colour radius is 60") {
    Frame f = canvas(3, 1);
    f.set(0, 0, {255 - 60, 0, 0});
    f.set(2, 0, {255 - 61, 0, 0});
    const auto m = ColorSegmenter().segment(f, "the red any").mask;
    CHECK(m(0, 0));
    CHECK(!m(2, 0));
}

TEST_CASE("segmenter without a match") {
    const auto r = ColorSegmenter().segment(canvas(8, 8), "the blue circle");
    CHECK(r.mask.empty());
    CHECK(r.confidence == 0.0);
    CHECK_THROWS_AS(ColorSegmenter().segment(canvas(8, 8), "the crimson blob"), Error);
}

TEST_CASE("segmenter is deterministic") {
    const auto scene = generate(scenario("distractor", 3));
    ColorSegmenter seg;
    for (int t : {1, 8, 15}) {
        const auto a = seg.segment(scene.video.frame(t), scene.video.expression());
        const auto b = seg.segment(scene.video.frame(t), scene.video.expression());
        CHECK(a.mask == b.mask);
        CHECK(a.confidence == b.confidence);
    }
}

TEST_CASE("masked embedding of a disk matches a direct computation") {
    Frame f = canvas(50, 50);
    const auto m = rasterize_shape(Shape::Circle, 24, 13, 7, 50, 50);
    draw(f, m, kRed);
    const auto e = histogram_embed_masked(f, m);
    REQUIRE(e.size() == 128);

    Embedding expected = Embedding::Zero(128);
    expected[4 * 25] = 1.0;  // r in bin 4, g and b in bin 0
    double area = 0, edges = 0;
    for (int y = 0; y < 50; ++y) {
        for (int x = 0; x < 50; ++x) {
            if (!m(x, y)) continue;
            area += 1;
            edges += !m(x - 1, y) + !m(x + 1, y) + !m(x, y - 1) + !m(x, y + 1);
        }
    }
    expected[125] = area / (24.0 * 24.0);
    expected[126] = 0.25;
    expected[127] = edges * edges / (4.0 * std::numbers::pi * area);
    CHECK((e - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("masked embedding is translation invariant") {
    for (Shape s : kNamedShapes) {
        Frame a = canvas(60, 60);
        Frame b = canvas(60, 60);
        const auto ma = rasterize_shape(s, 17, 3, 5, 60, 60);
        const auto mb = rasterize_shape(s, 17, 30, 41, 60, 60);
        draw(a, ma, {0, 255, 0});
        draw(b, mb, {0, 255, 0});
        CHECK(histogram_embed_masked(a, ma) == histogram_embed_masked(b, mb));
    }
}

TEST_CASE("masked embedding rejects empty and mismatched masks") {
    const Frame f = canvas(8, 8);
    CHECK_THROWS_AS(histogram_embed_masked(f, BinaryMask(8, 8)), Error);
    try {
        histogram_embed_masked(f, BinaryMask(8, 8));
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::EmptyMask);
    }
    try {
        histogram_embed_masked(f, BinaryMask::full(7, 8));
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::DimensionMismatch);
    }
}

TEST_CASE("text embedding golden values") {
    HistogramAligner aligner;
    CHECK(aligner.embed_dim() == 128);
    const auto sq = aligner.embed_text("the red square");
    Embedding expected = Embedding::Zero(128);
    expected[100] = 1.0;
    expected[125] = 1.0;
    expected[126] = 0.25;
    expected[127] = 4.0 / std::numbers::pi;  // (4 * 64)^2 / (4 pi 64^2)
    CHECK((sq - expected).cwiseAbs().maxCoeff() < 1e-12);

    // yellow lands in bins (4, 4, 0)
    CHECK(aligner.embed_text("the yellow square")[4 * 25 + 4 * 5] == 1.0);

    const Embedding any = aligner.embed_text("the blue any");
    const Embedding mean = (aligner.embed_text("the blue circle") + aligner.embed_text("the blue square") +
                            aligner.embed_text("the blue triangle")) /
                           3.0;
    CHECK((any - mean).cwiseAbs().maxCoeff() < 1e-12);
    CHECK_THROWS_AS(aligner.embed_text("the crimson blob"), Error);
}

TEST_CASE("alignment prefers the named shape and colour") {
    HistogramAligner aligner;
    Frame f = canvas(64, 64);
    const auto m = rasterize_shape(Shape::Circle, 30, 10, 10, 64, 64);
    draw(f, m, kRed);
    const auto img = aligner.embed_masked_image(f, m);
    const double circle = alignment_score(img, aligner.embed_text("the red circle"));
    CHECK(circle > alignment_score(img, aligner.embed_text("the red square")));
    CHECK(circle > alignment_score(img, aligner.embed_text("the red triangle")));
    CHECK(circle > alignment_score(img, aligner.embed_text("the green circle")));
    CHECK(circle > 0.99);
}

TEST_CASE("off-tone stays inside the colour radius but leaves the histogram bin") {
    for (ColorName c : {ColorName::Red, ColorName::Green, ColorName::Blue, ColorName::Yellow}) {
        const Rgb base = canonical_rgb(c);
        const Rgb off = off_tone(c);
        const int dr = base.r - off.r, dg = base.g - off.g, db = base.b - off.b;
        CHECK(dr * dr + dg * dg + db * db <= 60 * 60);

        Frame f = canvas(20, 20);
        const auto m = rasterize_shape(Shape::Circle, 12, 4, 4, 20, 20);
        draw(f, m, off);
        const auto seg = ColorSegmenter().segment(f, "the " + std::string(color_name(c)) + " circle");
        CHECK(seg.mask == m);
        CHECK(seg.confidence == 1.0);
        HistogramAligner aligner;
        const auto e = aligner.embed_masked_image(f, m);
        const auto t = aligner.embed_text("the " + std::string(color_name(c)) + " circle");
        CHECK(e.head(125).dot(t.head(125)) == 0.0);
    }
}

TEST_CASE("backend selectors") {
    const auto b = make_backend("builtin:color");
    CHECK(b.segmenter->thread_safe());
    CHECK(b.aligner->embed_dim() == 128);
    CHECK(make_backend("builtin").aligner->embed_dim() == 128);
    for (const char* bad : {"", "magic", "builtin:other", "tcp:nohost", "stdio:"}) {
        try {
            make_backend(bad);
            FAIL("accepted " << bad);
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::InvalidArgument);
        }
    }
}
