#include "findtrack/synthgen.hpp"

#include "findtrack/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

namespace findtrack {

std::pair<int, int> Trajectory::at(int t) const {
    const double dt = static_cast<double>(t - 1);
    double px = x + vx * dt;
    double py = y + vy * dt;
    if (period > 0.0) {
        const double phase = std::sin(2.0 * std::numbers::pi * dt / period);
        px += amplitude_x * phase;
        py += amplitude_y * phase;
    }
    return {static_cast<int>(std::lround(px)), static_cast<int>(std::lround(py))};
}

namespace {

int last_frame(int exit_frame, int num_frames) { return exit_frame == 0 ? num_frames : exit_frame; }

bool present(int entry, int exit, int t) { return t >= entry && t <= exit; }

Rgb object_color(const SceneObject& o, int t) {
    if (o.recolor && t >= o.recolor_from && t <= o.recolor_to) return *o.recolor;
    return o.color;
}

std::optional<ColorName> named_color(Rgb c) {
    for (ColorName n : kAllColors) {
        if (canonical_rgb(n) == c) return n;
    }
    return std::nullopt;
}

void spec_error(const std::string& msg) { throw Error(ErrorCode::SpecError, msg); }

void validate(const SceneSpec& spec) {
    if (spec.width < 1 || spec.height < 1) spec_error("frame size must be positive");
    if (spec.num_frames < 1) spec_error("num_frames must be positive");
    if (spec.noise < 0 || spec.noise > 16) spec_error("noise must lie in [0, 16]");
    if (spec.objects.empty()) spec_error("scene has no objects");
    if (spec.target_index < 0 || spec.target_index >= static_cast<int>(spec.objects.size())) {
        spec_error("target_index out of range");
    }
    const auto check_span = [&](int entry, int exit, const std::string& what) {
        const int e = last_frame(exit, spec.num_frames);
        if (entry < 1 || entry > e || e > spec.num_frames) {
            spec_error(what + ": need 1 <= entry <= exit <= T");
        }
    };
    for (std::size_t i = 0; i < spec.objects.size(); ++i) {
        const auto& o = spec.objects[i];
        if (o.size < 1) spec_error("object size must be positive");
        if (o.highlight < 0 || o.highlight >= o.size) spec_error("highlight must be smaller than the object");
        check_span(o.entry_frame, o.exit_frame, "object " + std::to_string(i));
    }
    for (std::size_t i = 0; i < spec.occluders.size(); ++i) {
        const auto& b = spec.occluders[i];
        if (b.width < 1 || b.height < 1) spec_error("occluder size must be positive");
        check_span(b.entry_frame, b.exit_frame, "occluder " + std::to_string(i));
    }
    const auto& target = spec.objects[static_cast<std::size_t>(spec.target_index)];
    if (!named_color(target.color)) spec_error("target colour has no name in the expression grammar");
    if (target.shape == Shape::Notched) spec_error("target shape has no name in the expression grammar");
    if (!spec.distractors) {
        for (std::size_t i = 0; i < spec.objects.size(); ++i) {
            if (static_cast<int>(i) != spec.target_index && spec.objects[i].color == target.color) {
                spec_error("target colour is shared with object " + std::to_string(i));
            }
        }
    }
}

BinaryMask object_raster(const SceneObject& o, int t, int w, int h) {
    const auto [x, y] = o.path.at(t);
    return rasterize_shape(o.shape, o.size, x, y, w, h);
}

BinaryMask highlight_raster(const SceneObject& o, int t, int w, int h) {
    const auto [x, y] = o.path.at(t);
    const int off = (o.size - o.highlight) / 2;
    return rasterize_shape(Shape::Square, o.highlight, x + off, y + off, w, h);
}

BinaryMask occluder_raster(const Occluder& b, int t, int w, int h) {
    const auto [x0, y0] = b.path.at(t);
    BinaryMask m(w, h);
    for (int y = std::max(0, y0); y < std::min(h, y0 + b.height); ++y) {
        for (int x = std::max(0, x0); x < std::min(w, x0 + b.width); ++x) m.set(x, y, true);
    }
    return m;
}

void paint(Frame& f, const BinaryMask& m, Rgb c) {
    for (int y = 0; y < m.height(); ++y) {
        for (int x = 0; x < m.width(); ++x) {
            if (m(x, y)) f.set(x, y, c);
        }
    }
}

}  // namespace

Rgb off_tone(ColorName c) {
    const Rgb base = canonical_rgb(c);
    std::uint8_t ch[3] = {base.r, base.g, base.b};
    bool first = true;
    for (auto& v : ch) {
        if (v == 255) {
            v = first ? 200 : 245;
            first = false;
        } else {
            v = 10;
        }
    }
    return {ch[0], ch[1], ch[2]};
}

GeneratedScene generate(const SceneSpec& spec) {
    validate(spec);
    const int w = spec.width;
    const int h = spec.height;
    const int T = spec.num_frames;
    const auto& target = spec.objects[static_cast<std::size_t>(spec.target_index)];
    const double full_area = static_cast<double>(shape_area(target.shape, target.size));

    Lcg64 rng(spec.seed);
    std::vector<Frame> frames;
    MaskSequence gt;
    std::vector<double> visibility;
    frames.reserve(static_cast<std::size_t>(T));
    gt.reserve(static_cast<std::size_t>(T));

    for (int t = 1; t <= T; ++t) {
        Frame f(t, w, h);
        f.fill(kBackground);
        std::vector<std::pair<BinaryMask, Rgb>> layers;
        BinaryMask target_mask(w, h);
        for (std::size_t i = 0; i < spec.objects.size(); ++i) {
            const auto& o = spec.objects[i];
            if (!present(o.entry_frame, last_frame(o.exit_frame, T), t)) continue;
            BinaryMask m = object_raster(o, t, w, h);
            const Rgb c = object_color(o, t);
            if (!spec.distractors) {
                for (const auto& [prev, pc] : layers) {
                    if (pc == c && (prev.bits() && m.bits()).any()) {
                        spec_error("objects of identical colour overlap at frame " + std::to_string(t));
                    }
                }
            }
            if (static_cast<int>(i) > spec.target_index) target_mask.bits() = target_mask.bits() && !m.bits();
            if (static_cast<int>(i) == spec.target_index) target_mask = m;
            paint(f, m, c);
            layers.emplace_back(std::move(m), c);
            if (o.highlight > 0) {
                BinaryMask hl = highlight_raster(o, t, w, h);
                paint(f, hl, canonical_rgb(ColorName::White));
                layers.emplace_back(std::move(hl), canonical_rgb(ColorName::White));
            }
        }
        for (const auto& b : spec.occluders) {
            if (!present(b.entry_frame, last_frame(b.exit_frame, T), t)) continue;
            const BinaryMask m = occluder_raster(b, t, w, h);
            if (!spec.distractors) {
                for (const auto& [prev, pc] : layers) {
                    if (pc == b.color && (prev.bits() && m.bits()).any()) {
                        spec_error("occluder overlaps an object of identical colour at frame " + std::to_string(t));
                    }
                }
            }
            target_mask.bits() = target_mask.bits() && !m.bits();
            paint(f, m, b.color);
        }
        if (spec.noise > 0) {
            std::vector<std::uint8_t> px = f.pixels();
            for (auto& v : px) {
                const int jittered = static_cast<int>(v) + rng.uniform_int(-spec.noise, spec.noise);
                v = static_cast<std::uint8_t>(std::clamp(jittered, 0, 255));
            }
            f = Frame(t, w, h, std::move(px));
        }
        visibility.push_back(static_cast<double>(target_mask.area()) / full_area);
        frames.push_back(std::move(f));
        gt.push_back(std::move(target_mask));
    }

    Expression expr{*named_color(target.color), target.shape};
    return GeneratedScene{spec, VideoSequence(std::move(frames), expr.text()), std::move(gt), std::move(visibility)};
}

namespace {

constexpr std::array<ColorName, 4> kPalette{ColorName::Red, ColorName::Green, ColorName::Blue, ColorName::Yellow};

template <typename T, std::size_t N>
T pick(Lcg64& rng, const std::array<T, N>& items) {
    return items[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(N) - 1))];
}

// Palette colours other than the excluded ones, in a seeded order.
std::vector<ColorName> other_colors(Lcg64& rng, std::initializer_list<ColorName> exclude) {
    std::vector<ColorName> out;
    for (ColorName c : kPalette) {
        if (std::find(exclude.begin(), exclude.end(), c) == exclude.end()) out.push_back(c);
    }
    for (std::size_t i = out.size(); i > 1; --i) {
        std::swap(out[i - 1], out[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i) - 1))]);
    }
    return out;
}

// The frame is cut into three horizontal bands of height/3 so that objects in
// different bands never meet.
Trajectory in_band(Lcg64& rng, const SceneSpec& spec, int band, int size, double vx) {
    const int band_h = spec.height / 3;
    const int slack = std::max(0, band_h - size);
    Trajectory p;
    p.y = band * band_h + rng.uniform_int(slack / 4, slack - slack / 4);
    const int travel = static_cast<int>(std::ceil(std::abs(vx) * (spec.num_frames - 1)));
    const int lo = 4 + (vx < 0 ? travel : 0);
    const int hi = std::max(lo, spec.width - size - 4 - (vx > 0 ? travel : 0));
    p.x = rng.uniform_int(lo, hi);
    p.vx = vx;
    return p;
}

SceneObject make_object(ColorName c, Shape s, int size, Trajectory path) {
    SceneObject o;
    o.color = canonical_rgb(c);
    o.shape = s;
    o.size = size;
    o.path = path;
    return o;
}

std::array<int, 3> band_order(Lcg64& rng) {
    std::array<int, 3> b{0, 1, 2};
    for (int i = 2; i > 0; --i) std::swap(b[static_cast<std::size_t>(i)], b[static_cast<std::size_t>(rng.uniform_int(0, i))]);
    return b;
}

SceneSpec make_static(Lcg64& rng, SceneSpec s) {
    const int size = rng.uniform_int(24, 36);
    Trajectory p;
    p.x = rng.uniform_int(16, s.width - size - 16);
    p.y = rng.uniform_int(16, s.height - size - 16);
    s.objects.push_back(make_object(pick(rng, kPalette), pick(rng, kNamedShapes), size, p));
    return s;
}

SceneSpec make_translate(Lcg64& rng, SceneSpec s) {
    const ColorName c = pick(rng, kPalette);
    const auto bands = band_order(rng);
    s.objects.push_back(make_object(c, pick(rng, kNamedShapes), 28, in_band(rng, s, bands[0], 28, 2.0)));
    const auto others = other_colors(rng, {c});
    s.objects.push_back(make_object(others[0], pick(rng, kNamedShapes), 20, in_band(rng, s, bands[1], 20, 0.0)));
    s.noise = 4;
    return s;
}

SceneSpec make_enter_late(Lcg64& rng, SceneSpec s) {
    const int T = s.num_frames;
    const ColorName c = pick(rng, kPalette);
    const auto bands = band_order(rng);
    const double vx = rng.uniform_int(0, 1) == 0 ? -1.0 : 1.0;
    SceneObject target = make_object(c, pick(rng, kNamedShapes), 26, in_band(rng, s, bands[0], 26, vx));
    target.entry_frame = rng.uniform_int(T / 3, 2 * T / 3);
    s.objects.push_back(target);
    const auto others = other_colors(rng, {c});
    const int extra = rng.uniform_int(1, 2);
    for (int i = 0; i < extra; ++i) {
        s.objects.push_back(make_object(others[static_cast<std::size_t>(i)], pick(rng, kNamedShapes), 22,
                                        in_band(rng, s, bands[static_cast<std::size_t>(i + 1)], 22, 0.5)));
    }
    s.noise = 4;
    return s;
}

SceneSpec make_occlusion(Lcg64& rng, SceneSpec s) {
    const ColorName c = pick(rng, kPalette);
    const auto bands = band_order(rng);
    const int size = 24;
    Trajectory p = in_band(rng, s, bands[0], size, 1.0);
    p.x = rng.uniform_int(24, 36);
    s.objects.push_back(make_object(c, rng.uniform_int(0, 1) == 0 ? Shape::Square : Shape::Circle, size, p));
    const auto others = other_colors(rng, {c});
    s.objects.push_back(make_object(others[0], pick(rng, kNamedShapes), 20, in_band(rng, s, bands[1], 20, 0.0)));
    // A full-height bar sweeping left at 3 px/frame; its left edge sits 2 px left
    // of the target's at the crossing frame, so the target is more than half
    // hidden for several frames around it.
    const int crossing = rng.uniform_int(s.num_frames * 2 / 5, s.num_frames * 3 / 5);
    Occluder bar;
    bar.width = size + 4;
    bar.height = s.height;
    bar.path.vx = -3.0;
    bar.path.x = p.x + (crossing - 1) - 2 + 3 * (crossing - 1);
    s.occluders.push_back(bar);
    s.noise = 4;
    return s;
}

// Traps sit on the default five-candidate grid. Object A is a larger circle that
// turns into an off-tone of the target colour around one candidate frame: it fills
// its shape perfectly but its colour histogram misses the text prototype. Object B
// is a larger notched square in the exact target colour around another candidate
// frame: its colour and fill match the text but its outline does not. A white
// highlight keeps the target's own shape fit just under perfect.
SceneSpec make_distractor(Lcg64& rng, SceneSpec s) {
    const int T = s.num_frames;
    std::array<int, 5> grid{};
    for (int i = 0; i < 5; ++i) grid[static_cast<std::size_t>(i)] = i * (T - 1) / 4 + 1;
    const int ia = rng.uniform_int(0, 4);
    int ib = rng.uniform_int(0, 3);
    if (ib >= ia) ++ib;
    const int a = grid[static_cast<std::size_t>(ia)];
    const int b = grid[static_cast<std::size_t>(ib)];

    const ColorName c = pick(rng, kPalette);
    const auto bands = band_order(rng);
    SceneObject target = make_object(c, Shape::Circle, 20,
                                     in_band(rng, s, bands[0], 20, rng.uniform_int(0, 1) == 0 ? -1.0 : 1.0));
    target.highlight = 4;
    s.objects.push_back(target);

    const auto others = other_colors(rng, {c});
    SceneObject trap_a = make_object(others[0], Shape::Circle, 28, in_band(rng, s, bands[1], 28, 0.5));
    trap_a.recolor = off_tone(c);
    trap_a.recolor_from = std::max(1, a - 2);
    trap_a.recolor_to = std::min(T, a + 2);
    s.objects.push_back(trap_a);

    SceneObject trap_b = make_object(c, Shape::Notched, 28, in_band(rng, s, bands[2], 28, 0.0));
    trap_b.entry_frame = std::max(1, b - 2);
    trap_b.exit_frame = std::min(T, b + 2);
    s.objects.push_back(trap_b);

    s.noise = 2;
    s.distractors = true;
    return s;
}

SceneSpec make_exit_and_similar(Lcg64& rng, SceneSpec s) {
    const int T = s.num_frames;
    const ColorName c = pick(rng, kPalette);
    const Shape shape = pick(rng, kNamedShapes);
    const auto bands = band_order(rng);
    const int size = 24;
    Trajectory p = in_band(rng, s, bands[0], size, 0.0);
    p.x = rng.uniform_int(40, 56);
    p.vx = 4.0;
    s.objects.push_back(make_object(c, shape, size, p));
    // First frame at which the target has fully left the canvas.
    const int gone = static_cast<int>(std::ceil((s.width - p.x) / p.vx)) + 1;
    SceneObject twin = make_object(c, shape, size, in_band(rng, s, bands[1], size, 1.0));
    twin.entry_frame = std::min(T, gone + 2);
    s.objects.push_back(twin);
    s.noise = 4;
    s.distractors = true;
    return s;
}

}  // namespace

const std::vector<std::string>& scenario_names() {
    static const std::vector<std::string> names{"static",    "translate",  "enter_late",
                                                "occlusion", "distractor", "exit_and_similar"};
    return names;
}

SceneSpec scenario(const std::string& name, std::uint64_t seed) {
    Lcg64 rng(seed);
    SceneSpec s;
    s.scenario = name;
    s.seed = seed;
    if (name == "static") return make_static(rng, s);
    if (name == "translate") return make_translate(rng, s);
    if (name == "enter_late") return make_enter_late(rng, s);
    if (name == "occlusion") return make_occlusion(rng, s);
    if (name == "distractor") return make_distractor(rng, s);
    if (name == "exit_and_similar") return make_exit_and_similar(rng, s);
    throw Error(ErrorCode::UnknownScenario, "unknown scenario '" + name + "'");
}

namespace {

nlohmann::ordered_json rgb_json(Rgb c) { return nlohmann::ordered_json::array({c.r, c.g, c.b}); }

nlohmann::ordered_json path_json(const Trajectory& p) {
    nlohmann::ordered_json j;
    j["x"] = p.x;
    j["y"] = p.y;
    j["vx"] = p.vx;
    j["vy"] = p.vy;
    j["amplitude_x"] = p.amplitude_x;
    j["amplitude_y"] = p.amplitude_y;
    j["period"] = p.period;
    return j;
}

}  // namespace

nlohmann::ordered_json scene_json(const GeneratedScene& scene) {
    const SceneSpec& s = scene.spec;
    const int T = s.num_frames;
    nlohmann::ordered_json doc;
    doc["scenario"] = s.scenario;
    doc["seed"] = s.seed;
    doc["expression"] = scene.video.expression();
    doc["width"] = s.width;
    doc["height"] = s.height;
    doc["num_frames"] = T;
    doc["target_index"] = s.target_index;
    doc["noise"] = s.noise;
    doc["distractors"] = s.distractors;
    doc["objects"] = nlohmann::ordered_json::array();
    for (const auto& o : s.objects) {
        nlohmann::ordered_json j;
        j["color"] = rgb_json(o.color);
        j["shape"] = shape_name(o.shape);
        j["size"] = o.size;
        j["trajectory"] = path_json(o.path);
        j["entry_frame"] = o.entry_frame;
        j["exit_frame"] = last_frame(o.exit_frame, T);
        if (o.recolor) {
            j["recolor"] = {{"color", rgb_json(*o.recolor)}, {"from", o.recolor_from}, {"to", o.recolor_to}};
        }
        if (o.highlight > 0) j["highlight"] = o.highlight;
        doc["objects"].push_back(std::move(j));
    }
    doc["occluders"] = nlohmann::ordered_json::array();
    for (const auto& b : s.occluders) {
        nlohmann::ordered_json j;
        j["color"] = rgb_json(b.color);
        j["width"] = b.width;
        j["height"] = b.height;
        j["trajectory"] = path_json(b.path);
        j["entry_frame"] = b.entry_frame;
        j["exit_frame"] = last_frame(b.exit_frame, T);
        doc["occluders"].push_back(std::move(j));
    }
    doc["meta"]["visibility"] = scene.visibility;
    return doc;
}

void write_scene(const GeneratedScene& scene, const std::filesystem::path& dir) {
    write_frame_dir(scene.video, dir / "frames");
    write_mask_dir(scene.gt, dir / "gt");
    std::ofstream out(dir / "scene.json", std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + (dir / "scene.json").string());
    out << scene_json(scene).dump(2) << '\n';
    if (!out) throw Error(ErrorCode::IoError, "failed writing " + (dir / "scene.json").string());
}

}  // namespace findtrack
