#pragma once

#include "findtrack/core.hpp"
#include "findtrack/shapes.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace findtrack {

// 64-bit LCG (Knuth MMIX constants); scenes are bit-reproducible from the seed.
class Lcg64 {
public:
    static constexpr std::uint64_t kMultiplier = 6364136223846793005ULL;
    static constexpr std::uint64_t kIncrement = 1442695040888963407ULL;

    explicit Lcg64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        state_ = state_ * kMultiplier + kIncrement;
        return state_;
    }
    // [0, 1) from the top 53 bits.
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
    // Inclusive range.
    int uniform_int(int lo, int hi) {
        return lo + static_cast<int>(uniform() * static_cast<double>(hi - lo + 1));
    }

private:
    std::uint64_t state_;
};

// Position of a box's top-left corner at frame t:
//   start + velocity (t - 1) + amplitude sin(2 pi (t - 1) / period)
// rounded to the nearest pixel.
struct Trajectory {
    double x = 0.0;
    double y = 0.0;
    double vx = 0.0;
    double vy = 0.0;
    double amplitude_x = 0.0;
    double amplitude_y = 0.0;
    double period = 0.0;  // 0 disables the sinusoid

    std::pair<int, int> at(int t) const;
};

struct SceneObject {
    Rgb color;
    Shape shape = Shape::Circle;
    int size = 16;
    Trajectory path;
    int entry_frame = 1;
    int exit_frame = 0;  // 0 means the last frame
    // Temporary recolouring over [recolor_from, recolor_to].
    std::optional<Rgb> recolor;
    int recolor_from = 0;
    int recolor_to = -1;
    // White square of this side at the object's centre (a specular highlight).
    int highlight = 0;
};

struct Occluder {
    Rgb color{255, 255, 255};
    int width = 8;
    int height = 8;
    Trajectory path;
    int entry_frame = 1;
    int exit_frame = 0;
};

struct SceneSpec {
    std::string scenario = "custom";
    std::uint64_t seed = 0;
    int width = 128;
    int height = 128;
    int num_frames = 30;
    std::vector<SceneObject> objects;  // drawn in order, later ones on top
    int target_index = 0;
    std::vector<Occluder> occluders;  // drawn above every object
    int noise = 0;                    // per-channel uniform jitter amplitude, 0..16
    bool distractors = false;         // allows colour sharing between objects
};

struct GeneratedScene {
    SceneSpec spec;
    VideoSequence video;
    MaskSequence gt;
    std::vector<double> visibility;  // visible target pixels / full shape area
};

inline constexpr Rgb kBackground{32, 32, 32};

GeneratedScene generate(const SceneSpec& spec);

// Canonical specs: static, translate, enter_late, occlusion, distractor,
// exit_and_similar.
SceneSpec scenario(const std::string& name, std::uint64_t seed);
const std::vector<std::string>& scenario_names();

// Recoloured twin of a canonical colour that still lies within the built-in
// segmenter's colour radius but falls in a different histogram bin.
Rgb off_tone(ColorName c);

nlohmann::ordered_json scene_json(const GeneratedScene& scene);

// Writes frames/, gt/ and scene.json under dir.
void write_scene(const GeneratedScene& scene, const std::filesystem::path& dir);

}  // namespace findtrack
