#include "findtrack/pipeline.hpp"

#include "findtrack/image_io.hpp"

#include <unistd.h>

#include <chrono>
#include <fstream>

namespace fs = std::filesystem;

namespace findtrack {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

MaskSequence empty_masks(const VideoSequence& video) {
    return MaskSequence(static_cast<std::size_t>(video.length()), BinaryMask(video.width(), video.height()));
}

void propagate_into(PipelineResult& result, const VideoSequence& video, int key_frame, const BinaryMask& key_mask,
                    const PipelineConfig& config, Schedule schedule) {
    std::vector<DebugRecord> fw, bw;
    PropagationObservers obs;
    obs.forward = [&fw](const TrackStep& s) { fw.push_back({s.step == 0 ? "key" : "forward", s}); };
    obs.backward = [&bw](const TrackStep& s) {
        if (s.step > 0) bw.push_back({"backward", s});
    };
    const auto start = Clock::now();
    result.masks = propagate(video, key_frame, key_mask, config, schedule, obs);
    result.timings.propagate_ms = ms_since(start);

    result.debug.clear();
    result.debug.insert(result.debug.end(), bw.rbegin(), bw.rend());
    result.debug.insert(result.debug.end(), fw.begin(), fw.end());
}

}  // namespace

PipelineResult run_pipeline(const VideoSequence& video, const PipelineConfig& config, const Backend& backend,
                            Schedule schedule) {
    config.validate();
    PipelineResult result;
    const auto start = Clock::now();
    try {
        result.identification = identify_target(video, config, *backend.segmenter, *backend.aligner);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::AllCandidatesEmpty) throw;
    }
    result.timings.identify_ms = ms_since(start);
    if (!result.identification) {
        result.empty_target = true;
        result.masks = empty_masks(video);
        return result;
    }
    propagate_into(result, video, result.identification->key_frame, result.identification->key_mask, config,
                   schedule);
    return result;
}

PipelineResult run_with_key_frame(const VideoSequence& video, int key_frame, const PipelineConfig& config,
                                  const Backend& backend, Schedule schedule) {
    config.validate();
    if (key_frame < 1 || key_frame > video.length()) {
        throw Error(ErrorCode::KeyFrameOutOfRange, "key frame " + std::to_string(key_frame) + " outside 1.." +
                                                       std::to_string(video.length()));
    }
    PipelineResult result;
    const auto start = Clock::now();
    const int indices[] = {key_frame};
    auto records = score_candidates(video, indices, config, *backend.segmenter, *backend.aligner);
    result.timings.identify_ms = ms_since(start);
    IdentificationResult id;
    id.key_frame = key_frame;
    id.key_mask = records.front().scored.mask;
    id.candidates = std::move(records);
    result.identification = std::move(id);
    propagate_into(result, video, key_frame, result.identification->key_mask, config, schedule);
    return result;
}

nlohmann::ordered_json config_json(const PipelineConfig& config) {
    nlohmann::ordered_json j;
    j["num_candidates"] = config.num_candidates;
    j["w1"] = config.w1;
    j["w2"] = config.w2;
    j["memory_interval"] = config.memory_interval;
    j["long_term"] = config.long_term_enabled;
    j["backend"] = config.backend;
    return j;
}

PipelineConfig config_from_json(const nlohmann::json& doc) {
    try {
        PipelineConfig c;
        c.num_candidates = doc.at("num_candidates").get<int>();
        c.w1 = doc.at("w1").get<double>();
        c.w2 = doc.at("w2").get<double>();
        c.memory_interval = doc.at("memory_interval").get<int>();
        c.long_term_enabled = doc.at("long_term").get<bool>();
        c.backend = doc.at("backend").get<std::string>();
        c.validate();
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::UnsupportedFormat, std::string("malformed config: ") + e.what());
    }
}

nlohmann::ordered_json run_manifest(const RunInputs& inputs, const PipelineConfig& config,
                                    const PipelineResult& result) {
    nlohmann::ordered_json m;
    m["config"] = config_json(config);
    m["text"] = inputs.text;
    m["frames"] = fs::absolute(inputs.frames_dir).lexically_normal().string();
    m["num_frames"] = result.masks.size();
    m["empty_target"] = result.empty_target;
    if (result.identification) {
        const auto diag = diagnostics_json(*result.identification);
        m["key_frame"] = diag["key_frame"];
        m["candidates"] = diag["candidates"];
    } else {
        m["key_frame"] = nullptr;
        m["candidates"] = nlohmann::ordered_json::array();
    }
    nlohmann::ordered_json t;
    t["load"] = result.timings.load_ms;
    t["identify"] = result.timings.identify_ms;
    t["propagate"] = result.timings.propagate_ms;
    t["write"] = result.timings.write_ms;
    m["timings_ms"] = std::move(t);
    nlohmann::ordered_json o;
    o["masks"] = "masks";
    o["manifest"] = "manifest.json";
    m["outputs"] = std::move(o);
    return m;
}

namespace {

void write_json(const fs::path& path, const nlohmann::ordered_json& doc) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out << doc.dump(2) << '\n';
    if (!out) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

nlohmann::ordered_json debug_json(const DebugRecord& r) {
    nlohmann::ordered_json j;
    j["frame"] = r.step.frame_index;
    j["direction"] = r.direction;
    j["step"] = r.step.step;
    j["mean_soft_label"] = r.step.mean_soft_label;
    j["working_size"] = r.step.working_size;
    j["long_term_size"] = r.step.long_term_size;
    j["wrote"] = r.step.wrote;
    return j;
}

}  // namespace

void write_run(const fs::path& out_dir, const RunInputs& inputs, const PipelineConfig& config,
               PipelineResult& result, bool debug) {
    const auto start = Clock::now();
    fs::path target = fs::absolute(out_dir).lexically_normal();
    if (target.filename().empty()) target = target.parent_path();
    const fs::path parent = target.parent_path();
    const std::string stem = target.filename().string();
    const std::string tag = std::to_string(::getpid());
    const fs::path staging = parent / ("." + stem + ".tmp-" + tag);
    const fs::path previous = parent / ("." + stem + ".old-" + tag);
    try {
        fs::create_directories(parent);
        fs::remove_all(staging);
        fs::create_directories(staging);
        write_mask_dir(result.masks, staging / "masks");
        if (debug) {
            fs::create_directories(staging / "debug");
            for (const auto& r : result.debug) {
                write_json(staging / "debug" / frame_file_name(r.step.frame_index, ".json"), debug_json(r));
            }
        }
        result.timings.write_ms = ms_since(start);
        auto manifest = run_manifest(inputs, config, result);
        if (debug) manifest["outputs"]["debug"] = "debug";
        write_json(staging / "manifest.json", manifest);

        if (fs::exists(target)) fs::rename(target, previous);
        fs::rename(staging, target);
        fs::remove_all(previous);
    } catch (const fs::filesystem_error& e) {
        std::error_code ignore;
        fs::remove_all(staging, ignore);
        if (!fs::exists(target, ignore) && fs::exists(previous, ignore)) fs::rename(previous, target, ignore);
        throw Error(ErrorCode::IoError, e.what());
    } catch (...) {
        std::error_code ignore;
        fs::remove_all(staging, ignore);
        throw;
    }
}

}  // namespace findtrack
