#pragma once

#include "findtrack/backends.hpp"
#include "findtrack/core.hpp"
#include "findtrack/identify.hpp"
#include "findtrack/propagate.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace findtrack {

struct StageTimings {
    double load_ms = 0.0;
    double identify_ms = 0.0;
    double propagate_ms = 0.0;
    double write_ms = 0.0;
};

struct DebugRecord {
    std::string direction;  // "key", "forward" or "backward"
    TrackStep step;
};

struct PipelineResult {
    MaskSequence masks;
    std::optional<IdentificationResult> identification;  // nullopt when every candidate was empty
    bool empty_target = false;
    std::vector<DebugRecord> debug;  // one per frame, ordered by frame index
    StageTimings timings;
};

// Key-frame identification followed by bidirectional propagation. When no
// candidate yields a mask the result is an all-empty sequence with empty_target set.
PipelineResult run_pipeline(const VideoSequence& video, const PipelineConfig& config, const Backend& backend,
                            Schedule schedule = Schedule::Concurrent);

// Same, but with the key frame forced instead of identified; the key mask comes
// from the segmenter on that frame.
PipelineResult run_with_key_frame(const VideoSequence& video, int key_frame, const PipelineConfig& config,
                                  const Backend& backend, Schedule schedule = Schedule::Concurrent);

nlohmann::ordered_json config_json(const PipelineConfig& config);
PipelineConfig config_from_json(const nlohmann::json& doc);

struct RunInputs {
    std::filesystem::path frames_dir;
    std::string text;
};

nlohmann::ordered_json run_manifest(const RunInputs& inputs, const PipelineConfig& config,
                                    const PipelineResult& result);

// Writes masks/, manifest.json and optionally debug/ into out_dir. Everything is
// staged in a sibling temporary directory and renamed into place, so out_dir is
// either complete or untouched.
void write_run(const std::filesystem::path& out_dir, const RunInputs& inputs, const PipelineConfig& config,
               PipelineResult& result, bool debug);

}  // namespace findtrack
