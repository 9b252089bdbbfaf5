#include "cli.hpp"

#include "findtrack/image_io.hpp"
#include "findtrack/metrics.hpp"
#include "findtrack/pipeline.hpp"
#include "findtrack/synthgen.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <fstream>

namespace fs = std::filesystem;

namespace findtrack {

namespace {

constexpr int kMismatch = 1;
constexpr int kUsageOrIo = 2;
constexpr int kBackendFailure = 3;

int exit_code_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::HandshakeFailure:
        case ErrorCode::ProtocolError:
        case ErrorCode::BackendTimeout:
        case ErrorCode::BackendError:
            return kBackendFailure;
        default:
            return kUsageOrIo;
    }
}

struct InputFlags {
    std::string frames;
    std::string text;
    PipelineConfig config;
    std::string backend;
};

void add_input_flags(CLI::App& cmd, InputFlags& f, bool with_memory) {
    cmd.add_option("--frames", f.frames, "directory of NNNNN.ppm frames")->required();
    cmd.add_option("--text", f.text, "referring expression")->required();
    cmd.add_option("--n", f.config.num_candidates, "number of candidate key frames")->capture_default_str();
    cmd.add_option("--w1", f.config.w1, "weight of the segmenter confidence")->capture_default_str();
    cmd.add_option("--w2", f.config.w2, "weight of the vision-text alignment")->capture_default_str();
    if (with_memory) {
        cmd.add_option("--mem-interval", f.config.memory_interval, "memory write interval")->capture_default_str();
        cmd.add_flag("--long-term", f.config.long_term_enabled, "enable long-term memory consolidation");
    }
    cmd.add_option("--backend", f.backend, "builtin:color, stdio:<command> or tcp:<host>:<port>");
}

void resolve_backend(InputFlags& f) {
    if (!f.backend.empty()) {
        f.config.backend = f.backend;
    } else if (const char* env = std::getenv("FINDTRACK_BACKEND"); env != nullptr && *env != '\0') {
        f.config.backend = env;
    }
}

std::string load_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

PipelineResult execute_run(const RunInputs& inputs, const PipelineConfig& config) {
    config.validate();
    const auto start = std::chrono::steady_clock::now();
    const VideoSequence video = read_frame_dir(inputs.frames_dir, inputs.text);
    const double load_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    const Backend backend = make_backend(config.backend);
    PipelineResult result = run_pipeline(video, config, backend);
    result.timings.load_ms = load_ms;
    return result;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Referring video object segmentation: key-frame identification and mask propagation"};
    app.require_subcommand(1);

    InputFlags run_flags;
    std::string run_out;
    bool run_debug = false;
    auto* run = app.add_subcommand("run", "identify the key frame and propagate its mask to every frame");
    add_input_flags(*run, run_flags, true);
    run->add_option("--out", run_out, "output directory")->required();
    run->add_flag("--debug", run_debug, "write per-frame readout statistics to debug/");

    InputFlags id_flags;
    std::string id_out;
    auto* identify = app.add_subcommand("identify", "print candidate diagnostics and the selected key frame");
    add_input_flags(*identify, id_flags, false);
    identify->add_option("--out", id_out, "directory for key_mask.pgm");

    std::string pred_dir, gt_dir, eval_name = "sequence";
    auto* eval = app.add_subcommand("eval", "score predicted masks against ground truth");
    eval->add_option("--pred", pred_dir, "predicted mask directory")->required();
    eval->add_option("--gt", gt_dir, "ground-truth mask directory")->required();
    eval->add_option("--name", eval_name, "sequence name in the report")->capture_default_str();

    std::string scenario_name, synth_out;
    std::uint64_t seed = 0;
    auto* synth = app.add_subcommand("synth", "generate a synthetic scene with ground truth");
    synth->add_option("--scenario", scenario_name, "static, translate, enter_late, occlusion, distractor or exit_and_similar")
        ->required();
    synth->add_option("--seed", seed, "generator seed")->capture_default_str();
    synth->add_option("--out", synth_out, "output directory")->required();

    std::string manifest_path, replay_out;
    bool verify = false;
    auto* replay = app.add_subcommand("replay", "re-run a recorded run from its manifest");
    replay->add_option("--manifest", manifest_path, "manifest.json of a previous run")->required();
    replay->add_option("--out", replay_out, "output directory")->required();
    replay->add_flag("--verify", verify, "compare the new masks with the recorded ones");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : kUsageOrIo;
    }

    try {
        if (run->parsed()) {
            resolve_backend(run_flags);
            const RunInputs inputs{run_flags.frames, run_flags.text};
            PipelineResult result = execute_run(inputs, run_flags.config);
            write_run(run_out, inputs, run_flags.config, result, run_debug);
            if (result.empty_target) {
                err << "no candidate frame contains the target; wrote empty masks\n";
            } else {
                err << "key frame " << result.identification->key_frame << ", wrote " << result.masks.size()
                    << " masks to " << run_out << "\n";
            }
        } else if (identify->parsed()) {
            resolve_backend(id_flags);
            id_flags.config.validate();
            const VideoSequence video = read_frame_dir(id_flags.frames, id_flags.text);
            const Backend backend = make_backend(id_flags.config.backend);
            const auto result = identify_target(video, id_flags.config, *backend.segmenter, *backend.aligner);
            if (!id_out.empty()) {
                fs::create_directories(id_out);
                write_mask(result.key_mask, fs::path(id_out) / "key_mask.pgm");
            }
            out << diagnostics_json(result).dump(2) << '\n';
        } else if (eval->parsed()) {
            const auto pred = read_mask_dir(pred_dir);
            const auto gt = read_mask_dir(gt_dir);
            EvalReport report;
            report.add(eval_name, evaluate_sequence(pred, gt));
            out << report_json(report).dump(2) << '\n';
        } else if (synth->parsed()) {
            const auto scene = generate(scenario(scenario_name, seed));
            write_scene(scene, synth_out);
            err << "wrote " << scene.video.length() << " frames of \"" << scene.video.expression() << "\" to "
                << synth_out << "\n";
        } else if (replay->parsed()) {
            nlohmann::json manifest;
            try {
                manifest = nlohmann::json::parse(load_text(manifest_path));
            } catch (const nlohmann::json::exception& e) {
                throw Error(ErrorCode::UnsupportedFormat, manifest_path + ": " + e.what());
            }
            const PipelineConfig config = config_from_json(manifest.at("config"));
            const RunInputs inputs{manifest.at("frames").get<std::string>(), manifest.at("text").get<std::string>()};
            PipelineResult result = execute_run(inputs, config);
            write_run(replay_out, inputs, config, result, false);
            if (verify) {
                const fs::path recorded = fs::path(manifest_path).parent_path() / manifest.at("outputs").at("masks").get<std::string>();
                if (read_mask_dir(recorded) != result.masks) {
                    err << "replay differs from the recorded masks in " << recorded.string() << "\n";
                    return kMismatch;
                }
                err << "replay matches " << recorded.string() << "\n";
            }
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_code_for(e.code());
    } catch (const nlohmann::json::exception& e) {
        err << "error: malformed manifest: " << e.what() << "\n";
        return kUsageOrIo;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return kUsageOrIo;
    }
    return 0;
}

}  // namespace findtrack
