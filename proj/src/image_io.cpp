#include "findtrack/image_io.hpp"

#include "findtrack/rle.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace findtrack {

namespace fs = std::filesystem;

namespace {

struct NetpbmHeader {
    std::string magic;
    int width = 0;
    int height = 0;
    int maxval = 0;
};

// Reads one whitespace-delimited header token, skipping '#' comments.
std::string next_token(std::istream& in) {
    std::string tok;
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {}
            if (!tok.empty()) break;
            continue;
        }
        if (std::isspace(c)) {
            if (!tok.empty()) break;
            continue;
        }
        tok.push_back(static_cast<char>(c));
    }
    return tok;
}

int parse_int(const std::string& tok, const fs::path& path) {
    if (tok.empty() || !std::all_of(tok.begin(), tok.end(), [](unsigned char c) { return std::isdigit(c); })) {
        throw Error(ErrorCode::UnsupportedFormat, "bad netpbm header in " + path.string());
    }
    return std::stoi(tok);
}

NetpbmHeader read_header(std::istream& in, const fs::path& path) {
    NetpbmHeader h;
    h.magic = next_token(in);
    h.width = parse_int(next_token(in), path);
    h.height = parse_int(next_token(in), path);
    h.maxval = parse_int(next_token(in), path);
    // next_token consumed exactly one whitespace byte after maxval
    return h;
}

std::ifstream open_in(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    return in;
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    return out;
}

std::vector<std::uint8_t> read_payload(std::istream& in, std::size_t n, const fs::path& path) {
    std::vector<std::uint8_t> data(n);
    in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n) {
        throw Error(ErrorCode::UnsupportedFormat, "truncated raster " + path.string());
    }
    return data;
}

// Collects <digits>.<ext> entries keyed by their numeric stem.
std::map<int, fs::path> numbered_files(const fs::path& dir, std::string_view ext) {
    if (!fs::is_directory(dir)) throw Error(ErrorCode::IoError, "not a directory: " + dir.string());
    std::map<int, fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file() || entry.path().extension() != ext) continue;
        const auto stem = entry.path().stem().string();
        if (stem.empty() || !std::all_of(stem.begin(), stem.end(), [](unsigned char c) { return std::isdigit(c); })) {
            continue;
        }
        files.emplace(std::stoi(stem), entry.path());
    }
    if (files.empty()) {
        throw Error(ErrorCode::IoError, "no *" + std::string(ext) + " files in " + dir.string());
    }
    int expected = 1;
    for (const auto& [index, path] : files) {
        if (index != expected) {
            throw Error(ErrorCode::MissingFrame,
                        "expected " + frame_file_name(expected, ext) + " in " + dir.string() + ", found " +
                            path.filename().string());
        }
        ++expected;
    }
    return files;
}

}  // namespace

Frame read_ppm(const fs::path& path, int index) {
    auto in = open_in(path);
    const auto h = read_header(in, path);
    if (h.magic != "P6") throw Error(ErrorCode::UnsupportedFormat, path.string() + " is not a binary PPM (P6)");
    if (h.maxval != 255) throw Error(ErrorCode::UnsupportedFormat, path.string() + ": only maxval 255 is supported");
    if (h.width < 1 || h.height < 1) throw Error(ErrorCode::UnsupportedFormat, path.string() + ": empty raster");
    auto data = read_payload(in, static_cast<std::size_t>(h.width) * h.height * 3, path);
    return Frame(index, h.width, h.height, std::move(data));
}

void write_ppm(const Frame& frame, const fs::path& path) {
    auto out = open_out(path);
    out << "P6\n" << frame.width() << ' ' << frame.height() << "\n255\n";
    out.write(reinterpret_cast<const char*>(frame.pixels().data()),
              static_cast<std::streamsize>(frame.pixels().size()));
    if (!out) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

BinaryMask read_mask(const fs::path& path) {
    if (path.extension() == ".json") {
        auto in = open_in(path);
        nlohmann::json doc;
        try {
            in >> doc;
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::UnsupportedFormat, path.string() + ": " + e.what());
        }
        return rle_decode(rle_from_json(doc));
    }
    if (path.extension() != ".pgm") {
        throw Error(ErrorCode::UnsupportedFormat, "unsupported mask format: " + path.string());
    }
    auto in = open_in(path);
    const auto h = read_header(in, path);
    if (h.magic != "P5") throw Error(ErrorCode::UnsupportedFormat, path.string() + " is not a binary PGM (P5)");
    if (h.maxval != 255) throw Error(ErrorCode::UnsupportedFormat, path.string() + ": only maxval 255 is supported");
    if (h.width < 1 || h.height < 1) throw Error(ErrorCode::UnsupportedFormat, path.string() + ": empty raster");
    const auto data = read_payload(in, static_cast<std::size_t>(h.width) * h.height, path);
    BinaryMask mask(h.width, h.height);
    bool* bits = mask.bits().data();
    for (std::size_t i = 0; i < data.size(); ++i) bits[i] = data[i] >= 128;
    return mask;
}

void write_mask(const BinaryMask& mask, const fs::path& path) {
    if (path.extension() == ".json") {
        auto out = open_out(path);
        out << rle_to_json(rle_encode(mask)).dump() << '\n';
        if (!out) throw Error(ErrorCode::IoError, "failed writing " + path.string());
        return;
    }
    if (path.extension() != ".pgm") {
        throw Error(ErrorCode::UnsupportedFormat, "unsupported mask format: " + path.string());
    }
    std::vector<std::uint8_t> data(static_cast<std::size_t>(mask.width()) * mask.height());
    const bool* bits = mask.bits().data();
    for (std::size_t i = 0; i < data.size(); ++i) data[i] = bits[i] ? 255 : 0;
    auto out = open_out(path);
    out << "P5\n" << mask.width() << ' ' << mask.height() << "\n255\n";
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (!out) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

std::string frame_file_name(int index, std::string_view extension) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%05d", index);
    return std::string(buf) + std::string(extension);
}

VideoSequence read_frame_dir(const fs::path& dir, std::string expression) {
    std::vector<Frame> frames;
    for (const auto& [index, path] : numbered_files(dir, ".ppm")) {
        frames.push_back(read_ppm(path, index));
        if (frames.back().width() != frames.front().width() || frames.back().height() != frames.front().height()) {
            throw Error(ErrorCode::DimensionMismatch, path.string() + " differs in size from the first frame");
        }
    }
    return VideoSequence(std::move(frames), std::move(expression));
}

void write_frame_dir(const VideoSequence& video, const fs::path& dir) {
    fs::create_directories(dir);
    for (const auto& f : video.frames()) write_ppm(f, dir / frame_file_name(f.index(), ".ppm"));
}

MaskSequence read_mask_dir(const fs::path& dir) {
    MaskSequence masks;
    for (const auto& [index, path] : numbered_files(dir, ".pgm")) {
        masks.push_back(read_mask(path));
        require_same_size(masks.back(), masks.front(), path.string());
    }
    return masks;
}

void write_mask_dir(const MaskSequence& masks, const fs::path& dir) {
    fs::create_directories(dir);
    for (std::size_t i = 0; i < masks.size(); ++i) {
        write_mask(masks[i], dir / frame_file_name(static_cast<int>(i) + 1, ".pgm"));
    }
}

}  // namespace findtrack
