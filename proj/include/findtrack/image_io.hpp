#pragma once

#include "findtrack/core.hpp"

#include <filesystem>
#include <string>

namespace findtrack {

// Binary PPM (P6) frames and PGM (P5) masks, maxval 255.
Frame read_ppm(const std::filesystem::path& path, int index = 1);
void write_ppm(const Frame& frame, const std::filesystem::path& path);

// Masks are stored as 0/255 and read back with a >= 128 threshold. The file
// extension selects the format: ".pgm" for a raster, ".json" for an RLE document.
BinaryMask read_mask(const std::filesystem::path& path);
void write_mask(const BinaryMask& mask, const std::filesystem::path& path);

// "%05d" naming used for frame and mask directories.
std::string frame_file_name(int index, std::string_view extension);

// Loads <dir>/<NNNNN>.ppm in numeric order. Numbering must start at 1 with no gaps.
VideoSequence read_frame_dir(const std::filesystem::path& dir, std::string expression);
void write_frame_dir(const VideoSequence& video, const std::filesystem::path& dir);

MaskSequence read_mask_dir(const std::filesystem::path& dir);
void write_mask_dir(const MaskSequence& masks, const std::filesystem::path& dir);

}  // namespace findtrack
