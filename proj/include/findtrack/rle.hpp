#pragma once

#include "findtrack/core.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <vector>

namespace findtrack {

// Run-length form of a binary mask. Runs are taken in row-major order and
// alternate background/foreground, always starting with a (possibly empty)
// background run. COCO's column-major RLE must be transposed before use.
struct RleMask {
    int height = 0;
    int width = 0;
    std::vector<std::uint32_t> counts;

    friend bool operator==(const RleMask&, const RleMask&) = default;
};

RleMask rle_encode(const BinaryMask& mask);
BinaryMask rle_decode(const RleMask& rle);

// {"size":[H,W],"counts":[...]}
nlohmann::ordered_json rle_to_json(const RleMask& rle);
RleMask rle_from_json(const nlohmann::json& doc);

}  // namespace findtrack
