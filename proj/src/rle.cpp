#include "findtrack/rle.hpp"

#include <algorithm>
#include <numeric>

namespace findtrack {

RleMask rle_encode(const BinaryMask& mask) {
    RleMask rle{mask.height(), mask.width(), {}};
    const auto& bits = mask.bits();
    bool current = false;
    std::uint32_t run = 0;
    // RowMajor storage, so data() is already in scan order.
    const bool* p = bits.data();
    for (Eigen::Index i = 0; i < bits.size(); ++i) {
        if (p[i] != current) {
            rle.counts.push_back(run);
            run = 0;
            current = p[i];
        }
        ++run;
    }
    rle.counts.push_back(run);
    return rle;
}

BinaryMask rle_decode(const RleMask& rle) {
    if (rle.height < 1 || rle.width < 1) {
        throw Error(ErrorCode::InvalidArgument, "RLE size must be positive");
    }
    const auto total = static_cast<std::uint64_t>(rle.height) * static_cast<std::uint64_t>(rle.width);
    const auto sum = std::accumulate(rle.counts.begin(), rle.counts.end(), std::uint64_t{0});
    if (sum != total) {
        throw Error(ErrorCode::CountMismatch,
                    "RLE counts sum to " + std::to_string(sum) + ", expected " + std::to_string(total));
    }
    BinaryMask mask(rle.width, rle.height);
    bool* p = mask.bits().data();
    std::uint64_t pos = 0;
    bool value = false;
    for (auto c : rle.counts) {
        std::fill(p + pos, p + pos + c, value);
        pos += c;
        value = !value;
    }
    return mask;
}

nlohmann::ordered_json rle_to_json(const RleMask& rle) {
    nlohmann::ordered_json doc;
    doc["size"] = {rle.height, rle.width};
    doc["counts"] = rle.counts;
    return doc;
}

RleMask rle_from_json(const nlohmann::json& doc) {
    try {
        const auto& size = doc.at("size");
        if (!size.is_array() || size.size() != 2) {
            throw Error(ErrorCode::UnsupportedFormat, "RLE 'size' must be [H, W]");
        }
        RleMask rle;
        rle.height = size[0].get<int>();
        rle.width = size[1].get<int>();
        for (const auto& c : doc.at("counts")) {
            if (!c.is_number_unsigned() && !(c.is_number_integer() && c.get<std::int64_t>() >= 0)) {
                throw Error(ErrorCode::UnsupportedFormat, "RLE counts must be non-negative integers");
            }
            rle.counts.push_back(c.get<std::uint32_t>());
        }
        return rle;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::UnsupportedFormat, std::string("malformed RLE document: ") + e.what());
    }
}

}  // namespace findtrack
