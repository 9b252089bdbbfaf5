#pragma once

// Fixed-function backend used by the remote-client tests. It answers every
// request with a centred square (half the frame on each side) of confidence 0.75
// and hash-derived embeddings, unless told to misbehave.

#include "findtrack/remote.hpp"
#include "findtrack/rle.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdint>
#include <string>
#include <thread>

namespace stub {

enum class Fault {
    None,
    BadHello,       // hello reply without embed_dim
    BadCounts,      // segment mask counts do not sum to H*W
    WrongSize,      // segment mask of the wrong dimensions
    BadConfidence,  // confidence 1.5
    ShortEmbedding, // one value fewer than embed_dim
    WrongId,        // replies carry id + 1
    ErrorReply,     // every non-hello request fails
    Slow,           // sleeps delay_ms before non-hello replies
    Garbage,        // non-JSON reply to non-hello requests
};

struct Options {
    int embed_dim = 16;
    Fault fault = Fault::None;
    int delay_ms = 0;
};

inline Fault parse_fault(const std::string& s) {
    if (s == "bad-hello") return Fault::BadHello;
    if (s == "bad-counts") return Fault::BadCounts;
    if (s == "wrong-size") return Fault::WrongSize;
    if (s == "bad-confidence") return Fault::BadConfidence;
    if (s == "short-embedding") return Fault::ShortEmbedding;
    if (s == "wrong-id") return Fault::WrongId;
    if (s == "error") return Fault::ErrorReply;
    if (s == "slow") return Fault::Slow;
    if (s == "garbage") return Fault::Garbage;
    return Fault::None;
}

inline std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 1469598103934665603ULL) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline nlohmann::json embedding(std::uint64_t seed, int dim) {
    auto v = nlohmann::json::array();
    std::uint64_t s = seed;
    for (int i = 0; i < dim; ++i) {
        s = s * 6364136223846793005ULL + 1442695040888963407ULL;
        v.push_back(static_cast<double>(s >> 11) * 0x1.0p-53 + 0.01);
    }
    return v;
}

inline findtrack::BinaryMask centred_square(int w, int h) {
    findtrack::BinaryMask m(w, h);
    for (int y = h / 4; y < h / 4 + h / 2; ++y) {
        for (int x = w / 4; x < w / 4 + w / 2; ++x) m.set(x, y, true);
    }
    return m;
}

// Returns the reply line for one request line.
inline std::string handle(const std::string& line, const Options& opt) {
    nlohmann::json req;
    try {
        req = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception&) {
        return R"({"id":null,"error":"bad_request","message":"not JSON"})";
    }
    const auto id = req.value("id", std::int64_t{-1});
    const auto op = req.value("op", std::string());
    nlohmann::ordered_json rep;
    rep["id"] = opt.fault == Fault::WrongId && op != "hello" ? id + 1 : id;
    if (op == "hello") {
        if (opt.fault != Fault::BadHello) rep["embed_dim"] = opt.embed_dim;
        return rep.dump();
    }
    if (opt.fault == Fault::Slow) std::this_thread::sleep_for(std::chrono::milliseconds(opt.delay_ms));
    if (opt.fault == Fault::Garbage) return "this is not json";
    if (opt.fault == Fault::ErrorReply) {
        rep["error"] = "unavailable";
        rep["message"] = "stub configured to fail";
        return rep.dump();
    }
    const int dim = opt.fault == Fault::ShortEmbedding ? opt.embed_dim - 1 : opt.embed_dim;
    try {
        if (op == "segment") {
            const auto frame = findtrack::wire::decode_frame(req.at("frame"));
            const int w = opt.fault == Fault::WrongSize ? frame.width() + 1 : frame.width();
            auto rle = findtrack::rle_encode(centred_square(w, frame.height()));
            if (opt.fault == Fault::BadCounts) rle.counts.back() += 1;
            rep["mask"] = findtrack::rle_to_json(rle);
            rep["confidence"] = opt.fault == Fault::BadConfidence ? 1.5 : 0.75;
        } else if (op == "embed_masked") {
            const auto frame = findtrack::wire::decode_frame(req.at("frame"));
            const auto mask = findtrack::rle_decode(findtrack::rle_from_json(req.at("mask")));
            std::string masked;
            for (int y = 0; y < mask.height(); ++y) {
                for (int x = 0; x < mask.width(); ++x) {
                    if (!mask(x, y)) continue;
                    const auto c = frame.at(x, y);
                    masked.push_back(static_cast<char>(c.r));
                    masked.push_back(static_cast<char>(c.g));
                    masked.push_back(static_cast<char>(c.b));
                }
            }
            rep["embedding"] = embedding(fnv1a(masked), dim);
        } else if (op == "embed_text") {
            rep["embedding"] = embedding(fnv1a(req.at("text").get<std::string>()), dim);
        } else {
            rep["error"] = "unknown_op";
            rep["message"] = "unknown op '" + op + "'";
        }
    } catch (const std::exception& e) {
        rep.erase("mask");
        rep.erase("confidence");
        rep.erase("embedding");
        rep["error"] = "bad_request";
        rep["message"] = e.what();
    }
    return rep.dump();
}

}  // namespace stub
