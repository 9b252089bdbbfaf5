#pragma once

#include "findtrack/backends.hpp"
#include "findtrack/rle.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

namespace findtrack {

// Newline-delimited byte stream to a backend process or socket.
class LineTransport {
public:
    virtual ~LineTransport() = default;
    virtual void write_line(const std::string& line) = 0;
    // Throws BackendTimeout if no complete line arrives in time and ProtocolError
    // when the peer closes the stream.
    virtual std::string read_line(std::chrono::milliseconds timeout) = 0;
};

// Runs `command` under /bin/sh and talks to its stdin/stdout.
std::unique_ptr<LineTransport> spawn_process(const std::string& command);
std::unique_ptr<LineTransport> connect_tcp(const std::string& host, int port);

namespace wire {

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);

// {"w":W,"h":H,"rgb_b64":"..."}
nlohmann::ordered_json encode_frame(const Frame& frame);
Frame decode_frame(const nlohmann::json& doc);

}  // namespace wire

// Client side of the JSON-lines backend protocol. Requests are serialized; each
// carries a monotonically increasing id that the reply must echo.
class RemoteBackend final : public SegmenterPort, public AlignerPort {
public:
    RemoteBackend(std::unique_ptr<LineTransport> transport, std::chrono::milliseconds timeout);

    SegmentationResult segment(const Frame& frame, std::string_view text) override;
    Embedding embed_masked_image(const Frame& frame, const BinaryMask& mask) override;
    Embedding embed_text(std::string_view text) override;
    int embed_dim() const override { return embed_dim_; }

private:
    nlohmann::json call(nlohmann::ordered_json request);
    Embedding parse_embedding(const nlohmann::json& reply) const;

    std::mutex mutex_;
    std::unique_ptr<LineTransport> transport_;
    std::chrono::milliseconds timeout_;
    std::int64_t next_id_ = 0;
    int embed_dim_ = 0;
};

}  // namespace findtrack
