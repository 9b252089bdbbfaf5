#include "findtrack/remote.hpp"

#include <openssl/evp.h>

#include <netdb.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstring>
#include <mutex>
#include <thread>

namespace findtrack {

namespace {

using Clock = std::chrono::steady_clock;

void ignore_sigpipe() {
    static std::once_flag once;
    std::call_once(once, [] { ::signal(SIGPIPE, SIG_IGN); });
}

class FdTransport : public LineTransport {
public:
    FdTransport(int read_fd, int write_fd) : read_fd_(read_fd), write_fd_(write_fd) {}

    ~FdTransport() override { close_fds(); }

    void write_line(const std::string& line) override {
        std::string data = line;
        data.push_back('\n');
        std::size_t off = 0;
        while (off < data.size()) {
            const auto n = ::write(write_fd_, data.data() + off, data.size() - off);
            if (n < 0) {
                if (errno == EINTR) continue;
                throw Error(ErrorCode::ProtocolError, std::string("write to backend failed: ") + std::strerror(errno));
            }
            off += static_cast<std::size_t>(n);
        }
    }

    std::string read_line(std::chrono::milliseconds timeout) override {
        const auto deadline = Clock::now() + timeout;
        for (;;) {
            if (const auto nl = buffer_.find('\n'); nl != std::string::npos) {
                auto line = buffer_.substr(0, nl);
                buffer_.erase(0, nl + 1);
                return line;
            }
            const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
            if (left.count() <= 0) throw Error(ErrorCode::BackendTimeout, "no reply from backend within timeout");
            pollfd pfd{read_fd_, POLLIN, 0};
            const int rc = ::poll(&pfd, 1, static_cast<int>(left.count()));
            if (rc < 0) {
                if (errno == EINTR) continue;
                throw Error(ErrorCode::ProtocolError, std::string("poll failed: ") + std::strerror(errno));
            }
            if (rc == 0) continue;
            char chunk[65536];
            const auto n = ::read(read_fd_, chunk, sizeof chunk);
            if (n < 0) {
                if (errno == EINTR) continue;
                throw Error(ErrorCode::ProtocolError, std::string("read from backend failed: ") + std::strerror(errno));
            }
            if (n == 0) throw Error(ErrorCode::ProtocolError, "backend closed the stream");
            buffer_.append(chunk, static_cast<std::size_t>(n));
        }
    }

protected:
    void close_fds() {
        if (write_fd_ >= 0 && write_fd_ != read_fd_) ::close(write_fd_);
        if (read_fd_ >= 0) ::close(read_fd_);
        read_fd_ = write_fd_ = -1;
    }

private:
    int read_fd_;
    int write_fd_;
    std::string buffer_;
};

class ProcessTransport final : public FdTransport {
public:
    ProcessTransport(int read_fd, int write_fd, pid_t pid) : FdTransport(read_fd, write_fd), pid_(pid) {}

    ~ProcessTransport() override {
        close_fds();  // EOF on stdin asks the child to exit
        const auto deadline = Clock::now() + std::chrono::seconds(2);
        int status = 0;
        while (::waitpid(pid_, &status, WNOHANG) == 0) {
            if (Clock::now() > deadline) {
                ::kill(pid_, SIGKILL);
                ::waitpid(pid_, &status, 0);
                break;
            }
            std::this_thread::sleep_for(std::chrono::milliseconds(5));
        }
    }

private:
    pid_t pid_;
};

void check_probability(double v, const char* what) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
        throw Error(ErrorCode::ProtocolError, std::string(what) + " outside [0, 1]");
    }
}

}  // namespace

std::unique_ptr<LineTransport> spawn_process(const std::string& command) {
    ignore_sigpipe();
    int to_child[2];
    int from_child[2];
    if (::pipe(to_child) != 0) throw Error(ErrorCode::HandshakeFailure, "pipe() failed");
    if (::pipe(from_child) != 0) {
        ::close(to_child[0]);
        ::close(to_child[1]);
        throw Error(ErrorCode::HandshakeFailure, "pipe() failed");
    }
    const pid_t pid = ::fork();
    if (pid < 0) throw Error(ErrorCode::HandshakeFailure, "fork() failed");
    if (pid == 0) {
        ::dup2(to_child[0], STDIN_FILENO);
        ::dup2(from_child[1], STDOUT_FILENO);
        ::close(to_child[0]);
        ::close(to_child[1]);
        ::close(from_child[0]);
        ::close(from_child[1]);
        ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
        ::_exit(127);
    }
    ::close(to_child[0]);
    ::close(from_child[1]);
    return std::make_unique<ProcessTransport>(from_child[0], to_child[1], pid);
}

std::unique_ptr<LineTransport> connect_tcp(const std::string& host, int port) {
    ignore_sigpipe();
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    const auto service = std::to_string(port);
    if (const int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &res); rc != 0) {
        throw Error(ErrorCode::HandshakeFailure, "cannot resolve " + host + ": " + ::gai_strerror(rc));
    }
    int fd = -1;
    for (auto* ai = res; ai != nullptr; ai = ai->ai_next) {
        fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
        if (fd < 0) continue;
        if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
        ::close(fd);
        fd = -1;
    }
    ::freeaddrinfo(res);
    if (fd < 0) throw Error(ErrorCode::HandshakeFailure, "cannot connect to " + host + ":" + service);
    return std::make_unique<FdTransport>(fd, fd);
}

namespace wire {

std::string base64_encode(std::span<const std::uint8_t> bytes) {
    std::string out(4 * ((bytes.size() + 2) / 3), '\0');
    const int n = ::EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                    static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
    if (text.size() % 4 != 0) throw Error(ErrorCode::ProtocolError, "base64 length is not a multiple of 4");
    std::vector<std::uint8_t> out(3 * (text.size() / 4));
    const int n = ::EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                                    static_cast<int>(text.size()));
    if (n < 0) throw Error(ErrorCode::ProtocolError, "invalid base64 payload");
    std::size_t padding = 0;
    if (!text.empty() && text.back() == '=') ++padding;
    if (text.size() > 1 && text[text.size() - 2] == '=') ++padding;
    out.resize(static_cast<std::size_t>(n) - padding);
    return out;
}

nlohmann::ordered_json encode_frame(const Frame& frame) {
    nlohmann::ordered_json doc;
    doc["w"] = frame.width();
    doc["h"] = frame.height();
    doc["rgb_b64"] = base64_encode(frame.pixels());
    return doc;
}

Frame decode_frame(const nlohmann::json& doc) {
    try {
        const int w = doc.at("w").get<int>();
        const int h = doc.at("h").get<int>();
        auto pixels = base64_decode(doc.at("rgb_b64").get<std::string>());
        if (w < 1 || h < 1 || pixels.size() != static_cast<std::size_t>(w) * h * 3) {
            throw Error(ErrorCode::ProtocolError, "frame payload does not match w*h*3");
        }
        return Frame(1, w, h, std::move(pixels));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ProtocolError, std::string("malformed frame: ") + e.what());
    }
}

}  // namespace wire

RemoteBackend::RemoteBackend(std::unique_ptr<LineTransport> transport, std::chrono::milliseconds timeout)
    : transport_(std::move(transport)), timeout_(timeout) {
    nlohmann::json reply;
    try {
        reply = call({{"op", "hello"}});
    } catch (const Error& e) {
        throw Error(ErrorCode::HandshakeFailure, e.what());
    }
    const auto it = reply.find("embed_dim");
    if (it == reply.end() || !it->is_number_integer() || it->get<int>() < 1) {
        throw Error(ErrorCode::HandshakeFailure, "hello reply lacks a positive embed_dim");
    }
    embed_dim_ = it->get<int>();
}

nlohmann::json RemoteBackend::call(nlohmann::ordered_json request) {
    std::lock_guard lock(mutex_);
    const auto id = next_id_++;
    nlohmann::ordered_json msg;
    msg["id"] = id;
    for (auto& [k, v] : request.items()) msg[k] = std::move(v);
    transport_->write_line(msg.dump());
    const auto line = transport_->read_line(timeout_);
    nlohmann::json reply;
    try {
        reply = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ProtocolError, std::string("reply is not JSON: ") + e.what());
    }
    if (!reply.is_object()) throw Error(ErrorCode::ProtocolError, "reply is not a JSON object");
    const auto rid = reply.find("id");
    if (rid == reply.end() || !rid->is_number_integer() || rid->get<std::int64_t>() != id) {
        throw Error(ErrorCode::ProtocolError, "reply id does not match request id " + std::to_string(id));
    }
    if (const auto err = reply.find("error"); err != reply.end()) {
        const auto message = reply.value("message", std::string());
        throw Error(ErrorCode::BackendError, err->dump() + ": " + message);
    }
    return reply;
}

SegmentationResult RemoteBackend::segment(const Frame& frame, std::string_view text) {
    const auto reply = call({{"op", "segment"}, {"frame", wire::encode_frame(frame)}, {"text", text}});
    SegmentationResult result;
    try {
        result.mask = rle_decode(rle_from_json(reply.at("mask")));
        const auto& conf = reply.at("confidence");
        if (!conf.is_number()) throw Error(ErrorCode::ProtocolError, "confidence is not a number");
        result.confidence = conf.get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ProtocolError, std::string("malformed segment reply: ") + e.what());
    } catch (const Error& e) {
        throw Error(ErrorCode::ProtocolError, e.what());
    }
    check_probability(result.confidence, "confidence");
    if (!(result.mask.width() == frame.width() && result.mask.height() == frame.height())) {
        throw Error(ErrorCode::ProtocolError, "segment reply mask is " + std::to_string(result.mask.width()) + "x" +
                                                  std::to_string(result.mask.height()) + ", frame is " +
                                                  std::to_string(frame.width()) + "x" + std::to_string(frame.height()));
    }
    return result;
}

Embedding RemoteBackend::parse_embedding(const nlohmann::json& reply) const {
    const auto it = reply.find("embedding");
    if (it == reply.end() || !it->is_array()) throw Error(ErrorCode::ProtocolError, "reply lacks an embedding array");
    if (static_cast<int>(it->size()) != embed_dim_) {
        throw Error(ErrorCode::ProtocolError, "embedding has " + std::to_string(it->size()) +
                                                  " values, handshake declared " + std::to_string(embed_dim_));
    }
    Embedding e(embed_dim_);
    for (int i = 0; i < embed_dim_; ++i) {
        const auto& v = (*it)[static_cast<std::size_t>(i)];
        if (!v.is_number()) throw Error(ErrorCode::ProtocolError, "embedding contains a non-number");
        e[i] = v.get<double>();
        if (!std::isfinite(e[i])) throw Error(ErrorCode::ProtocolError, "embedding contains a non-finite value");
    }
    return e;
}

Embedding RemoteBackend::embed_masked_image(const Frame& frame, const BinaryMask& mask) {
    require_matches(mask, frame, "embed_masked");
    return parse_embedding(call({{"op", "embed_masked"},
                                 {"frame", wire::encode_frame(frame)},
                                 {"mask", rle_to_json(rle_encode(mask))}}));
}

Embedding RemoteBackend::embed_text(std::string_view text) {
    return parse_embedding(call({{"op", "embed_text"}, {"text", text}}));
}

Backend make_backend(std::string_view selector, std::chrono::milliseconds timeout) {
    const auto colon = selector.find(':');
    const auto kind = selector.substr(0, colon);
    const auto rest = colon == std::string_view::npos ? std::string_view{} : selector.substr(colon + 1);
    if (kind == "builtin" && (rest == "color" || rest.empty())) {
        return {std::make_shared<ColorSegmenter>(), std::make_shared<HistogramAligner>()};
    }
    std::shared_ptr<RemoteBackend> remote;
    if (kind == "stdio" && !rest.empty()) {
        remote = std::make_shared<RemoteBackend>(spawn_process(std::string(rest)), timeout);
    } else if (kind == "tcp") {
        const auto last = rest.rfind(':');
        if (last == std::string_view::npos || last == 0) {
            throw Error(ErrorCode::InvalidArgument, "tcp backend selector must be tcp:<host>:<port>");
        }
        int port = 0;
        try {
            port = std::stoi(std::string(rest.substr(last + 1)));
        } catch (const std::exception&) {
            throw Error(ErrorCode::InvalidArgument, "bad port in backend selector " + std::string(selector));
        }
        remote = std::make_shared<RemoteBackend>(connect_tcp(std::string(rest.substr(0, last)), port), timeout);
    } else {
        throw Error(ErrorCode::InvalidArgument, "unknown backend selector '" + std::string(selector) + "'");
    }
    return {remote, remote};
}

}  // namespace findtrack
