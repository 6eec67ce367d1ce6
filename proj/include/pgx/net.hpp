#pragma once

#include <algorithm>
#include <atomic>
#include <cstring>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include "pgx/codec.hpp"
#include "pgx/embedding.hpp"
#include "pgx/evaluate.hpp"
#include "pgx/model.hpp"
#include "pgx/png_io.hpp"
#include "pgx/prompts.hpp"
#include "pgx/wire.hpp"

namespace pgx {

namespace detail {

struct Fd {
    int fd = -1;
    Fd() = default;
    explicit Fd(int f) : fd(f) {}
    Fd(const Fd&) = delete;
    Fd& operator=(const Fd&) = delete;
    Fd(Fd&& o) noexcept : fd(o.fd) { o.fd = -1; }
    Fd& operator=(Fd&& o) noexcept {
        if (this != &o) {
            close_fd();
            fd = o.fd;
            o.fd = -1;
        }
        return *this;
    }
    ~Fd() { close_fd(); }
    void close_fd() {
        if (fd >= 0) ::close(fd);
        fd = -1;
    }
};

inline void write_all(int fd, const std::uint8_t* data, std::size_t n) {
    std::size_t off = 0;
    while (off < n) {
        const ssize_t w = ::send(fd, data + off, n - off, MSG_NOSIGNAL);
        if (w <= 0) throw IoError("socket write failed");
        off += std::size_t(w);
    }
}

/// Reads exactly n bytes; returns false on clean EOF at the first byte.
inline bool read_exact(int fd, std::uint8_t* data, std::size_t n) {
    std::size_t off = 0;
    while (off < n) {
        const ssize_t r = ::recv(fd, data + off, n - off, 0);
        if (r == 0) {
            if (off == 0) return false;
            throw IoError("socket closed mid-frame");
        }
        if (r < 0) throw IoError("socket read failed");
        off += std::size_t(r);
    }
    return true;
}

inline void write_frame(int fd, const Frame& f) {
    const auto bytes = serialize_frame(f);
    write_all(fd, bytes.data(), bytes.size());
}

/// Reads one frame; empty optional-like flag via the bool return.
inline bool read_frame(int fd, Frame& out) {
    std::uint8_t header[kFrameHeaderSize];
    if (!read_exact(fd, header, sizeof(header))) return false;
    if (std::memcmp(header, kWireMagic, 4) != 0)
        throw WireError(WireError::Code::BadMagic, "bad frame magic");
    std::uint32_t len = 0;
    std::memcpy(&len, header + 6, 4);
    std::vector<std::uint8_t> whole(kFrameHeaderSize + len);
    std::memcpy(whole.data(), header, kFrameHeaderSize);
    if (len > 0 && !read_exact(fd, whole.data() + kFrameHeaderSize, len))
        throw WireError(WireError::Code::Truncated, "connection closed mid-payload");
    out = deserialize_frame(whole);
    return true;
}

} // namespace detail

/// TCP server for the latent-streaming path: receives (PNG, prompt) request
/// frames, runs the generator, compresses the result with the codec, and
/// replies with a latent frame. Stateless across requests; the bundle and
/// codec are shared read-only under a lock (the compute kernels mutate layer
/// caches, so requests serialize around inference).
class StreamServer {
public:
    StreamServer(ModelBundle& bundle, LatentCodec& codec, const TextEncoder& encoder)
        : bundle_(bundle), codec_(codec), encoder_(encoder) {}

    ~StreamServer() { stop(); }

    /// Binds and starts accepting. port 0 picks an ephemeral port; see port().
    void start(std::uint16_t port) {
        listener_ = detail::Fd(::socket(AF_INET, SOCK_STREAM, 0));
        if (listener_.fd < 0) throw IoError("cannot create server socket");
        const int one = 1;
        ::setsockopt(listener_.fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
        addr.sin_port = htons(port);
        if (::bind(listener_.fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0)
            throw IoError("cannot bind port " + std::to_string(port));
        if (::listen(listener_.fd, 8) != 0) throw IoError("listen failed");
        socklen_t len = sizeof(addr);
        ::getsockname(listener_.fd, reinterpret_cast<sockaddr*>(&addr), &len);
        port_ = ntohs(addr.sin_port);
        running_ = true;
        accept_thread_ = std::thread([this] { accept_loop(); });
    }

    std::uint16_t port() const { return port_; }

    void stop() {
        if (!running_.exchange(false)) return;
        ::shutdown(listener_.fd, SHUT_RDWR);
        listener_.close_fd();
        {
            // wake workers blocked in recv on live connections
            std::lock_guard<std::mutex> lk(workers_mutex_);
            for (int fd : client_fds_) ::shutdown(fd, SHUT_RDWR);
        }
        if (accept_thread_.joinable()) accept_thread_.join();
        for (auto& t : workers_)
            if (t.joinable()) t.join();
        workers_.clear();
    }

private:
    void accept_loop() {
        while (running_) {
            const int client = ::accept(listener_.fd, nullptr, nullptr);
            if (client < 0) {
                if (!running_) break;
                continue;
            }
            std::lock_guard<std::mutex> lk(workers_mutex_);
            client_fds_.push_back(client);
            workers_.emplace_back([this, client] { serve_connection(detail::Fd(client)); });
        }
    }

    void forget_client(int fd) {
        std::lock_guard<std::mutex> lk(workers_mutex_);
        client_fds_.erase(std::remove(client_fds_.begin(), client_fds_.end(), fd),
                          client_fds_.end());
    }

    void serve_connection(detail::Fd client) {
        struct Unregister {
            StreamServer* s;
            int fd;
            ~Unregister() { s->forget_client(fd); }
        } unregister{this, client.fd};
        Frame frame;
        while (running_) {
            try {
                if (!detail::read_frame(client.fd, frame)) return; // clean EOF
            } catch (const Error&) {
                return; // malformed framing or transport loss: drop connection
            }
            try {
                if (frame.kind != FrameKind::Request)
                    throw ParseError("server accepts only request frames");
                const auto req = parse_request_payload(frame.payload);
                parse_prompt(req.prompt); // surface grammar errors before compute
                const Image img = decode_png_rgb8(req.png_bytes.data(), req.png_bytes.size());

                Tensor<float> latent;
                {
                    std::lock_guard<std::mutex> lk(inference_mutex_);
                    const Image enhanced =
                        bundle_infer_fn(bundle_, encoder_)(img, req.prompt);
                    latent = codec_encode(codec_, enhanced);
                }
                Frame reply;
                reply.kind = FrameKind::Latent;
                reply.payload = make_latent_payload(latent);
                detail::write_frame(client.fd, reply);
            } catch (const Error& e) {
                // protocol-level failure: report and keep the connection usable
                Frame reply;
                reply.kind = FrameKind::Error;
                reply.payload = make_error_payload(e.what());
                try {
                    detail::write_frame(client.fd, reply);
                } catch (const Error&) {
                    return;
                }
            }
        }
    }

    ModelBundle& bundle_;
    LatentCodec& codec_;
    const TextEncoder& encoder_;
    detail::Fd listener_;
    std::uint16_t port_ = 0;
    std::atomic<bool> running_{false};
    std::thread accept_thread_;
    std::mutex workers_mutex_;
    std::mutex inference_mutex_;
    std::vector<std::thread> workers_;
    std::vector<int> client_fds_;
};

/// Client connection that can issue several requests over one socket.
class StreamClient {
public:
    StreamClient(const std::string& host, std::uint16_t port) {
        addrinfo hints{};
        hints.ai_family = AF_INET;
        hints.ai_socktype = SOCK_STREAM;
        addrinfo* res = nullptr;
        if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0)
            throw IoError("cannot resolve " + host);
        int fd = -1;
        for (addrinfo* p = res; p; p = p->ai_next) {
            fd = ::socket(p->ai_family, p->ai_socktype, p->ai_protocol);
            if (fd < 0) continue;
            if (::connect(fd, p->ai_addr, p->ai_addrlen) == 0) break;
            ::close(fd);
            fd = -1;
        }
        ::freeaddrinfo(res);
        if (fd < 0) throw IoError("cannot connect to " + host + ":" + std::to_string(port));
        fd_ = detail::Fd(fd);
    }

    /// Sends one enhancement request and decodes the latent reply locally.
    Image enhance(const Image& img, const std::string& prompt, LatentCodec& codec) {
        Frame request;
        request.kind = FrameKind::Request;
        request.payload = make_request_payload(encode_png_rgb8(img), prompt);
        detail::write_frame(fd_.fd, request);
        Frame reply;
        if (!detail::read_frame(fd_.fd, reply))
            throw IoError("server closed the connection before replying");
        if (reply.kind == FrameKind::Error)
            throw Error("server error: " + parse_error_payload(reply.payload));
        if (reply.kind != FrameKind::Latent) throw IoError("unexpected reply frame kind");
        return codec_decode(codec, parse_latent_payload(reply.payload));
    }

    /// Raw exchange for protocol tests.
    Frame roundtrip(const Frame& f) {
        detail::write_frame(fd_.fd, f);
        Frame reply;
        if (!detail::read_frame(fd_.fd, reply))
            throw IoError("server closed the connection before replying");
        return reply;
    }

private:
    detail::Fd fd_;
};

/// One-shot convenience wrapper around StreamClient.
inline Image request_enhance(const std::string& host, std::uint16_t port, const Image& img,
                             const std::string& prompt, LatentCodec& codec) {
    StreamClient client(host, port);
    return client.enhance(img, prompt, codec);
}

} // namespace pgx
