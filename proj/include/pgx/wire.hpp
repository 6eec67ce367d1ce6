#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "pgx/errors.hpp"
#include "pgx/tensor.hpp"

namespace pgx {

/// Framed wire protocol for latent streaming. Layout:
///   magic "PGLS" (4) | version u8 | kind u8 | payload length u32 LE | payload
/// Total frame length is 10 + payload length.
constexpr std::uint8_t kWireVersion = 1;
constexpr std::size_t kFrameHeaderSize = 10;
constexpr char kWireMagic[4] = {'P', 'G', 'L', 'S'};

enum class FrameKind : std::uint8_t {
    Request = 1, // PNG image + prompt
    Latent = 2,  // encoded latent tensor
    Error = 3,   // UTF-8 message
};

struct Frame {
    std::uint8_t version = kWireVersion;
    FrameKind kind = FrameKind::Request;
    std::vector<std::uint8_t> payload;

    bool operator==(const Frame& o) const {
        return version == o.version && kind == o.kind && payload == o.payload;
    }
};

struct WireError : Error {
    enum class Code { BadMagic, BadVersion, BadKind, Truncated };
    Code code;
    WireError(Code c, const std::string& msg) : Error(msg), code(c) {}
};

inline std::vector<std::uint8_t> serialize_frame(const Frame& f) {
    std::vector<std::uint8_t> out(kFrameHeaderSize + f.payload.size());
    std::memcpy(out.data(), kWireMagic, 4);
    out[4] = f.version;
    out[5] = std::uint8_t(f.kind);
    const std::uint32_t len = std::uint32_t(f.payload.size());
    std::memcpy(out.data() + 6, &len, 4);
    std::memcpy(out.data() + kFrameHeaderSize, f.payload.data(), f.payload.size());
    return out;
}

/// Rejects bad magic, unknown versions, unknown kinds, and truncated
/// payloads, each with its own error code.
inline Frame deserialize_frame(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kFrameHeaderSize)
        throw WireError(WireError::Code::Truncated, "frame shorter than its header");
    if (std::memcmp(bytes.data(), kWireMagic, 4) != 0)
        throw WireError(WireError::Code::BadMagic, "bad frame magic");
    Frame f;
    f.version = bytes[4];
    if (f.version != kWireVersion)
        throw WireError(WireError::Code::BadVersion,
                        "unsupported wire version " + std::to_string(int(f.version)));
    const std::uint8_t kind = bytes[5];
    if (kind < 1 || kind > 3)
        throw WireError(WireError::Code::BadKind, "unknown frame kind " + std::to_string(kind));
    f.kind = FrameKind(kind);
    std::uint32_t len = 0;
    std::memcpy(&len, bytes.data() + 6, 4);
    if (bytes.size() < kFrameHeaderSize + len)
        throw WireError(WireError::Code::Truncated,
                        "declared payload length " + std::to_string(len) + " exceeds " +
                            std::to_string(bytes.size() - kFrameHeaderSize) + " available bytes");
    f.payload.assign(bytes.begin() + kFrameHeaderSize,
                     bytes.begin() + kFrameHeaderSize + len);
    return f;
}

// ---------------------------------------------------------------------------
// Payload layouts

/// Request payload: u16 LE prompt length, prompt bytes, PNG bytes to the end.
inline std::vector<std::uint8_t> make_request_payload(const std::vector<std::uint8_t>& png_bytes,
                                                      const std::string& prompt) {
    contract(prompt.size() <= 0xFFFF, "prompt too long for the wire format");
    std::vector<std::uint8_t> out(2 + prompt.size() + png_bytes.size());
    const std::uint16_t plen = std::uint16_t(prompt.size());
    std::memcpy(out.data(), &plen, 2);
    std::memcpy(out.data() + 2, prompt.data(), prompt.size());
    std::memcpy(out.data() + 2 + prompt.size(), png_bytes.data(), png_bytes.size());
    return out;
}

struct RequestPayload {
    std::string prompt;
    std::vector<std::uint8_t> png_bytes;
};

inline RequestPayload parse_request_payload(const std::vector<std::uint8_t>& payload) {
    if (payload.size() < 2)
        throw WireError(WireError::Code::Truncated, "request payload shorter than its header");
    std::uint16_t plen = 0;
    std::memcpy(&plen, payload.data(), 2);
    if (payload.size() < std::size_t(2) + plen)
        throw WireError(WireError::Code::Truncated, "request prompt truncated");
    RequestPayload out;
    out.prompt.assign(payload.begin() + 2, payload.begin() + 2 + plen);
    out.png_bytes.assign(payload.begin() + 2 + plen, payload.end());
    return out;
}

/// Latent payload: shape header of three u16 LE (c, h, w), then c*h*w
/// float32 LE values.
inline std::vector<std::uint8_t> make_latent_payload(const Tensor<float>& latent) {
    contract(latent.shape.size() == 3, "latent must be rank 3");
    const std::uint16_t c = std::uint16_t(latent.dim(0));
    const std::uint16_t h = std::uint16_t(latent.dim(1));
    const std::uint16_t w = std::uint16_t(latent.dim(2));
    std::vector<std::uint8_t> out(6 + latent.size() * 4);
    std::memcpy(out.data(), &c, 2);
    std::memcpy(out.data() + 2, &h, 2);
    std::memcpy(out.data() + 4, &w, 2);
    std::memcpy(out.data() + 6, latent.ptr(), latent.size() * 4);
    return out;
}

inline Tensor<float> parse_latent_payload(const std::vector<std::uint8_t>& payload) {
    if (payload.size() < 6)
        throw WireError(WireError::Code::Truncated, "latent payload shorter than its header");
    std::uint16_t c = 0, h = 0, w = 0;
    std::memcpy(&c, payload.data(), 2);
    std::memcpy(&h, payload.data() + 2, 2);
    std::memcpy(&w, payload.data() + 4, 2);
    const std::size_t n = std::size_t(c) * h * w;
    if (payload.size() != 6 + n * 4)
        throw WireError(WireError::Code::Truncated, "latent payload size does not match shape");
    Tensor<float> latent({int(c), int(h), int(w)});
    std::memcpy(latent.ptr(), payload.data() + 6, n * 4);
    return latent;
}

inline std::vector<std::uint8_t> make_error_payload(const std::string& message) {
    return std::vector<std::uint8_t>(message.begin(), message.end());
}

inline std::string parse_error_payload(const std::vector<std::uint8_t>& payload) {
    return std::string(payload.begin(), payload.end());
}

} // namespace pgx
