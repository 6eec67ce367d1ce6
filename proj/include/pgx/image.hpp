#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "pgx/errors.hpp"

namespace pgx {

/// Value domain of a raster. U8 stores integral values 0..255 (as floats),
/// Unit stores [0,1], Signed stores [-1,1]. Learned-model tensors use Signed,
/// file I/O uses U8.
enum class Domain : std::uint8_t { U8, Unit, Signed };

enum class Colorspace : std::uint8_t { RGB, HSV };

inline const char* to_string(Domain d) {
    switch (d) {
        case Domain::U8: return "u8";
        case Domain::Unit: return "unit";
        default: return "signed";
    }
}

inline const char* to_string(Colorspace c) { return c == Colorspace::RGB ? "RGB" : "HSV"; }

/// Interleaved H x W x 3 raster. data[(y*width + x)*3 + c].
struct Image {
    int width = 0;
    int height = 0;
    Domain domain = Domain::U8;
    Colorspace colorspace = Colorspace::RGB;
    std::vector<float> data;

    static constexpr int channels = 3;

    Image() = default;
    Image(int w, int h, Domain d, Colorspace cs = Colorspace::RGB, float fill = 0.0f)
        : width(w), height(h), domain(d), colorspace(cs),
          data(std::size_t(w) * std::size_t(h) * channels, fill) {}

    std::size_t pixel_count() const { return std::size_t(width) * std::size_t(height); }
    std::size_t value_count() const { return pixel_count() * channels; }

    float& at(int y, int x, int c) { return data[(std::size_t(y) * width + x) * channels + c]; }
    float at(int y, int x, int c) const { return data[(std::size_t(y) * width + x) * channels + c]; }

    bool same_shape(const Image& o) const { return width == o.width && height == o.height; }

    /// Domain peak used by PSNR: 255 for U8, 1 for Unit, 2 (full range) for Signed.
    double peak() const {
        switch (domain) {
            case Domain::U8: return 255.0;
            case Domain::Unit: return 1.0;
            default: return 2.0;
        }
    }

    void require(Domain d, Colorspace cs = Colorspace::RGB) const {
        if (domain != d || colorspace != cs)
            throw DomainError(std::string("expected ") + to_string(d) + "/" + to_string(cs) +
                              " image, got " + to_string(domain) + "/" + to_string(colorspace));
    }
};

/// Checks the declared invariants; throws DomainError on the first violation.
inline void validate(const Image& img) {
    if (img.width <= 0 || img.height <= 0)
        throw DomainError("image has non-positive dimensions");
    if (img.data.size() != img.value_count())
        throw DomainError("image data length does not match width*height*channels");
    if (img.colorspace == Colorspace::HSV && img.domain != Domain::Unit)
        throw DomainError("HSV images must use the unit domain");
    double lo = 0.0, hi = 255.0;
    switch (img.domain) {
        case Domain::U8: lo = 0.0; hi = 255.0; break;
        case Domain::Unit: lo = 0.0; hi = 1.0; break;
        case Domain::Signed: lo = -1.0; hi = 1.0; break;
    }
    for (float v : img.data) {
        if (!(v >= lo && v <= hi))
            throw DomainError("image value " + std::to_string(v) + " outside " +
                              to_string(img.domain) + " domain");
        if (img.domain == Domain::U8 && v != std::round(v))
            throw DomainError("u8 image holds a non-integral value");
    }
}

inline float clamp_unit(float v) { return std::min(1.0f, std::max(0.0f, v)); }
inline float clamp_signed(float v) { return std::min(1.0f, std::max(-1.0f, v)); }
inline float clamp_u8(float v) { return std::min(255.0f, std::max(0.0f, v)); }

/// Converts between value domains. U8 <-> Unit <-> Signed compose to identity
/// within 1/255. Colorspace is carried through unchanged (HSV stays Unit-only).
inline Image convert_domain(const Image& img, Domain target) {
    if (img.colorspace == Colorspace::HSV && target != Domain::Unit)
        throw DomainError("HSV images cannot leave the unit domain");
    if (img.domain == target) return img;
    Image out = img;
    out.domain = target;
    const auto n = img.data.size();
    auto u8_of_unit = [](float v) { return float(std::lround(clamp_unit(v) * 255.0f)); };
    for (std::size_t i = 0; i < n; ++i) {
        float v = img.data[i];
        float unit;
        switch (img.domain) {
            case Domain::U8: unit = v / 255.0f; break;
            case Domain::Unit: unit = v; break;
            default: unit = (v + 1.0f) * 0.5f; break;
        }
        switch (target) {
            case Domain::U8: out.data[i] = u8_of_unit(unit); break;
            case Domain::Unit: out.data[i] = clamp_unit(unit); break;
            default: out.data[i] = clamp_signed(unit * 2.0f - 1.0f); break;
        }
    }
    return out;
}

/// (1-t)*a + t*b per value. t=0 returns a exactly, t=1 returns b exactly.
/// U8 inputs are blended in real arithmetic and re-rounded.
inline Image lerp_images(const Image& a, const Image& b, double t) {
    if (!a.same_shape(b) || a.domain != b.domain || a.colorspace != b.colorspace)
        throw ContractError("lerp_images requires matching shape, domain, and colorspace");
    Image out = a;
    const auto n = a.data.size();
    for (std::size_t i = 0; i < n; ++i) {
        double v = (1.0 - t) * double(a.data[i]) + t * double(b.data[i]);
        out.data[i] = a.domain == Domain::U8 ? float(std::lround(std::min(255.0, std::max(0.0, v))))
                                             : float(v);
    }
    return out;
}

/// Center-crops to the largest centered square, then resizes with bilinear
/// sampling. Used when preparing arbitrary source photos for the dataset.
inline Image center_crop_resize(const Image& img, int size) {
    contract(size > 0, "target size must be positive");
    const int side = std::min(img.width, img.height);
    const int x0 = (img.width - side) / 2;
    const int y0 = (img.height - side) / 2;
    Image out(size, size, img.domain, img.colorspace);
    const double scale = double(side) / size;
    for (int y = 0; y < size; ++y) {
        const double sy = (y + 0.5) * scale - 0.5;
        const int iy0 = std::clamp(int(std::floor(sy)), 0, side - 1);
        const int iy1 = std::min(iy0 + 1, side - 1);
        const double fy = std::clamp(sy - iy0, 0.0, 1.0);
        for (int x = 0; x < size; ++x) {
            const double sx = (x + 0.5) * scale - 0.5;
            const int ix0 = std::clamp(int(std::floor(sx)), 0, side - 1);
            const int ix1 = std::min(ix0 + 1, side - 1);
            const double fx = std::clamp(sx - ix0, 0.0, 1.0);
            for (int c = 0; c < 3; ++c) {
                const double v00 = img.at(y0 + iy0, x0 + ix0, c);
                const double v01 = img.at(y0 + iy0, x0 + ix1, c);
                const double v10 = img.at(y0 + iy1, x0 + ix0, c);
                const double v11 = img.at(y0 + iy1, x0 + ix1, c);
                double v = (1 - fy) * ((1 - fx) * v00 + fx * v01) + fy * ((1 - fx) * v10 + fx * v11);
                out.at(y, x, c) = img.domain == Domain::U8 ? float(std::lround(v)) : float(v);
            }
        }
    }
    return out;
}

} // namespace pgx
