#pragma once

#include <algorithm>
#include <cmath>

#include "pgx/image.hpp"

namespace pgx {

/// Hue is encoded in [0,1) representing [0°, 360°). S and V in [0,1].
struct Hsv {
    float h, s, v;
};

inline Hsv rgb_to_hsv_px(float r, float g, float b) {
    const float maxc = std::max({r, g, b});
    const float minc = std::min({r, g, b});
    const float delta = maxc - minc;
    Hsv out{0.0f, 0.0f, maxc};
    if (delta <= 0.0f || maxc <= 0.0f) return out; // achromatic: H=0 by convention
    out.s = delta / maxc;
    float h;
    if (maxc == r)
        h = (g - b) / delta;
    else if (maxc == g)
        h = 2.0f + (b - r) / delta;
    else
        h = 4.0f + (r - g) / delta;
    h /= 6.0f;
    if (h < 0.0f) h += 1.0f;
    if (h >= 1.0f) h -= 1.0f;
    out.h = h;
    return out;
}

inline void hsv_to_rgb_px(const Hsv& in, float& r, float& g, float& b) {
    if (in.s <= 0.0f) {
        r = g = b = in.v;
        return;
    }
    float h = in.h - std::floor(in.h);
    h *= 6.0f;
    const int sector = std::min(5, int(h));
    const float f = h - sector;
    const float p = in.v * (1.0f - in.s);
    const float q = in.v * (1.0f - in.s * f);
    const float t = in.v * (1.0f - in.s * (1.0f - f));
    switch (sector) {
        case 0: r = in.v; g = t; b = p; break;
        case 1: r = q; g = in.v; b = p; break;
        case 2: r = p; g = in.v; b = t; break;
        case 3: r = p; g = q; b = in.v; break;
        case 4: r = t; g = p; b = in.v; break;
        default: r = in.v; g = p; b = q; break;
    }
}

inline Image rgb_to_hsv(const Image& img) {
    img.require(Domain::Unit, Colorspace::RGB);
    Image out = img;
    out.colorspace = Colorspace::HSV;
    for (std::size_t i = 0; i < img.data.size(); i += 3) {
        const Hsv px = rgb_to_hsv_px(img.data[i], img.data[i + 1], img.data[i + 2]);
        out.data[i] = px.h;
        out.data[i + 1] = px.s;
        out.data[i + 2] = px.v;
    }
    return out;
}

inline Image hsv_to_rgb(const Image& img) {
    img.require(Domain::Unit, Colorspace::HSV);
    Image out = img;
    out.colorspace = Colorspace::RGB;
    for (std::size_t i = 0; i < img.data.size(); i += 3) {
        hsv_to_rgb_px({img.data[i], img.data[i + 1], img.data[i + 2]},
                      out.data[i], out.data[i + 1], out.data[i + 2]);
    }
    return out;
}

} // namespace pgx
