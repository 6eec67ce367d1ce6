#pragma once

#include "pgx/image.hpp"
#include "pgx/tensor.hpp"

namespace pgx {

/// u8 interleaved image -> signed [-1,1] CHW tensor (no batch dimension).
template <class T = float>
Tensor<T> image_to_signed_chw(const Image& img) {
    img.require(Domain::U8, Colorspace::RGB);
    Tensor<T> t({3, img.height, img.width});
    const std::size_t plane = img.pixel_count();
    for (std::size_t i = 0; i < plane; ++i)
        for (int c = 0; c < 3; ++c)
            t.data[std::size_t(c) * plane + i] = T(double(img.data[i * 3 + c]) / 127.5 - 1.0);
    return t;
}

/// signed CHW tensor (rank 3, or rank 4 with N==1) -> u8 image, clamped.
template <class T>
Image signed_chw_to_image(const Tensor<T>& t) {
    int off = 0;
    if (t.shape.size() == 4) {
        contract(t.dim(0) == 1, "expected a single-image tensor");
        off = 1;
    } else {
        contract(t.shape.size() == 3, "expected a CHW tensor");
    }
    contract(t.dim(off) == 3, "expected three channels");
    const int h = t.dim(off + 1), w = t.dim(off + 2);
    Image img(w, h, Domain::U8, Colorspace::RGB);
    const std::size_t plane = std::size_t(w) * h;
    for (std::size_t i = 0; i < plane; ++i)
        for (int c = 0; c < 3; ++c) {
            const double v = (double(t.data[std::size_t(c) * plane + i]) + 1.0) * 127.5;
            img.data[i * 3 + c] = float(std::lround(std::min(255.0, std::max(0.0, v))));
        }
    return img;
}

} // namespace pgx
