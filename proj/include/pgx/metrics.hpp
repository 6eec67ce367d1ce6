#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "pgx/image.hpp"

namespace pgx {

struct MetricReport {
    double psnr_db = 0.0; // +infinity when images are identical
    double ssim = 0.0;
};

inline double mse(const Image& a, const Image& b) {
    if (!a.same_shape(b)) throw ContractError("mse: shape mismatch");
    if (a.domain != b.domain) throw ContractError("mse: domain mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = double(a.data[i]) - double(b.data[i]);
        acc += d * d;
    }
    return acc / double(a.data.size());
}

/// 10*log10(MAX^2 / MSE) with MAX the declared domain peak.
/// Identical images return +infinity.
inline double psnr(const Image& a, const Image& b) {
    const double m = mse(a, b);
    if (m == 0.0) return std::numeric_limits<double>::infinity();
    const double peak = a.peak();
    return 10.0 * std::log10(peak * peak / m);
}

namespace detail {

inline std::array<double, 11> ssim_window_1d() {
    std::array<double, 11> w{};
    const double sigma = 1.5;
    double sum = 0.0;
    for (int i = 0; i < 11; ++i) {
        const double d = i - 5;
        w[i] = std::exp(-(d * d) / (2.0 * sigma * sigma));
        sum += w[i];
    }
    for (auto& v : w) v /= sum;
    return w;
}

// One horizontal + one vertical weighted pass over a single-channel plane.
inline void ssim_blur(const std::vector<double>& src, int w, int h, std::vector<double>& tmp,
                      std::vector<double>& dst) {
    static const std::array<double, 11> k = ssim_window_1d();
    const int vw = w - 10; // valid width after horizontal pass
    tmp.assign(std::size_t(vw) * h, 0.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < vw; ++x) {
            double acc = 0.0;
            for (int i = 0; i < 11; ++i) acc += k[i] * src[std::size_t(y) * w + x + i];
            tmp[std::size_t(y) * vw + x] = acc;
        }
    const int vh = h - 10;
    dst.assign(std::size_t(vw) * vh, 0.0);
    for (int y = 0; y < vh; ++y)
        for (int x = 0; x < vw; ++x) {
            double acc = 0.0;
            for (int i = 0; i < 11; ++i) acc += k[i] * tmp[std::size_t(y + i) * vw + x];
            dst[std::size_t(y) * vw + x] = acc;
        }
}

} // namespace detail

/// Standard SSIM: 11x11 Gaussian window (sigma 1.5), C1=(0.01*MAX)^2,
/// C2=(0.03*MAX)^2, computed per channel over valid window positions and
/// averaged across channels. ssim(a,a) == 1 exactly.
inline double ssim(const Image& a, const Image& b) {
    if (!a.same_shape(b)) throw ContractError("ssim: shape mismatch");
    if (a.domain != b.domain) throw ContractError("ssim: domain mismatch");
    if (a.width < 11 || a.height < 11)
        throw ContractError("ssim: image smaller than the 11x11 window");
    const double peak = a.peak();
    const double c1 = (0.01 * peak) * (0.01 * peak);
    const double c2 = (0.03 * peak) * (0.03 * peak);
    const int w = a.width, h = a.height;
    const std::size_t n = a.pixel_count();

    std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
    std::vector<double> mx, my, mxx, myy, mxy, tmp;
    double total = 0.0;
    for (int c = 0; c < 3; ++c) {
        for (std::size_t i = 0; i < n; ++i) {
            const double av = a.data[i * 3 + c];
            const double bv = b.data[i * 3 + c];
            x[i] = av;
            y[i] = bv;
            xx[i] = av * av;
            yy[i] = bv * bv;
            xy[i] = av * bv;
        }
        detail::ssim_blur(x, w, h, tmp, mx);
        detail::ssim_blur(y, w, h, tmp, my);
        detail::ssim_blur(xx, w, h, tmp, mxx);
        detail::ssim_blur(yy, w, h, tmp, myy);
        detail::ssim_blur(xy, w, h, tmp, mxy);
        double acc = 0.0;
        for (std::size_t i = 0; i < mx.size(); ++i) {
            const double sx = mxx[i] - mx[i] * mx[i];
            const double sy = myy[i] - my[i] * my[i];
            const double sxy = mxy[i] - mx[i] * my[i];
            const double num = (2.0 * mx[i] * my[i] + c1) * (2.0 * sxy + c2);
            const double den = (mx[i] * mx[i] + my[i] * my[i] + c1) * (sx + sy + c2);
            acc += num / den;
        }
        total += acc / double(mx.size());
    }
    return total / 3.0;
}

inline MetricReport compare(const Image& a, const Image& b) {
    return MetricReport{psnr(a, b), ssim(a, b)};
}

} // namespace pgx
