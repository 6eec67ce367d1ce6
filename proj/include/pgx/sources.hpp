#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "pgx/image.hpp"
#include "pgx/png_io.hpp"
#include "pgx/rng.hpp"

namespace pgx {

/// Procedural source images for desk-scale corpora: a smooth color gradient,
/// a few soft-edged shapes at different heights, and one high-frequency
/// striped band. Covers what the four effects need — smooth regions that show
/// banding, structures for segmentation, and fine detail for foveation.
inline Image generate_source_image(int size, std::uint64_t seed) {
    Rng rng(seed);
    Image img(size, size, Domain::Unit);

    float c0[3], c1[3];
    for (int c = 0; c < 3; ++c) {
        c0[c] = float(rng.uniform(0.05, 0.95));
        c1[c] = float(rng.uniform(0.05, 0.95));
    }
    const double angle = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
    const double dx = std::cos(angle), dy = std::sin(angle);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const double t =
                0.5 + 0.5 * ((x * dx + y * dy) / double(size) - 0.5 * (dx + dy));
            const float tt = clamp_unit(float(t));
            for (int c = 0; c < 3; ++c)
                img.at(y, x, c) = c0[c] + tt * (c1[c] - c0[c]);
        }

    const int shapes = 2 + int(rng.uniform_index(3));
    for (int s = 0; s < shapes; ++s) {
        const double cx = rng.uniform(0.15, 0.85) * size;
        const double cy = rng.uniform(0.15, 0.85) * size;
        const double rx = rng.uniform(0.08, 0.28) * size;
        const double ry = rng.uniform(0.08, 0.28) * size;
        float col[3];
        for (int c = 0; c < 3; ++c) col[c] = float(rng.uniform(0.0, 1.0));
        const int x_lo = std::max(0, int(cx - rx - 2)), x_hi = std::min(size, int(cx + rx + 3));
        const int y_lo = std::max(0, int(cy - ry - 2)), y_hi = std::min(size, int(cy + ry + 3));
        for (int y = y_lo; y < y_hi; ++y)
            for (int x = x_lo; x < x_hi; ++x) {
                const double d = std::pow((x - cx) / rx, 2) + std::pow((y - cy) / ry, 2);
                if (d >= 1.0) continue;
                const float a = float(std::min(1.0, (1.0 - d) * 6.0)); // soft edge
                for (int c = 0; c < 3; ++c)
                    img.at(y, x, c) = (1.0f - a) * img.at(y, x, c) + a * col[c];
            }
    }

    // striped band: high-frequency content for the foveation oracle
    const int band_y = int(rng.uniform(0.1, 0.7) * size);
    const int band_h = std::max(4, size / 8);
    const int period = 2 + int(rng.uniform_index(3));
    const float contrast = float(rng.uniform(0.15, 0.35));
    for (int y = band_y; y < std::min(size, band_y + band_h); ++y)
        for (int x = 0; x < size; ++x) {
            const float sgn = (x / period) % 2 ? contrast : -contrast;
            for (int c = 0; c < 3; ++c) img.at(y, x, c) = clamp_unit(img.at(y, x, c) + sgn);
        }

    for (auto& v : img.data) v = clamp_unit(v);
    return convert_domain(img, Domain::U8);
}

inline std::vector<Image> generate_source_corpus(int count, int size, std::uint64_t seed) {
    std::vector<Image> out(count);
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < count; ++i)
        out[i] = generate_source_image(size, mix_seed(seed, 0xC0DEC0DEull + i));
    return out;
}

inline void write_source_corpus(const std::string& dir, int count, int size,
                                std::uint64_t seed) {
    std::filesystem::create_directories(dir);
    const auto corpus = generate_source_corpus(count, size, seed);
    for (int i = 0; i < count; ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "src_%05d.png", i);
        write_png_rgb8((std::filesystem::path(dir) / name).string(), corpus[i]);
    }
}

} // namespace pgx
