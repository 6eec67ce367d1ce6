#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "pgx/color.hpp"
#include "pgx/image.hpp"
#include "pgx/rng.hpp"
#include "pgx/tasks.hpp"

namespace pgx {

/// Free parameters of the effect oracles. sigma_max is expressed in pixels
/// for a 256x256 image and is rescaled by the image diagonal.
struct EffectParams {
    double intensity = 1.0;       // (0,1]
    std::uint64_t seed = 0;
    double gaze_x = 0.5;          // [0,1]
    double gaze_y = 0.5;          // [0,1]
    double fovea_radius = 0.15;   // fraction of the image diagonal
    double sigma_max = 12.0;      // px at 256^2
    double noise_density = 0.05;  // [0,1]
    int quant_bits = 4;           // [1,8]
    double depth_threshold = 0.5; // unit depth
    double hue_strength = 1.0;    // [0,1]

    void validate() const {
        // 0 is allowed here (a no-op effect); prompt-derived TaskSpec
        // intensities are restricted to (0,1].
        contract(intensity >= 0.0 && intensity <= 1.0, "intensity outside [0,1]");
        contract(gaze_x >= 0.0 && gaze_x <= 1.0 && gaze_y >= 0.0 && gaze_y <= 1.0,
                 "gaze outside [0,1]^2");
        contract(fovea_radius >= 0.0 && fovea_radius < 1.0, "fovea_radius outside [0,1)");
        contract(sigma_max >= 0.0, "sigma_max must be non-negative");
        contract(noise_density >= 0.0 && noise_density <= 1.0, "noise_density outside [0,1]");
        contract(quant_bits >= 1 && quant_bits <= 8, "quant_bits outside [1,8]");
        contract(depth_threshold >= 0.0 && depth_threshold <= 1.0, "depth_threshold outside [0,1]");
        contract(hue_strength >= 0.0 && hue_strength <= 1.0, "hue_strength outside [0,1]");
    }
};

/// H x W unit depth raster; 0 = near, 1 = far.
struct DepthMap {
    int width = 0;
    int height = 0;
    std::vector<float> depth;

    float at(int y, int x) const { return depth[std::size_t(y) * width + x]; }
};

/// H x W integer segment labels, contiguous from 0.
struct SegmentMap {
    int width = 0;
    int height = 0;
    int num_segments = 0;
    std::vector<int> labels;

    int at(int y, int x) const { return labels[std::size_t(y) * width + x]; }
};

// ---------------------------------------------------------------------------
// Fallback depth / segmentation providers

/// Built-in depth fallback: bottom row is near (0), top row far (1).
inline DepthMap depth_vertical_gradient(int width, int height) {
    DepthMap d{width, height, {}};
    d.depth.resize(std::size_t(width) * height);
    for (int y = 0; y < height; ++y) {
        const float v = height > 1 ? 1.0f - float(y) / float(height - 1) : 0.0f;
        for (int x = 0; x < width; ++x) d.depth[std::size_t(y) * width + x] = v;
    }
    return d;
}

/// Built-in segmentation fallback: seeded k-means over (x, y, R, G, B).
/// Labels are relabeled contiguous from 0 in first-occurrence order.
inline SegmentMap kmeans_segments(const Image& img, int k, std::uint64_t seed, int iterations = 12) {
    img.require(Domain::Unit, Colorspace::RGB);
    contract(k >= 1, "k must be >= 1");
    const int w = img.width, h = img.height;
    const std::size_t n = std::size_t(w) * h;
    std::vector<std::array<float, 5>> feat(n);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            auto& f = feat[std::size_t(y) * w + x];
            f[0] = w > 1 ? float(x) / float(w - 1) : 0.0f;
            f[1] = h > 1 ? float(y) / float(h - 1) : 0.0f;
            f[2] = img.at(y, x, 0);
            f[3] = img.at(y, x, 1);
            f[4] = img.at(y, x, 2);
        }
    Rng rng(mix_seed(seed, fnv1a64("kmeans")));
    std::vector<std::array<float, 5>> centers(k);
    for (int c = 0; c < k; ++c) centers[c] = feat[rng.uniform_index(n)];

    std::vector<int> assign(n, 0);
    std::vector<std::array<double, 5>> sums(k);
    std::vector<std::size_t> counts(k);
    for (int it = 0; it < iterations; ++it) {
        for (auto& s : sums) s.fill(0.0);
        std::fill(counts.begin(), counts.end(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            int best = 0;
            float best_d = std::numeric_limits<float>::max();
            for (int c = 0; c < k; ++c) {
                float d = 0.0f;
                for (int j = 0; j < 5; ++j) {
                    const float diff = feat[i][j] - centers[c][j];
                    d += diff * diff;
                }
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            assign[i] = best;
            for (int j = 0; j < 5; ++j) sums[best][j] += feat[i][j];
            counts[best]++;
        }
        for (int c = 0; c < k; ++c)
            if (counts[c] > 0)
                for (int j = 0; j < 5; ++j) centers[c][j] = float(sums[c][j] / double(counts[c]));
    }
    // Relabel contiguous in first-occurrence order; empty clusters vanish.
    std::vector<int> remap(k, -1);
    int next = 0;
    SegmentMap out{w, h, 0, std::vector<int>(n)};
    for (std::size_t i = 0; i < n; ++i) {
        if (remap[assign[i]] < 0) remap[assign[i]] = next++;
        out.labels[i] = remap[assign[i]];
    }
    out.num_segments = next;
    return out;
}

/// Depth and segmentation inputs for chromostereopsis; either slot may be
/// filled from files or from the built-in fallbacks.
struct SceneMaps {
    DepthMap depth;
    SegmentMap segments;
};

inline SceneMaps fallback_scene_maps(const Image& source_u8, int k, std::uint64_t seed) {
    SceneMaps maps;
    maps.depth = depth_vertical_gradient(source_u8.width, source_u8.height);
    maps.segments = kmeans_segments(convert_domain(source_u8, Domain::Unit), k, seed);
    return maps;
}

// ---------------------------------------------------------------------------
// Effect oracles

/// Requantizes brightness levels: levels = 2^bits, each value snaps to
/// round(round(v*(levels-1)/255) * 255/(levels-1)). Idempotent; bits=8 is
/// the identity.
inline Image quantize_dynamic_range(const Image& img, int bits) {
    img.require(Domain::U8, Colorspace::RGB);
    contract(bits >= 1 && bits <= 8, "quant bits outside [1,8]");
    if (bits == 8) return img;
    const int levels = 1 << bits;
    const double step = 255.0 / double(levels - 1);
    Image out = img;
    for (auto& v : out.data) {
        const long k = std::lround(double(v) * double(levels - 1) / 255.0);
        v = float(std::min(255.0, std::max(0.0, double(std::lround(double(k) * step)))));
    }
    return out;
}

/// Sets exactly floor(density*H*W) pixel positions (all three channels) to
/// white or black, salt count rounded up. Positions drawn by seeded sampling
/// without replacement; deterministic per seed.
inline Image add_salt_pepper(const Image& img, double density, std::uint64_t seed) {
    img.require(Domain::U8, Colorspace::RGB);
    contract(density >= 0.0 && density <= 1.0, "density outside [0,1]");
    Image out = img;
    const std::size_t total = img.pixel_count();
    const std::size_t n = std::size_t(density * double(total));
    if (n == 0) return out;
    Rng rng(mix_seed(seed, fnv1a64("salt-pepper")));
    const auto positions = rng.sample_without_replacement(total, n);
    const std::size_t salt = (n + 1) / 2;
    for (std::size_t i = 0; i < positions.size(); ++i) {
        const float v = i < salt ? 255.0f : 0.0f;
        float* px = out.data.data() + positions[i] * 3;
        px[0] = px[1] = px[2] = v;
    }
    return out;
}

namespace detail {

// Per-pixel blur scale in pixels. Zero inside the foveal disk.
inline double foveation_sigma(double ecc, const EffectParams& p, double sigma_max_px) {
    const double t = (ecc - p.fovea_radius) / (1.0 - p.fovea_radius);
    return p.intensity * sigma_max_px * std::max(0.0, t);
}

} // namespace detail

/// Eccentricity-scaled Gaussian pooling with local-statistics noise
/// re-injection. The foveal disk (eccentricity <= fovea_radius) is returned
/// bit-identical; elsewhere the image is pooled at
/// sigma = intensity * sigma_max * (e - r)/(1 - r) and seeded high-pass noise
/// restores the pooled local standard deviation without disturbing pooled
/// local means.
inline Image foveate(const Image& img, const EffectParams& p) {
    img.require(Domain::Unit, Colorspace::RGB);
    p.validate();
    const int w = img.width, h = img.height;
    const std::size_t n_px = std::size_t(w) * h;
    const double diag = std::sqrt(double(w) * w + double(h) * h);
    const double sigma_max_px = p.sigma_max * diag / (256.0 * std::sqrt(2.0));
    const double gx = p.gaze_x * (w - 1);
    const double gy = p.gaze_y * (h - 1);

    Image out = img;
    if (p.sigma_max <= 0.0 || p.intensity <= 0.0) return out;

    // One shared noise plane; the same sample drives all three channels so
    // re-injected noise is achromatic. Samples come in horizontal +/- pairs,
    // which makes the field zero-mean under any local average wider than two
    // pixels: pooled local means survive the injection.
    std::vector<float> noise(n_px);
    {
        Rng rng(mix_seed(p.seed, fnv1a64("foveate-noise")));
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x + 1 < w; x += 2) {
                const float v = float(rng.normal());
                noise[std::size_t(y) * w + x] = v;
                noise[std::size_t(y) * w + x + 1] = -v;
            }
            if (w % 2) noise[std::size_t(y) * w + w - 1] = float(rng.normal());
        }
    }

    std::vector<float> sigma_px(n_px, 0.0f);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double ecc = std::hypot(x - gx, y - gy) / diag;
            sigma_px[std::size_t(y) * w + x] =
                float(detail::foveation_sigma(ecc, p, sigma_max_px));
        }

    // Gaussian pooling of an arbitrary plane set at the per-pixel sigma.
    // Writes mean (and optionally weighted second moment) per channel.
    auto pool_pass = [&](int channels, const auto& value_at, double* means, double* second) {
#pragma omp parallel for schedule(dynamic, 8)
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const std::size_t i = std::size_t(y) * w + x;
                const double sigma = sigma_px[i];
                if (sigma <= 0.0f) continue;
                const int r = std::max(1, int(std::ceil(3.0 * sigma)));
                const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
                double wsum = 0.0;
                double acc[3] = {0, 0, 0}, acc2[3] = {0, 0, 0};
                for (int dy = -r; dy <= r; ++dy) {
                    const int yy = std::clamp(y + dy, 0, h - 1);
                    for (int dx = -r; dx <= r; ++dx) {
                        const int xx = std::clamp(x + dx, 0, w - 1);
                        const double wgt = std::exp(-(double(dx) * dx + double(dy) * dy) * inv2s2);
                        wsum += wgt;
                        for (int c = 0; c < channels; ++c) {
                            const double v = value_at(yy, xx, c);
                            acc[c] += wgt * v;
                            acc2[c] += wgt * v * v;
                        }
                    }
                }
                for (int c = 0; c < channels; ++c) {
                    means[i * channels + c] = acc[c] / wsum;
                    if (second) second[i * channels + c] = acc2[c] / wsum;
                }
            }
        }
    };

    // Pass 1: pooled image and pooled local variance of the input.
    std::vector<double> pooled(n_px * 3, 0.0), m2_in(n_px * 3, 0.0);
    pool_pass(3, [&](int y, int x, int c) { return double(img.at(y, x, c)); },
              pooled.data(), m2_in.data());

    // Pass 2: local variance of the pooled plane (it is not zero near the
    // fovea where pooling is weak).
    std::vector<double> mean_pooled(n_px * 3, 0.0), m2_pooled(n_px * 3, 0.0);
    pool_pass(3,
              [&](int y, int x, int c) {
                  const std::size_t i = std::size_t(y) * w + x;
                  return sigma_px[i] > 0.0f ? pooled[i * 3 + c] : double(img.at(y, x, c));
              },
              mean_pooled.data(), m2_pooled.data());

    for (std::size_t i = 0; i < n_px; ++i) {
        if (sigma_px[i] <= 0.0f) continue; // foveal disk stays bit-identical
        for (int c = 0; c < 3; ++c) {
            const double mu = pooled[i * 3 + c];
            const double var_in = std::max(0.0, m2_in[i * 3 + c] - mu * mu);
            const double var_b =
                std::max(0.0, m2_pooled[i * 3 + c] -
                                  mean_pooled[i * 3 + c] * mean_pooled[i * 3 + c]);
            const double deficit = std::sqrt(std::max(0.0, var_in - var_b));
            const double v = mu + deficit * double(noise[i]);
            out.data[i * 3 + c] = float(std::min(1.0, std::max(0.0, v)));
        }
    }
    return out;
}

/// Pushes each segment's hue toward red (near) or blue (far) depending on
/// whether its mean depth clears the threshold; ties map to far. S and V are
/// preserved exactly in HSV space.
inline Image chromostereopsis(const Image& img, const DepthMap& depth, const SegmentMap& segments,
                              const EffectParams& p) {
    img.require(Domain::Unit, Colorspace::RGB);
    p.validate();
    contract(depth.width == img.width && depth.height == img.height,
             "depth map size mismatch");
    contract(segments.width == img.width && segments.height == img.height,
             "segment map size mismatch");
    const double amount = p.intensity * p.hue_strength;
    if (amount == 0.0) return img;

    const int nseg = std::max(1, segments.num_segments);
    std::vector<double> depth_sum(nseg, 0.0);
    std::vector<std::size_t> depth_cnt(nseg, 0);
    for (std::size_t i = 0; i < depth.depth.size(); ++i) {
        const int s = segments.labels[i];
        depth_sum[s] += depth.depth[i];
        depth_cnt[s]++;
    }
    std::vector<float> target_hue(nseg);
    for (int s = 0; s < nseg; ++s) {
        const double mean_depth = depth_cnt[s] ? depth_sum[s] / double(depth_cnt[s]) : 1.0;
        target_hue[s] = mean_depth < p.depth_threshold ? 0.0f : float(240.0 / 360.0);
    }

    Image hsv = rgb_to_hsv(img);
    for (std::size_t i = 0; i < img.pixel_count(); ++i) {
        const float target = target_hue[segments.labels[i]];
        float& hue = hsv.data[i * 3];
        hue = float((1.0 - amount) * hue + amount * target);
    }
    return hsv_to_rgb(hsv);
}

// ---------------------------------------------------------------------------
// Pair synthesis

inline std::uint64_t task_seed(std::uint64_t base_seed, TaskKind kind) {
    return mix_seed(base_seed, fnv1a64(abbrev(kind)));
}

/// One degradation step of the pair input (restoration tasks only).
inline Image apply_input_step(const Image& img_u8, TaskKind kind, const EffectParams& p) {
    switch (kind) {
        case TaskKind::DynamicRangeEnhancement:
            return quantize_dynamic_range(img_u8, p.quant_bits);
        case TaskKind::Denoising:
            return add_salt_pepper(img_u8, p.noise_density, task_seed(p.seed, kind));
        default:
            throw ContractError("input steps exist only for restoration tasks");
    }
}

/// One step of the pair target. Restoration tasks blend toward the clean
/// base: lerp(degraded, clean, intensity). Stylization tasks apply their
/// effect at the task intensity.
inline Image apply_target_step(const Image& img_u8, const TaskSpec& task, const EffectParams& base,
                               const SceneMaps* maps) {
    EffectParams p = base;
    p.intensity = task.intensity;
    switch (task.kind) {
        case TaskKind::DynamicRangeEnhancement:
        case TaskKind::Denoising:
            return lerp_images(apply_input_step(img_u8, task.kind, p), img_u8, task.intensity);
        case TaskKind::Foveation: {
            EffectParams fp = p;
            fp.seed = task_seed(base.seed, task.kind);
            return convert_domain(foveate(convert_domain(img_u8, Domain::Unit), fp), Domain::U8);
        }
        default: {
            contract(maps != nullptr, "chromostereopsis requires scene maps");
            return convert_domain(
                chromostereopsis(convert_domain(img_u8, Domain::Unit), maps->depth,
                                 maps->segments, p),
                Domain::U8);
        }
    }
}

/// Canonical application order: degradations quantize -> noise on the input;
/// stylizations chromostereopsis -> foveation on the target.
inline std::vector<TaskSpec> canonical_task_order(std::vector<TaskSpec> tasks) {
    std::sort(tasks.begin(), tasks.end(), [](const TaskSpec& a, const TaskSpec& b) {
        auto rank = [](TaskKind k) {
            switch (k) {
                case TaskKind::DynamicRangeEnhancement: return 0;
                case TaskKind::Denoising: return 1;
                case TaskKind::Chromostereopsis: return 2;
                default: return 3;
            }
        };
        return rank(a.kind) < rank(b.kind);
    });
    return tasks;
}

struct TrainingPair {
    Image input;
    Image target;
};

/// Builds one (input, target) training pair for a task set. Deterministic per
/// (params, seed); combined tasks equal the sequential application of the
/// single-task steps in canonical order, byte for byte.
inline TrainingPair synthesize_pair(const Image& source_u8, const std::vector<TaskSpec>& tasks,
                                    const EffectParams& params,
                                    const SceneMaps* maps = nullptr) {
    source_u8.require(Domain::U8, Colorspace::RGB);
    check_tasks(tasks);
    const auto ordered = canonical_task_order(tasks);

    std::optional<SceneMaps> local_maps;
    for (const auto& t : ordered)
        if (t.kind == TaskKind::Chromostereopsis && maps == nullptr) {
            local_maps = fallback_scene_maps(source_u8, /*k=*/6, params.seed);
            maps = &*local_maps;
        }

    TrainingPair pair{source_u8, source_u8};
    for (const auto& t : ordered)
        if (is_restoration(t.kind)) {
            EffectParams p = params;
            p.intensity = t.intensity;
            pair.input = apply_input_step(pair.input, t.kind, p);
        }
    for (const auto& t : ordered) pair.target = apply_target_step(pair.target, t, params, maps);
    return pair;
}

} // namespace pgx
