#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "pgx/effects.hpp"
#include "pgx/metrics.hpp"

using namespace pgx;

namespace {

Image random_u8(int w, int h, std::uint64_t seed) {
    Image img(w, h, Domain::U8);
    Rng rng(seed);
    for (auto& v : img.data) v = float(rng.uniform_index(256));
    return img;
}

Image checkerboard_unit(int w, int h) {
    Image img(w, h, Domain::Unit);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) img.at(y, x, c) = float((x + y) % 2);
    return img;
}

double block_mean(const Image& img, int y0, int x0, int size, int c) {
    double acc = 0.0;
    for (int y = y0; y < y0 + size; ++y)
        for (int x = x0; x < x0 + size; ++x) acc += img.at(y, x, c);
    return acc / (size * size);
}

} // namespace

TEST_CASE("quantize: bits=8 is the identity") {
    const Image img = random_u8(16, 16, 1);
    REQUIRE(quantize_dynamic_range(img, 8).data == img.data);
}

TEST_CASE("quantize: 4-bit anchors") {
    Image img(2, 2, Domain::U8);
    img.data.assign(12, 0.0f);
    img.data[0] = 0.0f;
    img.data[3] = 255.0f;
    img.data[6] = 128.0f;
    const Image q = quantize_dynamic_range(img, 4);
    REQUIRE(q.data[0] == 0.0f);
    REQUIRE(q.data[3] == 255.0f);
    REQUIRE(q.data[6] == 136.0f); // level 8 of 15, step 17
}

TEST_CASE("quantize: exhaustive idempotence for all bit depths") {
    Image all(256, 1, Domain::U8);
    for (int v = 0; v < 256; ++v)
        for (int c = 0; c < 3; ++c) all.at(0, v, c) = float(v);
    for (int bits = 1; bits <= 8; ++bits) {
        const Image q1 = quantize_dynamic_range(all, bits);
        const Image q2 = quantize_dynamic_range(q1, bits);
        REQUIRE(q1.data == q2.data);
        const int levels = 1 << bits;
        std::set<float> distinct(q1.data.begin(), q1.data.end());
        REQUIRE(int(distinct.size()) <= levels);
    }
    REQUIRE_THROWS_AS(quantize_dynamic_range(all, 0), ContractError);
    REQUIRE_THROWS_AS(quantize_dynamic_range(all, 9), ContractError);
}

TEST_CASE("salt and pepper: density endpoints") {
    const Image img = random_u8(20, 20, 3);
    REQUIRE(add_salt_pepper(img, 0.0, 7).data == img.data);

    const Image full = add_salt_pepper(img, 1.0, 7);
    for (std::size_t i = 0; i < full.pixel_count(); ++i) {
        const float v = full.data[i * 3];
        REQUIRE((v == 0.0f || v == 255.0f));
        REQUIRE(full.data[i * 3 + 1] == v);
        REQUIRE(full.data[i * 3 + 2] == v);
    }
}

TEST_CASE("salt and pepper: exact corruption counts") {
    Image gray(100, 100, Domain::U8, Colorspace::RGB, 128.0f);
    const Image noisy = add_salt_pepper(gray, 0.1, 99);
    std::size_t salt = 0, pepper = 0, untouched = 0;
    for (std::size_t i = 0; i < noisy.pixel_count(); ++i) {
        const float v = noisy.data[i * 3];
        if (v == 255.0f)
            salt++;
        else if (v == 0.0f)
            pepper++;
        else
            untouched++;
    }
    REQUIRE(salt == 500);
    REQUIRE(pepper == 500);
    REQUIRE(untouched == 9000);
}

TEST_CASE("salt and pepper: deterministic per seed") {
    const Image img = random_u8(32, 32, 4);
    REQUIRE(add_salt_pepper(img, 0.2, 5).data == add_salt_pepper(img, 0.2, 5).data);
    REQUIRE(add_salt_pepper(img, 0.2, 5).data != add_salt_pepper(img, 0.2, 6).data);
}

TEST_CASE("foveate: foveal disk is bit-identical") {
    Image img = random_u8(64, 64, 8);
    const Image unit = convert_domain(img, Domain::Unit);
    EffectParams p;
    p.seed = 21;
    const Image out = foveate(unit, p);
    const double diag = std::sqrt(64.0 * 64.0 * 2.0);
    const double gx = 0.5 * 63, gy = 0.5 * 63;
    bool checked = false;
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x) {
            const double ecc = std::hypot(x - gx, y - gy) / diag;
            if (ecc <= p.fovea_radius) {
                for (int c = 0; c < 3; ++c) REQUIRE(out.at(y, x, c) == unit.at(y, x, c));
                checked = true;
            }
        }
    REQUIRE(checked);
    // and something outside the fovea did change
    REQUIRE(out.data != unit.data);
}

TEST_CASE("foveate: constant image is unchanged") {
    Image img(48, 48, Domain::Unit, Colorspace::RGB, 0.42f);
    EffectParams p;
    p.seed = 3;
    const Image out = foveate(img, p);
    for (float v : out.data) REQUIRE(v == Catch::Approx(0.42f).margin(1e-6));
}

TEST_CASE("foveate: periphery keeps local means of a checkerboard") {
    const Image board = checkerboard_unit(128, 128);
    EffectParams p;
    p.seed = 17;
    p.gaze_x = 0.5;
    p.gaze_y = 0.5;
    const Image out = foveate(board, p);
    // far corners: 8x8 block means should stay near the input's 0.5
    for (int y0 : {0, 120})
        for (int x0 : {0, 120}) {
            const double in_mean = block_mean(board, y0, x0, 8, 0);
            const double out_mean = block_mean(out, y0, x0, 8, 0);
            REQUIRE(std::abs(out_mean - in_mean) <= 0.02);
        }
    // and the periphery is actually pooled: per-pixel values moved
    double delta = 0.0;
    for (int x = 0; x < 8; ++x) delta += std::abs(out.at(0, x, 0) - board.at(0, x, 0));
    REQUIRE(delta > 0.1);
}

TEST_CASE("foveate: deterministic per seed") {
    const Image unit = convert_domain(random_u8(48, 48, 2), Domain::Unit);
    EffectParams p;
    p.seed = 11;
    REQUIRE(foveate(unit, p).data == foveate(unit, p).data);
}

TEST_CASE("chromostereopsis: zero intensity is the identity") {
    const Image unit = convert_domain(random_u8(16, 16, 5), Domain::Unit);
    const auto maps = fallback_scene_maps(convert_domain(unit, Domain::U8), 4, 1);
    EffectParams p;
    p.intensity = 0.0;
    REQUIRE(chromostereopsis(unit, maps.depth, maps.segments, p).data == unit.data);
}

TEST_CASE("chromostereopsis: near segments go red, far segments go blue") {
    // left half near (depth 0.1), right half far (depth 0.9)
    const int w = 16, h = 8;
    Image img(w, h, Domain::Unit, Colorspace::RGB, 0.0f);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            img.at(y, x, 0) = 0.2f;
            img.at(y, x, 1) = 0.8f;
            img.at(y, x, 2) = 0.3f;
        }
    DepthMap depth{w, h, std::vector<float>(w * h)};
    SegmentMap seg{w, h, 2, std::vector<int>(w * h)};
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            depth.depth[y * w + x] = x < w / 2 ? 0.1f : 0.9f;
            seg.labels[y * w + x] = x < w / 2 ? 0 : 1;
        }
    EffectParams p;
    const Image out = chromostereopsis(img, depth, seg, p);
    const Image hsv = rgb_to_hsv(out);
    const Image hsv_in = rgb_to_hsv(img);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const float hue = hsv.at(y, x, 0);
            if (x < w / 2)
                REQUIRE(hue == Catch::Approx(0.0).margin(1e-6));
            else
                REQUIRE(hue == Catch::Approx(240.0 / 360.0).margin(1e-6));
            // S and V preserved
            REQUIRE(hsv.at(y, x, 1) == Catch::Approx(hsv_in.at(y, x, 1)).margin(1e-6));
            REQUIRE(hsv.at(y, x, 2) == Catch::Approx(hsv_in.at(y, x, 2)).margin(1e-6));
        }
}

TEST_CASE("chromostereopsis: depth at the threshold maps to far") {
    const int w = 8, h = 8;
    Image img(w, h, Domain::Unit, Colorspace::RGB, 0.5f);
    DepthMap depth{w, h, std::vector<float>(w * h, 0.5f)};
    SegmentMap seg{w, h, 1, std::vector<int>(w * h, 0)};
    EffectParams p; // depth_threshold = 0.5
    const Image out = chromostereopsis(img, depth, seg, p);
    // gray pixels have S=0; force a colored one instead
    Image colored = img;
    for (std::size_t i = 0; i < colored.pixel_count(); ++i) {
        colored.data[i * 3] = 0.9f;
        colored.data[i * 3 + 1] = 0.1f;
        colored.data[i * 3 + 2] = 0.1f;
    }
    const Image out2 = chromostereopsis(colored, depth, seg, p);
    const Image hsv = rgb_to_hsv(out2);
    REQUIRE(hsv.at(0, 0, 0) == Catch::Approx(240.0 / 360.0).margin(1e-6));
    (void)out;
}

TEST_CASE("chromostereopsis: size mismatch is a contract error") {
    const Image unit = convert_domain(random_u8(16, 16, 5), Domain::Unit);
    DepthMap depth{8, 8, std::vector<float>(64, 0.5f)};
    SegmentMap seg{16, 16, 1, std::vector<int>(256, 0)};
    EffectParams p;
    REQUIRE_THROWS_AS(chromostereopsis(unit, depth, seg, p), ContractError);
}

TEST_CASE("fallback providers have the right shapes") {
    const Image img = random_u8(24, 16, 6);
    const auto maps = fallback_scene_maps(img, 5, 9);
    REQUIRE(maps.depth.width == 24);
    REQUIRE(maps.depth.height == 16);
    REQUIRE(maps.segments.num_segments >= 1);
    REQUIRE(maps.segments.num_segments <= 5);
    // labels contiguous from zero
    std::set<int> seen(maps.segments.labels.begin(), maps.segments.labels.end());
    REQUIRE(*seen.begin() == 0);
    REQUIRE(*seen.rbegin() == maps.segments.num_segments - 1);
    // vertical gradient: bottom near, top far
    REQUIRE(maps.depth.at(0, 0) == 1.0f);
    REQUIRE(maps.depth.at(15, 0) == 0.0f);
}

TEST_CASE("synthesize_pair: single denoising pair") {
    const Image src = random_u8(32, 32, 10);
    EffectParams p;
    p.seed = 42;
    const auto pair = synthesize_pair(src, {{TaskKind::Denoising, 1.0}}, p);
    REQUIRE(pair.target.data == src.data);
    REQUIRE(pair.input.data ==
            add_salt_pepper(src, p.noise_density, task_seed(p.seed, TaskKind::Denoising)).data);
}

TEST_CASE("synthesize_pair: denoise+foveate pair") {
    const Image src = random_u8(32, 32, 11);
    EffectParams p;
    p.seed = 43;
    const auto pair =
        synthesize_pair(src, {{TaskKind::Denoising, 1.0}, {TaskKind::Foveation, 1.0}}, p);
    REQUIRE(pair.input.data == apply_input_step(src, TaskKind::Denoising, p).data);
    REQUIRE(pair.target.data ==
            apply_target_step(src, {TaskKind::Foveation, 1.0}, p, nullptr).data);
}

TEST_CASE("synthesize_pair: four-task composition equals sequential oracles") {
    const Image src = random_u8(48, 48, 12);
    EffectParams p;
    p.seed = 44;
    const std::vector<TaskSpec> tasks = {{TaskKind::DynamicRangeEnhancement, 1.0},
                                         {TaskKind::Denoising, 1.0},
                                         {TaskKind::Foveation, 1.0},
                                         {TaskKind::Chromostereopsis, 1.0}};
    const auto maps = fallback_scene_maps(src, 6, p.seed);
    const auto pair = synthesize_pair(src, tasks, p);

    Image input = src;
    input = apply_input_step(input, TaskKind::DynamicRangeEnhancement, p);
    input = apply_input_step(input, TaskKind::Denoising, p);
    REQUIRE(pair.input.data == input.data);

    Image target = src;
    target = apply_target_step(target, {TaskKind::DynamicRangeEnhancement, 1.0}, p, &maps);
    target = apply_target_step(target, {TaskKind::Denoising, 1.0}, p, &maps);
    target = apply_target_step(target, {TaskKind::Chromostereopsis, 1.0}, p, &maps);
    target = apply_target_step(target, {TaskKind::Foveation, 1.0}, p, &maps);
    REQUIRE(pair.target.data == target.data);
}

TEST_CASE("synthesize_pair: partial restoration intensity blends toward clean") {
    const Image src = random_u8(16, 16, 13);
    EffectParams p;
    p.seed = 45;
    const auto pair = synthesize_pair(src, {{TaskKind::Denoising, 0.3}}, p);
    const Image noisy = apply_input_step(src, TaskKind::Denoising, p);
    REQUIRE(pair.input.data == noisy.data);
    REQUIRE(pair.target.data == lerp_images(noisy, src, 0.3).data);
}

TEST_CASE("synthesize_pair: duplicate task rejected, determinism holds") {
    const Image src = random_u8(16, 16, 14);
    EffectParams p;
    REQUIRE_THROWS_AS(
        synthesize_pair(src, {{TaskKind::Denoising, 1.0}, {TaskKind::Denoising, 0.5}}, p),
        ContractError);
    const auto a = synthesize_pair(src, {{TaskKind::Foveation, 1.0}}, p);
    const auto b = synthesize_pair(src, {{TaskKind::Foveation, 1.0}}, p);
    REQUIRE(a.input.data == b.input.data);
    REQUIRE(a.target.data == b.target.data);
}
