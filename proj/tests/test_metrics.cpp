#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "pgx/metrics.hpp"
#include "pgx/rng.hpp"

using namespace pgx;

namespace {

Image random_unit(int w, int h, std::uint64_t seed) {
    Image img(w, h, Domain::Unit);
    Rng rng(seed);
    for (auto& v : img.data) v = float(rng.uniform());
    return img;
}

// Definitional PSNR, written independently of the library path.
double psnr_oracle(const Image& a, const Image& b) {
    long double acc = 0.0L;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const long double d = (long double)a.data[i] - (long double)b.data[i];
        acc += d * d;
    }
    const long double m = acc / (long double)a.data.size();
    if (m == 0.0L) return std::numeric_limits<double>::infinity();
    return double(10.0L * std::log10((long double)(a.peak() * a.peak()) / m));
}

// Definitional SSIM: direct 11x11 weighted sums at every valid window
// position, no separable shortcuts.
double ssim_oracle(const Image& a, const Image& b) {
    const double peak = a.peak();
    const double c1 = (0.01 * peak) * (0.01 * peak);
    const double c2 = (0.03 * peak) * (0.03 * peak);
    double kernel[11][11];
    double ksum = 0.0;
    for (int i = 0; i < 11; ++i)
        for (int j = 0; j < 11; ++j) {
            const double dy = i - 5, dx = j - 5;
            kernel[i][j] = std::exp(-(dx * dx + dy * dy) / (2.0 * 1.5 * 1.5));
            ksum += kernel[i][j];
        }
    for (auto& row : kernel)
        for (auto& v : row) v /= ksum;

    double total = 0.0;
    for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        int count = 0;
        for (int y = 0; y + 11 <= a.height; ++y)
            for (int x = 0; x + 11 <= a.width; ++x) {
                double mx = 0, my = 0, mxx = 0, myy = 0, mxy = 0;
                for (int i = 0; i < 11; ++i)
                    for (int j = 0; j < 11; ++j) {
                        const double av = a.at(y + i, x + j, c);
                        const double bv = b.at(y + i, x + j, c);
                        const double w = kernel[i][j];
                        mx += w * av;
                        my += w * bv;
                        mxx += w * av * av;
                        myy += w * bv * bv;
                        mxy += w * av * bv;
                    }
                const double sx = mxx - mx * mx;
                const double sy = myy - my * my;
                const double sxy = mxy - mx * my;
                acc += ((2.0 * mx * my + c1) * (2.0 * sxy + c2)) /
                       ((mx * mx + my * my + c1) * (sx + sy + c2));
                count++;
            }
        total += acc / count;
    }
    return total / 3.0;
}

} // namespace

TEST_CASE("psnr trivial and derived anchors") {
    Image a(16, 16, Domain::U8, Colorspace::RGB, 0.0f);
    REQUIRE(std::isinf(psnr(a, a)));

    Image b(16, 16, Domain::U8, Colorspace::RGB, 255.0f);
    REQUIRE(psnr(a, b) == Catch::Approx(0.0).margin(1e-12));

    // uniform squared error of exactly 1
    Image c = a;
    for (auto& v : c.data) v = 1.0f;
    REQUIRE(psnr(a, c) == Catch::Approx(48.1308).margin(0.01));
}

TEST_CASE("psnr and ssim are symmetric") {
    for (std::uint64_t s = 0; s < 4; ++s) {
        const Image a = random_unit(20, 14, s * 2 + 1);
        const Image b = random_unit(20, 14, s * 2 + 2);
        REQUIRE(psnr(a, b) == psnr(b, a));
        REQUIRE(ssim(a, b) == ssim(b, a));
    }
}

TEST_CASE("psnr strictly decreases with noise amplitude") {
    const Image base = random_unit(32, 32, 9);
    double prev = std::numeric_limits<double>::infinity();
    Rng rng(10);
    std::vector<float> unit_noise(base.data.size());
    for (auto& v : unit_noise) v = float(rng.uniform(-1.0, 1.0));
    for (double amp : {0.01, 0.05, 0.1, 0.2, 0.4}) {
        Image noisy = base;
        for (std::size_t i = 0; i < noisy.data.size(); ++i)
            noisy.data[i] = clamp_unit(noisy.data[i] + float(amp) * unit_noise[i]);
        const double val = psnr(base, noisy);
        REQUIRE(val < prev);
        prev = val;
    }
}

TEST_CASE("ssim identity is exactly one") {
    const Image a = random_unit(24, 24, 5);
    REQUIRE(ssim(a, a) == 1.0);
}

TEST_CASE("ssim of inverted checkerboard is negative") {
    Image a(24, 24, Domain::Unit);
    for (int y = 0; y < 24; ++y)
        for (int x = 0; x < 24; ++x)
            for (int c = 0; c < 3; ++c) a.at(y, x, c) = float((x + y) % 2);
    Image b = a;
    for (auto& v : b.data) v = 1.0f - v;
    REQUIRE(ssim(a, b) < 0.0);
}

TEST_CASE("ssim rejects images smaller than the window") {
    const Image a = random_unit(10, 24, 1);
    REQUIRE_THROWS_AS(ssim(a, a), ContractError);
}

TEST_CASE("metrics match definitional oracles") {
    for (std::uint64_t s = 0; s < 5; ++s) {
        const Image a = random_unit(26, 19, 100 + s);
        const Image b = random_unit(26, 19, 200 + s);
        REQUIRE(std::abs(psnr(a, b) - psnr_oracle(a, b)) <= 1e-9);
        REQUIRE(std::abs(ssim(a, b) - ssim_oracle(a, b)) <= 1e-6);
    }
}

TEST_CASE("metric shape contracts") {
    const Image a = random_unit(16, 16, 1);
    const Image b = random_unit(16, 12, 2);
    REQUIRE_THROWS_AS(psnr(a, b), ContractError);
    REQUIRE_THROWS_AS(ssim(a, b), ContractError);
}
