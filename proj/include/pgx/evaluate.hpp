#pragma once

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include "pgx/dataset.hpp"
#include "pgx/embedding.hpp"
#include "pgx/metrics.hpp"
#include "pgx/model.hpp"
#include "pgx/paper_refs.hpp"
#include "pgx/tensor_image.hpp"

namespace pgx {

/// A model under evaluation: u8 image + prompt -> u8 image.
using InferFn = std::function<Image(const Image&, const std::string&)>;

/// Wraps a trained bundle: u8 -> signed tensor -> G -> u8.
inline InferFn bundle_infer_fn(ModelBundle& bundle, const TextEncoder& encoder) {
    return [&bundle, &encoder](const Image& img, const std::string& prompt) {
        const int S = img.width;
        Tensor<float> x({1, 3, S, S});
        const auto chw = image_to_signed_chw(img);
        std::copy(chw.data.begin(), chw.data.end(), x.data.begin());
        Tensor<float> et({1, bundle.gcfg.text_dim});
        if (bundle.gcfg.text_conditioning) {
            const auto emb = encoder.embed(prompt);
            contract(emb.dim() == bundle.gcfg.text_dim, "embedding dim mismatch");
            std::copy(emb.vec.begin(), emb.vec.end(), et.data.begin());
        }
        return signed_chw_to_image(bundle.g.forward(x, et));
    };
}

/// The identity anchor: returns the input unchanged.
inline InferFn identity_infer_fn() {
    return [](const Image& img, const std::string&) { return img; };
}

struct CategoryMetrics {
    double psnr_mean = 0.0;
    double ssim_mean = 0.0;
    long count = 0;
};

struct EvalReport {
    std::string split;
    std::map<std::string, CategoryMetrics> categories;
    std::vector<std::string> skipped; // categories absent from the split

    nlohmann::json to_json() const {
        nlohmann::json cats;
        for (const auto& [cat, m] : categories) {
            nlohmann::json entry{{"ssim", m.ssim_mean}, {"count", m.count}};
            if (std::isinf(m.psnr_mean))
                entry["psnr"] = "inf";
            else
                entry["psnr"] = m.psnr_mean;
            cats[cat] = entry;
        }
        return {{"split", split},
                {"categories", cats},
                {"skipped", skipped},
                {"paper_reference", PaperReference::footer()}};
    }
};

/// Horizontal strip image: input | output | target.
inline Image side_by_side(const Image& a, const Image& b, const Image& c) {
    const int h = a.height, w = a.width;
    Image out(w * 3, h, Domain::U8, Colorspace::RGB);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int ch = 0; ch < 3; ++ch) {
                out.at(y, x, ch) = a.at(y, x, ch);
                out.at(y, x + w, ch) = b.at(y, x, ch);
                out.at(y, x + 2 * w, ch) = c.at(y, x, ch);
            }
    return out;
}

/// Per-category mean PSNR/SSIM of infer(input) against the target over the
/// chosen split. Categories requested but absent from the split are skipped
/// with a warning entry. When grid_dir is set, a side-by-side strip of the
/// first records per category is written there.
inline EvalReport evaluate_model(const InferFn& infer, const DatasetManifest& manifest,
                                 const std::string& split = "test",
                                 std::vector<std::string> categories = {},
                                 const std::string& grid_dir = "", int grid_samples = 3) {
    if (categories.empty())
        for (const auto& [cat, n] : manifest.header.counts) categories.push_back(cat);

    std::map<std::string, std::vector<const DatasetRecord*>> by_cat;
    for (const auto& r : manifest.records)
        if (r.split == split) by_cat[category_of(r)].push_back(&r);

    if (!grid_dir.empty()) std::filesystem::create_directories(grid_dir);

    EvalReport report;
    report.split = split;
    for (const auto& cat : categories) {
        const auto it = by_cat.find(cat);
        if (it == by_cat.end() || it->second.empty()) {
            report.skipped.push_back(cat);
            continue;
        }
        CategoryMetrics m;
        int grids_written = 0;
        for (const auto* r : it->second) {
            const Image input = read_png_rgb8(manifest.resolve(r->input_path));
            const Image target = read_png_rgb8(manifest.resolve(r->target_path));
            const Image output = infer(input, r->prompt);
            m.psnr_mean += psnr(output, target);
            m.ssim_mean += ssim(output, target);
            m.count++;
            if (!grid_dir.empty() && grids_written < grid_samples) {
                const auto strip = side_by_side(input, output, target);
                write_png_rgb8((std::filesystem::path(grid_dir) /
                                ("grid_" + cat + "_" + std::to_string(grids_written) + ".png"))
                                   .string(),
                               strip);
                grids_written++;
            }
        }
        m.psnr_mean /= double(m.count);
        m.ssim_mean /= double(m.count);
        report.categories[cat] = m;
    }
    return report;
}

/// Runs single-task bundles consecutively, feeding each output to the next.
/// The list order is the application order.
struct ChainStep {
    ModelBundle* bundle;
    std::string prompt;
};

inline Image daisy_chain_apply(const std::vector<ChainStep>& chain, const Image& input,
                               const TextEncoder& encoder) {
    contract(!chain.empty(), "empty daisy chain");
    Image img = input;
    for (const auto& step : chain) {
        contract(step.bundle != nullptr, "null bundle in chain");
        img = bundle_infer_fn(*step.bundle, encoder)(img, step.prompt);
    }
    return img;
}

struct BenchmarkResult {
    double mean_ms = 0.0;
    double p50_ms = 0.0;
    double p95_ms = 0.0;
    int iters = 0;
    int warmup = 0;
    int input_size = 0;
    bool include_embedding = false;
    std::string hardware;

    nlohmann::json to_json() const {
        return {{"mean_ms", mean_ms},   {"p50_ms", p50_ms},
                {"p95_ms", p95_ms},     {"iters", iters},
                {"warmup", warmup},     {"input_size", input_size},
                {"include_embedding", include_embedding},
                {"hardware", hardware}};
    }
};

inline std::string hardware_descriptor() {
    std::string model = "unknown-cpu";
    std::ifstream cpuinfo("/proc/cpuinfo");
    std::string line;
    while (std::getline(cpuinfo, line)) {
        const auto pos = line.find("model name");
        if (pos != std::string::npos) {
            const auto colon = line.find(':');
            if (colon != std::string::npos) model = line.substr(colon + 2);
            break;
        }
    }
    return model + " x" + std::to_string(std::thread::hardware_concurrency());
}

/// Wall-clock generator latency on single-image batches. Embedding provider
/// time is excluded unless include_embedding is set.
inline BenchmarkResult benchmark_inference(ModelBundle& bundle, const TextEncoder& encoder,
                                           int input_size, int warmup, int iters,
                                           const std::string& prompt = "foveate",
                                           bool include_embedding = false) {
    contract(iters > 0, "iters must be positive");
    contract(warmup >= 0, "warmup must be non-negative");
    Tensor<float> x({1, 3, input_size, input_size});
    Rng rng(42);
    for (auto& v : x.data) v = float(rng.uniform(-0.9, 0.9));
    Tensor<float> et({1, bundle.gcfg.text_dim});
    const auto emb = encoder.embed(prompt);
    std::copy(emb.vec.begin(), emb.vec.end(), et.data.begin());

    for (int i = 0; i < warmup; ++i) bundle.g.forward(x, et);

    std::vector<double> samples(iters);
    using clock = std::chrono::steady_clock;
    for (int i = 0; i < iters; ++i) {
        const auto t0 = clock::now();
        if (include_embedding) {
            const auto e2 = encoder.embed(prompt);
            std::copy(e2.vec.begin(), e2.vec.end(), et.data.begin());
        }
        bundle.g.forward(x, et);
        const auto t1 = clock::now();
        samples[i] = std::chrono::duration<double, std::milli>(t1 - t0).count();
    }
    BenchmarkResult r;
    r.iters = iters;
    r.warmup = warmup;
    r.input_size = input_size;
    r.include_embedding = include_embedding;
    r.hardware = hardware_descriptor();
    for (double s : samples) r.mean_ms += s;
    r.mean_ms /= iters;
    std::sort(samples.begin(), samples.end());
    r.p50_ms = samples[std::size_t((iters - 1) / 2)];
    r.p95_ms = samples[std::min<std::size_t>(iters - 1, std::size_t(0.95 * iters))];
    return r;
}

} // namespace pgx
