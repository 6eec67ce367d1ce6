#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "pgx/evaluate.hpp"
#include "pgx/sources.hpp"

using namespace pgx;
namespace fs = std::filesystem;

namespace {

struct EvalRig {
    DatasetManifest manifest;
    ModelBundle bundle;
    TokenHashEncoder encoder{32};

    EvalRig() {
        const auto dir = fs::temp_directory_path() / "pgx-eval-test";
        fs::remove_all(dir);
        DatasetBuildConfig dc;
        dc.categories = {"ID", "DRE"};
        dc.per_category = 4;
        dc.resolution = 32;
        dc.seed = 21;
        const auto sources = generate_source_corpus(int(dc.total_records()), 32, 20);
        manifest = build_dataset(sources, dc, dir.string());
        split_dataset(manifest, 0.5, 2);

        GeneratorConfig g;
        g.image_size = 32;
        g.levels = 3;
        g.base_channels = 6;
        g.max_channels = 24;
        g.text_dim = 32;
        g.em_hidden = {32};
        DiscriminatorConfig d;
        d.layers = 2;
        d.base_channels = 4;
        d.text_channels = 4;
        d.text_dim = 32;
        bundle = ModelBundle(g, d, "token-hash-v1");
    }
};

} // namespace

TEST_CASE("identity model anchors to psnr(input, target)") {
    EvalRig rig;
    const auto report = evaluate_model(identity_infer_fn(), rig.manifest, "test");
    REQUIRE(report.categories.count("ID") == 1);

    double manual = 0.0;
    long n = 0;
    for (const auto& r : rig.manifest.records) {
        if (r.split != "test" || category_of(r) != "ID") continue;
        const auto input = read_png_rgb8(rig.manifest.resolve(r.input_path));
        const auto target = read_png_rgb8(rig.manifest.resolve(r.target_path));
        manual += psnr(input, target);
        n++;
    }
    manual /= double(n);
    REQUIRE(report.categories.at("ID").psnr_mean == Catch::Approx(manual).epsilon(1e-12));
    REQUIRE(report.categories.at("ID").count == n);
}

TEST_CASE("oracle target against itself reports the infinity sentinel") {
    EvalRig rig;
    const InferFn oracle = [&](const Image&, const std::string&) { return Image(); };
    // infer that returns the target itself
    std::map<std::string, const DatasetRecord*> lookup;
    const InferFn target_fn = [&rig](const Image& input, const std::string& prompt) {
        for (const auto& r : rig.manifest.records) {
            if (r.split != "test" || r.prompt != prompt) continue;
            const auto in = read_png_rgb8(rig.manifest.resolve(r.input_path));
            if (in.data == input.data) return read_png_rgb8(rig.manifest.resolve(r.target_path));
        }
        throw ContractError("record not found");
    };
    const auto report = evaluate_model(target_fn, rig.manifest, "test");
    for (const auto& [cat, m] : report.categories) {
        REQUIRE(std::isinf(m.psnr_mean));
        REQUIRE(m.ssim_mean == 1.0);
    }
    (void)oracle;
}

TEST_CASE("absent categories are skipped with a warning entry") {
    EvalRig rig;
    const auto report =
        evaluate_model(identity_infer_fn(), rig.manifest, "test", {"ID", "F", "DRE+ID+F+C"});
    REQUIRE(report.categories.count("ID") == 1);
    REQUIRE(std::find(report.skipped.begin(), report.skipped.end(), "F") !=
            report.skipped.end());
    REQUIRE(report.skipped.size() == 2);
}

TEST_CASE("grid images are written") {
    EvalRig rig;
    const auto grid_dir = (fs::temp_directory_path() / "pgx-eval-test" / "grids").string();
    evaluate_model(identity_infer_fn(), rig.manifest, "test", {}, grid_dir, 1);
    REQUIRE(fs::exists(fs::path(grid_dir) / "grid_ID_0.png"));
    const auto strip = read_png_rgb8((fs::path(grid_dir) / "grid_ID_0.png").string());
    REQUIRE(strip.width == 3 * 32);
}

TEST_CASE("single-element daisy chain equals the model output") {
    EvalRig rig;
    const Image img = generate_source_image(32, 5);
    const Image direct = bundle_infer_fn(rig.bundle, rig.encoder)(img, "foveate");
    const Image chained = daisy_chain_apply({{&rig.bundle, "foveate"}}, img, rig.encoder);
    REQUIRE(direct.data == chained.data);

    REQUIRE_THROWS_AS(daisy_chain_apply({}, img, rig.encoder), ContractError);
}

TEST_CASE("benchmark contract and ordering") {
    EvalRig rig;
    REQUIRE_THROWS_AS(benchmark_inference(rig.bundle, rig.encoder, 32, 0, 0), ContractError);
    const auto r = benchmark_inference(rig.bundle, rig.encoder, 32, 2, 9);
    REQUIRE(r.p50_ms > 0.0);
    REQUIRE(r.p95_ms >= r.p50_ms);
    REQUIRE(r.mean_ms > 0.0);
    REQUIRE_FALSE(r.hardware.empty());
    REQUIRE(r.to_json().contains("mean_ms"));
}

TEST_CASE("eval report json carries the paper reference footer") {
    EvalRig rig;
    const auto report = evaluate_model(identity_infer_fn(), rig.manifest, "test");
    const auto j = report.to_json();
    REQUIRE(j.contains("paper_reference"));
    REQUIRE(j["paper_reference"]["label"] ==
            std::string(PaperReference::kLabel));
    REQUIRE(j["paper_reference"]["parameters_m"]["ours_total"] == 50.593);
}
