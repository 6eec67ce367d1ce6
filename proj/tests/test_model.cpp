#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "pgx/model.hpp"

using namespace pgx;
namespace fs = std::filesystem;

namespace {

Tensor<float> random_tensor_f(std::vector<int> shape, std::uint64_t seed, double scale = 1.0) {
    Tensor<float> t(std::move(shape));
    Rng rng(seed);
    for (auto& v : t.data) v = float(rng.normal(0.0, scale));
    return t;
}

GeneratorConfig tiny_gen() {
    GeneratorConfig c;
    c.image_size = 16;
    c.levels = 2;
    c.base_channels = 4;
    c.max_channels = 16;
    c.text_dim = 8;
    c.em_hidden = {16};
    return c;
}

DiscriminatorConfig tiny_disc() {
    DiscriminatorConfig c;
    c.layers = 2;
    c.base_channels = 4;
    c.text_channels = 4;
    c.text_dim = 8;
    return c;
}

} // namespace

TEST_CASE("embedding mapper shape contract") {
    // bottleneck (512,1,1), d_t=512, one hidden layer of 1024
    GeneratorConfig c;
    c.image_size = 32;
    c.levels = 5;
    c.base_channels = 16;
    c.max_channels = 512;
    c.text_dim = 512;
    c.em_hidden = {1024};
    c.validate();
    REQUIRE(c.bottleneck_channels() == 512);
    REQUIRE(c.bottleneck_hw() == 1);
    REQUIRE(c.bottleneck_flat() == 512);

    Generator<float> g(c);
    const auto et = random_tensor_f({2, 512}, 1, 0.1);
    const auto ei = random_tensor_f({2, 512, 1, 1}, 2, 0.1);
    auto ec = g.map_embeddings(et, ei);
    REQUIRE(ec.shape == std::vector<int>{2, 512, 1, 1});
}

TEST_CASE("zero mapper weights give a zero combined embedding") {
    auto c = tiny_gen();
    Generator<float> g(c);
    for (auto* p : g.em_params())
        p->value.zero();
    const auto et = random_tensor_f({1, 8}, 3);
    const auto ei = random_tensor_f({1, c.bottleneck_channels(), 4, 4}, 4);
    const auto ec = g.map_embeddings(et, ei);
    for (float v : ec.data) REQUIRE(v == 0.0f);
}

TEST_CASE("generator forward shape, bounds, determinism") {
    GeneratorConfig c;
    c.image_size = 128;
    c.levels = 5;
    c.base_channels = 8;
    c.max_channels = 64;
    c.text_dim = 16;
    c.em_hidden = {64};
    Generator<float> g(c);
    REQUIRE(c.bottleneck_hw() == 4);

    const auto x = random_tensor_f({1, 3, 128, 128}, 5, 0.5);
    const auto et = random_tensor_f({1, 16}, 6, 0.5);
    const auto y1 = g.forward(x, et);
    REQUIRE(y1.shape == std::vector<int>{1, 3, 128, 128});
    for (float v : y1.data) REQUIRE((v >= -1.0f && v <= 1.0f));
    const auto y2 = g.forward(x, et);
    REQUIRE(y1.data == y2.data);

    // changing only the text embedding changes the output
    const auto et2 = random_tensor_f({1, 16}, 7, 0.5);
    const auto y3 = g.forward(x, et2);
    float max_diff = 0.0f;
    for (std::size_t i = 0; i < y1.size(); ++i)
        max_diff = std::max(max_diff, std::abs(y1.data[i] - y3.data[i]));
    REQUIRE(max_diff > 0.0f);
}

TEST_CASE("generator size contracts") {
    auto c = tiny_gen();
    Generator<float> g(c);
    const auto et = random_tensor_f({1, 8}, 8);
    REQUIRE_THROWS_AS(g.forward(random_tensor_f({1, 3, 32, 32}, 9), et), ContractError);

    c.text_conditioning = false;
    Generator<float> baseline(c);
    // baseline accepts any divisible size
    const auto y = baseline.forward(random_tensor_f({1, 3, 32, 32}, 10), Tensor<float>({1, 1}));
    REQUIRE(y.shape == std::vector<int>{1, 3, 32, 32});
    REQUIRE_THROWS_AS(baseline.forward(random_tensor_f({1, 3, 15, 15}, 11), Tensor<float>({1, 1})),
                      ContractError);
}

TEST_CASE("discriminator probability map shape and range") {
    DiscriminatorConfig c;
    c.layers = 4;
    c.base_channels = 8;
    c.text_channels = 8;
    c.text_dim = 16;
    REQUIRE(c.stack_channels() == 14);
    Discriminator<float> d(c);
    const auto x = random_tensor_f({2, 3, 128, 128}, 12, 0.5);
    const auto probe = random_tensor_f({2, 3, 128, 128}, 13, 0.5);
    const auto et = random_tensor_f({2, 16}, 14, 0.5);
    const auto p = d.forward(x, probe, et);
    REQUIRE(p.shape == std::vector<int>{2, 1, 8, 8});
    for (float v : p.data) REQUIRE((v > 0.0f && v < 1.0f));

    // task conditioning matters: swapping E_T changes P
    const auto et2 = random_tensor_f({2, 16}, 15, 0.5);
    const auto p2 = d.forward(x, probe, et2);
    float max_diff = 0.0f;
    for (std::size_t i = 0; i < p.size(); ++i)
        max_diff = std::max(max_diff, std::abs(p.data[i] - p2.data[i]));
    REQUIRE(max_diff > 0.0f);
}

TEST_CASE("parameter counts: config formula equals instantiated total") {
    for (bool conditioned : {true, false}) {
        auto c = tiny_gen();
        c.text_conditioning = conditioned;
        Generator<float> g(c);
        REQUIRE(g.param_count() == generator_param_count(c));
    }
    auto dc = tiny_disc();
    Discriminator<float> d(dc);
    REQUIRE(d.param_count() == discriminator_param_count(dc));
    dc.text_channels = 0;
    Discriminator<float> d2(dc);
    REQUIRE(d2.param_count() == discriminator_param_count(dc));
}

TEST_CASE("parameter count is monotone in width knobs") {
    auto c = tiny_gen();
    auto base = generator_param_count(c);
    auto wider = c;
    wider.base_channels = c.base_channels + 4;
    REQUIRE(generator_param_count(wider) > base);
    for (std::size_t i = 0; i < c.em_hidden.size(); ++i) {
        auto deeper = c;
        deeper.em_hidden[i] += 8;
        REQUIRE(generator_param_count(deeper) > base);
    }
}

TEST_CASE("checkpoint round trip is bit exact and versioned") {
    const auto dir = fs::temp_directory_path() / "pgx-model-test";
    fs::create_directories(dir);
    const auto path = (dir / "bundle.ckpt").string();

    ModelBundle bundle(tiny_gen(), tiny_disc(), "token-hash-v1");
    bundle.state.epochs_completed = 7;
    save_checkpoint(bundle, path);

    auto loaded = load_checkpoint(path);
    REQUIRE(loaded.state.epochs_completed == 7);
    REQUIRE(loaded.provider_id == "token-hash-v1");
    auto pa = bundle.g.params();
    auto pb = loaded.g.params();
    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) {
        REQUIRE(pa[i]->name == pb[i]->name);
        REQUIRE(pa[i]->value.data == pb[i]->value.data);
    }

    // inference equality across the round trip
    const auto x = random_tensor_f({1, 3, 16, 16}, 20, 0.5);
    const auto et = random_tensor_f({1, 8}, 21, 0.5);
    REQUIRE(bundle.g.forward(x, et).data == loaded.g.forward(x, et).data);

    // wrong version is an explicit error
    const auto bad = (dir / "bad.ckpt").string();
    {
        std::ofstream out(bad, std::ios::binary);
        const std::string header = R"({"format_version":99,"kind":"model-bundle"})";
        const std::uint32_t len = std::uint32_t(header.size());
        out.write(reinterpret_cast<const char*>(&len), 4);
        out.write(header.data(), std::streamsize(header.size()));
    }
    REQUIRE_THROWS_AS(load_checkpoint(bad), VersionError);
}

TEST_CASE("generator and discriminator full backward passes gradient checks") {
    // double precision end-to-end wiring check through skips and the mapper
    GeneratorConfig gc = tiny_gen();
    Generator<double> g(gc);
    Rng rng(22);
    const int n_img = 3 * 16 * 16;
    Tensor<double> x({1, 3, 16, 16}), et({1, 8}), r({1, 3, 16, 16});
    for (auto& v : x.data) v = rng.normal(0.0, 0.5);
    for (auto& v : et.data) v = rng.normal(0.0, 0.5);
    for (auto& v : r.data) v = rng.normal(0.0, 1.0);
    (void)n_img;

    auto loss = [&] {
        const auto y = g.forward(x, et);
        double acc = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) acc += y.data[i] * r.data[i];
        return acc;
    };
    loss();
    auto params = g.params();
    for (auto* p : params) p->grad.zero();
    const auto dx = g.backward(r);

    const double h = 1e-5;
    auto num_grad = [&](double& slot) {
        const double orig = slot;
        slot = orig + h;
        const double fp = loss();
        slot = orig - h;
        const double fm = loss();
        slot = orig;
        return (fp - fm) / (2.0 * h);
    };
    for (auto* p : params) {
        const std::size_t idx = p->value.size() / 2;
        const double numeric = num_grad(p->value.data[idx]);
        const double analytic = p->grad.data[idx];
        const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-6});
        INFO(p->name);
        REQUIRE(std::abs(numeric - analytic) / denom <= 1e-3);
    }
    {
        Tensor<double> xm = x;
        auto loss_x = [&] {
            const auto y = g.forward(xm, et);
            double acc = 0.0;
            for (std::size_t i = 0; i < y.size(); ++i) acc += y.data[i] * r.data[i];
            return acc;
        };
        const double orig = xm.data[100];
        xm.data[100] = orig + h;
        const double fp = loss_x();
        xm.data[100] = orig - h;
        const double fm = loss_x();
        xm.data[100] = orig;
        const double numeric = (fp - fm) / (2.0 * h);
        const double denom = std::max({std::abs(numeric), std::abs(dx.data[100]), 1e-6});
        REQUIRE(std::abs(numeric - dx.data[100]) / denom <= 1e-3);
    }

    // discriminator: probe input gradient
    DiscriminatorConfig dc = tiny_disc();
    Discriminator<double> d(dc);
    Tensor<double> probe({1, 3, 16, 16}), rp({1, 1, 4, 4});
    for (auto& v : probe.data) v = rng.normal(0.0, 0.5);
    for (auto& v : rp.data) v = rng.normal(0.0, 1.0);
    auto d_loss = [&] {
        const auto p = d.forward(x, probe, et);
        double acc = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) acc += p.data[i] * rp.data[i];
        return acc;
    };
    d_loss();
    for (auto* p : d.params()) p->grad.zero();
    const auto dprobe = d.backward(rp);
    for (auto* p : d.params()) {
        const std::size_t idx = p->value.size() / 2;
        const double orig = p->value.data[idx];
        p->value.data[idx] = orig + h;
        const double fp = d_loss();
        p->value.data[idx] = orig - h;
        const double fm = d_loss();
        p->value.data[idx] = orig;
        const double numeric = (fp - fm) / (2.0 * h);
        const double analytic = p->grad.data[idx];
        const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-6});
        INFO(p->name);
        REQUIRE(std::abs(numeric - analytic) / denom <= 1e-3);
    }
    {
        const double orig = probe.data[50];
        probe.data[50] = orig + h;
        const double fp = d_loss();
        probe.data[50] = orig - h;
        const double fm = d_loss();
        probe.data[50] = orig;
        const double numeric = (fp - fm) / (2.0 * h);
        const double denom = std::max({std::abs(numeric), std::abs(dprobe.data[50]), 1e-6});
        REQUIRE(std::abs(numeric - dprobe.data[50]) / denom <= 1e-3);
    }
}
