#include <catch2/catch_amalgamated.hpp>

#include "pgx/nn.hpp"
#include "pgx/rng.hpp"

using namespace pgx;

namespace {

Tensor<double> random_tensor(std::vector<int> shape, std::uint64_t seed, double scale = 1.0) {
    Tensor<double> t(std::move(shape));
    Rng rng(seed);
    for (auto& v : t.data) v = rng.normal(0.0, scale);
    return t;
}

double dot(const Tensor<double>& a, const Tensor<double>& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a.data[i] * b.data[i];
    return acc;
}

// Central-difference check of d(sum(f(x) * r))/d(slot) against an analytic
// gradient, at double precision.
template <class Eval>
void check_grad(double& slot, double analytic, Eval&& eval, double tol = 1e-5) {
    const double h = 1e-5;
    const double orig = slot;
    slot = orig + h;
    const double fp = eval();
    slot = orig - h;
    const double fm = eval();
    slot = orig;
    const double numeric = (fp - fm) / (2.0 * h);
    const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-8});
    REQUIRE(std::abs(numeric - analytic) / denom <= tol);
}

} // namespace

TEST_CASE("conv output size arithmetic") {
    REQUIRE(nn::conv_out(128, 4, 2, 1) == 64);
    REQUIRE(nn::conv_out(8, 3, 1, 1) == 8);
    REQUIRE(nn::convt_out(4, 4, 2, 1) == 8);
    REQUIRE(nn::convt_out(64, 4, 2, 1) == 128);
}

TEST_CASE("im2col and col2im are adjoint") {
    const int C = 3, H = 6, W = 5, k = 3, s = 2, p = 1;
    const int OH = nn::conv_out(H, k, s, p), OW = nn::conv_out(W, k, s, p);
    const auto x = random_tensor({C, H, W}, 1);
    const auto c = random_tensor({C * k * k, OH * OW}, 2);

    Tensor<double> cols({C * k * k, OH * OW});
    nn::im2col(x.ptr(), C, H, W, k, s, p, OH, OW, cols.ptr());
    Tensor<double> back({C, H, W});
    nn::col2im(c.ptr(), C, H, W, k, s, p, OH, OW, back.ptr());

    REQUIRE(dot(cols, c) == Catch::Approx(dot(x, back)).epsilon(1e-12));
}

TEST_CASE("conv2d gradients match finite differences") {
    nn::Conv2d<double> conv("t", 2, 3, 4, 2, 1);
    Rng rng(3);
    conv.init(rng, 0.5);
    const auto x = random_tensor({2, 2, 8, 8}, 4);
    const auto r = random_tensor({2, 3, 4, 4}, 5);

    std::vector<Param<double>*> ps;
    conv.collect(ps);
    auto loss = [&] { return dot(conv.forward(x), r); };
    loss();
    for (auto* p : ps) p->grad.zero();
    auto dx = conv.backward(r);

    for (auto* p : ps)
        for (std::size_t i : {std::size_t(0), p->value.size() / 2, p->value.size() - 1})
            check_grad(p->value.data[i], p->grad.data[i], loss);
    Tensor<double> x_mut = x;
    auto loss_x = [&] { return dot(conv.forward(x_mut), r); };
    for (std::size_t i : {std::size_t(0), x.size() / 3, x.size() - 1})
        check_grad(x_mut.data[i], dx.data[i], loss_x);
}

TEST_CASE("conv_transpose2d gradients match finite differences") {
    nn::ConvTranspose2d<double> conv("t", 3, 2, 4, 2, 1);
    Rng rng(6);
    conv.init(rng, 0.5);
    const auto x = random_tensor({2, 3, 4, 4}, 7);
    const auto r = random_tensor({2, 2, 8, 8}, 8);

    std::vector<Param<double>*> ps;
    conv.collect(ps);
    auto loss = [&] { return dot(conv.forward(x), r); };
    loss();
    for (auto* p : ps) p->grad.zero();
    auto dx = conv.backward(r);

    for (auto* p : ps)
        for (std::size_t i : {std::size_t(0), p->value.size() / 2, p->value.size() - 1})
            check_grad(p->value.data[i], p->grad.data[i], loss);
    Tensor<double> x_mut = x;
    auto loss_x = [&] { return dot(conv.forward(x_mut), r); };
    for (std::size_t i : {std::size_t(0), x.size() / 3, x.size() - 1})
        check_grad(x_mut.data[i], dx.data[i], loss_x);
}

TEST_CASE("linear gradients match finite differences") {
    nn::Linear<double> lin("t", 6, 4);
    Rng rng(9);
    lin.init(rng, 0.5);
    const auto x = random_tensor({3, 6}, 10);
    const auto r = random_tensor({3, 4}, 11);

    std::vector<Param<double>*> ps;
    lin.collect(ps);
    auto loss = [&] { return dot(lin.forward(x), r); };
    loss();
    for (auto* p : ps) p->grad.zero();
    auto dx = lin.backward(r);

    for (auto* p : ps)
        for (std::size_t i = 0; i < p->value.size(); i += 3)
            check_grad(p->value.data[i], p->grad.data[i], loss);
    Tensor<double> x_mut = x;
    auto loss_x = [&] { return dot(lin.forward(x_mut), r); };
    for (std::size_t i = 0; i < x.size(); i += 5)
        check_grad(x_mut.data[i], dx.data[i], loss_x);
}

TEST_CASE("instance norm gradients match finite differences") {
    nn::InstanceNorm2d<double> norm("t", 3);
    Rng rng(12);
    norm.init(rng, 0.1);
    const auto x = random_tensor({2, 3, 5, 5}, 13);
    const auto r = random_tensor({2, 3, 5, 5}, 14);

    std::vector<Param<double>*> ps;
    norm.collect(ps);
    auto loss = [&] { return dot(norm.forward(x), r); };
    loss();
    for (auto* p : ps) p->grad.zero();
    auto dx = norm.backward(r);

    for (auto* p : ps)
        for (std::size_t i = 0; i < p->value.size(); ++i)
            check_grad(p->value.data[i], p->grad.data[i], loss);
    Tensor<double> x_mut = x;
    auto loss_x = [&] { return dot(norm.forward(x_mut), r); };
    for (std::size_t i = 0; i < x.size(); i += 7)
        check_grad(x_mut.data[i], dx.data[i], loss_x, 1e-4);
}

TEST_CASE("activation gradients match finite differences") {
    const auto x = random_tensor({2, 3, 4, 4}, 15);
    const auto r = random_tensor({2, 3, 4, 4}, 16);

    nn::LeakyRelu<double> lrelu(0.2);
    auto l1 = [&] { return dot(lrelu.forward(x), r); };
    l1();
    auto d1 = lrelu.backward(r);
    Tensor<double> xm = x;
    auto l1m = [&] { return dot(lrelu.forward(xm), r); };
    for (std::size_t i = 0; i < x.size(); i += 9) check_grad(xm.data[i], d1.data[i], l1m);

    nn::Tanh<double> tanh_l;
    auto l2 = [&] { return dot(tanh_l.forward(x), r); };
    l2();
    auto d2 = tanh_l.backward(r);
    xm = x;
    auto l2m = [&] { return dot(tanh_l.forward(xm), r); };
    for (std::size_t i = 0; i < x.size(); i += 9) check_grad(xm.data[i], d2.data[i], l2m);

    nn::Sigmoid<double> sig;
    auto l3 = [&] { return dot(sig.forward(x), r); };
    l3();
    auto d3 = sig.backward(r);
    xm = x;
    auto l3m = [&] { return dot(sig.forward(xm), r); };
    for (std::size_t i = 0; i < x.size(); i += 9) check_grad(xm.data[i], d3.data[i], l3m);
}

TEST_CASE("concat and split are inverse") {
    const auto a = random_tensor({2, 3, 4, 4}, 17);
    const auto b = random_tensor({2, 5, 4, 4}, 18);
    const auto cat = nn::concat_channels(a, b);
    REQUIRE(cat.dim(1) == 8);
    Tensor<double> da, db;
    nn::split_channels(cat, 3, da, db);
    REQUIRE(da.data == a.data);
    REQUIRE(db.data == b.data);
}

TEST_CASE("adam minimizes a quadratic") {
    Param<double> p;
    p.name = "w";
    p.init_shape({8});
    Rng rng(19);
    for (auto& v : p.value.data) v = rng.normal(0.0, 2.0);
    std::vector<double> target(8);
    for (auto& v : target) v = rng.normal(0.0, 1.0);

    nn::Adam<double> opt(0.05);
    for (int it = 0; it < 500; ++it) {
        for (std::size_t i = 0; i < 8; ++i) p.grad.data[i] = 2.0 * (p.value.data[i] - target[i]);
        opt.step({&p});
        opt.zero_grad({&p});
    }
    for (std::size_t i = 0; i < 8; ++i)
        REQUIRE(p.value.data[i] == Catch::Approx(target[i]).margin(1e-3));
}
