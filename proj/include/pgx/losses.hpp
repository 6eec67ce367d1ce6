#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "pgx/errors.hpp"
#include "pgx/tensor.hpp"

namespace pgx {

/// B_T = 1 + B_MAX * (1 - SC_T / SC_MAX); SC_MAX is the largest count.
/// Inversely proportional to sample counts, capped at 1 + B_MAX.
inline std::map<std::string, double> boost_factors(const std::map<std::string, long>& counts,
                                                   double b_max) {
    contract(b_max >= 0.0, "B_MAX must be >= 0");
    contract(!counts.empty(), "no categories");
    long sc_max = 0;
    for (const auto& [cat, n] : counts) {
        contract(n >= 0, "negative sample count for " + cat);
        sc_max = std::max(sc_max, n);
    }
    contract(sc_max > 0, "all sample counts are zero");
    std::map<std::string, double> out;
    for (const auto& [cat, n] : counts)
        out[cat] = 1.0 + b_max * (1.0 - double(n) / double(sc_max));
    return out;
}

/// Sample-size-adaptive L1: per item, mean absolute error scaled by that
/// item's boost factor B_T, averaged over the batch.
template <class T>
double ta_l1_loss(const Tensor<T>& y, const Tensor<T>& gt, const std::vector<double>& boosts) {
    contract(y.same_shape(gt), "taL1: shape mismatch");
    const int n = y.dim(0);
    contract(int(boosts.size()) == n, "taL1: one boost per batch item");
    const std::size_t per = y.size() / std::size_t(n);
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        const T* yp = y.ptr() + std::size_t(i) * per;
        const T* gp = gt.ptr() + std::size_t(i) * per;
        double acc = 0.0;
        for (std::size_t j = 0; j < per; ++j) acc += std::abs(double(yp[j]) - double(gp[j]));
        total += boosts[std::size_t(i)] * acc / double(per);
    }
    return total / double(n);
}

/// d(taL1)/dY. Subgradient sign(Y - GT) scaled per item.
template <class T>
Tensor<T> ta_l1_loss_backward(const Tensor<T>& y, const Tensor<T>& gt,
                              const std::vector<double>& boosts) {
    const int n = y.dim(0);
    const std::size_t per = y.size() / std::size_t(n);
    Tensor<T> dy = y;
    for (int i = 0; i < n; ++i) {
        const double scale = boosts[std::size_t(i)] / (double(per) * double(n));
        T* dp = dy.ptr() + std::size_t(i) * per;
        const T* yp = y.ptr() + std::size_t(i) * per;
        const T* gp = gt.ptr() + std::size_t(i) * per;
        for (std::size_t j = 0; j < per; ++j) {
            const double d = double(yp[j]) - double(gp[j]);
            dp[j] = T(d > 0.0 ? scale : (d < 0.0 ? -scale : 0.0));
        }
    }
    return dy;
}

constexpr double kProbEps = 1e-7;

struct GanLosses {
    double d_loss = 0.0;
    double g_loss = 0.0;
};

/// Task-conditioned GAN losses from the discriminator's probability maps.
/// P0 scores (I_X, I_GT, E_T), P1 scores (I_X, I_Y, E_T). The discriminator
/// ascends Eq. 2 (d_loss = -mean log P0 - mean log(1-P1)); the generator uses
/// the non-saturating form g_loss = -mean log P1. Probabilities are clamped
/// to [eps, 1-eps].
template <class T>
GanLosses tcgan_losses(const Tensor<T>& p0, const Tensor<T>& p1) {
    contract(p0.size() > 0 && p1.size() > 0, "empty probability map");
    double d_real = 0.0, d_fake = 0.0, g = 0.0;
    for (const T v : p0.data) {
        const double p = std::clamp(double(v), kProbEps, 1.0 - kProbEps);
        d_real += -std::log(p);
    }
    for (const T v : p1.data) {
        const double p = std::clamp(double(v), kProbEps, 1.0 - kProbEps);
        d_fake += -std::log(1.0 - p);
        g += -std::log(p);
    }
    GanLosses out;
    out.d_loss = d_real / double(p0.size()) + d_fake / double(p1.size());
    out.g_loss = g / double(p1.size());
    return out;
}

/// Gradient of the real-side discriminator term w.r.t. P0. Clamped regions
/// propagate zero. With one-sided label smoothing the real target drops to
/// `real_target` (classic 0.9).
template <class T>
Tensor<T> tcgan_d_real_backward(const Tensor<T>& p0, double real_target = 1.0) {
    Tensor<T> dp0 = p0;
    const double n0 = double(p0.size());
    for (std::size_t i = 0; i < p0.size(); ++i) {
        const double p = double(p0.data[i]);
        if (p <= kProbEps || p >= 1.0 - kProbEps) {
            dp0.data[i] = T(0);
            continue;
        }
        // d/dp of -(t log p + (1-t) log(1-p)) = -t/p + (1-t)/(1-p)
        dp0.data[i] = T((-real_target / p + (1.0 - real_target) / (1.0 - p)) / n0);
    }
    return dp0;
}

/// Gradient of the fake-side discriminator term w.r.t. P1.
template <class T>
Tensor<T> tcgan_d_fake_backward(const Tensor<T>& p1) {
    Tensor<T> dp1 = p1;
    const double n1 = double(p1.size());
    for (std::size_t i = 0; i < p1.size(); ++i) {
        const double p = double(p1.data[i]);
        if (p <= kProbEps || p >= 1.0 - kProbEps) {
            dp1.data[i] = T(0);
            continue;
        }
        dp1.data[i] = T(1.0 / (1.0 - p) / n1);
    }
    return dp1;
}

/// Both discriminator-side gradients at once.
template <class T>
void tcgan_d_backward(const Tensor<T>& p0, const Tensor<T>& p1, Tensor<T>& dp0, Tensor<T>& dp1,
                      double real_target = 1.0) {
    dp0 = tcgan_d_real_backward(p0, real_target);
    dp1 = tcgan_d_fake_backward(p1);
}

/// Gradient of the non-saturating generator term w.r.t. P1.
template <class T>
Tensor<T> tcgan_g_backward(const Tensor<T>& p1) {
    Tensor<T> dp1 = p1;
    const double n1 = double(p1.size());
    for (std::size_t i = 0; i < p1.size(); ++i) {
        const double p = double(p1.data[i]);
        dp1.data[i] = (p <= kProbEps || p >= 1.0 - kProbEps) ? T(0) : T(-1.0 / p / n1);
    }
    return dp1;
}

/// L_total = L_tcGAN + lambda * L_taL1 (generator side).
inline double total_generator_loss(double g_gan, double ta_l1, double lambda) {
    contract(lambda >= 0.0, "lambda must be >= 0");
    return g_gan + lambda * ta_l1;
}

} // namespace pgx
