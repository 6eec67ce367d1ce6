#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "pgx/rng.hpp"
#include "pgx/tensor.hpp"

namespace pgx {

inline void set_compute_threads(int n) {
    if (n > 0) Eigen::setNbThreads(n);
}

namespace nn {

template <class T>
using MatMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <class T>
using ConstMatMap =
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

/// Gather patches: cols(C*k*k, out_h*out_w) from src(C, src_h, src_w) with
/// src_y = oy*stride - pad + ky. Out-of-bounds taps read zero.
template <class T>
void im2col(const T* src, int C, int src_h, int src_w, int k, int stride, int pad, int out_h,
            int out_w, T* cols) {
    const std::size_t plane = std::size_t(src_h) * src_w;
    const std::size_t ncols = std::size_t(out_h) * out_w;
    for (int c = 0; c < C; ++c)
        for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx) {
                T* row = cols + (std::size_t(c) * k * k + std::size_t(ky) * k + kx) * ncols;
                for (int oy = 0; oy < out_h; ++oy) {
                    const int sy = oy * stride - pad + ky;
                    if (sy < 0 || sy >= src_h) {
                        for (int ox = 0; ox < out_w; ++ox) row[std::size_t(oy) * out_w + ox] = T(0);
                        continue;
                    }
                    const T* src_row = src + c * plane + std::size_t(sy) * src_w;
                    for (int ox = 0; ox < out_w; ++ox) {
                        const int sx = ox * stride - pad + kx;
                        row[std::size_t(oy) * out_w + ox] =
                            (sx < 0 || sx >= src_w) ? T(0) : src_row[sx];
                    }
                }
            }
}

/// Scatter-add: the transpose of im2col. dst(C, dst_h, dst_w) accumulates
/// cols(C*k*k, grid_h*grid_w) at dst_y = gy*stride - pad + ky.
template <class T>
void col2im(const T* cols, int C, int dst_h, int dst_w, int k, int stride, int pad, int grid_h,
            int grid_w, T* dst) {
    const std::size_t plane = std::size_t(dst_h) * dst_w;
    const std::size_t ncols = std::size_t(grid_h) * grid_w;
    for (int c = 0; c < C; ++c)
        for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx) {
                const T* row = cols + (std::size_t(c) * k * k + std::size_t(ky) * k + kx) * ncols;
                for (int gy = 0; gy < grid_h; ++gy) {
                    const int dy = gy * stride - pad + ky;
                    if (dy < 0 || dy >= dst_h) continue;
                    T* dst_row = dst + c * plane + std::size_t(dy) * dst_w;
                    const T* col_row = row + std::size_t(gy) * grid_w;
                    for (int gx = 0; gx < grid_w; ++gx) {
                        const int dx = gx * stride - pad + kx;
                        if (dx >= 0 && dx < dst_w) dst_row[dx] += col_row[gx];
                    }
                }
            }
}

inline int conv_out(int size, int k, int stride, int pad) {
    return (size + 2 * pad - k) / stride + 1;
}

inline int convt_out(int size, int k, int stride, int pad) {
    return (size - 1) * stride - 2 * pad + k;
}

/// Strided convolution, weights (Cout, Cin*k*k), bias (Cout).
template <class T>
class Conv2d {
public:
    Conv2d() = default;
    Conv2d(std::string name, int cin, int cout, int k, int stride, int pad)
        : name_(std::move(name)), cin_(cin), cout_(cout), k_(k), stride_(stride), pad_(pad) {
        w_.name = name_ + ".w";
        w_.init_shape({cout, cin * k * k});
        b_.name = name_ + ".b";
        b_.init_shape({cout});
    }

    void init(Rng& rng, double std_dev = 0.02) {
        for (auto& v : w_.value.data) v = T(rng.normal(0.0, std_dev));
        for (auto& v : b_.value.data) v = T(0);
    }

    Tensor<T> forward(const Tensor<T>& x) {
        const int N = x.dim(0), H = x.dim(2), W = x.dim(3);
        contract(x.dim(1) == cin_, name_ + ": channel mismatch");
        const int OH = conv_out(H, k_, stride_, pad_), OW = conv_out(W, k_, stride_, pad_);
        x_cache_ = x;
        Tensor<T> y({N, cout_, OH, OW});
        const int K = cin_ * k_ * k_;
        cols_.assign(std::size_t(N) * K * OH * OW, T(0));
        for (int n = 0; n < N; ++n) {
            T* cols = cols_.data() + std::size_t(n) * K * OH * OW;
            im2col(x.ptr() + std::size_t(n) * cin_ * H * W, cin_, H, W, k_, stride_, pad_, OH, OW,
                   cols);
            ConstMatMap<T> Wm(w_.value.ptr(), cout_, K);
            ConstMatMap<T> Cm(cols, K, OH * OW);
            MatMap<T> Ym(y.ptr() + std::size_t(n) * cout_ * OH * OW, cout_, OH * OW);
            Ym.noalias() = Wm * Cm;
            for (int co = 0; co < cout_; ++co) Ym.row(co).array() += b_.value.data[co];
        }
        return y;
    }

    /// Accumulates parameter grads (unless skipped) and returns dx.
    Tensor<T> backward(const Tensor<T>& dy, bool param_grads = true) {
        const Tensor<T>& x = x_cache_;
        const int N = x.dim(0), H = x.dim(2), W = x.dim(3);
        const int OH = dy.dim(2), OW = dy.dim(3);
        const int K = cin_ * k_ * k_;
        Tensor<T> dx({N, cin_, H, W});
        std::vector<T> dcols(std::size_t(K) * OH * OW);
        for (int n = 0; n < N; ++n) {
            const T* cols = cols_.data() + std::size_t(n) * K * OH * OW;
            const T* dyp = dy.ptr() + std::size_t(n) * cout_ * OH * OW;
            ConstMatMap<T> dYm(dyp, cout_, OH * OW);
            if (param_grads) {
                ConstMatMap<T> Cm(cols, K, OH * OW);
                MatMap<T> dWm(w_.grad.ptr(), cout_, K);
                dWm.noalias() += dYm * Cm.transpose();
                // sequential sums: reduction order must not depend on the
                // allocation's alignment
                for (int co = 0; co < cout_; ++co) {
                    T acc = T(0);
                    const T* r = dyp + std::size_t(co) * OH * OW;
                    for (int i = 0; i < OH * OW; ++i) acc += r[i];
                    b_.grad.data[co] += acc;
                }
            }
            ConstMatMap<T> Wm(w_.value.ptr(), cout_, K);
            MatMap<T> dCm(dcols.data(), K, OH * OW);
            dCm.noalias() = Wm.transpose() * dYm;
            col2im(dcols.data(), cin_, H, W, k_, stride_, pad_, OH, OW,
                   dx.ptr() + std::size_t(n) * cin_ * H * W);
        }
        return dx;
    }

    void collect(std::vector<Param<T>*>& out) {
        out.push_back(&w_);
        out.push_back(&b_);
    }

    std::size_t param_count() const { return w_.value.size() + b_.value.size(); }

private:
    std::string name_;
    int cin_ = 0, cout_ = 0, k_ = 0, stride_ = 1, pad_ = 0;
    Param<T> w_, b_;
    Tensor<T> x_cache_;
    std::vector<T> cols_;
};

/// Strided transposed convolution, weights (Cin, Cout*k*k), bias (Cout).
template <class T>
class ConvTranspose2d {
public:
    ConvTranspose2d() = default;
    ConvTranspose2d(std::string name, int cin, int cout, int k, int stride, int pad)
        : name_(std::move(name)), cin_(cin), cout_(cout), k_(k), stride_(stride), pad_(pad) {
        w_.name = name_ + ".w";
        w_.init_shape({cin, cout * k * k});
        b_.name = name_ + ".b";
        b_.init_shape({cout});
    }

    void init(Rng& rng, double std_dev = 0.02) {
        for (auto& v : w_.value.data) v = T(rng.normal(0.0, std_dev));
        for (auto& v : b_.value.data) v = T(0);
    }

    Tensor<T> forward(const Tensor<T>& x) {
        const int N = x.dim(0), H = x.dim(2), W = x.dim(3);
        contract(x.dim(1) == cin_, name_ + ": channel mismatch");
        const int OH = convt_out(H, k_, stride_, pad_), OW = convt_out(W, k_, stride_, pad_);
        x_cache_ = x;
        Tensor<T> y({N, cout_, OH, OW});
        const int K = cout_ * k_ * k_;
        std::vector<T> cols(std::size_t(K) * H * W);
        for (int n = 0; n < N; ++n) {
            ConstMatMap<T> Wm(w_.value.ptr(), cin_, K);
            ConstMatMap<T> Xm(x.ptr() + std::size_t(n) * cin_ * H * W, cin_, H * W);
            MatMap<T> Cm(cols.data(), K, H * W);
            Cm.noalias() = Wm.transpose() * Xm;
            T* yp = y.ptr() + std::size_t(n) * cout_ * OH * OW;
            col2im(cols.data(), cout_, OH, OW, k_, stride_, pad_, H, W, yp);
            MatMap<T> Ym(yp, cout_, OH * OW);
            for (int co = 0; co < cout_; ++co) Ym.row(co).array() += b_.value.data[co];
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy, bool param_grads = true) {
        const Tensor<T>& x = x_cache_;
        const int N = x.dim(0), H = x.dim(2), W = x.dim(3);
        const int OH = dy.dim(2), OW = dy.dim(3);
        const int K = cout_ * k_ * k_;
        Tensor<T> dx({N, cin_, H, W});
        std::vector<T> dcols(std::size_t(K) * H * W);
        for (int n = 0; n < N; ++n) {
            const T* dyp = dy.ptr() + std::size_t(n) * cout_ * OH * OW;
            im2col(dyp, cout_, OH, OW, k_, stride_, pad_, H, W, dcols.data());
            ConstMatMap<T> dCm(dcols.data(), K, H * W);
            if (param_grads) {
                ConstMatMap<T> Xm(x.ptr() + std::size_t(n) * cin_ * H * W, cin_, H * W);
                MatMap<T> dWm(w_.grad.ptr(), cin_, K);
                dWm.noalias() += Xm * dCm.transpose();
                for (int co = 0; co < cout_; ++co) {
                    T acc = T(0);
                    const T* r = dyp + std::size_t(co) * OH * OW;
                    for (int i = 0; i < OH * OW; ++i) acc += r[i];
                    b_.grad.data[co] += acc;
                }
            }
            ConstMatMap<T> Wm(w_.value.ptr(), cin_, K);
            MatMap<T> dXm(dx.ptr() + std::size_t(n) * cin_ * H * W, cin_, H * W);
            dXm.noalias() = Wm * dCm;
        }
        return dx;
    }

    void collect(std::vector<Param<T>*>& out) {
        out.push_back(&w_);
        out.push_back(&b_);
    }

    std::size_t param_count() const { return w_.value.size() + b_.value.size(); }

private:
    std::string name_;
    int cin_ = 0, cout_ = 0, k_ = 0, stride_ = 1, pad_ = 0;
    Param<T> w_, b_;
    Tensor<T> x_cache_;
};

/// Fully connected layer on (N, in) tensors. Weights (out, in).
template <class T>
class Linear {
public:
    Linear() = default;
    Linear(std::string name, int in, int out) : name_(std::move(name)), in_(in), out_(out) {
        w_.name = name_ + ".w";
        w_.init_shape({out, in});
        b_.name = name_ + ".b";
        b_.init_shape({out});
    }

    void init(Rng& rng, double std_dev = 0.02) {
        for (auto& v : w_.value.data) v = T(rng.normal(0.0, std_dev));
        for (auto& v : b_.value.data) v = T(0);
    }

    Tensor<T> forward(const Tensor<T>& x) {
        contract(x.dim(1) == in_, name_ + ": width mismatch");
        const int N = x.dim(0);
        x_cache_ = x;
        Tensor<T> y({N, out_});
        ConstMatMap<T> Xm(x.ptr(), N, in_);
        ConstMatMap<T> Wm(w_.value.ptr(), out_, in_);
        MatMap<T> Ym(y.ptr(), N, out_);
        Ym.noalias() = Xm * Wm.transpose();
        for (int n = 0; n < N; ++n)
            for (int o = 0; o < out_; ++o) y.data[std::size_t(n) * out_ + o] += b_.value.data[o];
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy, bool param_grads = true) {
        const int N = x_cache_.dim(0);
        Tensor<T> dx({N, in_});
        ConstMatMap<T> dYm(dy.ptr(), N, out_);
        if (param_grads) {
            ConstMatMap<T> Xm(x_cache_.ptr(), N, in_);
            MatMap<T> dWm(w_.grad.ptr(), out_, in_);
            dWm.noalias() += dYm.transpose() * Xm;
            for (int o = 0; o < out_; ++o) {
                T acc = T(0);
                for (int n = 0; n < N; ++n) acc += dy.data[std::size_t(n) * out_ + o];
                b_.grad.data[o] += acc;
            }
        }
        ConstMatMap<T> Wm(w_.value.ptr(), out_, in_);
        MatMap<T> dXm(dx.ptr(), N, in_);
        dXm.noalias() = dYm * Wm;
        return dx;
    }

    void collect(std::vector<Param<T>*>& out) {
        out.push_back(&w_);
        out.push_back(&b_);
    }

    std::size_t param_count() const { return w_.value.size() + b_.value.size(); }

private:
    std::string name_;
    int in_ = 0, out_ = 0;
    Param<T> w_, b_;
    Tensor<T> x_cache_;
};

/// Instance normalization with affine parameters, statistics per (n, c).
template <class T>
class InstanceNorm2d {
public:
    InstanceNorm2d() = default;
    explicit InstanceNorm2d(std::string name, int channels)
        : name_(std::move(name)), c_(channels) {
        gamma_.name = name_ + ".gamma";
        gamma_.init_shape({channels});
        beta_.name = name_ + ".beta";
        beta_.init_shape({channels});
    }

    void init(Rng& rng, double std_dev = 0.02) {
        for (auto& v : gamma_.value.data) v = T(rng.normal(1.0, std_dev));
        for (auto& v : beta_.value.data) v = T(0);
    }

    Tensor<T> forward(const Tensor<T>& x) {
        const int N = x.dim(0), H = x.dim(2), W = x.dim(3);
        contract(x.dim(1) == c_, name_ + ": channel mismatch");
        const std::size_t m = std::size_t(H) * W;
        xhat_ = Tensor<T>({N, c_, H, W});
        invstd_.assign(std::size_t(N) * c_, T(0));
        Tensor<T> y({N, c_, H, W});
        for (int n = 0; n < N; ++n)
            for (int c = 0; c < c_; ++c) {
                const T* xp = x.ptr() + (std::size_t(n) * c_ + c) * m;
                T* hp = xhat_.ptr() + (std::size_t(n) * c_ + c) * m;
                T* yp = y.ptr() + (std::size_t(n) * c_ + c) * m;
                T mean = T(0);
                for (std::size_t i = 0; i < m; ++i) mean += xp[i];
                mean /= T(m);
                T var = T(0);
                for (std::size_t i = 0; i < m; ++i) {
                    const T d = xp[i] - mean;
                    var += d * d;
                }
                var /= T(m);
                const T inv = T(1) / std::sqrt(var + T(kEps));
                invstd_[std::size_t(n) * c_ + c] = inv;
                const T g = gamma_.value.data[c], b = beta_.value.data[c];
                for (std::size_t i = 0; i < m; ++i) {
                    hp[i] = (xp[i] - mean) * inv;
                    yp[i] = g * hp[i] + b;
                }
            }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy, bool param_grads = true) {
        const int N = dy.dim(0), H = dy.dim(2), W = dy.dim(3);
        const std::size_t m = std::size_t(H) * W;
        Tensor<T> dx({N, c_, H, W});
        for (int n = 0; n < N; ++n)
            for (int c = 0; c < c_; ++c) {
                const T* dyp = dy.ptr() + (std::size_t(n) * c_ + c) * m;
                const T* hp = xhat_.ptr() + (std::size_t(n) * c_ + c) * m;
                T* dxp = dx.ptr() + (std::size_t(n) * c_ + c) * m;
                const T g = gamma_.value.data[c];
                const T inv = invstd_[std::size_t(n) * c_ + c];
                T sum_dy = T(0), sum_dy_h = T(0);
                for (std::size_t i = 0; i < m; ++i) {
                    sum_dy += dyp[i];
                    sum_dy_h += dyp[i] * hp[i];
                }
                if (param_grads) {
                    gamma_.grad.data[c] += sum_dy_h;
                    beta_.grad.data[c] += sum_dy;
                }
                const T k1 = g * inv;
                for (std::size_t i = 0; i < m; ++i)
                    dxp[i] = k1 * (dyp[i] - sum_dy / T(m) - hp[i] * sum_dy_h / T(m));
            }
        return dx;
    }

    void collect(std::vector<Param<T>*>& out) {
        out.push_back(&gamma_);
        out.push_back(&beta_);
    }

    std::size_t param_count() const { return 2 * std::size_t(c_); }

    static constexpr double kEps = 1e-5;

private:
    std::string name_;
    int c_ = 0;
    Param<T> gamma_, beta_;
    Tensor<T> xhat_;
    std::vector<T> invstd_;
};

// Stateless activations; each caches what its backward needs.

template <class T>
class LeakyRelu {
public:
    explicit LeakyRelu(double slope = 0.2) : slope_(T(slope)) {}

    Tensor<T> forward(const Tensor<T>& x) {
        x_sign_.assign(x.size(), false);
        Tensor<T> y = x;
        for (std::size_t i = 0; i < y.size(); ++i) {
            if (x.data[i] < T(0))
                y.data[i] = slope_ * x.data[i];
            else
                x_sign_[i] = true;
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        Tensor<T> dx = dy;
        for (std::size_t i = 0; i < dx.size(); ++i)
            if (!x_sign_[i]) dx.data[i] *= slope_;
        return dx;
    }

private:
    T slope_;
    std::vector<bool> x_sign_;
};

template <class T>
class Relu {
public:
    Tensor<T> forward(const Tensor<T>& x) {
        mask_.assign(x.size(), false);
        Tensor<T> y = x;
        for (std::size_t i = 0; i < y.size(); ++i) {
            if (x.data[i] > T(0))
                mask_[i] = true;
            else
                y.data[i] = T(0);
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        Tensor<T> dx = dy;
        for (std::size_t i = 0; i < dx.size(); ++i)
            if (!mask_[i]) dx.data[i] = T(0);
        return dx;
    }

private:
    std::vector<bool> mask_;
};

template <class T>
class Tanh {
public:
    Tensor<T> forward(const Tensor<T>& x) {
        y_ = x;
        for (auto& v : y_.data) v = std::tanh(v);
        return y_;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        Tensor<T> dx = dy;
        for (std::size_t i = 0; i < dx.size(); ++i)
            dx.data[i] *= (T(1) - y_.data[i] * y_.data[i]);
        return dx;
    }

private:
    Tensor<T> y_;
};

template <class T>
class Sigmoid {
public:
    Tensor<T> forward(const Tensor<T>& x) {
        y_ = x;
        for (auto& v : y_.data) v = T(1) / (T(1) + std::exp(-v));
        return y_;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        Tensor<T> dx = dy;
        for (std::size_t i = 0; i < dx.size(); ++i)
            dx.data[i] *= y_.data[i] * (T(1) - y_.data[i]);
        return dx;
    }

private:
    Tensor<T> y_;
};

/// Channel concatenation of two NCHW tensors and its backward split.
template <class T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
    contract(a.dim(0) == b.dim(0) && a.dim(2) == b.dim(2) && a.dim(3) == b.dim(3),
             "concat: mismatched shapes");
    const int N = a.dim(0), Ca = a.dim(1), Cb = b.dim(1), H = a.dim(2), W = a.dim(3);
    Tensor<T> y({N, Ca + Cb, H, W});
    const std::size_t plane = std::size_t(H) * W;
    for (int n = 0; n < N; ++n) {
        std::copy_n(a.ptr() + std::size_t(n) * Ca * plane, Ca * plane,
                    y.ptr() + std::size_t(n) * (Ca + Cb) * plane);
        std::copy_n(b.ptr() + std::size_t(n) * Cb * plane, Cb * plane,
                    y.ptr() + std::size_t(n) * (Ca + Cb) * plane + Ca * plane);
    }
    return y;
}

template <class T>
void split_channels(const Tensor<T>& dy, int ca, Tensor<T>& da, Tensor<T>& db) {
    const int N = dy.dim(0), C = dy.dim(1), H = dy.dim(2), W = dy.dim(3);
    const int cb = C - ca;
    da = Tensor<T>({N, ca, H, W});
    db = Tensor<T>({N, cb, H, W});
    const std::size_t plane = std::size_t(H) * W;
    for (int n = 0; n < N; ++n) {
        std::copy_n(dy.ptr() + std::size_t(n) * C * plane, ca * plane,
                    da.ptr() + std::size_t(n) * ca * plane);
        std::copy_n(dy.ptr() + std::size_t(n) * C * plane + ca * plane, cb * plane,
                    db.ptr() + std::size_t(n) * cb * plane);
    }
}

/// Adam with bias correction; state is kept per parameter by name.
template <class T>
class Adam {
public:
    Adam(double lr = 2e-4, double beta1 = 0.5, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(const std::vector<Param<T>*>& params) {
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, double(t_));
        const double bc2 = 1.0 - std::pow(beta2_, double(t_));
        for (Param<T>* p : params) {
            auto& st = state_[p->name];
            if (st.m.size() != p->value.size()) {
                st.m.assign(p->value.size(), T(0));
                st.v.assign(p->value.size(), T(0));
            }
            for (std::size_t i = 0; i < p->value.size(); ++i) {
                const double g = double(p->grad.data[i]);
                st.m[i] = T(beta1_ * double(st.m[i]) + (1.0 - beta1_) * g);
                st.v[i] = T(beta2_ * double(st.v[i]) + (1.0 - beta2_) * g * g);
                const double mhat = double(st.m[i]) / bc1;
                const double vhat = double(st.v[i]) / bc2;
                p->value.data[i] -= T(lr_ * mhat / (std::sqrt(vhat) + eps_));
            }
        }
    }

    void zero_grad(const std::vector<Param<T>*>& params) {
        for (Param<T>* p : params) p->grad.zero();
    }

    long step_count() const { return t_; }
    double learning_rate() const { return lr_; }
    void set_learning_rate(double lr) { lr_ = lr; }

private:
    struct State {
        std::vector<T> m, v;
    };
    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
    std::map<std::string, State> state_;
};

} // namespace nn
} // namespace pgx
