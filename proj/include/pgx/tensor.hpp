#pragma once

#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "pgx/errors.hpp"

namespace pgx {

/// Dense row-major tensor of rank <= 4. NN code uses NCHW layout.
template <class T>
struct Tensor {
    std::vector<int> shape;
    std::vector<T> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
        data.assign(count(shape), T(0));
    }

    static std::size_t count(const std::vector<int>& s) {
        std::size_t n = 1;
        for (int d : s) {
            contract(d >= 0, "negative tensor dimension");
            n *= std::size_t(d);
        }
        return s.empty() ? 0 : n;
    }

    std::size_t size() const { return data.size(); }
    int dim(int i) const { return shape[std::size_t(i)]; }
    T* ptr() { return data.data(); }
    const T* ptr() const { return data.data(); }

    void zero() { std::fill(data.begin(), data.end(), T(0)); }

    void reshape(std::vector<int> s) {
        contract(count(s) == data.size(), "reshape changes element count");
        shape = std::move(s);
    }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    // NCHW accessor
    T& at(int n, int c, int y, int x) {
        const int C = shape[1], H = shape[2], W = shape[3];
        return data[((std::size_t(n) * C + c) * H + y) * W + x];
    }
    T at(int n, int c, int y, int x) const {
        const int C = shape[1], H = shape[2], W = shape[3];
        return data[((std::size_t(n) * C + c) * H + y) * W + x];
    }

    template <class U>
    Tensor<U> cast() const {
        Tensor<U> out;
        out.shape = shape;
        out.data.resize(data.size());
        for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = U(data[i]);
        return out;
    }
};

/// Named trainable parameter with its gradient buffer.
template <class T>
struct Param {
    std::string name;
    Tensor<T> value;
    Tensor<T> grad;

    void init_shape(std::vector<int> s) {
        value = Tensor<T>(s);
        grad = Tensor<T>(std::move(s));
    }
};

} // namespace pgx
