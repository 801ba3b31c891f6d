#pragma once

#include <cstddef>
#include <vector>

namespace pcnn {

/// Dense NCHW tensor (batch, channels, height, width).
template <typename T>
struct Tensor4 {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<T> v;

    Tensor4() = default;
    Tensor4(int n_, int c_, int h_, int w_)
        : n(n_), c(c_), h(h_), w(w_),
          v(static_cast<std::size_t>(n_) * c_ * h_ * w_, T(0)) {}

    std::size_t size() const { return v.size(); }
    std::size_t idx(int b, int ch, int y, int x) const {
        return ((static_cast<std::size_t>(b) * c + ch) * h + y) * w + x;
    }
    T& at(int b, int ch, int y, int x) { return v[idx(b, ch, y, x)]; }
    T at(int b, int ch, int y, int x) const { return v[idx(b, ch, y, x)]; }

    bool same_shape(const Tensor4& o) const {
        return n == o.n && c == o.c && h == o.h && w == o.w;
    }
};

/// Row-major matrix (rows x cols); flattened activations and logits.
template <typename T>
struct Matrix {
    int rows = 0, cols = 0;
    std::vector<T> v;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, T(0)) {}

    T& at(int r, int c_) { return v[static_cast<std::size_t>(r) * cols + c_]; }
    T at(int r, int c_) const { return v[static_cast<std::size_t>(r) * cols + c_]; }
    const T* row(int r) const { return v.data() + static_cast<std::size_t>(r) * cols; }
};

/// Reshape NCHW to (n, c*h*w) without reordering; the memory layout already matches.
template <typename T>
Matrix<T> flatten(const Tensor4<T>& x) {
    Matrix<T> m;
    m.rows = x.n;
    m.cols = x.c * x.h * x.w;
    m.v = x.v;
    return m;
}

template <typename T>
Tensor4<T> unflatten(const Matrix<T>& m, int c, int h, int w) {
    Tensor4<T> x;
    x.n = m.rows;
    x.c = c;
    x.h = h;
    x.w = w;
    x.v = m.v;
    return x;
}

} // namespace pcnn
