#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

#include "pcnn/tensor.hpp"

// Layer forward/backward passes, templated on the scalar type: the network runs in
// float, the finite-difference test harness instantiates double.

namespace pcnn {

// ---------------------------------------------------------------- conv 3x3

/// 3x3 convolution, stride 1, same zero padding.
/// weights laid out [out_ch][in_ch][3][3], bias [out_ch].
template <typename T>
Tensor4<T> conv2d_forward(const Tensor4<T>& x, const std::vector<T>& weights,
                          const std::vector<T>& bias, int out_ch) {
    if (weights.size() != static_cast<std::size_t>(out_ch) * x.c * 9 ||
        bias.size() != static_cast<std::size_t>(out_ch))
        throw std::invalid_argument("conv2d: weight/bias shape mismatch");

    Tensor4<T> out(x.n, out_ch, x.h, x.w);
    for (int b = 0; b < x.n; ++b)
        for (int f = 0; f < out_ch; ++f)
            for (int y = 0; y < x.h; ++y)
                for (int xx = 0; xx < x.w; ++xx) {
                    T acc = bias[f];
                    for (int c = 0; c < x.c; ++c) {
                        const T* w = weights.data() + (static_cast<std::size_t>(f) * x.c + c) * 9;
                        for (int dy = 0; dy < 3; ++dy) {
                            int sy = y + dy - 1;
                            if (sy < 0 || sy >= x.h) continue;
                            for (int dx = 0; dx < 3; ++dx) {
                                int sx = xx + dx - 1;
                                if (sx < 0 || sx >= x.w) continue;
                                acc += x.at(b, c, sy, sx) * w[dy * 3 + dx];
                            }
                        }
                    }
                    out.at(b, f, y, xx) = acc;
                }
    return out;
}

template <typename T>
struct Conv2dGrads {
    Tensor4<T> x;
    std::vector<T> weights;
    std::vector<T> bias;
};

template <typename T>
Conv2dGrads<T> conv2d_backward(const Tensor4<T>& x, const std::vector<T>& weights,
                               int out_ch, const Tensor4<T>& grad_out) {
    if (grad_out.n != x.n || grad_out.c != out_ch || grad_out.h != x.h || grad_out.w != x.w)
        throw std::invalid_argument("conv2d backward: grad shape mismatch");

    Conv2dGrads<T> g;
    g.x = Tensor4<T>(x.n, x.c, x.h, x.w);
    g.weights.assign(weights.size(), T(0));
    g.bias.assign(out_ch, T(0));

    for (int b = 0; b < x.n; ++b)
        for (int f = 0; f < out_ch; ++f)
            for (int y = 0; y < x.h; ++y)
                for (int xx = 0; xx < x.w; ++xx) {
                    const T go = grad_out.at(b, f, y, xx);
                    g.bias[f] += go;
                    for (int c = 0; c < x.c; ++c) {
                        const std::size_t wbase = (static_cast<std::size_t>(f) * x.c + c) * 9;
                        for (int dy = 0; dy < 3; ++dy) {
                            int sy = y + dy - 1;
                            if (sy < 0 || sy >= x.h) continue;
                            for (int dx = 0; dx < 3; ++dx) {
                                int sx = xx + dx - 1;
                                if (sx < 0 || sx >= x.w) continue;
                                g.weights[wbase + dy * 3 + dx] += go * x.at(b, c, sy, sx);
                                g.x.at(b, c, sy, sx) += go * weights[wbase + dy * 3 + dx];
                            }
                        }
                    }
                }
    return g;
}

// ---------------------------------------------------------------- batch norm

template <typename T>
struct BatchNormCache {
    Tensor4<T> xhat;        // normalized input
    std::vector<T> inv_std; // per channel, 1/sqrt(var + eps)
};

/// Train-mode batch normalization: per-channel statistics over (batch, H, W),
/// then y = gamma * xhat + beta. Running stats, when given, are updated as
/// new = (1 - stat_momentum) * old + stat_momentum * batch.
template <typename T>
Tensor4<T> batchnorm_train(const Tensor4<T>& x, const std::vector<T>& gamma,
                           const std::vector<T>& beta, T eps,
                           std::vector<T>* running_mean, std::vector<T>* running_var,
                           T stat_momentum, BatchNormCache<T>* cache) {
    const std::size_t per_channel = static_cast<std::size_t>(x.n) * x.h * x.w;
    if (per_channel < 2)
        throw std::invalid_argument("batchnorm: need >= 2 samples per channel in train mode");
    if (gamma.size() != static_cast<std::size_t>(x.c) || beta.size() != gamma.size())
        throw std::invalid_argument("batchnorm: parameter shape mismatch");

    std::vector<T> mean(x.c, T(0)), var(x.c, T(0)), inv_std(x.c, T(0));
    for (int c = 0; c < x.c; ++c) {
        T s = 0;
        for (int b = 0; b < x.n; ++b)
            for (int y = 0; y < x.h; ++y)
                for (int xx = 0; xx < x.w; ++xx) s += x.at(b, c, y, xx);
        mean[c] = s / static_cast<T>(per_channel);
        T v = 0;
        for (int b = 0; b < x.n; ++b)
            for (int y = 0; y < x.h; ++y)
                for (int xx = 0; xx < x.w; ++xx) {
                    T d = x.at(b, c, y, xx) - mean[c];
                    v += d * d;
                }
        var[c] = v / static_cast<T>(per_channel);
        inv_std[c] = T(1) / std::sqrt(var[c] + eps);
    }

    if (running_mean && running_var) {
        for (int c = 0; c < x.c; ++c) {
            (*running_mean)[c] = (T(1) - stat_momentum) * (*running_mean)[c] + stat_momentum * mean[c];
            (*running_var)[c] = (T(1) - stat_momentum) * (*running_var)[c] + stat_momentum * var[c];
        }
    }

    Tensor4<T> out(x.n, x.c, x.h, x.w);
    Tensor4<T> xhat(x.n, x.c, x.h, x.w);
    for (int b = 0; b < x.n; ++b)
        for (int c = 0; c < x.c; ++c)
            for (int y = 0; y < x.h; ++y)
                for (int xx = 0; xx < x.w; ++xx) {
                    T xh = (x.at(b, c, y, xx) - mean[c]) * inv_std[c];
                    xhat.at(b, c, y, xx) = xh;
                    out.at(b, c, y, xx) = gamma[c] * xh + beta[c];
                }
    if (cache) {
        cache->xhat = std::move(xhat);
        cache->inv_std = std::move(inv_std);
    }
    return out;
}

/// Infer-mode batch normalization using running statistics; no state is touched.
template <typename T>
Tensor4<T> batchnorm_infer(const Tensor4<T>& x, const std::vector<T>& gamma,
                           const std::vector<T>& beta, const std::vector<T>& running_mean,
                           const std::vector<T>& running_var, T eps) {
    Tensor4<T> out(x.n, x.c, x.h, x.w);
    for (int c = 0; c < x.c; ++c) {
        const T inv = T(1) / std::sqrt(running_var[c] + eps);
        for (int b = 0; b < x.n; ++b)
            for (int y = 0; y < x.h; ++y)
                for (int xx = 0; xx < x.w; ++xx)
                    out.at(b, c, y, xx) = gamma[c] * (x.at(b, c, y, xx) - running_mean[c]) * inv + beta[c];
    }
    return out;
}

template <typename T>
struct BatchNormGrads {
    Tensor4<T> x;
    std::vector<T> gamma;
    std::vector<T> beta;
};

template <typename T>
BatchNormGrads<T> batchnorm_backward(const BatchNormCache<T>& cache, const std::vector<T>& gamma,
                                     const Tensor4<T>& grad_out) {
    const Tensor4<T>& xhat = cache.xhat;
    const std::size_t per_channel = static_cast<std::size_t>(xhat.n) * xhat.h * xhat.w;
    const T inv_n = T(1) / static_cast<T>(per_channel);

    BatchNormGrads<T> g;
    g.x = Tensor4<T>(xhat.n, xhat.c, xhat.h, xhat.w);
    g.gamma.assign(xhat.c, T(0));
    g.beta.assign(xhat.c, T(0));

    for (int c = 0; c < xhat.c; ++c) {
        T sum_dy = 0, sum_dy_xhat = 0;
        for (int b = 0; b < xhat.n; ++b)
            for (int y = 0; y < xhat.h; ++y)
                for (int xx = 0; xx < xhat.w; ++xx) {
                    const T dy = grad_out.at(b, c, y, xx);
                    sum_dy += dy;
                    sum_dy_xhat += dy * xhat.at(b, c, y, xx);
                }
        g.beta[c] = sum_dy;
        g.gamma[c] = sum_dy_xhat;
        const T k = gamma[c] * cache.inv_std[c];
        for (int b = 0; b < xhat.n; ++b)
            for (int y = 0; y < xhat.h; ++y)
                for (int xx = 0; xx < xhat.w; ++xx) {
                    const T dy = grad_out.at(b, c, y, xx);
                    g.x.at(b, c, y, xx) =
                        k * (dy - inv_n * sum_dy - xhat.at(b, c, y, xx) * inv_n * sum_dy_xhat);
                }
    }
    return g;
}

// ---------------------------------------------------------------- relu

template <typename T>
Tensor4<T> relu_forward(const Tensor4<T>& x) {
    Tensor4<T> out = x;
    for (auto& v : out.v) v = std::max(v, T(0));
    return out;
}

/// Gradient passes where the pre-activation is > 0; the subgradient at 0 is 0.
template <typename T>
Tensor4<T> relu_backward(const Tensor4<T>& x_pre, const Tensor4<T>& grad_out) {
    Tensor4<T> g(x_pre.n, x_pre.c, x_pre.h, x_pre.w);
    for (std::size_t i = 0; i < g.v.size(); ++i)
        g.v[i] = x_pre.v[i] > T(0) ? grad_out.v[i] : T(0);
    return g;
}

// ---------------------------------------------------------------- 2x2 max pool

template <typename T>
struct MaxPoolCache {
    int in_n = 0, in_c = 0, in_h = 0, in_w = 0;
    std::vector<std::size_t> argmax; // flat input index per output element
};

/// Max over disjoint 2x2 windows, stride 2; trailing odd row/col dropped.
/// Ties resolve to the first position in raster order.
template <typename T>
Tensor4<T> maxpool2_forward(const Tensor4<T>& x, MaxPoolCache<T>* cache) {
    if (x.h < 2 || x.w < 2)
        throw std::invalid_argument("maxpool2: input smaller than 2x2");
    const int oh = x.h / 2, ow = x.w / 2;
    Tensor4<T> out(x.n, x.c, oh, ow);
    if (cache) {
        cache->in_n = x.n;
        cache->in_c = x.c;
        cache->in_h = x.h;
        cache->in_w = x.w;
        cache->argmax.assign(out.size(), 0);
    }
    for (int b = 0; b < x.n; ++b)
        for (int c = 0; c < x.c; ++c)
            for (int y = 0; y < oh; ++y)
                for (int xx = 0; xx < ow; ++xx) {
                    T best = x.at(b, c, 2 * y, 2 * xx);
                    std::size_t best_idx = x.idx(b, c, 2 * y, 2 * xx);
                    for (int dy = 0; dy < 2; ++dy)
                        for (int dx = 0; dx < 2; ++dx) {
                            const T v = x.at(b, c, 2 * y + dy, 2 * xx + dx);
                            if (v > best) { // strict: first-in-raster-order wins ties
                                best = v;
                                best_idx = x.idx(b, c, 2 * y + dy, 2 * xx + dx);
                            }
                        }
                    out.at(b, c, y, xx) = best;
                    if (cache) cache->argmax[out.idx(b, c, y, xx)] = best_idx;
                }
    return out;
}

template <typename T>
Tensor4<T> maxpool2_backward(const MaxPoolCache<T>& cache, const Tensor4<T>& grad_out) {
    Tensor4<T> g(cache.in_n, cache.in_c, cache.in_h, cache.in_w);
    for (std::size_t i = 0; i < grad_out.v.size(); ++i)
        g.v[cache.argmax[i]] += grad_out.v[i];
    return g;
}

// ---------------------------------------------------------------- dense

/// logits = W x + b per sample; W is [out_dim][in_dim], bias [out_dim].
template <typename T>
Matrix<T> dense_forward(const Matrix<T>& x, const std::vector<T>& weights,
                        const std::vector<T>& bias, int out_dim) {
    if (weights.size() != static_cast<std::size_t>(out_dim) * x.cols ||
        bias.size() != static_cast<std::size_t>(out_dim))
        throw std::invalid_argument("dense: weight/bias shape mismatch");
    Matrix<T> out(x.rows, out_dim);
    for (int b = 0; b < x.rows; ++b)
        for (int k = 0; k < out_dim; ++k) {
            T acc = bias[k];
            const T* w = weights.data() + static_cast<std::size_t>(k) * x.cols;
            const T* xr = x.row(b);
            for (int d = 0; d < x.cols; ++d) acc += w[d] * xr[d];
            out.at(b, k) = acc;
        }
    return out;
}

template <typename T>
struct DenseGrads {
    Matrix<T> x;
    std::vector<T> weights;
    std::vector<T> bias;
};

template <typename T>
DenseGrads<T> dense_backward(const Matrix<T>& x, const std::vector<T>& weights,
                             int out_dim, const Matrix<T>& grad_out) {
    DenseGrads<T> g;
    g.x = Matrix<T>(x.rows, x.cols);
    g.weights.assign(weights.size(), T(0));
    g.bias.assign(out_dim, T(0));
    for (int b = 0; b < x.rows; ++b)
        for (int k = 0; k < out_dim; ++k) {
            const T go = grad_out.at(b, k);
            g.bias[k] += go;
            const T* w = weights.data() + static_cast<std::size_t>(k) * x.cols;
            T* gw = g.weights.data() + static_cast<std::size_t>(k) * x.cols;
            const T* xr = x.row(b);
            T* gx = g.x.v.data() + static_cast<std::size_t>(b) * x.cols;
            for (int d = 0; d < x.cols; ++d) {
                gw[d] += go * xr[d];
                gx[d] += go * w[d];
            }
        }
    return g;
}

// ---------------------------------------------------------------- softmax + cross entropy

template <typename T>
struct SoftmaxXentResult {
    T loss = 0;            // mean negative log-likelihood
    Matrix<T> probs;       // rows sum to 1
    Matrix<T> grad_logits; // (probs - onehot) / batch
};

/// Max-subtracted stable softmax fused with cross-entropy loss.
template <typename T>
SoftmaxXentResult<T> softmax_xent(const Matrix<T>& logits, const std::vector<int>& labels) {
    if (labels.size() != static_cast<std::size_t>(logits.rows))
        throw std::invalid_argument("softmax_xent: label count mismatch");
    for (int lab : labels)
        if (lab < 0 || lab >= logits.cols)
            throw std::out_of_range("softmax_xent: label out of range");

    SoftmaxXentResult<T> r;
    r.probs = Matrix<T>(logits.rows, logits.cols);
    r.grad_logits = Matrix<T>(logits.rows, logits.cols);
    T total = 0;
    for (int b = 0; b < logits.rows; ++b) {
        T mx = logits.at(b, 0);
        for (int k = 1; k < logits.cols; ++k) mx = std::max(mx, logits.at(b, k));
        T denom = 0;
        for (int k = 0; k < logits.cols; ++k) {
            const T e = std::exp(logits.at(b, k) - mx);
            r.probs.at(b, k) = e;
            denom += e;
        }
        for (int k = 0; k < logits.cols; ++k) r.probs.at(b, k) /= denom;
        total += -std::log(std::max(r.probs.at(b, labels[b]),
                                    std::numeric_limits<T>::min()));
        for (int k = 0; k < logits.cols; ++k)
            r.grad_logits.at(b, k) =
                (r.probs.at(b, k) - (k == labels[b] ? T(1) : T(0))) / static_cast<T>(logits.rows);
    }
    r.loss = total / static_cast<T>(logits.rows);
    return r;
}

} // namespace pcnn
