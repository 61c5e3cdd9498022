#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "focusnet/tensor.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace focusnet {

enum class Padding { kValid, kSame };

struct ConvGeometry {
    int stride = 1;
    int pad_top = 0;
    int pad_left = 0;
    int out_h = 0;
    int out_w = 0;
};

// Output size and symmetric zero padding; `same` yields ceil(in/stride),
// with the odd padding pixel going to the bottom/right.
inline ConvGeometry conv_geometry(int in_h, int in_w, int k, int stride, Padding pad) {
    ConvGeometry g;
    g.stride = stride;
    if (pad == Padding::kSame) {
        g.out_h = (in_h + stride - 1) / stride;
        g.out_w = (in_w + stride - 1) / stride;
        const int total_h = std::max((g.out_h - 1) * stride + k - in_h, 0);
        const int total_w = std::max((g.out_w - 1) * stride + k - in_w, 0);
        g.pad_top = total_h / 2;
        g.pad_left = total_w / 2;
    } else {
        g.out_h = (in_h - k) / stride + 1;
        g.out_w = (in_w - k) / stride + 1;
    }
    if (g.out_h < 1 || g.out_w < 1) {
        throw ShapeError("convolution produces empty spatial output for input " +
                         std::to_string(in_h) + "x" + std::to_string(in_w) + ", kernel " +
                         std::to_string(k) + ", stride " + std::to_string(stride));
    }
    return g;
}

namespace detail {

// col has layout [C*k*k][out_h*out_w], row-major.
template <typename T>
void im2col(const T* x, int ch, int in_h, int in_w, int k, const ConvGeometry& g, T* col) {
    const int plane = g.out_h * g.out_w;
    for (int c = 0; c < ch; ++c) {
        for (int ki = 0; ki < k; ++ki) {
            for (int kj = 0; kj < k; ++kj) {
                T* row = col + (static_cast<std::int64_t>((c * k + ki) * k + kj)) * plane;
                for (int oh = 0; oh < g.out_h; ++oh) {
                    const int ih = oh * g.stride + ki - g.pad_top;
                    if (ih < 0 || ih >= in_h) {
                        std::fill(row + oh * g.out_w, row + (oh + 1) * g.out_w, T(0));
                        continue;
                    }
                    const T* src = x + (static_cast<std::int64_t>(c) * in_h + ih) * in_w;
                    for (int ow = 0; ow < g.out_w; ++ow) {
                        const int iw = ow * g.stride + kj - g.pad_left;
                        row[oh * g.out_w + ow] = (iw >= 0 && iw < in_w) ? src[iw] : T(0);
                    }
                }
            }
        }
    }
}

template <typename T>
void col2im_add(const T* col, int ch, int in_h, int in_w, int k, const ConvGeometry& g, T* x) {
    const int plane = g.out_h * g.out_w;
    for (int c = 0; c < ch; ++c) {
        for (int ki = 0; ki < k; ++ki) {
            for (int kj = 0; kj < k; ++kj) {
                const T* row = col + (static_cast<std::int64_t>((c * k + ki) * k + kj)) * plane;
                for (int oh = 0; oh < g.out_h; ++oh) {
                    const int ih = oh * g.stride + ki - g.pad_top;
                    if (ih < 0 || ih >= in_h) continue;
                    T* dst = x + (static_cast<std::int64_t>(c) * in_h + ih) * in_w;
                    for (int ow = 0; ow < g.out_w; ++ow) {
                        const int iw = ow * g.stride + kj - g.pad_left;
                        if (iw >= 0 && iw < in_w) dst[iw] += row[oh * g.out_w + ow];
                    }
                }
            }
        }
    }
}

}  // namespace detail

// y[N,Co,Ho,Wo] = w[Co,Ci,k,k] (*) x[N,Ci,H,W], cross-correlation, no bias.
template <typename T>
Tensor<T> conv_forward(const Tensor<T>& x, const Tensor<T>& w, const ConvGeometry& g) {
    const int n = x.dim(0), ci = x.dim(1), h = x.dim(2), wd = x.dim(3);
    const int co = w.dim(0), k = w.dim(2);
    const int plane = g.out_h * g.out_w;
    const std::int64_t ckk = static_cast<std::int64_t>(ci) * k * k;

    Tensor<T> y({n, co, g.out_h, g.out_w});
    std::vector<T> cols(static_cast<std::size_t>(n) * ckk * plane);

#pragma omp parallel for schedule(static)
    for (int b = 0; b < n; ++b) {
        detail::im2col(x.data.data() + static_cast<std::int64_t>(b) * ci * h * wd, ci, h, wd, k, g,
                       cols.data() + static_cast<std::int64_t>(b) * ckk * plane);
    }

#pragma omp parallel for collapse(2) schedule(static)
    for (int b = 0; b < n; ++b) {
        for (int o = 0; o < co; ++o) {
            const T* wrow = w.data.data() + static_cast<std::int64_t>(o) * ckk;
            const T* col = cols.data() + static_cast<std::int64_t>(b) * ckk * plane;
            T* out = y.data.data() + (static_cast<std::int64_t>(b) * co + o) * plane;
            for (int p = 0; p < plane; ++p) out[p] = T(0);
            for (std::int64_t q = 0; q < ckk; ++q) {
                const T wv = wrow[q];
                if (wv == T(0)) continue;
                const T* crow = col + q * plane;
                for (int p = 0; p < plane; ++p) out[p] += wv * crow[p];
            }
        }
    }
    return y;
}

// gx[N,Ci,H,W] from gy[N,Co,Ho,Wo]; the adjoint of conv_forward in x.
template <typename T>
Tensor<T> conv_backward_input(const Tensor<T>& gy, const Tensor<T>& w, const ConvGeometry& g,
                              int in_h, int in_w) {
    const int n = gy.dim(0), co = gy.dim(1);
    const int ci = w.dim(1), k = w.dim(2);
    const int plane = g.out_h * g.out_w;
    const std::int64_t ckk = static_cast<std::int64_t>(ci) * k * k;

    Tensor<T> gx({n, ci, in_h, in_w});
#pragma omp parallel for schedule(static)
    for (int b = 0; b < n; ++b) {
        std::vector<T> col(static_cast<std::size_t>(ckk) * plane, T(0));
        for (std::int64_t q = 0; q < ckk; ++q) {
            T* crow = col.data() + q * plane;
            for (int o = 0; o < co; ++o) {
                const T wv = w.data[static_cast<std::size_t>(static_cast<std::int64_t>(o) * ckk + q)];
                if (wv == T(0)) continue;
                const T* grow = gy.data.data() + (static_cast<std::int64_t>(b) * co + o) * plane;
                for (int p = 0; p < plane; ++p) crow[p] += wv * grow[p];
            }
        }
        detail::col2im_add(col.data(), ci, in_h, in_w, k, g,
                           gx.data.data() + static_cast<std::int64_t>(b) * ci * in_h * in_w);
    }
    return gx;
}

// gw[Co,Ci,k,k] from x and gy.
template <typename T>
Tensor<T> conv_backward_weight(const Tensor<T>& x, const Tensor<T>& gy, const ConvGeometry& g,
                               int k) {
    const int n = x.dim(0), ci = x.dim(1), h = x.dim(2), wd = x.dim(3);
    const int co = gy.dim(1);
    const int plane = g.out_h * g.out_w;
    const std::int64_t ckk = static_cast<std::int64_t>(ci) * k * k;

    std::vector<T> cols(static_cast<std::size_t>(n) * ckk * plane);
#pragma omp parallel for schedule(static)
    for (int b = 0; b < n; ++b) {
        detail::im2col(x.data.data() + static_cast<std::int64_t>(b) * ci * h * wd, ci, h, wd, k, g,
                       cols.data() + static_cast<std::int64_t>(b) * ckk * plane);
    }

    Tensor<T> gw({co, ci, k, k});
#pragma omp parallel for schedule(static)
    for (int o = 0; o < co; ++o) {
        T* wrow = gw.data.data() + static_cast<std::int64_t>(o) * ckk;
        for (int b = 0; b < n; ++b) {
            const T* grow = gy.data.data() + (static_cast<std::int64_t>(b) * co + o) * plane;
            const T* col = cols.data() + static_cast<std::int64_t>(b) * ckk * plane;
            for (std::int64_t q = 0; q < ckk; ++q) {
                const T* crow = col + q * plane;
                T acc = T(0);
                for (int p = 0; p < plane; ++p) acc += grow[p] * crow[p];
                wrow[q] += acc;
            }
        }
    }
    return gw;
}

// Transposed-convolution geometry: the virtual forward conv maps
// [N,Co,stride*H,stride*W] -> [N,Ci,H,W] with `same` padding.
inline ConvGeometry transpose_geometry(int in_h, int in_w, int k, int stride) {
    return conv_geometry(in_h * stride, in_w * stride, k, stride, Padding::kSame);
}

}  // namespace focusnet
