#pragma once

// Serial reference implementations. Deliberately naive nested loops: these are
// the oracles the fast OpenMP kernels are tested and benchmarked against.

#include "focusnet/conv_kernels.hpp"
#include "focusnet/tensor.hpp"

namespace focusnet::reference {

template <typename T>
Tensor<T> conv2d_naive(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, int stride,
                       Padding pad) {
    const int n = x.dim(0), ci = x.dim(1), h = x.dim(2), wd = x.dim(3);
    const int co = w.dim(0), k = w.dim(2);
    const ConvGeometry g = conv_geometry(h, wd, k, stride, pad);
    Tensor<T> y({n, co, g.out_h, g.out_w});
    for (int bn = 0; bn < n; ++bn) {
        for (int o = 0; o < co; ++o) {
            for (int oh = 0; oh < g.out_h; ++oh) {
                for (int ow = 0; ow < g.out_w; ++ow) {
                    T acc = b.data[static_cast<std::size_t>(o)];
                    for (int c = 0; c < ci; ++c) {
                        for (int ki = 0; ki < k; ++ki) {
                            const int ih = oh * stride + ki - g.pad_top;
                            if (ih < 0 || ih >= h) continue;
                            for (int kj = 0; kj < k; ++kj) {
                                const int iw = ow * stride + kj - g.pad_left;
                                if (iw < 0 || iw >= wd) continue;
                                acc += x.at4(bn, c, ih, iw) *
                                       w.data[static_cast<std::size_t>(((static_cast<std::int64_t>(o) * ci + c) * k + ki) * k + kj)];
                            }
                        }
                    }
                    y.at4(bn, o, oh, ow) = acc;
                }
            }
        }
    }
    return y;
}

// Direct scatter-accumulate transposed convolution; wt is [Cin,Cout,k,k] and
// the output is exactly stride*H x stride*W (the adjoint of `same` conv).
template <typename T>
Tensor<T> conv2d_transpose_naive(const Tensor<T>& x, const Tensor<T>& wt, const Tensor<T>& b,
                                 int stride) {
    const int n = x.dim(0), ci = x.dim(1), h = x.dim(2), wd = x.dim(3);
    const int co = wt.dim(1), k = wt.dim(2);
    const ConvGeometry g = transpose_geometry(h, wd, k, stride);
    const int oh = h * stride, ow = wd * stride;
    Tensor<T> y({n, co, oh, ow});
    for (auto& v : y.data) v = T(0);
    for (int bn = 0; bn < n; ++bn) {
        for (int c = 0; c < ci; ++c) {
            for (int ih = 0; ih < h; ++ih) {
                for (int iw = 0; iw < wd; ++iw) {
                    const T xv = x.at4(bn, c, ih, iw);
                    for (int o = 0; o < co; ++o) {
                        for (int ki = 0; ki < k; ++ki) {
                            const int p = ih * stride + ki - g.pad_top;
                            if (p < 0 || p >= oh) continue;
                            for (int kj = 0; kj < k; ++kj) {
                                const int q = iw * stride + kj - g.pad_left;
                                if (q < 0 || q >= ow) continue;
                                y.at4(bn, o, p, q) +=
                                    xv * wt.data[static_cast<std::size_t>(((static_cast<std::int64_t>(c) * co + o) * k + ki) * k + kj)];
                            }
                        }
                    }
                }
            }
        }
    }
    for (int bn = 0; bn < n; ++bn)
        for (int o = 0; o < co; ++o)
            for (int p = 0; p < oh; ++p)
                for (int q = 0; q < ow; ++q) y.at4(bn, o, p, q) += b.data[static_cast<std::size_t>(o)];
    return y;
}

// Brute-force pixel-loop confusion counting over two binary masks.
struct NaiveConfusion {
    long long tp = 0, fp = 0, tn = 0, fn = 0;
};

template <typename T>
NaiveConfusion confusion_naive(const Tensor<T>& pred, const Tensor<T>& gt) {
    NaiveConfusion c;
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
        const bool p = pred.data[i] != T(0);
        const bool g = gt.data[i] != T(0);
        if (p && g)
            ++c.tp;
        else if (p && !g)
            ++c.fp;
        else if (!p && g)
            ++c.fn;
        else
            ++c.tn;
    }
    return c;
}

}  // namespace focusnet::reference
