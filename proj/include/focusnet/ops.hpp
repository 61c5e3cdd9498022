#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "focusnet/conv_kernels.hpp"
#include "focusnet/rng.hpp"
#include "focusnet/tape.hpp"
#include "focusnet/tensor.hpp"

namespace focusnet {

enum class Mode { kTrain, kEval };
enum class Act { kRelu, kSigmoid };
enum class EwKind { kMul, kAdd };

// Running batch-norm statistics, one per normalization layer. Mutated by
// train-mode forward passes only.
template <typename T>
struct BnState {
    Tensor<T> running_mean;
    Tensor<T> running_var;

    static BnState init(int channels) {
        BnState s;
        s.running_mean = Tensor<T>::zeros({channels});
        s.running_var = Tensor<T>::ones({channels});
        return s;
    }
};

// Test hook: when set, the conv2d weight-gradient rule is deliberately
// mis-scaled so gradient-check harnesses can prove they detect a bad rule.
inline bool& corrupt_conv_weight_grad_hook() {
    static bool flag = false;
    return flag;
}

namespace ops {

template <typename T>
int conv2d(Tape<T>& t, int x_id, int w_id, int b_id, int stride, Padding pad) {
    const Tensor<T>& x = t.val(x_id);
    const Tensor<T>& w = t.val(w_id);
    const Tensor<T>& b = t.val(b_id);
    if (x.rank() != 4 || w.rank() != 4) {
        throw ShapeError("conv2d expects 4-d input and kernel, got " + shape_str(x.shape) +
                         " and " + shape_str(w.shape));
    }
    if (x.dim(1) != w.dim(1)) {
        throw ShapeError("conv2d channel mismatch: input " + shape_str(x.shape) + " vs kernel " +
                         shape_str(w.shape));
    }
    if (w.dim(2) != w.dim(3)) {
        throw ShapeError("conv2d kernel must be square, got " + shape_str(w.shape));
    }
    if (b.rank() != 1 || b.dim(0) != w.dim(0)) {
        throw ShapeError("conv2d bias " + shape_str(b.shape) + " does not match kernel " +
                         shape_str(w.shape));
    }
    if (stride < 1) throw ParamError("conv2d stride must be >= 1");

    const int k = w.dim(2);
    const int in_h = x.dim(2), in_w = x.dim(3);
    const ConvGeometry g = conv_geometry(in_h, in_w, k, stride, pad);
    Tensor<T> y = conv_forward(x, w, g);
    const int co = w.dim(0);
    const int plane = g.out_h * g.out_w;
#pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < x.dim(0); ++n) {
        for (int o = 0; o < co; ++o) {
            T* row = y.data.data() + (static_cast<std::int64_t>(n) * co + o) * plane;
            const T bv = b.data[static_cast<std::size_t>(o)];
            for (int p = 0; p < plane; ++p) row[p] += bv;
        }
    }

    return t.record(std::move(y), [x_id, w_id, b_id, g, k, in_h, in_w](Tape<T>& tp, int out) {
        const Tensor<T>& gy = tp.grad(out);
        const Tensor<T>& xv = tp.val(x_id);
        const Tensor<T>& wv = tp.val(w_id);

        Tensor<T> gx = conv_backward_input(gy, wv, g, in_h, in_w);
        Tensor<T>& gxa = tp.grad(x_id);
        for (std::size_t i = 0; i < gxa.data.size(); ++i) gxa.data[i] += gx.data[i];

        Tensor<T> gw = conv_backward_weight(xv, gy, g, k);
        if (corrupt_conv_weight_grad_hook()) {
            for (auto& v : gw.data) v *= T(1.01);
        }
        Tensor<T>& gwa = tp.grad(w_id);
        for (std::size_t i = 0; i < gwa.data.size(); ++i) gwa.data[i] += gw.data[i];

        Tensor<T>& gba = tp.grad(b_id);
        const int co2 = wv.dim(0);
        const int plane2 = g.out_h * g.out_w;
        for (int n = 0; n < gy.dim(0); ++n) {
            for (int o = 0; o < co2; ++o) {
                const T* row = gy.data.data() + (static_cast<std::int64_t>(n) * co2 + o) * plane2;
                T acc = T(0);
                for (int p = 0; p < plane2; ++p) acc += row[p];
                gba.data[static_cast<std::size_t>(o)] += acc;
            }
        }
    });
}

template <typename T>
int conv2d_transpose(Tape<T>& t, int x_id, int w_id, int b_id, int stride) {
    const Tensor<T>& x = t.val(x_id);
    const Tensor<T>& w = t.val(w_id);  // [Cin, Cout, k, k]
    const Tensor<T>& b = t.val(b_id);
    if (x.rank() != 4 || w.rank() != 4) {
        throw ShapeError("conv2d_transpose expects 4-d input and kernel, got " +
                         shape_str(x.shape) + " and " + shape_str(w.shape));
    }
    if (x.dim(1) != w.dim(0)) {
        throw ShapeError("conv2d_transpose channel mismatch: input " + shape_str(x.shape) +
                         " vs kernel " + shape_str(w.shape));
    }
    const int k = w.dim(2);
    if (k < stride) throw ParamError("conv2d_transpose requires kernel size >= stride");
    if (b.rank() != 1 || b.dim(0) != w.dim(1)) {
        throw ShapeError("conv2d_transpose bias " + shape_str(b.shape) + " does not match kernel " +
                         shape_str(w.shape));
    }

    const int h = x.dim(2), wd = x.dim(3);
    const ConvGeometry g = transpose_geometry(h, wd, k, stride);
    // The op is the adjoint of a `same` stride-s conv, i.e. conv_backward_input
    // applied to x as the virtual output gradient.
    Tensor<T> y = conv_backward_input(x, w, g, h * stride, wd * stride);
    const int co = w.dim(1);
    const int plane = h * stride * wd * stride;
#pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < x.dim(0); ++n) {
        for (int o = 0; o < co; ++o) {
            T* row = y.data.data() + (static_cast<std::int64_t>(n) * co + o) * plane;
            const T bv = b.data[static_cast<std::size_t>(o)];
            for (int p = 0; p < plane; ++p) row[p] += bv;
        }
    }

    return t.record(std::move(y), [x_id, w_id, b_id, g, k](Tape<T>& tp, int out) {
        const Tensor<T>& gy = tp.grad(out);  // [N, Cout, sH, sW]
        const Tensor<T>& xv = tp.val(x_id);
        const Tensor<T>& wv = tp.val(w_id);

        // Adjoint of the adjoint is the virtual forward conv.
        Tensor<T> gx = conv_forward(gy, wv, g);
        Tensor<T>& gxa = tp.grad(x_id);
        for (std::size_t i = 0; i < gxa.data.size(); ++i) gxa.data[i] += gx.data[i];

        // In the virtual conv, input = gy and output-gradient = x.
        Tensor<T> gw = conv_backward_weight(gy, xv, g, k);
        Tensor<T>& gwa = tp.grad(w_id);
        for (std::size_t i = 0; i < gwa.data.size(); ++i) gwa.data[i] += gw.data[i];

        Tensor<T>& gba = tp.grad(b_id);
        const int co2 = gy.dim(1);
        const std::int64_t plane2 = static_cast<std::int64_t>(gy.dim(2)) * gy.dim(3);
        for (int n = 0; n < gy.dim(0); ++n) {
            for (int o = 0; o < co2; ++o) {
                const T* row = gy.data.data() + (static_cast<std::int64_t>(n) * co2 + o) * plane2;
                T acc = T(0);
                for (std::int64_t p = 0; p < plane2; ++p) acc += row[p];
                gba.data[static_cast<std::size_t>(o)] += acc;
            }
        }
    });
}

template <typename T>
int activation(Tape<T>& t, int x_id, Act kind) {
    const Tensor<T>& x = t.val(x_id);
    Tensor<T> y = x;
    if (kind == Act::kRelu) {
#pragma omp parallel for schedule(static)
        for (std::int64_t i = 0; i < static_cast<std::int64_t>(y.data.size()); ++i) {
            if (y.data[static_cast<std::size_t>(i)] < T(0)) y.data[static_cast<std::size_t>(i)] = T(0);
        }
    } else {
#pragma omp parallel for schedule(static)
        for (std::int64_t i = 0; i < static_cast<std::int64_t>(y.data.size()); ++i) {
            auto& v = y.data[static_cast<std::size_t>(i)];
            v = T(1) / (T(1) + std::exp(-v));
        }
    }
    return t.record(std::move(y), [x_id, kind](Tape<T>& tp, int out) {
        const Tensor<T>& gy = tp.grad(out);
        const Tensor<T>& yv = tp.val(out);
        Tensor<T>& gx = tp.grad(x_id);
        if (kind == Act::kRelu) {
            const Tensor<T>& xv = tp.val(x_id);
            for (std::size_t i = 0; i < gx.data.size(); ++i) {
                if (xv.data[i] > T(0)) gx.data[i] += gy.data[i];
            }
        } else {
            for (std::size_t i = 0; i < gx.data.size(); ++i) {
                gx.data[i] += gy.data[i] * yv.data[i] * (T(1) - yv.data[i]);
            }
        }
    });
}

template <typename T>
int batchnorm2d(Tape<T>& t, int x_id, int gamma_id, int beta_id, BnState<T>& state, Mode mode,
                T eps = T(1e-5), T momentum = T(0.1)) {
    const Tensor<T>& x = t.val(x_id);
    if (x.rank() != 4) throw ShapeError("batchnorm2d expects NCHW input, got " + shape_str(x.shape));
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (t.val(gamma_id).size() != c || t.val(beta_id).size() != c) {
        throw ShapeError("batchnorm2d gamma/beta size does not match " + std::to_string(c) +
                         " channels");
    }
    const std::int64_t m = static_cast<std::int64_t>(n) * h * w;
    if (mode == Mode::kTrain && m < 2) {
        throw NumericError("batchnorm2d: degenerate statistics, need at least 2 values per channel");
    }

    const Tensor<T>& gamma = t.val(gamma_id);
    const Tensor<T>& beta = t.val(beta_id);

    Tensor<T> mean({c}), inv_std({c});
    if (mode == Mode::kTrain) {
#pragma omp parallel for schedule(static)
        for (int ch = 0; ch < c; ++ch) {
            double mu = 0.0;
            for (int b = 0; b < n; ++b)
                for (int i = 0; i < h; ++i)
                    for (int j = 0; j < w; ++j) mu += static_cast<double>(x.at4(b, ch, i, j));
            mu /= static_cast<double>(m);
            double var = 0.0;
            for (int b = 0; b < n; ++b)
                for (int i = 0; i < h; ++i)
                    for (int j = 0; j < w; ++j) {
                        const double d = static_cast<double>(x.at4(b, ch, i, j)) - mu;
                        var += d * d;
                    }
            var /= static_cast<double>(m);  // population variance
            mean.data[static_cast<std::size_t>(ch)] = static_cast<T>(mu);
            inv_std.data[static_cast<std::size_t>(ch)] =
                static_cast<T>(1.0 / std::sqrt(var + static_cast<double>(eps)));
            auto& rm = state.running_mean.data[static_cast<std::size_t>(ch)];
            auto& rv = state.running_var.data[static_cast<std::size_t>(ch)];
            rm = (T(1) - momentum) * rm + momentum * static_cast<T>(mu);
            rv = (T(1) - momentum) * rv + momentum * static_cast<T>(var);
        }
    } else {
        for (int ch = 0; ch < c; ++ch) {
            mean.data[static_cast<std::size_t>(ch)] = state.running_mean.data[static_cast<std::size_t>(ch)];
            inv_std.data[static_cast<std::size_t>(ch)] = static_cast<T>(
                1.0 / std::sqrt(static_cast<double>(state.running_var.data[static_cast<std::size_t>(ch)]) +
                                static_cast<double>(eps)));
        }
    }

    Tensor<T> y(x.shape);
#pragma omp parallel for collapse(2) schedule(static)
    for (int b = 0; b < n; ++b) {
        for (int ch = 0; ch < c; ++ch) {
            const T mu = mean.data[static_cast<std::size_t>(ch)];
            const T is = inv_std.data[static_cast<std::size_t>(ch)];
            const T ga = gamma.data[static_cast<std::size_t>(ch)];
            const T be = beta.data[static_cast<std::size_t>(ch)];
            for (int i = 0; i < h; ++i)
                for (int j = 0; j < w; ++j)
                    y.at4(b, ch, i, j) = ga * (x.at4(b, ch, i, j) - mu) * is + be;
        }
    }

    const bool batch_stats = (mode == Mode::kTrain);
    return t.record(std::move(y), [x_id, gamma_id, beta_id, mean, inv_std, batch_stats, n, c, h, w,
                                   m](Tape<T>& tp, int out) {
        const Tensor<T>& gy = tp.grad(out);
        const Tensor<T>& xv = tp.val(x_id);
        const Tensor<T>& gamma_v = tp.val(gamma_id);
        Tensor<T>& gx = tp.grad(x_id);
        Tensor<T>& ggamma = tp.grad(gamma_id);
        Tensor<T>& gbeta = tp.grad(beta_id);

#pragma omp parallel for schedule(static)
        for (int ch = 0; ch < c; ++ch) {
            const T mu = mean.data[static_cast<std::size_t>(ch)];
            const T is = inv_std.data[static_cast<std::size_t>(ch)];
            const T ga = gamma_v.data[static_cast<std::size_t>(ch)];
            double sum_gy = 0.0, sum_gy_xhat = 0.0;
            for (int b = 0; b < n; ++b)
                for (int i = 0; i < h; ++i)
                    for (int j = 0; j < w; ++j) {
                        const double g = static_cast<double>(gy.at4(b, ch, i, j));
                        const double xh =
                            (static_cast<double>(xv.at4(b, ch, i, j)) - static_cast<double>(mu)) *
                            static_cast<double>(is);
                        sum_gy += g;
                        sum_gy_xhat += g * xh;
                    }
            ggamma.data[static_cast<std::size_t>(ch)] += static_cast<T>(sum_gy_xhat);
            gbeta.data[static_cast<std::size_t>(ch)] += static_cast<T>(sum_gy);
            const double mean_gy = sum_gy / static_cast<double>(m);
            const double mean_gy_xhat = sum_gy_xhat / static_cast<double>(m);
            for (int b = 0; b < n; ++b)
                for (int i = 0; i < h; ++i)
                    for (int j = 0; j < w; ++j) {
                        const double g = static_cast<double>(gy.at4(b, ch, i, j));
                        const double xh =
                            (static_cast<double>(xv.at4(b, ch, i, j)) - static_cast<double>(mu)) *
                            static_cast<double>(is);
                        double d;
                        if (batch_stats) {
                            d = static_cast<double>(ga) * static_cast<double>(is) *
                                (g - mean_gy - xh * mean_gy_xhat);
                        } else {
                            d = static_cast<double>(ga) * static_cast<double>(is) * g;
                        }
                        gx.at4(b, ch, i, j) += static_cast<T>(d);
                    }
        }
    });
}

template <typename T>
int global_avg_pool(Tape<T>& t, int x_id) {
    const Tensor<T>& x = t.val(x_id);
    if (x.rank() != 4) throw ShapeError("global_avg_pool expects NCHW input, got " + shape_str(x.shape));
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    Tensor<T> y({n, c});
    const double inv = 1.0 / (static_cast<double>(h) * w);
    for (int b = 0; b < n; ++b)
        for (int ch = 0; ch < c; ++ch) {
            double acc = 0.0;
            for (int i = 0; i < h; ++i)
                for (int j = 0; j < w; ++j) acc += static_cast<double>(x.at4(b, ch, i, j));
            y.at2(b, ch) = static_cast<T>(acc * inv);
        }
    return t.record(std::move(y), [x_id, n, c, h, w, inv](Tape<T>& tp, int out) {
        const Tensor<T>& gy = tp.grad(out);
        Tensor<T>& gx = tp.grad(x_id);
        for (int b = 0; b < n; ++b)
            for (int ch = 0; ch < c; ++ch) {
                const T g = static_cast<T>(static_cast<double>(gy.at2(b, ch)) * inv);
                for (int i = 0; i < h; ++i)
                    for (int j = 0; j < w; ++j) gx.at4(b, ch, i, j) += g;
            }
    });
}

template <typename T>
int dense(Tape<T>& t, int x_id, int w_id, int b_id) {
    const Tensor<T>& x = t.val(x_id);
    const Tensor<T>& w = t.val(w_id);
    const Tensor<T>& b = t.val(b_id);
    if (x.rank() != 2 || w.rank() != 2 || x.dim(1) != w.dim(0)) {
        throw ShapeError("dense shape mismatch: input " + shape_str(x.shape) + " vs weights " +
                         shape_str(w.shape));
    }
    if (b.rank() != 1 || b.dim(0) != w.dim(1)) {
        throw ShapeError("dense bias " + shape_str(b.shape) + " does not match weights " +
                         shape_str(w.shape));
    }
    const int n = x.dim(0), c = x.dim(1), m = w.dim(1);
    Tensor<T> y({n, m});
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) {
            T acc = b.data[static_cast<std::size_t>(j)];
            for (int q = 0; q < c; ++q) acc += x.at2(i, q) * w.at2(q, j);
            y.at2(i, j) = acc;
        }
    return t.record(std::move(y), [x_id, w_id, b_id, n, c, m](Tape<T>& tp, int out) {
        const Tensor<T>& gy = tp.grad(out);
        const Tensor<T>& xv = tp.val(x_id);
        const Tensor<T>& wv = tp.val(w_id);
        Tensor<T>& gx = tp.grad(x_id);
        Tensor<T>& gw = tp.grad(w_id);
        Tensor<T>& gb = tp.grad(b_id);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < m; ++j) {
                const T g = gy.at2(i, j);
                gb.data[static_cast<std::size_t>(j)] += g;
                for (int q = 0; q < c; ++q) {
                    gx.at2(i, q) += g * wv.at2(q, j);
                    gw.at2(q, j) += g * xv.at2(i, q);
                }
            }
    });
}

template <typename T>
int concat_channels(Tape<T>& t, int a_id, int b_id) {
    const Tensor<T>& a = t.val(a_id);
    const Tensor<T>& b = t.val(b_id);
    if (a.rank() != 4 || b.rank() != 4 || a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) ||
        a.dim(3) != b.dim(3)) {
        throw ShapeError("concat_channels batch/spatial mismatch: " + shape_str(a.shape) + " vs " +
                         shape_str(b.shape));
    }
    const int n = a.dim(0), ca = a.dim(1), cb = b.dim(1), h = a.dim(2), w = a.dim(3);
    Tensor<T> y({n, ca + cb, h, w});
    const std::int64_t plane = static_cast<std::int64_t>(h) * w;
    for (int bn = 0; bn < n; ++bn) {
        std::copy(a.data.begin() + bn * ca * plane, a.data.begin() + (bn + 1) * ca * plane,
                  y.data.begin() + (static_cast<std::int64_t>(bn) * (ca + cb)) * plane);
        std::copy(b.data.begin() + bn * cb * plane, b.data.begin() + (bn + 1) * cb * plane,
                  y.data.begin() + (static_cast<std::int64_t>(bn) * (ca + cb) + ca) * plane);
    }
    return t.record(std::move(y), [a_id, b_id, n, ca, cb, plane](Tape<T>& tp, int out) {
        const Tensor<T>& gy = tp.grad(out);
        Tensor<T>& ga = tp.grad(a_id);
        Tensor<T>& gb = tp.grad(b_id);
        for (int bn = 0; bn < n; ++bn) {
            const T* src = gy.data.data() + (static_cast<std::int64_t>(bn) * (ca + cb)) * plane;
            T* da = ga.data.data() + static_cast<std::int64_t>(bn) * ca * plane;
            for (std::int64_t i = 0; i < ca * plane; ++i) da[i] += src[i];
            T* db = gb.data.data() + static_cast<std::int64_t>(bn) * cb * plane;
            const T* srcb = src + ca * plane;
            for (std::int64_t i = 0; i < cb * plane; ++i) db[i] += srcb[i];
        }
    });
}

// Elementwise mul/add. b may either match a exactly or be [N,C] broadcast
// over the spatial dims of a [N,C,H,W] (the SE channel-scaling case).
template <typename T>
int elementwise(Tape<T>& t, int a_id, int b_id, EwKind kind) {
    const Tensor<T>& a = t.val(a_id);
    const Tensor<T>& b = t.val(b_id);
    const bool broadcast = !a.same_shape(b);
    if (broadcast) {
        if (!(a.rank() == 4 && b.rank() == 2 && a.dim(0) == b.dim(0) && a.dim(1) == b.dim(1))) {
            throw ShapeError("elementwise incompatible shapes: " + shape_str(a.shape) + " vs " +
                             shape_str(b.shape));
        }
    }
    Tensor<T> y(a.shape);
    if (!broadcast) {
#pragma omp parallel for schedule(static)
        for (std::int64_t i = 0; i < static_cast<std::int64_t>(a.data.size()); ++i) {
            const auto idx = static_cast<std::size_t>(i);
            y.data[idx] = (kind == EwKind::kMul) ? a.data[idx] * b.data[idx]
                                                 : a.data[idx] + b.data[idx];
        }
    } else {
        const int n = a.dim(0), c = a.dim(1);
        const std::int64_t plane = static_cast<std::int64_t>(a.dim(2)) * a.dim(3);
        for (int bn = 0; bn < n; ++bn)
            for (int ch = 0; ch < c; ++ch) {
                const T bv = b.at2(bn, ch);
                const T* src = a.data.data() + (static_cast<std::int64_t>(bn) * c + ch) * plane;
                T* dst = y.data.data() + (static_cast<std::int64_t>(bn) * c + ch) * plane;
                for (std::int64_t i = 0; i < plane; ++i)
                    dst[i] = (kind == EwKind::kMul) ? src[i] * bv : src[i] + bv;
            }
    }
    return t.record(std::move(y), [a_id, b_id, kind, broadcast](Tape<T>& tp, int out) {
        const Tensor<T>& gy = tp.grad(out);
        const Tensor<T>& av = tp.val(a_id);
        const Tensor<T>& bv = tp.val(b_id);
        Tensor<T>& ga = tp.grad(a_id);
        Tensor<T>& gb = tp.grad(b_id);
        if (!broadcast) {
            for (std::size_t i = 0; i < gy.data.size(); ++i) {
                if (kind == EwKind::kMul) {
                    ga.data[i] += gy.data[i] * bv.data[i];
                    gb.data[i] += gy.data[i] * av.data[i];
                } else {
                    ga.data[i] += gy.data[i];
                    gb.data[i] += gy.data[i];
                }
            }
        } else {
            const int n = av.dim(0), c = av.dim(1);
            const std::int64_t plane = static_cast<std::int64_t>(av.dim(2)) * av.dim(3);
            for (int bn = 0; bn < n; ++bn)
                for (int ch = 0; ch < c; ++ch) {
                    const std::int64_t base = (static_cast<std::int64_t>(bn) * c + ch) * plane;
                    T accb = T(0);
                    for (std::int64_t i = 0; i < plane; ++i) {
                        const T g = gy.data[static_cast<std::size_t>(base + i)];
                        if (kind == EwKind::kMul) {
                            ga.data[static_cast<std::size_t>(base + i)] += g * bv.at2(bn, ch);
                            accb += g * av.data[static_cast<std::size_t>(base + i)];
                        } else {
                            ga.data[static_cast<std::size_t>(base + i)] += g;
                            accb += g;
                        }
                    }
                    gb.at2(bn, ch) += accb;
                }
        }
    });
}

// Inverted dropout: eval mode is the identity, train mode zeroes with
// probability `rate` and scales survivors by 1/(1-rate).
template <typename T>
int dropout(Tape<T>& t, int x_id, double rate, Mode mode, RngState& rng) {
    if (rate < 0.0 || rate >= 1.0) {
        throw ParamError("dropout rate must be in [0,1), got " + std::to_string(rate));
    }
    const Tensor<T>& x = t.val(x_id);
    if (mode == Mode::kEval || rate == 0.0) {
        Tensor<T> y = x;
        return t.record(std::move(y), [x_id](Tape<T>& tp, int out) {
            const Tensor<T>& gy = tp.grad(out);
            Tensor<T>& gx = tp.grad(x_id);
            for (std::size_t i = 0; i < gx.data.size(); ++i) gx.data[i] += gy.data[i];
        });
    }
    const T scale = static_cast<T>(1.0 / (1.0 - rate));
    std::vector<T> mask(x.data.size());
    for (std::size_t i = 0; i < mask.size(); ++i) {
        mask[i] = (rng.uniform() < rate) ? T(0) : scale;
    }
    Tensor<T> y(x.shape);
    for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] = x.data[i] * mask[i];
    return t.record(std::move(y), [x_id, mask = std::move(mask)](Tape<T>& tp, int out) {
        const Tensor<T>& gy = tp.grad(out);
        Tensor<T>& gx = tp.grad(x_id);
        for (std::size_t i = 0; i < gx.data.size(); ++i) gx.data[i] += gy.data[i] * mask[i];
    });
}

template <typename T>
int sum(Tape<T>& t, int x_id) {
    const Tensor<T>& x = t.val(x_id);
    double acc = 0.0;
    for (T v : x.data) acc += static_cast<double>(v);
    return t.record(Tensor<T>::scalar(static_cast<T>(acc)), [x_id](Tape<T>& tp, int out) {
        const T g = tp.grad(out).data[0];
        Tensor<T>& gx = tp.grad(x_id);
        for (auto& v : gx.data) v += g;
    });
}

// Smoothed soft dice loss over the whole batch (single ratio):
// 1 - (2*sum(p*g) + smooth) / (sum(p) + sum(g) + smooth).
template <typename T>
int dice_loss(Tape<T>& t, int prob_id, const Tensor<T>& gt, T smooth) {
    const Tensor<T>& p = t.val(prob_id);
    if (!p.same_shape(gt)) {
        throw ShapeError("dice_loss shape mismatch: " + shape_str(p.shape) + " vs " +
                         shape_str(gt.shape));
    }
    if (smooth <= T(0)) throw ParamError("dice_loss smooth must be > 0");
    for (T v : gt.data) {
        if (v != T(0) && v != T(1)) {
            throw ParamError("dice_loss ground truth must be binary");
        }
    }
    double inter = 0.0, psum = 0.0, gsum = 0.0;
    for (std::size_t i = 0; i < p.data.size(); ++i) {
        inter += static_cast<double>(p.data[i]) * static_cast<double>(gt.data[i]);
        psum += static_cast<double>(p.data[i]);
        gsum += static_cast<double>(gt.data[i]);
    }
    const double num = 2.0 * inter + static_cast<double>(smooth);
    const double den = psum + gsum + static_cast<double>(smooth);
    const double loss = 1.0 - num / den;
    return t.record(Tensor<T>::scalar(static_cast<T>(loss)),
                    [prob_id, gt, num, den](Tape<T>& tp, int out) {
                        const double g = static_cast<double>(tp.grad(out).data[0]);
                        Tensor<T>& gp = tp.grad(prob_id);
                        const double inv_den2 = 1.0 / (den * den);
                        for (std::size_t i = 0; i < gp.data.size(); ++i) {
                            const double gi = static_cast<double>(gt.data[i]);
                            gp.data[i] += static_cast<T>(g * (num - 2.0 * gi * den) * inv_den2);
                        }
                    });
}

}  // namespace ops
}  // namespace focusnet
