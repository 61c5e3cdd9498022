#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "focusnet/errors.hpp"

namespace focusnet {

using Shape = std::vector<int>;

inline std::int64_t shape_numel(const Shape& s) {
    std::int64_t n = 1;
    for (int d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << ",";
        os << s[i];
    }
    os << "]";
    return os.str();
}

// Dense row-major tensor. Image layout convention: N x C x H x W.
template <typename T>
struct Tensor {
    Shape shape;
    std::vector<T> data;

    Tensor() = default;

    explicit Tensor(Shape s) : shape(std::move(s)) {
        for (int d : shape) {
            if (d <= 0) throw ShapeError("non-positive dimension in shape " + shape_str(shape));
        }
        data.assign(static_cast<std::size_t>(shape_numel(shape)), T(0));
    }

    Tensor(Shape s, std::vector<T> values) : shape(std::move(s)), data(std::move(values)) {
        for (int d : shape) {
            if (d <= 0) throw ShapeError("non-positive dimension in shape " + shape_str(shape));
        }
        if (static_cast<std::int64_t>(data.size()) != shape_numel(shape)) {
            throw ShapeError("data length " + std::to_string(data.size()) +
                             " does not match shape " + shape_str(shape));
        }
    }

    static Tensor zeros(Shape s) { return Tensor(std::move(s)); }

    static Tensor full(Shape s, T v) {
        Tensor t(std::move(s));
        for (auto& x : t.data) x = v;
        return t;
    }

    static Tensor ones(Shape s) { return full(std::move(s), T(1)); }

    static Tensor scalar(T v) { return Tensor({1}, {v}); }

    std::int64_t size() const { return static_cast<std::int64_t>(data.size()); }
    int rank() const { return static_cast<int>(shape.size()); }
    int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    // 4-d accessors for the NCHW convention.
    T& at4(int n, int c, int h, int w) {
        return data[static_cast<std::size_t>(((static_cast<std::int64_t>(n) * shape[1] + c) * shape[2] + h) * shape[3] + w)];
    }
    T at4(int n, int c, int h, int w) const {
        return data[static_cast<std::size_t>(((static_cast<std::int64_t>(n) * shape[1] + c) * shape[2] + h) * shape[3] + w)];
    }

    T& at2(int i, int j) { return data[static_cast<std::size_t>(static_cast<std::int64_t>(i) * shape[1] + j)]; }
    T at2(int i, int j) const { return data[static_cast<std::size_t>(static_cast<std::int64_t>(i) * shape[1] + j)]; }

    T& at3(int c, int h, int w) {
        return data[static_cast<std::size_t>((static_cast<std::int64_t>(c) * shape[1] + h) * shape[2] + w)];
    }
    T at3(int c, int h, int w) const {
        return data[static_cast<std::size_t>((static_cast<std::int64_t>(c) * shape[1] + h) * shape[2] + w)];
    }

    bool all_finite() const {
        for (T v : data) {
            if (!std::isfinite(static_cast<double>(v))) return false;
        }
        return true;
    }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out;
        out.shape = shape;
        out.data.resize(data.size());
        for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
        return out;
    }
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace focusnet
