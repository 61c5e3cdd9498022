#pragma once

#include <functional>
#include <vector>

#include "focusnet/gradcheck.hpp"
#include "focusnet/rng.hpp"
#include "focusnet/tape.hpp"
#include "focusnet/tensor.hpp"

namespace focusnet::testutil {

inline TensorD random_tensor(Shape shape, RngState& rng, double lo = -1.0, double hi = 1.0) {
    TensorD t(std::move(shape));
    for (auto& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

// Random values kept at least `margin` away from zero (ReLU kinks).
inline TensorD random_tensor_away_from_zero(Shape shape, RngState& rng, double margin = 1e-3) {
    TensorD t(std::move(shape));
    for (auto& v : t.data) {
        double x;
        do {
            x = rng.uniform(-1.0, 1.0);
        } while (std::abs(x) < margin);
        v = x;
    }
    return t;
}

inline TensorF random_tensor_f(Shape shape, RngState& rng, double lo = -1.0, double hi = 1.0) {
    TensorF t(std::move(shape));
    for (auto& v : t.data) v = static_cast<float>(rng.uniform(lo, hi));
    return t;
}

// Builds a scalar loss from parameter leaves; must be deterministic and
// side-effect free so it can be re-evaluated under perturbation.
using GraphFn = std::function<int(Tape<double>&, const std::vector<int>&)>;

inline double check_gradient(const GraphFn& build_graph, const std::vector<TensorD>& params,
                             double step = 1e-4) {
    Tape<double> tape;
    std::vector<int> ids;
    for (const auto& p : params) ids.push_back(tape.leaf(p));
    const int loss = build_graph(tape, ids);
    tape.backward(loss);
    std::vector<TensorD> analytic;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        analytic.push_back(tape.has_grad(ids[i]) ? tape.grad(ids[i])
                                                 : TensorD::zeros(params[i].shape));
    }
    auto f = [&](const std::vector<TensorD>& ps) {
        Tape<double> t2;
        std::vector<int> ids2;
        for (const auto& p : ps) ids2.push_back(t2.leaf(p));
        return t2.val(build_graph(t2, ids2)).data[0];
    };
    return finite_diff_check(f, params, analytic, step);
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace focusnet::testutil
