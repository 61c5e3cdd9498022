#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <string>

#include "focusnet/tape.hpp"
#include "focusnet/tensor.hpp"

namespace focusnet {

// Adam with bias correction. Defaults are the optimizer's standard constants;
// "default learning rate" is 1e-3.
template <typename T>
struct AdamState {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long long t = 0;
    std::map<std::string, Tensor<T>> m;
    std::map<std::string, Tensor<T>> v;
};

template <typename T>
void adam_step(std::map<std::string, Tensor<T>>& params, const GradientSet<T>& grads,
               AdamState<T>& state) {
    state.t += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
    for (auto& [name, p] : params) {
        auto git = grads.find(name);
        if (git == grads.end()) {
            throw ParamError("adam_step: missing gradient for parameter " + name);
        }
        const Tensor<T>& g = git->second;
        if (!g.same_shape(p)) {
            throw ShapeError("adam_step: gradient shape " + shape_str(g.shape) +
                             " does not match parameter " + name + " " + shape_str(p.shape));
        }
        auto& m = state.m[name];
        auto& v = state.v[name];
        if (m.data.empty()) m = Tensor<T>::zeros(p.shape);
        if (v.data.empty()) v = Tensor<T>::zeros(p.shape);
        for (std::size_t i = 0; i < p.data.size(); ++i) {
            const double gi = static_cast<double>(g.data[i]);
            const double mi = state.beta1 * static_cast<double>(m.data[i]) + (1.0 - state.beta1) * gi;
            const double vi =
                state.beta2 * static_cast<double>(v.data[i]) + (1.0 - state.beta2) * gi * gi;
            m.data[i] = static_cast<T>(mi);
            v.data[i] = static_cast<T>(vi);
            const double mhat = mi / bc1;
            const double vhat = vi / bc2;
            p.data[i] = static_cast<T>(static_cast<double>(p.data[i]) -
                                       state.lr * mhat / (std::sqrt(vhat) + state.eps));
        }
    }
}

// Reduce-on-plateau: halve the rate after `patience` consecutive epochs
// without the validation loss improving on the best by more than min_delta.
// Improvement is strict (best - loss > min_delta); the patience counter
// resets after a reduction.
struct PlateauState {
    double best = std::numeric_limits<double>::infinity();
    int counter = 0;
    double factor = 0.5;
    int patience = 5;
    double min_delta = 0.001;
    double lr = 1e-3;
};

inline bool plateau_update(PlateauState& s, double val_loss) {
    if (s.best - val_loss > s.min_delta) {
        s.best = val_loss;
        s.counter = 0;
        return false;
    }
    s.counter += 1;
    if (s.counter >= s.patience) {
        s.lr *= s.factor;
        s.counter = 0;
        return true;
    }
    return false;
}

}  // namespace focusnet
