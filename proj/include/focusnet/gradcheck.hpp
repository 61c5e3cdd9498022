#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "focusnet/tensor.hpp"

namespace focusnet {

// Central-difference gradient verification in 64-bit. `f` must be a
// deterministic scalar function of the parameter list (dropout in eval mode
// or with a fixed mask). Returns the max over all coordinates of
// |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
inline double finite_diff_check(const std::function<double(const std::vector<TensorD>&)>& f,
                                std::vector<TensorD> params,
                                const std::vector<TensorD>& analytic, double step = 1e-4) {
    double worst = 0.0;
    for (std::size_t p = 0; p < params.size(); ++p) {
        for (std::size_t i = 0; i < params[p].data.size(); ++i) {
            const double saved = params[p].data[i];
            params[p].data[i] = saved + step;
            const double up = f(params);
            params[p].data[i] = saved - step;
            const double down = f(params);
            params[p].data[i] = saved;
            const double numeric = (up - down) / (2.0 * step);
            const double a = analytic[p].data[i];
            const double rel = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

}  // namespace focusnet
