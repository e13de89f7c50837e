#pragma once

// Central-difference gradient checking against the tape's analytic gradients.

#include <cmath>
#include <functional>
#include <vector>

namespace evslt {

// eval(nullptr) -> loss only; eval(&grads) -> loss plus analytic gradients,
// one vector per checked parameter, ordered like `params`.
using GradProbe = std::function<double(std::vector<std::vector<double>>* grads_out)>;

inline double grad_check(const GradProbe& eval, const std::vector<std::vector<double>*>& params,
                         double eps = 1e-4) {
    std::vector<std::vector<double>> analytic;
    eval(&analytic);
    double worst = 0.0;
    for (size_t p = 0; p < params.size(); ++p) {
        auto& w = *params[p];
        for (size_t j = 0; j < w.size(); ++j) {
            const double keep = w[j];
            w[j] = keep + eps;
            const double up = eval(nullptr);
            w[j] = keep - eps;
            const double dn = eval(nullptr);
            w[j] = keep;
            const double numeric = (up - dn) / (2.0 * eps);
            const double ga = analytic[p][j];
            const double err = std::abs(ga - numeric) / std::max(1e-8, std::abs(ga) + std::abs(numeric));
            worst = std::max(worst, err);
        }
    }
    return worst;
}

}  // namespace evslt
