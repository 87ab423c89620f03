#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>

namespace boin {

struct NelderMeadOptions {
    int max_evals = 2000;
    double f_tol = 1e-12;  ///< stop when f spread over the simplex falls below this
    double x_tol = 1e-8;   ///< ... and the simplex diameter falls below this
    double initial_step = 0.5;
};

template <std::size_t N>
struct NelderMeadResult {
    std::array<double, N> x{};
    double value = 0.0;
    int evaluations = 0;
    bool converged = false;
};

/// Derivative-free simplex minimisation with the standard coefficients
/// (reflection 1, expansion 2, contraction 1/2, shrink 1/2).
template <std::size_t N, class F>
NelderMeadResult<N> nelder_mead(F&& f, const std::array<double, N>& start, const NelderMeadOptions& opt = {})
{
    using Point = std::array<double, N>;
    std::array<Point, N + 1> simplex;
    std::array<double, N + 1> values;
    int evals = 0;
    auto eval = [&](const Point& p) {
        ++evals;
        const double v = f(p);
        return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
    };

    simplex[0] = start;
    for (std::size_t i = 0; i < N; ++i) {
        simplex[i + 1] = start;
        simplex[i + 1][i] += opt.initial_step;
    }
    for (std::size_t i = 0; i <= N; ++i) values[i] = eval(simplex[i]);

    std::array<std::size_t, N + 1> order;
    bool converged = false;
    while (evals < opt.max_evals) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
        const std::size_t best = order[0];
        const std::size_t worst = order[N];
        const std::size_t second = order[N - 1];

        double diam = 0.0;
        for (std::size_t i = 1; i <= N; ++i)
            for (std::size_t k = 0; k < N; ++k)
                diam = std::max(diam, std::abs(simplex[order[i]][k] - simplex[best][k]));
        if (std::abs(values[worst] - values[best]) <= opt.f_tol && diam <= opt.x_tol) {
            converged = true;
            break;
        }

        Point centroid{};
        for (std::size_t i = 0; i < N; ++i)
            for (std::size_t k = 0; k < N; ++k) centroid[k] += simplex[order[i]][k] / N;

        auto along = [&](double t) {
            Point p;
            for (std::size_t k = 0; k < N; ++k) p[k] = centroid[k] + t * (simplex[worst][k] - centroid[k]);
            return p;
        };

        const Point reflected = along(-1.0);
        const double fr = eval(reflected);
        if (fr < values[best]) {
            const Point expanded = along(-2.0);
            const double fe = eval(expanded);
            if (fe < fr) {
                simplex[worst] = expanded;
                values[worst] = fe;
            } else {
                simplex[worst] = reflected;
                values[worst] = fr;
            }
            continue;
        }
        if (fr < values[second]) {
            simplex[worst] = reflected;
            values[worst] = fr;
            continue;
        }
        const bool outside = fr < values[worst];
        const Point contracted = along(outside ? -0.5 : 0.5);
        const double fc = eval(contracted);
        if (fc < (outside ? fr : values[worst])) {
            simplex[worst] = contracted;
            values[worst] = fc;
            continue;
        }
        for (std::size_t i = 1; i <= N; ++i) {
            auto& p = simplex[order[i]];
            for (std::size_t k = 0; k < N; ++k) p[k] = simplex[best][k] + 0.5 * (p[k] - simplex[best][k]);
            values[order[i]] = eval(p);
        }
    }

    const auto it = std::min_element(values.begin(), values.end());
    NelderMeadResult<N> res;
    res.x = simplex[static_cast<std::size_t>(it - values.begin())];
    res.value = *it;
    res.evaluations = evals;
    res.converged = converged;
    return res;
}

} // namespace boin
