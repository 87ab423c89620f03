#pragma once

// Conventional terminal estimator: Beta(0.05, 0.05) smoothed rates, weighted
// isotonic regression by pooling adjacent violators, and closest-to-target
// selection.

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "boin/design.hpp"
#include "boin/error.hpp"
#include "boin/trial.hpp"

namespace boin {

/// Offset added as j * 1e-10 so pooled doses keep a strict order.
inline constexpr double pava_tie_epsilon = 1.0e-10;

inline double posterior_point(int n, int m) { return (m + 0.05) / (n + 0.1); }

inline double posterior_var(int n, int m)
{
    const double nn = n + 0.1;
    return (m + 0.05) * (n - m + 0.05) / (nn * nn * (nn + 1.0));
}

/// Weighted least-squares fit of @p y under a nondecreasing constraint.
///
/// Blocks are pooled while adjacent block means violate the order; a block's
/// value is the weighted mean of its members, with weights fixed at their input
/// values.
template <class Real = double>
std::vector<Real> pava_fit(std::span<const Real> y, std::span<const Real> w)
{
    if (y.size() != w.size()) throw InvalidInput("pava_fit: y and w differ in length");
    for (Real wi : w)
        if (!(wi > 0)) throw InvalidInput("pava_fit: weights must be positive");

    struct Block {
        Real value;
        Real weight;
        std::size_t count;
    };
    std::vector<Block> blocks;
    blocks.reserve(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        blocks.push_back({y[i], w[i], 1});
        while (blocks.size() > 1 && blocks[blocks.size() - 2].value > blocks.back().value) {
            Block top = blocks.back();
            blocks.pop_back();
            Block& prev = blocks.back();
            const Real wsum = prev.weight + top.weight;
            prev.value = (prev.value * prev.weight + top.value * top.weight) / wsum;
            prev.weight = wsum;
            prev.count += top.count;
        }
    }
    std::vector<Real> z;
    z.reserve(y.size());
    for (const auto& b : blocks) z.insert(z.end(), b.count, b.value);
    return z;
}

inline std::vector<double> pava_fit(const std::vector<double>& y, const std::vector<double>& w)
{
    return pava_fit<double>(std::span<const double>(y), std::span<const double>(w));
}

/// Per-dose quantities of the isotonic estimator. Entries of inadmissible doses
/// are NaN.
struct IsotonicFit {
    std::vector<double> y_hat;
    std::vector<double> var;
    std::vector<double> p_hat;
    std::vector<bool> admissible;
};

inline IsotonicFit fit_isotonic(const TrialState& state, const TrialDesign& design)
{
    const std::size_t J = state.num_doses();
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    IsotonicFit fit{std::vector<double>(J, nan), std::vector<double>(J, nan), std::vector<double>(J, nan),
                    final_admissible(state, design)};

    std::vector<double> y;
    std::vector<double> w;
    std::vector<std::size_t> idx;
    for (std::size_t j = 0; j < J; ++j) {
        if (state.n[j] > 0) {
            fit.y_hat[j] = posterior_point(state.n[j], state.m[j]);
            fit.var[j] = posterior_var(state.n[j], state.m[j]);
        }
        if (!fit.admissible[j]) continue;
        y.push_back(fit.y_hat[j]);
        w.push_back(1.0 / fit.var[j]);
        idx.push_back(j);
    }
    const auto z = pava_fit(y, w);
    for (std::size_t k = 0; k < idx.size(); ++k)
        fit.p_hat[idx[k]] = z[k] + static_cast<double>(k + 1) * pava_tie_epsilon;
    return fit;
}

inline std::optional<std::size_t> select_mtd_pava(const TrialState& state, const TrialDesign& design)
{
    const auto fit = fit_isotonic(state, design);
    return closest_to_target(fit.p_hat, fit.admissible, design.phi);
}

} // namespace boin
