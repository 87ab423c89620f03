#pragma once

// Prior construction for the dose-response model.
//
// Target quantiles come from minimally informative unimodal Beta priors: two
// anchor statements at the lowest and highest doses fix the end-point Betas,
// their medians fix a curve through the model, and the curve's medians fix the
// Betas at interior doses. The coefficient hyperparameters are then fitted to
// those quantiles by squared-error quantile matching, with the model-implied
// quantiles computed from one fixed normal sample (common random numbers).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "boin/design.hpp"
#include "boin/drm.hpp"
#include "boin/error.hpp"
#include "boin/link.hpp"
#include "boin/nelder_mead.hpp"
#include "boin/parallel.hpp"
#include "boin/rng.hpp"

namespace boin {

/// Beta(a, b) restricted to the family where one shape equals one.
struct BetaSpec {
    double a = 1.0;
    double b = 1.0;

    friend bool operator==(const BetaSpec&, const BetaSpec&) = default;
};

/// Least-informative unimodal Beta with P(pi <= q) = p.
inline BetaSpec min_info_beta(double p, double q)
{
    if (!(p > 0.0 && p < 1.0) || !(q > 0.0 && q < 1.0)) throw InvalidInput("min_info_beta: p and q must lie in (0, 1)");
    if (q > p) return {std::log(p) / std::log(q), 1.0};
    if (q < p) return {1.0, std::log1p(-p) / std::log1p(-q)};
    return {1.0, 1.0};
}

inline double beta_quantile(const BetaSpec& s, double p)
{
    if (!(p >= 0.0 && p <= 1.0)) throw InvalidInput("beta_quantile: level must lie in [0, 1]");
    if (s.b == 1.0) return std::pow(p, 1.0 / s.a);
    if (s.a == 1.0) return -std::expm1(std::log1p(-p) / s.b);
    throw UnsupportedFamily("closed-form quantile needs a == 1 or b == 1");
}

inline double beta_median(const BetaSpec& s) { return beta_quantile(s, 0.5); }

/// Coefficients (beta0, beta1) whose curve passes through mu1 at the lowest dose
/// and muJ at the highest dose.
inline std::pair<double, double> anchor_coefficients(double mu1, double muJ, const DoseGrid& grid, Link link)
{
    if (!(mu1 > 0.0 && muJ < 1.0)) throw InvalidInput("anchor medians must lie in (0, 1)");
    if (!(mu1 < muJ)) throw InvalidInput("anchor medians must satisfy mu1 < muJ (slope exp(beta1) > 0)");
    const double d1 = grid.doses().front();
    const double dJ = grid.doses().back();
    const double gJ = link_forward(link, muJ);
    const double slope = (gJ - link_forward(link, mu1)) / std::log(dJ / d1);
    const double beta0 = gJ - slope * std::log(dJ / grid.ref_dose());
    return {beta0, std::log(slope)};
}

struct QuantileTargets {
    std::vector<double> levels;              ///< p_1 < ... < p_K
    std::vector<std::vector<double>> values; ///< values[j][k], one row per dose

    void validate() const
    {
        for (std::size_t k = 0; k < levels.size(); ++k) {
            if (!(levels[k] > 0.0 && levels[k] < 1.0)) throw InvalidInput("quantile levels must lie in (0, 1)");
            if (k > 0 && !(levels[k] > levels[k - 1])) throw InvalidInput("quantile levels must be increasing");
        }
        for (const auto& row : values) {
            if (row.size() != levels.size()) throw InvalidInput("quantile row length differs from level count");
            for (std::size_t k = 0; k < row.size(); ++k) {
                if (!(row[k] > 0.0 && row[k] < 1.0)) throw InvalidInput("target quantiles must lie in (0, 1)");
                if (k > 0 && row[k] < row[k - 1]) throw InvalidInput("target quantile rows must be nondecreasing");
            }
        }
    }
};

inline std::vector<double> default_levels() { return {0.025, 0.5, 0.975}; }

struct ElicitationInput {
    double p1 = 0.05;  ///< P{pi(d_1) > phi}
    double pJ = 0.21;  ///< P{pi(d_J) <= phi}
    double phi = 0.3;
    DoseGrid grid = standard_grid();
    Link link = Link::Logit;
    std::vector<double> levels = default_levels();

    void validate() const
    {
        if (!(p1 > 0.0 && p1 < 1.0) || !(pJ > 0.0 && pJ < 1.0)) throw InvalidInput("p1 and pJ must lie in (0, 1)");
        if (p1 > 0.95) throw InvalidInput("p1 must not exceed 0.95 (dose-elimination cutoff)");
        if (pJ < 0.05) throw InvalidInput("pJ must be at least 0.05 (dose-elimination cutoff)");
        if (!(phi > 0.0 && phi < 1.0)) throw InvalidInput("phi must lie in (0, 1)");
    }
};

/// Every intermediate of the deterministic part of the elicitation, for audit.
struct ElicitationTrace {
    BetaSpec lowest;
    BetaSpec highest;
    double mu1 = 0.0;
    double muJ = 0.0;
    double anchor_beta0 = 0.0;
    double anchor_beta1 = 0.0;
    std::vector<double> medians;  ///< per dose
    std::vector<BetaSpec> specs;  ///< per dose
    QuantileTargets targets;
};

inline ElicitationTrace elicit_trace(const ElicitationInput& in)
{
    in.validate();
    ElicitationTrace t;
    const std::size_t J = in.grid.size();
    t.lowest = min_info_beta(1.0 - in.p1, in.phi);
    t.highest = min_info_beta(in.pJ, in.phi);
    t.mu1 = beta_median(t.lowest);
    t.muJ = beta_median(t.highest);
    std::tie(t.anchor_beta0, t.anchor_beta1) = anchor_coefficients(t.mu1, t.muJ, in.grid, in.link);

    t.medians.resize(J);
    t.specs.resize(J);
    const auto x = in.grid.log_relative();
    for (std::size_t j = 0; j < J; ++j) {
        if (j == 0) {
            t.specs[j] = t.lowest;
            t.medians[j] = t.mu1;
        } else if (j == J - 1) {
            t.specs[j] = t.highest;
            t.medians[j] = t.muJ;
        } else {
            t.medians[j] = link_inverse(in.link, t.anchor_beta0 + std::exp(t.anchor_beta1) * x[j]);
            t.specs[j] = min_info_beta(0.5, t.medians[j]);
        }
    }
    t.targets.levels = in.levels;
    t.targets.values.assign(J, std::vector<double>(in.levels.size()));
    for (std::size_t j = 0; j < J; ++j)
        for (std::size_t k = 0; k < in.levels.size(); ++k)
            t.targets.values[j][k] = beta_quantile(t.specs[j], in.levels[k]);
    t.targets.validate();
    return t;
}

inline QuantileTargets build_targets(const ElicitationInput& in) { return elicit_trace(in).targets; }

/// Fixed standard-normal pairs (z0, z1) reused by every loss evaluation.
struct CommonRandomNumbers {
    std::vector<double> z0;
    std::vector<double> z1;

    static CommonRandomNumbers make(std::size_t size, std::uint64_t seed)
    {
        CommonRandomNumbers c;
        c.z0.resize(size);
        c.z1.resize(size);
        Rng rng(stream_seed(seed, fnv1a("crn"), 0));
        for (std::size_t i = 0; i < size; ++i) {
            c.z0[i] = rng.normal();
            c.z1[i] = rng.normal();
        }
        return c;
    }

    [[nodiscard]] std::size_t size() const noexcept { return z0.size(); }
};

namespace detail {

// Linear-interpolation empirical quantiles of v at increasing levels. Reorders v.
inline void empirical_quantiles(std::vector<double>& v, const std::vector<double>& levels, double* out)
{
    const std::size_t n = v.size();
    std::size_t from = 0;
    for (std::size_t k = 0; k < levels.size(); ++k) {
        const double h = (static_cast<double>(n) - 1.0) * levels[k];
        const auto lo = static_cast<std::size_t>(std::floor(h));
        const double frac = h - static_cast<double>(lo);
        std::nth_element(v.begin() + static_cast<std::ptrdiff_t>(from), v.begin() + static_cast<std::ptrdiff_t>(lo),
                         v.end());
        double x = v[lo];
        if (frac > 0.0 && lo + 1 < n) {
            const double next = *std::min_element(v.begin() + static_cast<std::ptrdiff_t>(lo + 1), v.end());
            x += frac * (next - x);
        }
        out[k] = x;
        from = lo;
    }
}

} // namespace detail

/// Per-dose quantiles of pi(d_j) implied by the coefficient prior, from the CRN
/// sample. Quantiles are taken on the linear-predictor scale and mapped through
/// g^{-1}, which is the same as taking them on the probability scale since
/// g^{-1} is increasing.
inline std::vector<std::vector<double>> implied_quantiles(const CoefficientPrior& prior, const DoseGrid& grid,
                                                          Link link, const std::vector<double>& levels,
                                                          const CommonRandomNumbers& crn)
{
    const std::size_t N = crn.size();
    if (N < 2) throw InvalidInput("CRN sample too small");
    const std::size_t J = grid.size();
    const double sd0 = std::sqrt(prior.var0);
    const double sd1 = std::sqrt(prior.var1);
    std::vector<double> slope(N);
    for (std::size_t i = 0; i < N; ++i) slope[i] = std::exp(prior.mean1 + sd1 * crn.z1[i]);
    const auto x = grid.log_relative();
    std::vector<std::vector<double>> out(J, std::vector<double>(levels.size()));
    std::vector<double> eta(N);
    for (std::size_t j = 0; j < J; ++j) {
        for (std::size_t i = 0; i < N; ++i) eta[i] = prior.mean0 + sd0 * crn.z0[i] + slope[i] * x[j];
        detail::empirical_quantiles(eta, levels, out[j].data());
        for (double& q : out[j]) q = link_inverse(link, q);
    }
    return out;
}

/// Squared-error discrepancy between target and model-implied quantiles.
inline double quantile_loss(const QuantileTargets& targets, const std::vector<std::vector<double>>& implied)
{
    double c = 0.0;
    for (std::size_t j = 0; j < targets.values.size(); ++j)
        for (std::size_t k = 0; k < targets.levels.size(); ++k) {
            const double d = targets.values[j][k] - implied[j][k];
            c += d * d;
        }
    return c;
}

inline double prior_loss(const QuantileTargets& targets, const CoefficientPrior& prior, const DoseGrid& grid,
                         Link link, const CommonRandomNumbers& crn)
{
    return quantile_loss(targets, implied_quantiles(prior, grid, link, targets.levels, crn));
}

struct PriorOptimizerOptions {
    double variance_floor = 0.5;
    double mean_bound = 10.0;
    int restarts = 20;
    std::size_t crn_size = 10000;
    std::uint64_t seed = 2025;
    unsigned threads = 1;
    NelderMeadOptions nm{};
};

struct PriorFit {
    CoefficientPrior prior;
    double loss = 0.0;
    int evaluations = 0;
    std::vector<double> restart_losses;
    std::vector<std::vector<double>> achieved; ///< implied quantiles at the optimum
};

/// Squared-error quantile matching over (gamma0, gamma1, log sigma0^2, log sigma1^2)
/// by Nelder-Mead from several starting points. Variances below the floor are
/// clamped to it; means outside [-mean_bound, mean_bound] are infeasible.
inline PriorFit optimize_prior(const QuantileTargets& targets, const DoseGrid& grid, Link link,
                               const CommonRandomNumbers& crn, const PriorOptimizerOptions& opt = {})
{
    targets.validate();
    if (targets.values.size() != grid.size()) throw InvalidInput("targets have wrong number of doses");
    if (opt.restarts < 1) throw InvalidInput("need at least one restart");
    if (!(opt.variance_floor > 0.0)) throw InvalidInput("variance floor must be positive");

    using Theta = std::array<double, 4>;
    auto to_prior = [&](const Theta& t) {
        return CoefficientPrior{t[0], std::max(opt.variance_floor, std::exp(t[2])), t[1],
                                std::max(opt.variance_floor, std::exp(t[3]))};
    };
    auto objective = [&](const Theta& t) {
        if (std::abs(t[0]) > opt.mean_bound || std::abs(t[1]) > opt.mean_bound) return std::numeric_limits<double>::infinity();
        if (std::abs(t[2]) > 20.0 || std::abs(t[3]) > 20.0) return std::numeric_limits<double>::infinity();
        return prior_loss(targets, to_prior(t), grid, link, crn);
    };

    // Start 0 is the anchor curve with unit variances; the rest are jittered around it.
    double anchor0 = 0.0;
    double anchor1 = 0.0;
    {
        const std::size_t J = grid.size();
        const std::size_t mid = targets.levels.size() / 2;
        const double mu1 = std::clamp(targets.values[0][mid], 1e-6, 1.0 - 1e-6);
        const double muJ = std::clamp(targets.values[J - 1][mid], 1e-6, 1.0 - 1e-6);
        if (mu1 < muJ) std::tie(anchor0, anchor1) = anchor_coefficients(mu1, muJ, grid, link);
    }
    std::vector<Theta> starts(static_cast<std::size_t>(opt.restarts));
    Rng rng(stream_seed(opt.seed, fnv1a("restarts"), 0));
    for (std::size_t r = 0; r < starts.size(); ++r) {
        if (r == 0) {
            starts[r] = {anchor0, anchor1, 0.0, 0.0};
        } else {
            starts[r] = {anchor0 + 4.0 * rng.uniform() - 2.0, anchor1 + 3.0 * rng.uniform() - 1.5,
                         std::log(opt.variance_floor) + 2.5 * rng.uniform(),
                         std::log(opt.variance_floor) + 2.5 * rng.uniform()};
        }
    }

    struct RunResult {
        Theta best{};
        double best_value = std::numeric_limits<double>::infinity();
        double start_value = std::numeric_limits<double>::infinity();
        int evals = 0;
    };
    std::vector<RunResult> runs(starts.size());
    parallel_for(starts.size(), opt.threads, [&](std::size_t r) {
        RunResult& rr = runs[r];
        auto tracked = [&](const Theta& t) {
            const double v = objective(t);
            if (v < rr.best_value) {
                rr.best_value = v;
                rr.best = t;
            }
            return v;
        };
        rr.start_value = objective(starts[r]);
        auto res = nelder_mead<4>(tracked, starts[r], opt.nm);
        rr.evals = res.evaluations + 1;
        // One polishing pass from the best vertex with a fresh simplex.
        NelderMeadOptions polish = opt.nm;
        polish.initial_step = 0.1;
        res = nelder_mead<4>(tracked, rr.best, polish);
        rr.evals += res.evaluations;
    });

    PriorFit fit;
    bool improved = false;
    std::size_t best = 0;
    for (std::size_t r = 0; r < runs.size(); ++r) {
        fit.evaluations += runs[r].evals;
        fit.restart_losses.push_back(runs[r].best_value);
        if (runs[r].best_value < runs[r].start_value) improved = true;
        if (runs[r].best_value < runs[best].best_value) best = r;
    }
    if (!improved || !std::isfinite(runs[best].best_value)) {
        throw OptimizationFailure("prior optimisation: no restart improved on its starting loss (best loss "
                                  + std::to_string(runs[best].best_value) + ")");
    }
    fit.prior = to_prior(runs[best].best);
    fit.loss = runs[best].best_value;
    fit.achieved = implied_quantiles(fit.prior, grid, link, targets.levels, crn);
    return fit;
}

inline PriorFit optimize_prior(const QuantileTargets& targets, const DoseGrid& grid, Link link,
                               const PriorOptimizerOptions& opt = {})
{
    return optimize_prior(targets, grid, link, CommonRandomNumbers::make(opt.crn_size, opt.seed), opt);
}

/// Full pipeline: targets from (p1, pJ) and the fitted coefficient prior.
struct ElicitedPrior {
    ElicitationTrace trace;
    PriorFit fit;
};

inline ElicitedPrior elicit_prior(const ElicitationInput& in, const PriorOptimizerOptions& opt = {})
{
    ElicitedPrior out;
    out.trace = elicit_trace(in);
    out.fit = optimize_prior(out.trace.targets, in.grid, in.link, opt);
    return out;
}

} // namespace boin
