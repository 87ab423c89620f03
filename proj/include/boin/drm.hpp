#pragma once

// Bayesian binomial dose-response model
//
//     g(pi(d)) = beta0 + exp(beta1) * log(d / d*)
//
// with independent normal priors on (beta0, beta1). Posterior summaries come
// from a deterministic 2-D lattice (default) or an adaptive random-walk
// Metropolis chain; the two are cross-checked in the tests.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "boin/design.hpp"
#include "boin/error.hpp"
#include "boin/link.hpp"
#include "boin/rng.hpp"
#include "boin/trial.hpp"

namespace boin {

/// Hyperparameters eta = (gamma0, sigma0^2, gamma1, sigma1^2) of
/// beta0 ~ N(gamma0, sigma0^2), beta1 ~ N(gamma1, sigma1^2).
struct CoefficientPrior {
    double mean0 = 0.0;
    double var0 = 1.0;
    double mean1 = 0.0;
    double var1 = 1.0;

    void validate() const
    {
        if (!std::isfinite(mean0) || !std::isfinite(mean1))
            throw InvalidInput("prior means must be finite");
        if (!(var0 > 0.0) || !(var1 > 0.0) || !std::isfinite(var0) || !std::isfinite(var1))
            throw InvalidInput("prior variances must be positive and finite");
    }

    friend bool operator==(const CoefficientPrior&, const CoefficientPrior&) = default;
};

struct DoseResponseModel {
    Link link = Link::Logit;
    DoseGrid grid;
    CoefficientPrior prior;

    DoseResponseModel() = default;
    DoseResponseModel(Link l, DoseGrid g, CoefficientPrior p) : link(l), grid(std::move(g)), prior(p)
    {
        prior.validate();
    }
};

/// Per-dose cumulative counts (n_j patients, m_j DLTs).
struct DoseData {
    std::vector<int> n;
    std::vector<int> m;

    static DoseData empty(std::size_t J) { return {std::vector<int>(J, 0), std::vector<int>(J, 0)}; }
    static DoseData from(const TrialState& s) { return {s.n, s.m}; }

    void validate(std::size_t J) const
    {
        if (n.size() != J || m.size() != J) throw InvalidInput("data length does not match the dose grid");
        for (std::size_t j = 0; j < J; ++j)
            if (n[j] < 0 || m[j] < 0 || m[j] > n[j]) throw InvalidInput("need 0 <= m_j <= n_j");
    }
};

inline double model_prob(double beta0, double beta1, double dose, double ref_dose, Link link)
{
    if (!(dose > 0.0) || !(ref_dose > 0.0)) throw InvalidInput("doses must be positive");
    return link_inverse(link, beta0 + std::exp(beta1) * std::log(dose / ref_dose));
}

inline double model_prob(double beta0, double beta1, std::size_t j, const DoseResponseModel& model)
{
    return model_prob(beta0, beta1, model.grid[j], model.grid.ref_dose(), model.link);
}

namespace detail {
inline double normal_logpdf_kernel(double x, double mean, double var)
{
    const double d = x - mean;
    return -0.5 * d * d / var;
}
} // namespace detail

/// Unnormalised log posterior; doses with n_j = 0 contribute nothing.
inline double log_posterior(const DoseResponseModel& model, const DoseData& data, double beta0, double beta1)
{
    const auto& pr = model.prior;
    double lp = detail::normal_logpdf_kernel(beta0, pr.mean0, pr.var0)
        + detail::normal_logpdf_kernel(beta1, pr.mean1, pr.var1);
    const double slope = std::exp(beta1);
    const double ref = model.grid.ref_dose();
    for (std::size_t j = 0; j < model.grid.size(); ++j) {
        if (data.n[j] == 0) continue;
        const auto [lpi, lq] = link_log_probs(model.link, beta0 + slope * std::log(model.grid[j] / ref));
        lp += data.m[j] * lpi + (data.n[j] - data.m[j]) * lq;
    }
    return lp;
}

enum class PointEstimate { Mean, Median };

struct PosteriorSummary {
    std::vector<double> estimate;      ///< per-dose point estimate of pi(d_j) (mean or median)
    std::vector<double> mean;          ///< per-dose posterior mean of pi(d_j)
    double acceptance_rate = std::numeric_limits<double>::quiet_NaN();
    double effective_draws = std::numeric_limits<double>::quiet_NaN();
    std::vector<std::string> warnings;
};

struct GridSpec {
    int points = 201;       ///< lattice points per axis
    double half_width = 6.0; ///< prior standard deviations on each side of the mean
};

/// Deterministic posterior on a fixed (beta0, beta1) lattice.
///
/// The per-point link evaluations depend only on the model, so they are tabulated
/// once; fitting a dataset is then a weighted sum over the table. One instance can
/// be shared read-only across threads.
class GridPosterior {
public:
    GridPosterior(DoseResponseModel model, GridSpec spec = {}) : model_(std::move(model)), spec_(spec)
    {
        model_.prior.validate();
        if (spec_.points < 3) throw InvalidInput("grid needs at least 3 points per axis");
        if (!(spec_.half_width > 0.0)) throw InvalidInput("grid half width must be positive");
        const auto& pr = model_.prior;
        const std::size_t P = static_cast<std::size_t>(spec_.points);
        const std::size_t J = model_.grid.size();
        const double sd0 = std::sqrt(pr.var0);
        const double sd1 = std::sqrt(pr.var1);
        axis0_.resize(P);
        axis1_.resize(P);
        for (std::size_t i = 0; i < P; ++i) {
            const double t = -spec_.half_width + 2.0 * spec_.half_width * static_cast<double>(i) / (P - 1);
            axis0_[i] = pr.mean0 + t * sd0;
            axis1_[i] = pr.mean1 + t * sd1;
        }
        const auto x = model_.grid.log_relative();
        const std::size_t K = P * P;
        log_prior_.resize(K);
        prob_.assign(J, std::vector<double>(K));
        log_p_.assign(J, std::vector<double>(K));
        log_q_.assign(J, std::vector<double>(K));
        for (std::size_t i1 = 0; i1 < P; ++i1) {
            const double b1 = axis1_[i1];
            const double slope = std::exp(b1);
            for (std::size_t i0 = 0; i0 < P; ++i0) {
                const double b0 = axis0_[i0];
                const std::size_t k = i1 * P + i0;
                log_prior_[k] = detail::normal_logpdf_kernel(b0, pr.mean0, pr.var0)
                    + detail::normal_logpdf_kernel(b1, pr.mean1, pr.var1);
                for (std::size_t j = 0; j < J; ++j) {
                    const double eta = b0 + slope * x[j];
                    prob_[j][k] = link_inverse(model_.link, eta);
                    const auto [lp, lq] = link_log_probs(model_.link, eta);
                    log_p_[j][k] = lp;
                    log_q_[j][k] = lq;
                }
            }
        }
    }

    [[nodiscard]] const DoseResponseModel& model() const noexcept { return model_; }
    [[nodiscard]] const GridSpec& spec() const noexcept { return spec_; }

    /// Normalised lattice weights for @p data (sum to one).
    [[nodiscard]] std::vector<double> weights(const DoseData& data) const
    {
        const std::size_t J = model_.grid.size();
        data.validate(J);
        std::vector<double> ll = log_prior_;
        for (std::size_t j = 0; j < J; ++j) {
            if (data.n[j] == 0) continue;
            const double mj = data.m[j];
            const double fj = data.n[j] - data.m[j];
            const auto& lp = log_p_[j];
            const auto& lq = log_q_[j];
            for (std::size_t k = 0; k < ll.size(); ++k) ll[k] += mj * lp[k] + fj * lq[k];
        }
        const double mx = *std::max_element(ll.begin(), ll.end());
        if (!std::isfinite(mx)) throw NumericalError("posterior lattice has no finite mass");
        double total = 0.0;
        for (double& v : ll) {
            v = std::exp(v - mx);
            total += v;
        }
        if (!(total > 0.0) || !std::isfinite(total)) throw NumericalError("posterior lattice mass underflowed");
        for (double& v : ll) v /= total;
        return ll;
    }

    [[nodiscard]] PosteriorSummary fit(const DoseData& data, PointEstimate point = PointEstimate::Mean) const
    {
        const auto w = weights(data);
        const std::size_t J = model_.grid.size();
        PosteriorSummary s;
        s.mean.assign(J, 0.0);
        for (std::size_t j = 0; j < J; ++j) {
            const auto& p = prob_[j];
            double acc = 0.0;
            for (std::size_t k = 0; k < w.size(); ++k) acc += w[k] * p[k];
            s.mean[j] = acc;
        }
        s.estimate = point == PointEstimate::Mean ? s.mean : weighted_medians(w);
        return s;
    }

    /// Lattice coordinates (beta0 fastest); mainly for tests and diagnostics.
    [[nodiscard]] const std::vector<double>& axis0() const noexcept { return axis0_; }
    [[nodiscard]] const std::vector<double>& axis1() const noexcept { return axis1_; }

private:
    [[nodiscard]] std::vector<double> weighted_medians(const std::vector<double>& w) const
    {
        const std::size_t J = model_.grid.size();
        std::vector<double> out(J);
        std::vector<std::size_t> order(w.size());
        for (std::size_t j = 0; j < J; ++j) {
            const auto& p = prob_[j];
            std::iota(order.begin(), order.end(), std::size_t{0});
            std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
            double cum = 0.0;
            out[j] = p[order.back()];
            for (std::size_t k : order) {
                cum += w[k];
                if (cum >= 0.5) {
                    out[j] = p[k];
                    break;
                }
            }
        }
        return out;
    }

    DoseResponseModel model_;
    GridSpec spec_;
    std::vector<double> axis0_;
    std::vector<double> axis1_;
    std::vector<double> log_prior_;
    std::vector<std::vector<double>> prob_;
    std::vector<std::vector<double>> log_p_;
    std::vector<std::vector<double>> log_q_;
};

inline PosteriorSummary grid_posterior(const DoseResponseModel& model, const DoseData& data, GridSpec spec = {},
                                       PointEstimate point = PointEstimate::Mean)
{
    return GridPosterior(model, spec).fit(data, point);
}

struct McmcOptions {
    int n_iter = 10500;
    int n_burn = 500;
    std::uint64_t seed = 1;
    double target_accept = 0.234;
    PointEstimate point = PointEstimate::Mean;
};

struct McmcResult {
    PosteriorSummary summary;
    std::vector<std::array<double, 2>> draws; ///< retained (beta0, beta1) draws
};

namespace detail {

// Initial positive sequence estimator of the integrated autocorrelation time.
inline double effective_size(const std::vector<double>& x)
{
    const std::size_t n = x.size();
    if (n < 4) return static_cast<double>(n);
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double c0 = 0.0;
    for (double v : x) c0 += (v - mean) * (v - mean);
    c0 /= n;
    if (!(c0 > 0.0)) return static_cast<double>(n);
    auto acf = [&](std::size_t lag) {
        double c = 0.0;
        for (std::size_t i = 0; i + lag < n; ++i) c += (x[i] - mean) * (x[i + lag] - mean);
        return c / n / c0;
    };
    double tau = 1.0;
    for (std::size_t lag = 1; lag + 1 < n / 2; lag += 2) {
        const double pair = acf(lag) + acf(lag + 1);
        if (pair <= 0.0) break;
        tau += 2.0 * pair;
    }
    return n / tau;
}

} // namespace detail

/// Adaptive random-walk Metropolis on (beta0, beta1).
///
/// During burn-in the proposal covariance tracks the running chain covariance
/// and a global scale is tuned by Robbins-Monro toward the target acceptance
/// rate; both are frozen afterwards so the retained chain is a plain Metropolis
/// chain. Deterministic for a given seed.
inline McmcResult mcmc_sample(const DoseResponseModel& model, const DoseData& data, const McmcOptions& opt)
{
    if (!(opt.n_iter > opt.n_burn) || opt.n_burn < 0) throw InvalidInput("mcmc: need n_iter > n_burn >= 0");
    const std::size_t J = model.grid.size();
    data.validate(J);
    Rng rng(opt.seed);

    std::array<double, 2> cur{model.prior.mean0, model.prior.mean1};
    double cur_lp = log_posterior(model, data, cur[0], cur[1]);

    // Proposal N(0, scale^2 * C), C as a lower Cholesky factor.
    double log_scale = std::log(2.38 / std::sqrt(2.0));
    std::array<double, 3> cov{model.prior.var0, 0.0, model.prior.var1}; // c00, c01, c11
    std::array<double, 2> run_mean = cur;
    std::array<double, 3> run_m2{0.0, 0.0, 0.0};
    std::size_t run_n = 1;

    auto chol = [](const std::array<double, 3>& c) {
        const double l00 = std::sqrt(c[0]);
        const double l10 = c[1] / l00;
        const double l11 = std::sqrt(std::max(c[2] - l10 * l10, 1e-12));
        return std::array<double, 3>{l00, l10, l11};
    };
    auto L = chol(cov);

    McmcResult res;
    res.draws.reserve(static_cast<std::size_t>(opt.n_iter - opt.n_burn));
    int accepted_after_burn = 0;

    for (int it = 0; it < opt.n_iter; ++it) {
        const double s = std::exp(log_scale);
        const double z0 = rng.normal();
        const double z1 = rng.normal();
        const std::array<double, 2> prop{cur[0] + s * L[0] * z0, cur[1] + s * (L[1] * z0 + L[2] * z1)};
        const double prop_lp = log_posterior(model, data, prop[0], prop[1]);
        const double log_alpha = prop_lp - cur_lp;
        const bool accept = std::isfinite(prop_lp) && (log_alpha >= 0.0 || std::log(rng.uniform()) < log_alpha);
        if (accept) {
            cur = prop;
            cur_lp = prop_lp;
        }

        if (it < opt.n_burn) {
            const double alpha = std::min(1.0, std::exp(std::min(log_alpha, 0.0)));
            const double gain = 1.0 / std::pow(it + 1.0, 0.6);
            log_scale += gain * ((std::isfinite(prop_lp) ? alpha : 0.0) - opt.target_accept);
            // Welford update of the chain covariance.
            ++run_n;
            const double d0 = cur[0] - run_mean[0];
            const double d1 = cur[1] - run_mean[1];
            run_mean[0] += d0 / run_n;
            run_mean[1] += d1 / run_n;
            run_m2[0] += d0 * (cur[0] - run_mean[0]);
            run_m2[1] += d0 * (cur[1] - run_mean[1]);
            run_m2[2] += d1 * (cur[1] - run_mean[1]);
            if (run_n > 50 && it % 10 == 0) {
                const double k = 1.0 / (run_n - 1);
                const std::array<double, 3> emp{run_m2[0] * k + 1e-6, run_m2[1] * k, run_m2[2] * k + 1e-6};
                if (emp[0] * emp[2] - emp[1] * emp[1] > 0.0) {
                    cov = emp;
                    L = chol(cov);
                }
            }
        } else {
            if (accept) ++accepted_after_burn;
            res.draws.push_back(cur);
        }
    }

    const std::size_t R = res.draws.size();
    PosteriorSummary& sum = res.summary;
    sum.acceptance_rate = static_cast<double>(accepted_after_burn) / static_cast<double>(R);
    sum.mean.assign(J, 0.0);
    sum.estimate.assign(J, 0.0);
    std::vector<std::vector<double>> per_dose(J, std::vector<double>(R));
    for (std::size_t r = 0; r < R; ++r) {
        for (std::size_t j = 0; j < J; ++j) {
            const double p = model_prob(res.draws[r][0], res.draws[r][1], j, model);
            per_dose[j][r] = p;
            sum.mean[j] += p;
        }
    }
    double min_ess = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < J; ++j) {
        sum.mean[j] /= static_cast<double>(R);
        min_ess = std::min(min_ess, detail::effective_size(per_dose[j]));
        if (opt.point == PointEstimate::Median) {
            auto v = per_dose[j];
            auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
            std::nth_element(v.begin(), mid, v.end());
            sum.estimate[j] = *mid;
        } else {
            sum.estimate[j] = sum.mean[j];
        }
    }
    sum.effective_draws = min_ess;
    if (sum.acceptance_rate < 0.05 || sum.acceptance_rate > 0.7) {
        sum.warnings.push_back("acceptance rate " + std::to_string(sum.acceptance_rate)
                               + " outside [0.05, 0.7] after burn-in");
    }
    return res;
}

/// Closest-to-target dose among @p admissible doses; ties go to the lower dose.
inline std::optional<std::size_t> select_mtd_drm(const PosteriorSummary& summary, double phi,
                                                 const std::vector<bool>& admissible)
{
    if (summary.estimate.size() != admissible.size())
        throw InvalidInput("select_mtd_drm: summary and admissible set differ in length");
    return closest_to_target(summary.estimate, admissible, phi);
}

} // namespace boin
