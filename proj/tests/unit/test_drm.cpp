#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numeric>

#include "boin/boin.hpp"
#include "oracles.hpp"

using namespace boin;

namespace {

const CoefficientPrior logit_prior{-1.592, 1.371, 0.412, 0.784};
const CoefficientPrior loglog_prior{-0.231, 0.847, 0.068, 0.544};
const CoefficientPrior cloglog_prior{-1.549, 0.943, 0.142, 0.743};

std::vector<DoseResponseModel> published_models()
{
    return {DoseResponseModel(Link::Logit, standard_grid(), logit_prior),
            DoseResponseModel(Link::LogLog, standard_grid(), loglog_prior),
            DoseResponseModel(Link::CLogLog, standard_grid(), cloglog_prior)};
}

} // namespace

TEST(Link, InverseValues)
{
    EXPECT_DOUBLE_EQ(link_inverse(Link::Logit, 0.0), 0.5);
    EXPECT_NEAR(link_inverse(Link::CLogLog, 0.0), 0.632121, 1e-6);
    EXPECT_NEAR(link_inverse(Link::LogLog, 0.0), 0.367879, 1e-6);
    EXPECT_EQ(link_inverse(Link::Logit, -800.0), prob_floor);
    EXPECT_EQ(link_inverse(Link::CLogLog, 50.0), 1.0 - prob_floor);
}

TEST(Link, RoundTrip)
{
    for (Link l : {Link::Logit, Link::LogLog, Link::CLogLog}) {
        for (double x = -30.0; x <= 30.0; x += 0.25) {
            const double p = link_inverse_raw(l, x);
            if (p <= 0.0 || p >= 1.0) continue; // unrepresentable in double
            // rounding p to a double moves x by about eps * p * g'(p)
            double slope = 0.0;
            switch (l) {
            case Link::Logit: slope = 1.0 / (p * (1.0 - p)); break;
            case Link::LogLog: slope = -1.0 / (p * std::log(p)); break;
            case Link::CLogLog: slope = -1.0 / ((1.0 - p) * std::log1p(-p)); break;
            }
            const double cond = 4.0 * std::numeric_limits<double>::epsilon() * p * slope;
            EXPECT_NEAR(link_forward(l, p), x, 1e-10 * std::max(1.0, std::abs(x)) + 1e-10 + cond)
                << to_string(l) << " x=" << x;
        }
    }
}

TEST(Link, LogProbsAgreeWithDirectForm)
{
    for (Link l : {Link::Logit, Link::LogLog, Link::CLogLog})
        for (double x = -8.0; x <= 8.0; x += 0.5) {
            const auto [lp, lq] = link_log_probs(l, x);
            // each tail in closed form, then the floor
            double log_p = 0.0, log_q = 0.0;
            switch (l) {
            case Link::Logit:
                log_p = std::log(oracle::inv_link(l, x));
                log_q = std::log(oracle::inv_link(l, -x));
                break;
            case Link::LogLog:
                log_p = -std::exp(-x);
                log_q = std::log(1.0 - oracle::inv_link(l, x));
                break;
            case Link::CLogLog:
                log_p = std::log(oracle::inv_link(l, x));
                log_q = -std::exp(x);
                break;
            }
            const double floor = std::log(prob_floor);
            EXPECT_NEAR(lp, std::max(log_p, floor), 1e-9) << to_string(l) << " x=" << x;
            EXPECT_NEAR(lq, std::max(log_q, floor), 1e-9) << to_string(l) << " x=" << x;
        }
}

TEST(Link, Parse)
{
    EXPECT_EQ(parse_link("log-log"), Link::LogLog);
    EXPECT_EQ(parse_link("cloglog"), Link::CLogLog);
    EXPECT_THROW(parse_link("probit"), InvalidInput);
}

TEST(ModelProb, Values)
{
    EXPECT_NEAR(model_prob(-0.973965, 0.297435, 20.0, 30.0, Link::Logit), 0.179479, 1e-5);
    EXPECT_NEAR(model_prob(-0.973965, 0.297435, 45.0, 30.0, Link::Logit), 0.394593, 1e-5);
    for (Link l : {Link::Logit, Link::LogLog, Link::CLogLog})
        EXPECT_NEAR(model_prob(link_forward(l, 0.3), 1.7, 30.0, 30.0, l), 0.3, 1e-12);
    EXPECT_THROW(model_prob(0.0, 0.0, 0.0, 30.0, Link::Logit), InvalidInput);
}

TEST(ModelProb, IncreasingInDose)
{
    const auto g = standard_grid();
    for (Link l : {Link::Logit, Link::LogLog, Link::CLogLog})
        for (double b0 = -4.0; b0 <= 4.0; b0 += 1.0)
            for (double b1 = -3.0; b1 <= 2.0; b1 += 1.0)
                for (std::size_t j = 1; j < g.size(); ++j)
                    EXPECT_LE(model_prob(b0, b1, g[j - 1], g.ref_dose(), l), model_prob(b0, b1, g[j], g.ref_dose(), l));
}

TEST(LogPosterior, MatchesReference)
{
    const auto battery = oracle::dataset_battery(5, 31);
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> U(-2.0, 2.0);
    for (const auto& model : published_models())
        for (const auto& data : battery) {
            const double b0 = U(gen), b1 = U(gen);
            const double a = log_posterior(model, data, b0, b1) - log_posterior(model, data, 0.0, 0.0);
            const double r = oracle::log_post(model, data, b0, b1) - oracle::log_post(model, data, 0.0, 0.0);
            EXPECT_NEAR(a, r, 1e-9);
        }
}

TEST(LogPosterior, OneExtraDltAddsLogOdds)
{
    const DoseResponseModel model(Link::Logit, standard_grid(), logit_prior);
    auto d0 = DoseData::empty(6);
    d0.n[2] = 3;
    auto d1 = d0;
    d1.m[2] = 1;
    const double b0 = -0.7, b1 = 0.2;
    const double p = model_prob(b0, b1, 2, model);
    EXPECT_NEAR(log_posterior(model, d1, b0, b1) - log_posterior(model, d0, b0, b1), std::log(p / (1 - p)), 1e-12);
}

TEST(GridPosterior, WeightsNormalise)
{
    const GridPosterior gp(DoseResponseModel(Link::LogLog, standard_grid(), loglog_prior));
    for (const auto& data : oracle::dataset_battery(5)) {
        const auto w = gp.weights(data);
        EXPECT_NEAR(std::accumulate(w.begin(), w.end(), 0.0), 1.0, 1e-12);
    }
}

TEST(GridPosterior, NoDataGivesPriorMeans)
{
    for (const auto& model : published_models()) {
        const auto s = grid_posterior(model, DoseData::empty(6));
        const auto mc = oracle::prior_mc_means(model, 1000000, 11);
        for (std::size_t j = 0; j < 6; ++j) EXPECT_NEAR(s.mean[j], mc[j], 0.003);
    }
}

TEST(GridPosterior, DegeneratePriorPinsReference)
{
    const DoseResponseModel model(Link::Logit, standard_grid(), {link_forward(Link::Logit, 0.3), 1e-8, 0.2, 1e-8});
    auto data = DoseData::empty(6);
    data.n = {3, 3, 6, 3, 0, 0};
    data.m = {0, 1, 3, 3, 0, 0};
    EXPECT_NEAR(grid_posterior(model, data).mean[2], 0.3, 1e-3);
}

TEST(GridPosterior, MeansNondecreasingAcrossDoses)
{
    for (const auto& model : published_models()) {
        const GridPosterior gp(model);
        for (const auto& data : oracle::dataset_battery(20, 8)) {
            const auto s = gp.fit(data);
            for (std::size_t j = 1; j < 6; ++j) EXPECT_LE(s.mean[j - 1], s.mean[j] + 1e-15);
            for (double v : s.mean) {
                EXPECT_GT(v, 0.0);
                EXPECT_LT(v, 1.0);
            }
        }
    }
}

TEST(GridPosterior, MatchesQuadratureOracle)
{
    const auto battery = oracle::dataset_battery(4, 77);
    for (const auto& model : published_models())
        for (const auto& data : battery) {
            const auto s = grid_posterior(model, data);
            const auto q = oracle::quadrature_means(model, data);
            for (std::size_t j = 0; j < 6; ++j) EXPECT_NEAR(s.mean[j], q[j], 0.002) << to_string(model.link);
        }
}

TEST(GridPosterior, RefinementStable)
{
    const auto battery = oracle::dataset_battery(5, 5);
    for (const auto& model : published_models())
        for (const auto& data : battery) {
            const auto a = grid_posterior(model, data);
            const auto b = grid_posterior(model, data, {401, 6.0});
            for (std::size_t j = 0; j < 6; ++j) EXPECT_LT(std::abs(a.mean[j] - b.mean[j]), 0.002);
        }
}

TEST(GridPosterior, MedianEstimateInsideRange)
{
    const DoseResponseModel model(Link::Logit, standard_grid(), logit_prior);
    const auto data = oracle::dataset_battery(1, 2).front();
    const auto s = grid_posterior(model, data, {}, PointEstimate::Median);
    for (std::size_t j = 0; j < 6; ++j) {
        EXPECT_GT(s.estimate[j], 0.0);
        EXPECT_LT(s.estimate[j], 1.0);
    }
}

TEST(Mcmc, AgreesWithGrid)
{
    const auto battery = oracle::dataset_battery(6, 13);
    for (const auto& model : published_models())
        for (std::size_t i = 0; i < battery.size(); ++i) {
            const auto g = grid_posterior(model, battery[i]);
            const auto m = mcmc_sample(model, battery[i], {.seed = 100 + i});
            for (std::size_t j = 0; j < 6; ++j) EXPECT_NEAR(m.summary.mean[j], g.mean[j], 0.02);
            EXPECT_GT(m.summary.acceptance_rate, 0.05);
            EXPECT_LT(m.summary.acceptance_rate, 0.7);
            EXPECT_TRUE(m.summary.warnings.empty());
        }
}

TEST(Mcmc, PriorOnlyMatchesMonteCarlo)
{
    const DoseResponseModel model(Link::CLogLog, standard_grid(), cloglog_prior);
    const auto m = mcmc_sample(model, DoseData::empty(6), {.seed = 4});
    const auto mc = oracle::prior_mc_means(model, 200000, 5);
    for (std::size_t j = 0; j < 6; ++j) EXPECT_NEAR(m.summary.mean[j], mc[j], 0.02);
}

TEST(Mcmc, DeterministicForSeed)
{
    const DoseResponseModel model(Link::Logit, standard_grid(), logit_prior);
    const auto data = oracle::dataset_battery(1).front();
    const auto a = mcmc_sample(model, data, {.seed = 9});
    const auto b = mcmc_sample(model, data, {.seed = 9});
    EXPECT_EQ(a.draws, b.draws);
    EXPECT_EQ(a.draws.size(), 10000u);
    EXPECT_THROW(mcmc_sample(model, data, {.n_iter = 10, .n_burn = 10}), InvalidInput);
}

TEST(SelectDrm, Examples)
{
    PosteriorSummary s;
    s.estimate = {0.10, 0.29, 0.50};
    EXPECT_EQ(select_mtd_drm(s, 0.3, {true, true, true}), 1u);
    s.estimate = {0.28, 0.32, 0.60};
    EXPECT_EQ(select_mtd_drm(s, 0.3, {false, true, true}), 1u);
    EXPECT_FALSE(select_mtd_drm(s, 0.3, {false, false, false}).has_value());
    EXPECT_THROW(select_mtd_drm(s, 0.3, {true}), InvalidInput);
}

TEST(SelectDrm, DependsOnlyOnDistances)
{
    std::mt19937_64 gen(8);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (int t = 0; t < 500; ++t) {
        PosteriorSummary s;
        std::vector<bool> adm(6);
        for (std::size_t j = 0; j < 6; ++j) {
            s.estimate.push_back(U(gen));
            adm[j] = U(gen) < 0.8;
        }
        // reflect every estimate across phi: distances unchanged
        PosteriorSummary r = s;
        for (double& v : r.estimate) v = 0.6 - v;
        EXPECT_EQ(select_mtd_drm(s, 0.3, adm), select_mtd_drm(r, 0.3, adm));
    }
}

TEST(DoseResponseModel, RejectsBadPrior)
{
    EXPECT_THROW(DoseResponseModel(Link::Logit, standard_grid(), {0, 0.0, 0, 1}), InvalidInput);
    EXPECT_THROW(DoseResponseModel(Link::Logit, standard_grid(), {NAN, 1, 0, 1}), InvalidInput);
}
