#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "boin/boin.hpp"
#include "oracles.hpp"

using namespace boin;

TEST(PosteriorPoint, Values)
{
    EXPECT_DOUBLE_EQ(posterior_point(0, 0), 0.5);
    EXPECT_NEAR(posterior_point(9, 2), 0.225275, 1e-6);
    EXPECT_NEAR(posterior_point(3, 0), 0.016129, 1e-6);
    EXPECT_NEAR(posterior_point(3, 2), 0.6612903, 1e-7);
    EXPECT_NEAR(posterior_point(9, 1), 0.1153846, 1e-7);
    EXPECT_NEAR(posterior_point(12, 4), 0.3347107, 1e-7);
}

TEST(PosteriorVar, Values)
{
    EXPECT_NEAR(posterior_var(3, 0), 0.0038705, 1e-7);
    EXPECT_NEAR(posterior_var(3, 2), 0.0546306, 1e-7);
    EXPECT_NEAR(posterior_var(0, 0), 0.227273, 1e-6);
    EXPECT_NEAR(posterior_var(9, 1), 0.0101060, 1e-7);
    EXPECT_NEAR(posterior_var(12, 4), 0.0169984, 1e-7);
    EXPECT_NEAR(posterior_var(6, 3), 0.0352113, 1e-7);
}

TEST(PavaFit, MonotoneInputUnchanged)
{
    const auto z = pava_fit({0.1, 0.3, 0.5}, {1.0, 7.0, 2.0});
    EXPECT_EQ(z, (std::vector<double>{0.1, 0.3, 0.5}));
}

TEST(PavaFit, TwoDoseViolation)
{
    const std::vector<double> y{posterior_point(3, 2), posterior_point(3, 0)};
    const std::vector<double> w{1.0 / posterior_var(3, 2), 1.0 / posterior_var(3, 0)};
    EXPECT_NEAR(w[0], 18.3047, 1e-4);
    EXPECT_NEAR(w[1], 258.3672, 1e-3);
    const auto z = pava_fit(y, w);
    EXPECT_NEAR(z[0], 0.0588132, 1e-6);
    EXPECT_EQ(z[0], z[1]);
}

TEST(PavaFit, RejectsBadInput)
{
    EXPECT_THROW(pava_fit({0.1, 0.2}, {1.0}), InvalidInput);
    EXPECT_THROW(pava_fit({0.1, 0.2}, {1.0, 0.0}), InvalidInput);
}

TEST(PavaFit, MatchesBruteForceOracle)
{
    std::mt19937_64 gen(4242);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (int t = 0; t < 3000; ++t) {
        const std::size_t J = 1 + gen() % 6;
        std::vector<double> y(J), w(J);
        for (std::size_t j = 0; j < J; ++j) {
            y[j] = U(gen);
            w[j] = 0.05 + 300.0 * U(gen);
        }
        const auto z = pava_fit(y, w);
        const auto ref = oracle::isotonic_brute_force(y, w);
        for (std::size_t j = 0; j < J; ++j) ASSERT_NEAR(z[j], ref[j], 1e-9);
    }
}

TEST(PavaFit, Properties)
{
    std::mt19937_64 gen(17);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (int t = 0; t < 2000; ++t) {
        const std::size_t J = 1 + gen() % 8;
        std::vector<double> y(J), w(J);
        for (std::size_t j = 0; j < J; ++j) {
            y[j] = U(gen);
            w[j] = 0.1 + 10.0 * U(gen);
        }
        const auto z = pava_fit(y, w);
        for (std::size_t j = 1; j < J; ++j) ASSERT_LE(z[j - 1], z[j]);
        const auto zz = pava_fit(z, w);
        for (std::size_t j = 0; j < J; ++j) ASSERT_NEAR(zz[j], z[j], 1e-12);
        // weighted mean preserved within each pooled block
        std::size_t a = 0;
        while (a < J) {
            std::size_t b = a;
            while (b + 1 < J && z[b + 1] == z[a]) ++b;
            double sy = 0, sz = 0;
            for (std::size_t k = a; k <= b; ++k) {
                sy += w[k] * y[k];
                sz += w[k] * z[k];
            }
            ASSERT_NEAR(sy, sz, 1e-9);
            a = b + 1;
        }
    }
}

TEST(FitIsotonic, TieBreakKeepsStrictOrder)
{
    const auto d = TrialDesign::make();
    TrialState s(3);
    s.n = {3, 3, 0};
    s.m = {2, 0, 0};
    const auto fit = fit_isotonic(s, d);
    EXPECT_TRUE(std::isnan(fit.p_hat[2]));
    EXPECT_LT(fit.p_hat[0], fit.p_hat[1]);
    EXPECT_NEAR(fit.p_hat[1] - fit.p_hat[0], pava_tie_epsilon, 1e-15);
    // pooled block below target: the epsilon makes the higher dose closer
    EXPECT_EQ(select_mtd_pava(s, d), 1u);
}

TEST(SelectPava, ExactHit)
{
    const auto d = TrialDesign::make();
    TrialState s(3);
    // raw estimates already monotone, dose 2 closest to 0.3
    s.n = {9, 12, 9};
    s.m = {1, 4, 5};
    EXPECT_EQ(select_mtd_pava(s, d), 1u);
}

TEST(SelectPava, NeverPicksEliminatedOrUntreated)
{
    const auto d = TrialDesign::make();
    const auto scenarios = standard_scenarios();
    for (std::uint64_t r = 0; r < 1500; ++r) {
        Rng rng(stream_seed(5, 2, r));
        const auto s = conduct_trial(d, scenarios[r % 8].true_probs, rng);
        const auto sel = select_mtd_pava(s, d);
        if (!sel) continue;
        ASSERT_GT(s.n[*sel], 0);
        ASSERT_FALSE(s.eliminated[*sel]);
        const auto fit = fit_isotonic(s, d);
        double prev = -1.0;
        for (std::size_t j = 0; j < fit.p_hat.size(); ++j) {
            if (!fit.admissible[j]) continue;
            ASSERT_GT(fit.p_hat[j], prev);
            prev = fit.p_hat[j];
        }
    }
}
