// Conducts one simulated trial cohort by cohort, then selects the MTD with
// isotonic regression and with a logit dose-response model.
//
//   demo_trial [seed] [scenario 1-8]

#include <cstdio>
#include <cstdlib>

#include "boin/boin.hpp"

using namespace boin;

static const char* name(Action a)
{
    switch (a) {
    case Action::Escalate: return "escalate";
    case Action::Retain: return "stay";
    case Action::Deescalate: return "de-escalate";
    }
    return "?";
}

int main(int argc, char** argv)
{
    const std::uint64_t seed = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 7;
    const int which = argc > 2 ? std::atoi(argv[2]) : 3;
    const auto scenarios = standard_scenarios();
    if (which < 1 || which > static_cast<int>(scenarios.size())) {
        std::fprintf(stderr, "scenario must be 1-8\n");
        return 2;
    }
    const Scenario& sc = scenarios[static_cast<std::size_t>(which - 1)];
    const auto design = TrialDesign::make();
    const auto grid = standard_grid();

    std::printf("boundaries: escalate if rate <= %.4f, de-escalate if rate >= %.4f\n", design.lambda_e,
                design.lambda_d);
    std::printf("true DLT probabilities (%s):", sc.name.c_str());
    for (double p : sc.true_probs) std::printf(" %.2f", p);
    std::printf("\n\n");

    Rng rng(seed);
    const auto state = conduct_trial(design, sc.true_probs, rng);
    std::printf("cohort  dose  DLT  decision      next\n");
    for (const auto& e : state.events) {
        std::printf("%6d  %4zu  %d/%d  %-12s  ", e.cohort_index + 1, e.dose + 1, e.dlt, e.n, name(e.decision));
        const bool stopped = &e == &state.events.back() && state.status == TrialStatus::StoppedAllEliminated;
        if (stopped) std::printf("stop");
        else std::printf("%zu", e.next_dose + 1);
        for (auto d : e.eliminations) std::printf("  (dose %zu eliminated)", d + 1);
        std::printf("\n");
    }

    std::printf("\ndose   n   m   pava    logit\n");
    const auto fit = fit_isotonic(state, design);
    const DoseResponseModel model(Link::Logit, grid, {-1.592, 1.371, 0.412, 0.784});
    const auto post = grid_posterior(model, DoseData::from(state));
    for (std::size_t j = 0; j < grid.size(); ++j) {
        std::printf("%4zu  %2d  %2d  ", j + 1, state.n[j], state.m[j]);
        if (fit.admissible[j]) std::printf("%.3f  ", fit.p_hat[j]);
        else std::printf("  -    ");
        std::printf("%.3f\n", post.mean[j]);
    }

    const auto pava = select_mtd_pava(state, design);
    const auto drm = select_mtd_drm(post, design.phi, candidate_doses(state, design, CandidateSet::Treated));
    auto show = [](const char* label, const std::optional<std::size_t>& d) {
        if (d) std::printf("%s selects dose %zu\n", label, *d + 1);
        else std::printf("%s selects no dose\n", label);
    };
    std::printf("\ntrue MTD is dose %zu\n", sc.true_mtd + 1);
    show("pava ", pava);
    show("logit", drm);
}
