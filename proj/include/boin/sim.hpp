#pragma once

// Monte-Carlo operating characteristics. Each replicate draws one trial path
// from its own RNG stream; by default every estimator arm is applied to the same
// final data so arms differ only in the terminal estimator.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "boin/design.hpp"
#include "boin/drm.hpp"
#include "boin/error.hpp"
#include "boin/parallel.hpp"
#include "boin/pava.hpp"
#include "boin/rng.hpp"
#include "boin/trial.hpp"

namespace boin {

struct Scenario {
    std::string name;
    std::vector<double> true_probs;
    std::size_t true_mtd = 0; ///< 0-based index of the dose closest to phi (ties to the lower dose)

    static Scenario make(std::string name, std::vector<double> probs, double phi)
    {
        try {
            validate_true_probs(probs);
        } catch (const Error& e) {
            throw ScenarioError("scenario '" + name + "': " + e.what());
        }
        if (probs.empty()) throw ScenarioError("scenario '" + name + "' has no doses");
        const std::vector<bool> all(probs.size(), true);
        const auto mtd = *closest_to_target(probs, all, phi);
        return Scenario{std::move(name), std::move(probs), mtd};
    }
};

/// The eight DLT-probability scenarios over doses 10, 20, 30, 45, 60, 80 (phi = 0.3).
inline std::vector<Scenario> standard_scenarios(double phi = 0.3)
{
    const std::vector<std::vector<double>> p = {
        {0.02, 0.15, 0.20, 0.30, 0.35, 0.55}, {0.01, 0.04, 0.14, 0.18, 0.22, 0.30},
        {0.01, 0.03, 0.10, 0.20, 0.30, 0.55}, {0.15, 0.30, 0.36, 0.50, 0.55, 0.64},
        {0.08, 0.19, 0.30, 0.44, 0.54, 0.64}, {0.03, 0.09, 0.17, 0.30, 0.42, 0.55},
        {0.09, 0.30, 0.45, 0.59, 0.68, 0.75}, {0.08, 0.19, 0.30, 0.46, 0.60, 0.75},
    };
    std::vector<Scenario> out;
    for (std::size_t i = 0; i < p.size(); ++i) out.push_back(Scenario::make("scenario" + std::to_string(i + 1), p[i], phi));
    return out;
}

enum class Method { Pava, Drm };
enum class PosteriorEngine { Grid, Mcmc };

struct MethodSpec {
    std::string label;
    Method method = Method::Pava;
    std::optional<DoseResponseModel> model; ///< required for Drm
    PosteriorEngine engine = PosteriorEngine::Grid;
    PointEstimate point = PointEstimate::Mean;
    CandidateSet candidates = CandidateSet::Treated;
    GridSpec grid{};
    McmcOptions mcmc{};

    static MethodSpec pava() { return {"pava", Method::Pava, std::nullopt}; }
    static MethodSpec drm(DoseResponseModel model, std::string label = {})
    {
        if (label.empty()) label = std::string(to_string(model.link));
        return {std::move(label), Method::Drm, std::move(model)};
    }
};

struct SimulationReport {
    std::string scenario;
    std::string method;
    std::vector<double> selection; ///< proportion of replicates selecting each dose
    double none = 0.0;             ///< proportion selecting no dose
    double overdose = 0.0;         ///< proportion selecting a dose above the true MTD
    std::vector<double> mean_n;
    std::vector<double> mean_m;
    std::size_t reps = 0;
    std::uint64_t seed = 0;
};

struct SimulationOptions {
    std::size_t reps = 1000;
    std::uint64_t master_seed = 2025;
    unsigned threads = default_threads();
    bool shared_paths = true; ///< false: each arm draws its own trial paths
};

inline double overdose_rate(const SimulationReport& report, const Scenario& scenario)
{
    if (report.selection.size() != scenario.true_probs.size())
        throw InvalidInput("report and scenario have different numbers of doses");
    double s = 0.0;
    for (std::size_t j = scenario.true_mtd + 1; j < report.selection.size(); ++j) s += report.selection[j];
    return s;
}

inline std::pair<std::vector<double>, std::vector<double>> allocation_summary(const SimulationReport& report)
{
    return {report.mean_n, report.mean_m};
}

namespace detail {

// Terminal estimator for one arm. Grid tables are built once and shared.
class ArmEstimator {
public:
    ArmEstimator(const MethodSpec& spec, const TrialDesign& design) : spec_(spec), design_(design)
    {
        if (spec.method == Method::Drm) {
            if (!spec.model) throw InvalidInput("method '" + spec.label + "' needs a dose-response model");
            if (spec.engine == PosteriorEngine::Grid) grid_ = std::make_shared<GridPosterior>(*spec.model, spec.grid);
        }
    }

    std::optional<std::size_t> operator()(const TrialState& s, std::uint64_t mcmc_seed) const
    {
        if (spec_.method == Method::Pava) return select_mtd_pava(s, design_);
        const auto adm = candidate_doses(s, design_, spec_.candidates);
        if (std::none_of(adm.begin(), adm.end(), [](bool b) { return b; })) return std::nullopt;
        const auto data = DoseData::from(s);
        if (grid_) return select_mtd_drm(grid_->fit(data, spec_.point), design_.phi, adm);
        McmcOptions mo = spec_.mcmc;
        mo.seed = mcmc_seed;
        mo.point = spec_.point;
        return select_mtd_drm(mcmc_sample(*spec_.model, data, mo).summary, design_.phi, adm);
    }

private:
    const MethodSpec& spec_;
    const TrialDesign& design_;
    std::shared_ptr<GridPosterior> grid_;
};

struct RepOutcome {
    std::vector<int> n;
    std::vector<int> m;
    std::vector<std::optional<std::size_t>> selected; ///< per arm
};

} // namespace detail

/// Runs @p opt.reps replicates of @p scenario and returns one report per arm,
/// in the order of @p methods.
inline std::vector<SimulationReport> run_scenario(const TrialDesign& design, const Scenario& scenario,
                                                  const std::vector<MethodSpec>& methods,
                                                  const SimulationOptions& opt = {})
{
    if (opt.reps < 1) throw InvalidInput("reps must be at least 1");
    try {
        validate_true_probs(scenario.true_probs);
    } catch (const Error& e) {
        throw ScenarioError("scenario '" + scenario.name + "': " + e.what());
    }
    const std::size_t J = scenario.true_probs.size();
    if (scenario.true_mtd >= J) throw ScenarioError("scenario '" + scenario.name + "': true MTD out of range");
    for (const auto& ms : methods)
        if (ms.model && ms.model->grid.size() != J)
            throw InvalidInput("method '" + ms.label + "' has a dose grid of the wrong size");

    std::vector<detail::ArmEstimator> arms;
    arms.reserve(methods.size());
    for (const auto& ms : methods) arms.emplace_back(ms, design);

    const std::uint64_t stream = fnv1a(scenario.name);
    // Shared paths: one conduct per replicate. Otherwise each arm has its own stream.
    const std::size_t paths = opt.shared_paths ? 1 : methods.size();
    std::vector<std::vector<detail::RepOutcome>> out(paths, std::vector<detail::RepOutcome>(opt.reps));

    parallel_for(opt.reps * paths, opt.threads, [&](std::size_t task) {
        const std::size_t path = task / opt.reps;
        const std::size_t r = task % opt.reps;
        const std::uint64_t sub = opt.shared_paths ? stream : stream ^ fnv1a(methods[path].label);
        Rng rng(stream_seed(opt.master_seed, sub, r));
        const TrialState s = conduct_trial(design, scenario.true_probs, rng);
        auto& o = out[path][r];
        o.n = s.n;
        o.m = s.m;
        o.selected.assign(methods.size(), std::nullopt);
        const std::uint64_t mcmc_seed = rng.next();
        if (s.status != TrialStatus::Completed) return;
        for (std::size_t a = 0; a < arms.size(); ++a)
            if (opt.shared_paths || a == path) o.selected[a] = arms[a](s, mcmc_seed);
    });

    std::vector<SimulationReport> reports;
    const double R = static_cast<double>(opt.reps);
    for (std::size_t a = 0; a < methods.size(); ++a) {
        const auto& reps = out[opt.shared_paths ? 0 : a];
        SimulationReport rep{scenario.name, methods[a].label, std::vector<double>(J, 0.0), 0.0, 0.0,
                             std::vector<double>(J, 0.0), std::vector<double>(J, 0.0), opt.reps, opt.master_seed};
        std::vector<std::size_t> count(J, 0);
        std::size_t none = 0;
        std::vector<long long> sum_n(J, 0);
        std::vector<long long> sum_m(J, 0);
        for (const auto& o : reps) {
            if (o.selected[a]) ++count[*o.selected[a]];
            else ++none;
            for (std::size_t j = 0; j < J; ++j) {
                sum_n[j] += o.n[j];
                sum_m[j] += o.m[j];
            }
        }
        for (std::size_t j = 0; j < J; ++j) {
            rep.selection[j] = static_cast<double>(count[j]) / R;
            rep.mean_n[j] = static_cast<double>(sum_n[j]) / R;
            rep.mean_m[j] = static_cast<double>(sum_m[j]) / R;
        }
        rep.none = static_cast<double>(none) / R;
        rep.overdose = overdose_rate(rep, scenario);
        reports.push_back(std::move(rep));
    }
    return reports;
}

inline SimulationReport run_scenario(const TrialDesign& design, const Scenario& scenario, const MethodSpec& method,
                                     const SimulationOptions& opt = {})
{
    return run_scenario(design, scenario, std::vector<MethodSpec>{method}, opt).front();
}

/// All scenarios, all arms; reports ordered scenario-major.
inline std::vector<SimulationReport> run_scenarios(const TrialDesign& design, const std::vector<Scenario>& scenarios,
                                                   const std::vector<MethodSpec>& methods,
                                                   const SimulationOptions& opt = {})
{
    for (const auto& sc : scenarios) {
        try {
            validate_true_probs(sc.true_probs);
        } catch (const Error& e) {
            throw ScenarioError("scenario '" + sc.name + "': " + e.what());
        }
    }
    std::vector<SimulationReport> all;
    for (const auto& sc : scenarios) {
        auto r = run_scenario(design, sc, methods, opt);
        all.insert(all.end(), std::make_move_iterator(r.begin()), std::make_move_iterator(r.end()));
    }
    return all;
}

} // namespace boin
