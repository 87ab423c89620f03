#pragma once

// Simulation sweep configuration (JSON) and its tabular output.

#include <filesystem>
#include <string>
#include <vector>

#include "boin/elicit.hpp"
#include "boin/io.hpp"
#include "boin/json_io.hpp"
#include "boin/sim.hpp"

namespace boin {

struct SweepConfig {
    TrialDesign design;
    DoseGrid grid = standard_grid();
    std::vector<Scenario> scenarios;
    std::vector<MethodSpec> methods;
    SimulationOptions options;
};

namespace detail {

inline MethodSpec method_from_json(const json& m, const SweepConfig& cfg, const std::filesystem::path& base)
{
    if (m.is_string()) {
        const auto s = m.get<std::string>();
        if (s == "pava") return MethodSpec::pava();
        throw InvalidInput("method '" + s + "': a dose-response method needs an object with a prior");
    }
    const auto kind = field_or<std::string>(m, "method", "drm");
    if (kind == "pava") return MethodSpec::pava();
    if (kind != "drm") throw InvalidInput("unknown method '" + kind + "'");

    const Link link = parse_link(field_or<std::string>(m, "link", "logit"));
    CoefficientPrior prior;
    if (m.contains("prior")) {
        prior = prior_from_json(m["prior"]);
    } else if (m.contains("prior_file")) {
        auto path = std::filesystem::path(field<std::string>(m, "prior_file"));
        if (path.is_relative()) path = base / path;
        const auto model = model_from_json(json::parse(read_file(path)));
        if (model.link != link && m.contains("link")) throw InvalidInput("prior_file link differs from method link");
        if (model.grid.doses() != cfg.grid.doses() || model.grid.ref_level() != cfg.grid.ref_level())
            throw InvalidInput("prior_file dose grid differs from the sweep dose grid");
        prior = model.prior;
    } else if (m.contains("elicit")) {
        const auto& e = m["elicit"];
        ElicitationInput in;
        in.p1 = field_or(e, "p1", in.p1);
        in.pJ = field_or(e, "pJ", in.pJ);
        in.phi = cfg.design.phi;
        in.grid = cfg.grid;
        in.link = link;
        in.levels = field_or(e, "levels", in.levels);
        PriorOptimizerOptions po;
        po.seed = field_or<std::uint64_t>(e, "seed", po.seed);
        po.variance_floor = field_or(e, "variance_floor", po.variance_floor);
        prior = elicit_prior(in, po).fit.prior;
    } else {
        throw InvalidInput("dose-response method needs one of prior, prior_file or elicit");
    }
    if (m.contains("variance_scale")) {
        // Same means, variances replaced by a fixed value (vague-prior sensitivity).
        const double v = field<double>(m, "variance_scale");
        prior.var0 = v;
        prior.var1 = v;
    }
    auto spec = MethodSpec::drm(DoseResponseModel(link, cfg.grid, prior), field_or<std::string>(m, "label", ""));
    const auto engine = field_or<std::string>(m, "engine", "grid");
    if (engine == "mcmc") spec.engine = PosteriorEngine::Mcmc;
    else if (engine != "grid") throw InvalidInput("engine must be grid or mcmc");
    if (field_or<std::string>(m, "estimate", "mean") == "median") spec.point = PointEstimate::Median;
    spec.candidates = parse_candidate_set(field_or<std::string>(m, "candidates", "treated"));
    return spec;
}

} // namespace detail

/// Parses a sweep file. Relative prior_file paths resolve against @p base.
inline SweepConfig sweep_from_json(const json& j, const std::filesystem::path& base = ".")
{
    if (!j.is_object()) throw InvalidInput("sweep config must be a JSON object");
    SweepConfig c;
    c.design = TrialDesign::make(design_params_from_json(j));
    const auto doses = detail::field_or(j, "doses", standard_grid().doses());
    c.grid = DoseGrid(doses, static_cast<std::size_t>(detail::field_or<long long>(j, "ref_index", 3)));

    if (!j.contains("scenarios") || (j["scenarios"].is_string() && j["scenarios"] == "standard")) {
        c.scenarios = standard_scenarios(c.design.phi);
    } else {
        const auto all = standard_scenarios(c.design.phi);
        for (const auto& s : j["scenarios"]) {
            if (s.is_number_integer()) {
                const auto k = s.get<long long>();
                if (k < 1 || k > static_cast<long long>(all.size())) throw InvalidInput("standard scenario number out of range");
                c.scenarios.push_back(all[static_cast<std::size_t>(k - 1)]);
            } else {
                c.scenarios.push_back(Scenario::make(detail::field<std::string>(s, "name"),
                                                     detail::field<std::vector<double>>(s, "true_probs"), c.design.phi));
            }
        }
    }
    for (const auto& s : c.scenarios)
        if (s.true_probs.size() != c.grid.size())
            throw ScenarioError("scenario '" + s.name + "' length differs from the dose grid");

    if (!j.contains("methods")) throw InvalidInput("missing field 'methods'");
    for (const auto& m : j["methods"]) c.methods.push_back(detail::method_from_json(m, c, base));

    c.options.reps = detail::field_or<std::size_t>(j, "reps", c.options.reps);
    c.options.master_seed = detail::field_or<std::uint64_t>(j, "seed", c.options.master_seed);
    c.options.shared_paths = detail::field_or(j, "shared_paths", c.options.shared_paths);
    return c;
}

/// One row per (scenario, method, dose).
inline CsvTable sweep_csv(const std::vector<SimulationReport>& reports)
{
    CsvTable t({"schema_version", "scenario", "method", "dose_level", "selection", "mean_n", "mean_m", "none",
                "overdose", "reps", "seed"});
    for (const auto& r : reports)
        for (std::size_t j = 0; j < r.selection.size(); ++j)
            t.row({std::to_string(schema_version), r.scenario, r.method, std::to_string(j + 1),
                   CsvTable::num(r.selection[j]), CsvTable::num(r.mean_n[j]), CsvTable::num(r.mean_m[j]),
                   CsvTable::num(r.none), CsvTable::num(r.overdose), std::to_string(r.reps), std::to_string(r.seed)});
    return t;
}

} // namespace boin
