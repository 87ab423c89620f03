#pragma once

// JSON forms of the library types. Dose levels are 1-based in every payload.

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "boin/design.hpp"
#include "boin/drm.hpp"
#include "boin/elicit.hpp"
#include "boin/error.hpp"
#include "boin/sim.hpp"
#include "boin/trial.hpp"

namespace boin {

using json = nlohmann::ordered_json;

inline constexpr int schema_version = 1;

namespace detail {

template <class T>
T field(const json& j, const char* key)
{
    if (!j.contains(key)) throw InvalidInput(std::string("missing field '") + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw InvalidInput(std::string("field '") + key + "' has the wrong type");
    }
}

template <class T>
T field_or(const json& j, const char* key, T fallback)
{
    return j.contains(key) && !j.at(key).is_null() ? field<T>(j, key) : fallback;
}

inline json nullable(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

inline json nullable_level(const std::optional<std::size_t>& j) { return j ? json(*j + 1) : json(nullptr); }

inline json levels(const std::vector<std::size_t>& idx)
{
    json a = json::array();
    for (auto j : idx) a.push_back(j + 1);
    return a;
}

inline std::size_t level_to_index(long long level, std::size_t J, const char* what)
{
    if (level < 1 || static_cast<std::size_t>(level) > J)
        throw InvalidInput(std::string(what) + " must be between 1 and " + std::to_string(J));
    return static_cast<std::size_t>(level - 1);
}

} // namespace detail

inline json to_json(const Boundaries& b) { return {{"lambda_e", b.lambda_e}, {"lambda_d", b.lambda_d}}; }

inline json to_json(const TrialDesign& d)
{
    return {{"phi", d.phi},
            {"phi1", d.phi1},
            {"phi2", d.phi2},
            {"cohort_size", d.cohort_size},
            {"n_cohorts", d.n_cohorts},
            {"elim_threshold", d.elim_threshold},
            {"elim_min_n", d.elim_min_n},
            {"lambda_e", d.lambda_e},
            {"lambda_d", d.lambda_d}};
}

inline DesignParams design_params_from_json(const json& j)
{
    DesignParams p;
    p.phi = detail::field_or(j, "phi", p.phi);
    if (j.contains("phi1") && !j["phi1"].is_null()) p.phi1 = detail::field<double>(j, "phi1");
    if (j.contains("phi2") && !j["phi2"].is_null()) p.phi2 = detail::field<double>(j, "phi2");
    p.cohort_size = detail::field_or(j, "cohort_size", p.cohort_size);
    p.n_cohorts = detail::field_or(j, "n_cohorts", p.n_cohorts);
    p.elim_threshold = detail::field_or(j, "elim_threshold", p.elim_threshold);
    p.elim_min_n = detail::field_or(j, "elim_min_n", p.elim_min_n);
    return p;
}

inline json to_json(const std::vector<RuleRow>& rows)
{
    json a = json::array();
    for (const auto& r : rows) a.push_back({{"n", r.n}, {"escalate_max", r.escalate_max}, {"deescalate_min", r.deescalate_min}});
    return a;
}

/// {link, doses, ref_index, gamma0, var0, gamma1, var1}; ref_index is the 1-based reference level.
inline json to_json(const DoseResponseModel& m)
{
    return {{"schema_version", schema_version},
            {"link", std::string(to_string(m.link))},
            {"doses", m.grid.doses()},
            {"ref_index", m.grid.ref_level()},
            {"gamma0", m.prior.mean0},
            {"var0", m.prior.var0},
            {"gamma1", m.prior.mean1},
            {"var1", m.prior.var1}};
}

inline CoefficientPrior prior_from_json(const json& j)
{
    CoefficientPrior p{detail::field<double>(j, "gamma0"), detail::field<double>(j, "var0"),
                       detail::field<double>(j, "gamma1"), detail::field<double>(j, "var1")};
    p.validate();
    return p;
}

inline DoseResponseModel model_from_json(const json& j)
{
    const auto doses = detail::field<std::vector<double>>(j, "doses");
    const auto ref = detail::field<long long>(j, "ref_index");
    if (ref < 1) throw InvalidInput("ref_index must be a 1-based dose level");
    return DoseResponseModel(parse_link(detail::field<std::string>(j, "link")),
                             DoseGrid(doses, static_cast<std::size_t>(ref)), prior_from_json(j));
}

inline json to_json(const CohortEvent& e)
{
    return {{"cohort_index", e.cohort_index},
            {"dose_level", e.dose + 1},
            {"n", e.n},
            {"dlt", e.dlt},
            {"decision", std::string(to_string(e.decision))},
            {"eliminations", detail::levels(e.eliminations)},
            {"next_dose", e.next_dose + 1}};
}

inline CohortEvent cohort_event_from_json(const json& j, std::size_t J)
{
    CohortEvent e;
    e.cohort_index = detail::field<int>(j, "cohort_index");
    e.dose = detail::level_to_index(detail::field<long long>(j, "dose_level"), J, "dose_level");
    e.n = detail::field<int>(j, "n");
    e.dlt = detail::field<int>(j, "dlt");
    e.decision = parse_action(detail::field<std::string>(j, "decision"));
    for (auto lv : detail::field<std::vector<long long>>(j, "eliminations"))
        e.eliminations.push_back(detail::level_to_index(lv, J, "eliminations"));
    e.next_dose = detail::level_to_index(detail::field<long long>(j, "next_dose"), J, "next_dose");
    return e;
}

/// Per-dose counts of a trial, with the decision log when there is one.
inline json to_json(const TrialState& s)
{
    json doses = json::array();
    for (std::size_t j = 0; j < s.num_doses(); ++j)
        doses.push_back({{"level", j + 1}, {"n", s.n[j]}, {"m", s.m[j]}, {"eliminated", static_cast<bool>(s.eliminated[j])}});
    json events = json::array();
    for (const auto& e : s.events) events.push_back(to_json(e));
    return {{"schema_version", schema_version},
            {"status", std::string(to_string(s.status))},
            {"current_dose", s.current_dose + 1},
            {"cohorts_done", s.cohorts_done()},
            {"n", s.n},
            {"m", s.m},
            {"eliminated", json(std::vector<bool>(s.eliminated.begin(), s.eliminated.end()))},
            {"doses", std::move(doses)},
            {"events", std::move(events)}};
}

/// Final trial data from either {"events": [...]} (replayed through @p design)
/// or plain counts {"n": [...], "m": [...]}.
inline TrialState trial_data_from_json(const json& j, const TrialDesign& design, std::size_t J)
{
    if (j.contains("events") && !j["events"].empty()) {
        std::vector<CohortEvent> ev;
        for (const auto& e : j["events"]) ev.push_back(cohort_event_from_json(e, J));
        return replay(ev, design, J);
    }
    TrialState s(J);
    s.n = detail::field<std::vector<int>>(j, "n");
    s.m = detail::field<std::vector<int>>(j, "m");
    DoseData{s.n, s.m}.validate(J);
    if (j.contains("eliminated")) {
        const auto e = detail::field<std::vector<bool>>(j, "eliminated");
        if (e.size() != J) throw InvalidInput("eliminated has the wrong length");
        s.eliminated.assign(e.begin(), e.end());
    }
    s.status = parse_status(detail::field_or<std::string>(j, "status", "Completed"));
    return s;
}

inline json to_json(const PosteriorSummary& s)
{
    json est = json::array();
    json mean = json::array();
    for (double v : s.estimate) est.push_back(detail::nullable(v));
    for (double v : s.mean) mean.push_back(detail::nullable(v));
    return {{"estimate", std::move(est)},
            {"mean", std::move(mean)},
            {"acceptance_rate", detail::nullable(s.acceptance_rate)},
            {"effective_draws", detail::nullable(s.effective_draws)},
            {"warnings", s.warnings}};
}

inline json to_json(const IsotonicFit& f)
{
    json y = json::array();
    json p = json::array();
    for (double v : f.y_hat) y.push_back(detail::nullable(v));
    for (double v : f.p_hat) p.push_back(detail::nullable(v));
    return {{"y_hat", std::move(y)}, {"p_hat", std::move(p)},
            {"admissible", json(std::vector<bool>(f.admissible.begin(), f.admissible.end()))}};
}

inline json to_json(const QuantileTargets& t) { return {{"levels", t.levels}, {"values", t.values}}; }

/// Elicited prior: the model fields plus the audit trail of the fit.
inline json to_json(const DoseResponseModel& model, const ElicitedPrior& e, const ElicitationInput& in,
                    std::uint64_t seed)
{
    json j = to_json(model);
    j["loss"] = e.fit.loss;
    j["seed"] = seed;
    j["inputs"] = {{"p1", in.p1}, {"pJ", in.pJ}, {"phi", in.phi}};
    j["anchors"] = {{"mu1", e.trace.mu1}, {"muJ", e.trace.muJ}, {"beta0", e.trace.anchor_beta0},
                    {"beta1", e.trace.anchor_beta1}};
    j["target_quantiles"] = to_json(e.trace.targets);
    j["achieved_quantiles"] = {{"levels", e.trace.targets.levels}, {"values", e.fit.achieved}};
    j["restart_losses"] = e.fit.restart_losses;
    return j;
}

inline json to_json(const SimulationReport& r)
{
    return {{"schema_version", schema_version},
            {"scenario", r.scenario},
            {"method", r.method},
            {"selection", r.selection},
            {"none", r.none},
            {"overdose", r.overdose},
            {"mean_n", r.mean_n},
            {"mean_m", r.mean_m},
            {"reps", r.reps},
            {"seed", r.seed}};
}

} // namespace boin
