#pragma once

// In-trial state machine: cohort-by-cohort BOIN conduct with dose elimination
// and early stopping, plus replay of the decision log.

#include <algorithm>
#include <concepts>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "boin/design.hpp"
#include "boin/error.hpp"
#include "boin/rng.hpp"

namespace boin {

enum class TrialStatus { Running, StoppedAllEliminated, Completed };

inline std::string_view to_string(TrialStatus s)
{
    switch (s) {
    case TrialStatus::Running: return "Running";
    case TrialStatus::StoppedAllEliminated: return "StoppedAllEliminated";
    case TrialStatus::Completed: return "Completed";
    }
    return "?";
}

inline TrialStatus parse_status(std::string_view s)
{
    if (s == "Running") return TrialStatus::Running;
    if (s == "StoppedAllEliminated") return TrialStatus::StoppedAllEliminated;
    if (s == "Completed") return TrialStatus::Completed;
    throw InvalidInput("unknown trial status '" + std::string(s) + "'");
}

/// One entry of the decision log. Dose indices are zero-based.
struct CohortEvent {
    int cohort_index = 0;
    std::size_t dose = 0;
    int n = 0;   ///< patients in this cohort
    int dlt = 0; ///< DLTs in this cohort
    Action decision = Action::Retain;
    std::vector<std::size_t> eliminations;
    std::size_t next_dose = 0;

    friend bool operator==(const CohortEvent&, const CohortEvent&) = default;
};

struct Decision {
    Action action = Action::Retain;
    std::size_t next_dose = 0;
    std::vector<std::size_t> new_eliminations;
    TrialStatus status = TrialStatus::Running;
};

/// Cumulative per-dose data of a running trial. Mutated only by apply_cohort().
struct TrialState {
    std::vector<int> n;
    std::vector<int> m;
    std::vector<bool> eliminated;
    std::size_t current_dose = 0;
    TrialStatus status = TrialStatus::Running;
    std::vector<CohortEvent> events;

    TrialState() = default;
    explicit TrialState(std::size_t num_doses, std::size_t start_dose = 0)
        : n(num_doses, 0), m(num_doses, 0), eliminated(num_doses, false), current_dose(start_dose)
    {
        if (num_doses == 0) throw InvalidInput("trial needs at least one dose");
        if (start_dose >= num_doses) throw InvalidInput("start dose out of range");
    }

    [[nodiscard]] std::size_t num_doses() const noexcept { return n.size(); }
    [[nodiscard]] int cohorts_done() const noexcept { return static_cast<int>(events.size()); }
    [[nodiscard]] int total_patients() const
    {
        int t = 0;
        for (int v : n) t += v;
        return t;
    }

    friend bool operator==(const TrialState&, const TrialState&) = default;
};

/// Apply one cohort outcome at the current dose and move to the next dose.
///
/// Escalation never skips a level and never enters an eliminated dose. If the
/// current dose meets the elimination rule it and all higher doses are removed
/// and the trial moves down one level; if that happens at the lowest dose the
/// trial stops with no dose left.
inline Decision apply_cohort(TrialState& state, const TrialDesign& design, int patients, int dlt)
{
    if (state.status != TrialStatus::Running)
        throw StateError("cohort applied to a trial that is not running");
    if (patients < 1 || patients > design.cohort_size)
        throw InvalidInput("cohort must have between 1 and " + std::to_string(design.cohort_size)
                           + " patients");
    if (dlt < 0 || dlt > patients) throw InvalidInput("need 0 <= dlt <= cohort patients");

    const std::size_t d = state.current_dose;
    const std::size_t top = state.num_doses() - 1;
    state.n[d] += patients;
    state.m[d] += dlt;

    Decision out;
    if (check_elimination(state.n[d], state.m[d], design)) {
        for (std::size_t j = d; j <= top; ++j) {
            if (!state.eliminated[j]) {
                state.eliminated[j] = true;
                out.new_eliminations.push_back(j);
            }
        }
    }

    if (state.eliminated[d]) {
        out.action = Action::Deescalate;
        if (d == 0) {
            out.next_dose = 0;
            state.status = TrialStatus::StoppedAllEliminated;
        } else {
            out.next_dose = d - 1;
        }
    } else {
        out.action = decide(state.n[d], state.m[d], design);
        out.next_dose = d;
        if (out.action == Action::Escalate && d < top && !state.eliminated[d + 1]) out.next_dose = d + 1;
        if (out.action == Action::Deescalate && d > 0) out.next_dose = d - 1;
    }

    CohortEvent ev;
    ev.cohort_index = state.cohorts_done();
    ev.dose = d;
    ev.n = patients;
    ev.dlt = dlt;
    ev.decision = out.action;
    ev.eliminations = out.new_eliminations;
    ev.next_dose = out.next_dose;
    state.events.push_back(std::move(ev));

    state.current_dose = out.next_dose;
    if (state.status == TrialStatus::Running && state.cohorts_done() >= design.n_cohorts)
        state.status = TrialStatus::Completed;
    out.status = state.status;
    return out;
}

inline Decision apply_cohort(TrialState& state, const TrialDesign& design, int dlt)
{
    return apply_cohort(state, design, design.cohort_size, dlt);
}

/// Rebuild a trial from its decision log. Throws StateError when a recorded
/// decision does not match what the rule produces.
inline TrialState replay(std::span<const CohortEvent> events, const TrialDesign& design,
                         std::size_t num_doses)
{
    TrialState s(num_doses);
    for (const auto& ev : events) {
        if (ev.dose != s.current_dose)
            throw StateError("event " + std::to_string(ev.cohort_index) + " recorded at dose level "
                             + std::to_string(ev.dose + 1) + " but trial was at level "
                             + std::to_string(s.current_dose + 1));
        apply_cohort(s, design, ev.n, ev.dlt);
        if (!(s.events.back() == ev))
            throw StateError("event " + std::to_string(ev.cohort_index) + " does not replay");
    }
    return s;
}

/// Doses eligible for final MTD selection: treated, never eliminated, and not
/// removed by the end-of-trial safety screen (which scans upward and drops the
/// first failing dose together with every dose above it).
inline std::vector<bool> final_admissible(const TrialState& state, const TrialDesign& design)
{
    const std::size_t J = state.num_doses();
    std::vector<bool> adm(J, false);
    std::size_t screen_from = J;
    for (std::size_t j = 0; j < J; ++j) {
        if (check_elimination(state.n[j], state.m[j], design)) {
            screen_from = j;
            break;
        }
    }
    for (std::size_t j = 0; j < J; ++j)
        adm[j] = state.n[j] > 0 && !state.eliminated[j] && j < screen_from;
    return adm;
}

/// Which doses the model-based estimator may select. Treated: any dose with
/// n_j > 0, including doses removed by the elimination rule (this reproduces the
/// published operating characteristics). Admissible: the same set PAVA uses.
enum class CandidateSet { Treated, Admissible };

inline std::string_view to_string(CandidateSet c) { return c == CandidateSet::Treated ? "treated" : "admissible"; }

inline CandidateSet parse_candidate_set(std::string_view s)
{
    if (s == "treated") return CandidateSet::Treated;
    if (s == "admissible") return CandidateSet::Admissible;
    throw InvalidInput("unknown candidate set '" + std::string(s) + "' (expected treated or admissible)");
}

inline std::vector<bool> candidate_doses(const TrialState& state, const TrialDesign& design, CandidateSet set)
{
    if (set == CandidateSet::Admissible) return final_admissible(state, design);
    std::vector<bool> c(state.num_doses());
    for (std::size_t j = 0; j < c.size(); ++j) c[j] = state.n[j] > 0;
    return c;
}

/// Index minimising |estimate - phi| over admissible doses; ties go to the lower dose.
inline std::optional<std::size_t> closest_to_target(std::span<const double> estimates,
                                                    const std::vector<bool>& admissible, double phi)
{
    std::optional<std::size_t> best;
    double best_dist = 0.0;
    for (std::size_t j = 0; j < estimates.size() && j < admissible.size(); ++j) {
        if (!admissible[j]) continue;
        const double dist = std::abs(estimates[j] - phi);
        if (!best || dist < best_dist) {
            best = j;
            best_dist = dist;
        }
    }
    return best;
}

inline void validate_true_probs(std::span<const double> probs)
{
    if (probs.empty()) throw ScenarioError("scenario has no doses");
    for (std::size_t j = 0; j < probs.size(); ++j) {
        if (!(probs[j] >= 0.0 && probs[j] <= 1.0)) throw ScenarioError("true DLT probabilities must lie in [0, 1]");
        if (j > 0 && probs[j] < probs[j - 1]) throw ScenarioError("true DLT probabilities must be nondecreasing");
    }
}

/// Simulate the conduct phase only: binomial cohort outcomes at the current dose
/// until completion or early stop.
inline TrialState conduct_trial(const TrialDesign& design, std::span<const double> true_probs, Rng& rng)
{
    validate_true_probs(true_probs);
    TrialState s(true_probs.size());
    while (s.status == TrialStatus::Running) {
        const int dlt = rng.binomial(design.cohort_size, true_probs[s.current_dose]);
        apply_cohort(s, design, dlt);
    }
    return s;
}

/// A terminal estimator maps final trial data to a selected dose (or none).
template <class F>
concept TerminalEstimator = requires(F f, const TrialState& s) {
    { f(s) } -> std::convertible_to<std::optional<std::size_t>>;
};

struct TrialRecord {
    TrialState state;
    std::optional<std::size_t> selected;
};

template <TerminalEstimator Estimator>
TrialRecord run_trial(const TrialDesign& design, std::span<const double> true_probs, Estimator&& estimator,
                      Rng& rng)
{
    TrialRecord rec{conduct_trial(design, true_probs, rng), std::nullopt};
    if (rec.state.status == TrialStatus::Completed) rec.selected = estimator(rec.state);
    return rec;
}

} // namespace boin
