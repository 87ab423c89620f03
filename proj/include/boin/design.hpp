#pragma once

// BOIN interval boundaries, the escalation/de-escalation rule and the
// dose-elimination safety screen.

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "boin/beta.hpp"
#include "boin/error.hpp"

namespace boin {

/// Ordered dose amounts with a reference dose d*.
///
/// Indices are zero-based in the C++ API. External interfaces (JSON, CLI,
/// HTTP) use one-based dose levels.
class DoseGrid {
public:
    DoseGrid() = default;

    /// @p ref_level is one-based, as written in trial protocols.
    DoseGrid(std::vector<double> doses, std::size_t ref_level)
        : doses_(std::move(doses)), ref_(ref_level - 1)
    {
        if (doses_.size() < 2) throw InvalidInput("dose grid needs at least two doses");
        for (std::size_t j = 0; j < doses_.size(); ++j) {
            if (!(doses_[j] > 0.0) || !std::isfinite(doses_[j]))
                throw InvalidInput("doses must be positive and finite");
            if (j > 0 && !(doses_[j] > doses_[j - 1]))
                throw InvalidInput("doses must be strictly increasing");
        }
        if (ref_level < 1 || ref_level > doses_.size())
            throw InvalidInput("reference dose level out of range");
    }

    [[nodiscard]] std::size_t size() const noexcept { return doses_.size(); }
    [[nodiscard]] const std::vector<double>& doses() const noexcept { return doses_; }
    [[nodiscard]] double operator[](std::size_t j) const { return doses_.at(j); }
    [[nodiscard]] std::size_t ref_index() const noexcept { return ref_; }
    [[nodiscard]] std::size_t ref_level() const noexcept { return ref_ + 1; }
    [[nodiscard]] double ref_dose() const { return doses_.at(ref_); }

    /// log(d_j / d*), the covariate of the dose-response model.
    [[nodiscard]] std::vector<double> log_relative() const
    {
        std::vector<double> out(doses_.size());
        for (std::size_t j = 0; j < doses_.size(); ++j) out[j] = std::log(doses_[j] / ref_dose());
        return out;
    }

    friend bool operator==(const DoseGrid&, const DoseGrid&) = default;

private:
    std::vector<double> doses_;
    std::size_t ref_ = 0;
};

/// The six-level modified Fibonacci grid (10, 20, 30, 45, 60, 80 mg) with d* = d3.
inline DoseGrid standard_grid(std::size_t ref_level = 3)
{
    return DoseGrid({10.0, 20.0, 30.0, 45.0, 60.0, 80.0}, ref_level);
}

struct Boundaries {
    double lambda_e; ///< escalate when the observed rate is at or below this
    double lambda_d; ///< de-escalate when the observed rate is at or above this
};

inline void validate_probes(double phi, double phi1, double phi2)
{
    if (!(0.0 < phi1 && phi1 < phi && phi < phi2 && phi2 < 1.0)) {
        throw InvalidDesign("need 0 < phi1 < phi < phi2 < 1 (got phi1=" + std::to_string(phi1)
                            + ", phi=" + std::to_string(phi) + ", phi2=" + std::to_string(phi2) + ")");
    }
}

/// Optimal local-BOIN interval boundaries under equal prior weight on the three
/// point hypotheses p = phi1, phi, phi2.
inline Boundaries compute_boundaries(double phi, double phi1, double phi2)
{
    validate_probes(phi, phi1, phi2);
    const double le = std::log((1.0 - phi1) / (1.0 - phi))
        / std::log(phi * (1.0 - phi1) / (phi1 * (1.0 - phi)));
    const double ld = std::log((1.0 - phi) / (1.0 - phi2))
        / std::log(phi2 * (1.0 - phi) / (phi * (1.0 - phi2)));
    return {le, ld};
}

struct DesignParams {
    double phi = 0.3;
    std::optional<double> phi1;  ///< defaults to 0.6 * phi
    std::optional<double> phi2;  ///< defaults to 1.4 * phi
    int cohort_size = 3;
    int n_cohorts = 12;
    double elim_threshold = 0.95;
    int elim_min_n = 3;
};

/// Immutable trial design with derived boundaries.
struct TrialDesign {
    double phi = 0.3;
    double phi1 = 0.18;
    double phi2 = 0.42;
    int cohort_size = 3;
    int n_cohorts = 12;
    double elim_threshold = 0.95;
    int elim_min_n = 3;
    double lambda_e = 0.0;
    double lambda_d = 1.0;

    static TrialDesign make(const DesignParams& p = {})
    {
        TrialDesign d;
        d.phi = p.phi;
        d.phi1 = p.phi1.value_or(0.6 * p.phi);
        d.phi2 = p.phi2.value_or(1.4 * p.phi);
        d.cohort_size = p.cohort_size;
        d.n_cohorts = p.n_cohorts;
        d.elim_threshold = p.elim_threshold;
        d.elim_min_n = p.elim_min_n;
        if (d.cohort_size < 1) throw InvalidDesign("cohort_size must be >= 1");
        if (d.n_cohorts < 1) throw InvalidDesign("n_cohorts must be >= 1");
        if (!(d.elim_threshold > 0.0 && d.elim_threshold < 1.0))
            throw InvalidDesign("elim_threshold must lie in (0, 1)");
        if (d.elim_min_n < 1) throw InvalidDesign("elim_min_n must be >= 1");
        const auto b = compute_boundaries(d.phi, d.phi1, d.phi2);
        d.lambda_e = b.lambda_e;
        d.lambda_d = b.lambda_d;
        return d;
    }

    [[nodiscard]] int max_patients() const noexcept { return cohort_size * n_cohorts; }
};

enum class Action { Escalate, Retain, Deescalate };

inline std::string_view to_string(Action a)
{
    switch (a) {
    case Action::Escalate: return "Escalate";
    case Action::Retain: return "Retain";
    case Action::Deescalate: return "Deescalate";
    }
    return "?";
}

inline Action parse_action(std::string_view s)
{
    if (s == "Escalate") return Action::Escalate;
    if (s == "Retain") return Action::Retain;
    if (s == "Deescalate") return Action::Deescalate;
    throw InvalidInput("unknown action '" + std::string(s) + "'");
}

/// Interval rule on the observed DLT rate at the current dose. Both comparisons
/// are inclusive.
inline Action decide(int n, int m, const TrialDesign& design)
{
    if (n <= 0) throw NoData("decide: no patients treated at this dose");
    if (m < 0 || m > n) throw InvalidInput("decide: need 0 <= m <= n");
    const double rate = static_cast<double>(m) / n;
    if (rate <= design.lambda_e) return Action::Escalate;
    if (rate >= design.lambda_d) return Action::Deescalate;
    return Action::Retain;
}

struct RuleRow {
    int n;              ///< cumulative patients at the current dose
    int escalate_max;   ///< escalate if m <= this (may be -1: never)
    int deescalate_min; ///< de-escalate if m >= this (may exceed n: never)
};

/// Count form of the interval rule for n = 1..max_n.
///
/// Counts are found by scanning m against decide() so that the table can never
/// disagree with the rate comparison through floating-point rounding of n*lambda.
inline std::vector<RuleRow> decision_table(const TrialDesign& design, int max_n)
{
    if (max_n < design.cohort_size) throw InvalidInput("decision_table: max_n < cohort_size");
    std::vector<RuleRow> rows;
    rows.reserve(static_cast<std::size_t>(max_n));
    for (int n = 1; n <= max_n; ++n) {
        int lo = -1;
        int hi = n + 1;
        for (int m = 0; m <= n; ++m) {
            const Action a = decide(n, m, design);
            if (a == Action::Escalate) lo = m;
            if (a == Action::Deescalate && hi == n + 1) hi = m;
        }
        if (hi == n + 1) hi = static_cast<int>(std::ceil(n * design.lambda_d));
        rows.push_back({n, lo, hi});
    }
    return rows;
}

/// Posterior probability that the DLT rate exceeds @p phi under a Beta(1, 1)
/// prior: P(p > phi | m of n).
inline double prob_exceeds(int n, int m, double phi)
{
    return beta_sf(phi, 1.0 + m, 1.0 + (n - m));
}

/// True when the dose (and every higher one) must be removed from the trial.
inline bool check_elimination(int n, int m, double phi, double threshold, int min_n)
{
    if (m < 0 || m > n) throw InvalidInput("check_elimination: need 0 <= m <= n");
    if (n < min_n) return false;
    return prob_exceeds(n, m, phi) > threshold;
}

inline bool check_elimination(int n, int m, const TrialDesign& design)
{
    return check_elimination(n, m, design.phi, design.elim_threshold, design.elim_min_n);
}

} // namespace boin
