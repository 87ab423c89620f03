#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <string_view>
#include <utility>

#include "boin/error.hpp"

namespace boin {

enum class Link { Logit, LogLog, CLogLog };

/// Probabilities are kept inside [prob_floor, 1 - prob_floor] so that log(0)
/// never occurs for extreme linear predictors.
inline constexpr double prob_floor = 1e-12;

inline std::string_view to_string(Link l)
{
    switch (l) {
    case Link::Logit: return "logit";
    case Link::LogLog: return "loglog";
    case Link::CLogLog: return "cloglog";
    }
    return "?";
}

inline Link parse_link(std::string_view s)
{
    if (s == "logit") return Link::Logit;
    if (s == "loglog" || s == "log-log") return Link::LogLog;
    if (s == "cloglog" || s == "clog-log") return Link::CLogLog;
    throw InvalidInput("unknown link '" + std::string(s) + "' (expected logit, loglog or cloglog)");
}

/// g(p): logit, -log(-log p), log(-log(1 - p)).
inline double link_forward(Link l, double p)
{
    switch (l) {
    case Link::Logit: return std::log(p) - std::log1p(-p);
    case Link::LogLog: return -std::log(-std::log(p));
    case Link::CLogLog: return std::log(-std::log1p(-p));
    }
    return 0.0;
}

/// g^{-1}(x) without the safety clamp.
inline double link_inverse_raw(Link l, double x)
{
    switch (l) {
    case Link::Logit: return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    case Link::LogLog: return std::exp(-std::exp(-x));
    case Link::CLogLog: return -std::expm1(-std::exp(x));
    }
    return 0.5;
}

inline double link_inverse(Link l, double x)
{
    return std::clamp(link_inverse_raw(l, x), prob_floor, 1.0 - prob_floor);
}

/// (log pi, log(1 - pi)) at linear predictor x, each computed in the form that
/// avoids cancellation and floored at log(prob_floor).
inline std::pair<double, double> link_log_probs(Link l, double x)
{
    double lp = 0.0;
    double lq = 0.0;
    switch (l) {
    case Link::Logit:
        // log pi = -log(1 + e^-x), log(1 - pi) = -log(1 + e^x)
        if (x >= 0.0) {
            lp = -std::log1p(std::exp(-x));
            lq = -x - std::log1p(std::exp(-x));
        } else {
            lp = x - std::log1p(std::exp(x));
            lq = -std::log1p(std::exp(x));
        }
        break;
    case Link::LogLog: {
        const double e = std::exp(-x);
        lp = -e;
        lq = std::log(-std::expm1(-e));
        break;
    }
    case Link::CLogLog: {
        const double e = std::exp(x);
        lq = -e;
        lp = std::log(-std::expm1(-e));
        break;
    }
    }
    static const double log_floor = std::log(prob_floor);
    return {std::max(lp, log_floor), std::max(lq, log_floor)};
}

} // namespace boin
