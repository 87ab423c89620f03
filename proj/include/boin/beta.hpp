#pragma once

// Regularized incomplete beta function and Beta tail probabilities.

#include <cmath>
#include <limits>

#include "boin/error.hpp"

namespace boin {

namespace detail {

// Continued fraction for I_x(a, b), modified Lentz. Converges fast for x < (a+1)/(a+b+2).
inline double ibeta_cf(double a, double b, double x)
{
    constexpr int max_iter = 500;
    constexpr double eps = 1e-16;
    constexpr double tiny = 1e-300;

    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_iter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < eps) return h;
    }
    throw NumericalError("incomplete beta continued fraction did not converge");
}

inline double ibeta_front(double a, double b, double x)
{
    const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b)
        + a * std::log(x) + b * std::log1p(-x);
    return std::exp(log_front);
}

} // namespace detail

/// Regularized incomplete beta I_x(a, b) = P(X <= x) for X ~ Beta(a, b).
inline double beta_cdf(double x, double a, double b)
{
    if (!(a > 0.0) || !(b > 0.0)) throw InvalidInput("beta_cdf: shapes must be positive");
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return detail::ibeta_front(a, b, x) * detail::ibeta_cf(a, b, x) / a;
    }
    return 1.0 - detail::ibeta_front(a, b, x) * detail::ibeta_cf(b, a, 1.0 - x) / b;
}

/// Upper tail P(X > x) for X ~ Beta(a, b), evaluated without cancellation.
inline double beta_sf(double x, double a, double b)
{
    if (!(a > 0.0) || !(b > 0.0)) throw InvalidInput("beta_sf: shapes must be positive");
    if (x <= 0.0) return 1.0;
    if (x >= 1.0) return 0.0;
    // P(X > x) = I_{1-x}(b, a)
    const double y = 1.0 - x;
    if (y < (b + 1.0) / (a + b + 2.0)) {
        return detail::ibeta_front(b, a, y) * detail::ibeta_cf(b, a, y) / b;
    }
    return 1.0 - detail::ibeta_front(a, b, x) * detail::ibeta_cf(a, b, x) / a;
}

} // namespace boin
