// SPDX-License-Identifier: Apache-2.0
//
// Special functions used by the closed-form SNR distribution and rate bounds.

#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include <boost/math/special_functions/gamma.hpp>

namespace irslab {

/// Raised when a special function is called outside its domain.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

namespace specfun {

namespace detail {
inline void check_not_nan(const char* name, double x) {
    if (std::isnan(x)) throw DomainError(std::string(name) + ": argument is NaN");
}
}  // namespace detail

inline double erf(double x) {
    detail::check_not_nan("erf", x);
    return std::erf(x);
}

inline double erfc(double x) {
    detail::check_not_nan("erfc", x);
    return std::erfc(x);
}

/// Scaled complementary error function exp(x^2) erfc(x), for x >= 0.
///
/// The direct product overflows long before erfc underflows, so large
/// arguments switch to the asymptotic series; at x >= 26 the first omitted
/// term is below 1e-15 relative.
inline double erfcx(double x) {
    if (!(x >= 0.0)) throw DomainError("erfcx: argument must be non-negative");
    if (x < 26.0) return std::exp(x * x) * std::erfc(x);
    const double inv2 = 1.0 / (2.0 * x * x);
    double term = 1.0;
    double sum = 1.0;
    for (int k = 1; k <= 6; ++k) {
        term *= -(2.0 * k - 1.0) * inv2;
        sum += term;
    }
    return sum / (x * std::sqrt(std::numbers::pi));
}

/// Gaussian tail probability Q(x) = P(Z > x).
inline double gaussian_q(double x) {
    detail::check_not_nan("gaussian_q", x);
    return 0.5 * std::erfc(x / std::numbers::sqrt2);
}

inline double gamma_fn(double t) {
    if (!(t > 0.0)) throw DomainError("gamma_fn: argument must be positive, got " + std::to_string(t));
    return std::tgamma(t);
}

namespace detail {

inline void check_incomplete_args(const char* name, double s, double x) {
    if (!(s > 0.0) || !(x >= 0.0) || !std::isfinite(s) || std::isnan(x)) {
        throw DomainError(std::string(name) + ": requires s > 0 and x >= 0 (s=" + std::to_string(s) +
                          ", x=" + std::to_string(x) + ")");
    }
}
}  // namespace detail

/// Lower incomplete gamma: integral of t^(s-1) e^-t over [0, x].
inline double lower_inc_gamma(double s, double x) {
    detail::check_incomplete_args("lower_inc_gamma", s, x);
    if (x == 0.0) return 0.0;
    if (std::isinf(x)) return gamma_fn(s);
    return boost::math::tgamma_lower(s, x);
}

/// Upper incomplete gamma: integral of t^(s-1) e^-t over [x, inf).
inline double upper_inc_gamma(double s, double x) {
    detail::check_incomplete_args("upper_inc_gamma", s, x);
    if (x == 0.0) return gamma_fn(s);
    if (std::isinf(x)) return 0.0;
    return boost::math::tgamma(s, x);
}

/// Twice the one-sided Gaussian moment integral of t^m e^{-t^2} over [t, inf).
///
///   t > 0 or m odd:  upper_inc_gamma((m+1)/2, t^2)
///   t <= 0, m even:  lower_inc_gamma((m+1)/2, t^2) + Gamma((m+1)/2)
///
/// For odd m the integrand is odd, so [t, -t] contributes nothing; taking
/// Gamma - lower_inc_gamma instead would cancel catastrophically for t << 0.
inline double i_kernel(unsigned m, double t) {
    if (!std::isfinite(t)) throw DomainError("i_kernel: t must be finite");
    const double s = 0.5 * (static_cast<double>(m) + 1.0);
    const double t2 = t * t;
    if (t <= 0.0 && m % 2 == 0) return lower_inc_gamma(s, t2) + gamma_fn(s);
    return upper_inc_gamma(s, t2);
}

}  // namespace specfun
}  // namespace irslab
