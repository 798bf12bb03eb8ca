// SPDX-License-Identifier: Apache-2.0
//
// Closed-form statistics of the co-phased SNR.
//
// The IRS term Y = sum_n beta_n lambda_g_n lambda_h_n is replaced by a
// one-sided Gaussian Ytilde (a normal with the exact mean and variance of Y,
// truncated to y >= 0 and renormalised by psi). Everything below is exact for
// Rtilde = lambda_u + Ytilde and gamma = gbar Rtilde^2.
//
// Two formula variants are available:
//
//  * FormulaMode::Rederived (default) evaluates the exact convolution of the
//    Rayleigh direct envelope with the truncated Gaussian, and uses
//    E[lambda_u^2] = 2 xi_u in the rate bounds.
//  * FormulaMode::AsPrinted transcribes the published closed forms verbatim,
//    including constants that disagree with their own derivations (the
//    exponent scaling of the PDF's second term, Delta, the CDF's I_a/I_b
//    terms, xi_u + mu_u^2 in place of E[lambda_u^2], and the Gaussian
//    moment-integral limit). These values are for side-by-side inspection
//    only and are not guaranteed to be valid probabilities.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>

#include <boost/math/special_functions/expint.hpp>
#include <boost/math/tools/roots.hpp>

#include "irslab/channel.hpp"
#include "irslab/snr.hpp"
#include "irslab/specfun.hpp"

namespace irslab {

enum class FormulaMode { AsPrinted, Rederived };

inline std::string_view to_string(FormulaMode mode) {
    return mode == FormulaMode::AsPrinted ? "as-printed" : "rederived";
}

inline FormulaMode parse_formula_mode(std::string_view text) {
    if (text == "as-printed") return FormulaMode::AsPrinted;
    if (text == "rederived") return FormulaMode::Rederived;
    throw std::invalid_argument("unknown formula mode '" + std::string(text) + "' (expected as-printed|rederived)");
}

/// Moments and derived constants shared by all closed forms.
struct CltMoments {
    double mu_y = 0.0;      // E[Y]
    double sigma2_y = 0.0;  // Var[Y]
    double psi = 1.0;       // 1 / Q(-mu_y / sigma_y)
    double mu_u = 0.0;      // E[lambda_u] = sqrt(pi xi_u / 2)
    double xi_u = 0.0;
    double a = 0.0;         // 1/(2 xi_u) + 1/(2 sigma2_y)
    double rho = 0.0;       // psi / (2 a xi_u sqrt(2 pi sigma2_y))
    double delta = 0.0;     // Delta as printed: (1 - 1/(2 sigma2_y)) 2 sigma2_y a
    double lambda_c = 0.0;  // 2 sigma2_y rho sqrt(pi a)

    double sigma_y() const { return std::sqrt(sigma2_y); }

    /// Exponent constant of the exact convolution, 2 a sigma2_y - 1.
    double exact_delta() const { return sigma2_y / xi_u; }
};

inline CltMoments make_clt_moments(double xi_u, double mu_y, double sigma2_y) {
    if (!(xi_u > 0.0) || !std::isfinite(xi_u)) throw std::invalid_argument("clt moments: xi_u must be positive");
    if (!(sigma2_y > 0.0) || !std::isfinite(sigma2_y))
        throw std::invalid_argument("clt moments: sigma2_y must be positive (no active IRS element)");
    if (!(mu_y >= 0.0) || !std::isfinite(mu_y)) throw std::invalid_argument("clt moments: mu_y must be >= 0");
    CltMoments m;
    m.xi_u = xi_u;
    m.mu_y = mu_y;
    m.sigma2_y = sigma2_y;
    m.psi = 1.0 / specfun::gaussian_q(-mu_y / std::sqrt(sigma2_y));
    m.mu_u = std::sqrt(std::numbers::pi * xi_u / 2.0);
    m.a = 1.0 / (2.0 * xi_u) + 1.0 / (2.0 * sigma2_y);
    m.rho = m.psi / (2.0 * m.a * xi_u * std::sqrt(2.0 * std::numbers::pi * sigma2_y));
    m.delta = (1.0 - 1.0 / (2.0 * sigma2_y)) * 2.0 * sigma2_y * m.a;
    m.lambda_c = 2.0 * sigma2_y * m.rho * std::sqrt(std::numbers::pi * m.a);
    return m;
}

/// Moments of Y for the given gains and reflection amplitudes. Needs N >= 1.
inline CltMoments clt_moments(const LinkGains& gains, const ReflectionConfig& cfg) {
    if (cfg.element_count() == 0)
        throw std::invalid_argument("clt_moments: no IRS elements; use the direct-link formulas");
    cfg.validate();
    const double prod = gains.xi_g * gains.xi_h;
    double mu = 0.0;
    double var = 0.0;
    for (double b : cfg.beta) {
        mu += std::numbers::pi * b * std::sqrt(prod) / 2.0;
        var += b * b * prod * (16.0 - std::numbers::pi * std::numbers::pi) / 4.0;
    }
    return make_clt_moments(gains.xi_u, mu, var);
}

/// Density of the one-sided Gaussian Ytilde.
inline double pdf_Y(double y, const CltMoments& m) {
    if (y < 0.0) return 0.0;
    const double z = y - m.mu_y;
    return m.psi / std::sqrt(2.0 * std::numbers::pi * m.sigma2_y) * std::exp(-z * z / (2.0 * m.sigma2_y));
}

inline double cdf_Y(double y, const CltMoments& m) {
    if (y <= 0.0) return 0.0;
    const double s = m.sigma_y();
    if (y >= m.mu_y) return 1.0 - m.psi * specfun::gaussian_q((y - m.mu_y) / s);
    return m.psi * (specfun::gaussian_q((m.mu_y - y) / s) - specfun::gaussian_q(m.mu_y / s));
}

namespace detail {

// exp(-delta d^2) (erf(d) + erf(z)) for z + d >= 0, without cancellation or
// overflow in the tails.
inline double damped_erf_sum(double delta, double d, double z) {
    if (d >= 0.0 && z >= 0.0) return std::exp(-delta * d * d) * (std::erf(d) + std::erf(z));
    if (d < 0.0) {
        return std::exp(-(delta + 1.0) * d * d) * specfun::erfcx(-d) -
               std::exp(-delta * d * d - z * z) * specfun::erfcx(z);
    }
    return std::exp(-delta * d * d - z * z) * specfun::erfcx(-z) -
           std::exp(-(delta + 1.0) * d * d) * specfun::erfcx(d);
}

// erf(p) + erf(q) with q >= 0 and p + q >= 0.
inline double erf_sum(double p, double q) {
    if (p >= 0.0) return std::erf(p) + std::erf(q);
    return std::erfc(-p) - std::erfc(q);
}

}  // namespace detail

/// Density of Rtilde = lambda_u + Ytilde.
inline double pdf_R(double x, const CltMoments& m, FormulaMode mode = FormulaMode::Rederived) {
    if (!(x > 0.0)) return 0.0;
    const double c = x - m.mu_y;
    const double sqrt_a = std::sqrt(m.a);
    const double d = c / (2.0 * m.sigma2_y * sqrt_a);
    if (mode == FormulaMode::AsPrinted) {
        const double e = c / (2.0 * m.sigma2_y);
        return std::sqrt(std::numbers::pi) * m.rho * d * std::exp(-m.delta * d * d) * (std::erf(d) + 1.0) +
               m.rho * std::exp(-e * e);
    }
    // The convolution runs over u in [0, x] because Ytilde >= 0.
    const double gauss = std::exp(-c * c / (2.0 * m.sigma2_y));
    const double edge = std::exp(-x * x / (2.0 * m.xi_u) - m.mu_y * m.mu_y / (2.0 * m.sigma2_y));
    const double z = sqrt_a * x - d;
    const double tail = std::sqrt(std::numbers::pi) * m.rho * d * detail::damped_erf_sum(m.exact_delta(), d, z);
    return std::max(0.0, m.rho * (gauss - edge) + tail);
}

/// CDF of Rtilde.
inline double cdf_R(double x, const CltMoments& m, FormulaMode mode = FormulaMode::Rederived) {
    if (!(x > 0.0)) return 0.0;
    if (mode == FormulaMode::AsPrinted) {
        const double c = x - m.mu_y;
        const double d = c / (2.0 * m.sigma2_y * std::sqrt(m.a));
        const double dl = m.delta;
        const double ia = m.lambda_c * std::exp(-dl * d) * std::erf(d + 1.0) / (2.0 * dl) +
                          m.lambda_c * (1.0 - std::erf(d * std::sqrt(dl + 1.0))) / (2.0 * dl * std::sqrt(dl + 1.0));
        const double ib = std::sqrt(std::numbers::pi * m.sigma2_y / 2.0) * m.rho *
                          (1.0 - std::erf(std::sqrt(2.0 * m.sigma_y() * m.a) * d));
        return 1.0 - (ia + ib);
    }
    if (std::isinf(x)) return 1.0;
    // P(lambda_u + Y <= x) = P(Y <= x) - E[exp(-(x - Y)^2 / (2 xi_u)); Y <= x].
    // The second term is a Gaussian integral over y in [0, x].
    const double xi = m.xi_u;
    const double s2 = m.sigma2_y;
    const double c = x - m.mu_y;
    const double sqrt_a = std::sqrt(m.a);
    const double p = sqrt_a * xi * c / (s2 + xi);
    const double q = sqrt_a * (m.mu_y * xi + x * s2) / (s2 + xi);
    const double scale = 0.5 * m.psi * std::sqrt(xi / (xi + s2)) * std::exp(-c * c / (2.0 * (xi + s2)));
    const double value = cdf_Y(x, m) - scale * detail::erf_sum(p, q);
    return std::clamp(value, 0.0, 1.0);
}

/// Distribution of the approximated co-phased SNR gbar * Rtilde^2.
struct SnrDistribution {
    CltMoments moments;
    double gbar = 1.0;  // linear
    FormulaMode mode = FormulaMode::Rederived;

    SnrDistribution() = default;
    SnrDistribution(const CltMoments& m, double gbar_linear, FormulaMode formula = FormulaMode::Rederived)
        : moments(m), gbar(gbar_linear), mode(formula) {
        if (!(gbar > 0.0) || !std::isfinite(gbar)) throw std::invalid_argument("snr distribution: gbar must be positive");
    }
};

inline double pdf_snr(double y, const SnrDistribution& d) {
    if (!(y >= 0.0)) throw std::invalid_argument("pdf_snr: y must be >= 0");
    if (y == 0.0) {
        // The exact density vanishes like y^(1/2) at the origin.
        return d.mode == FormulaMode::Rederived ? 0.0 : std::numeric_limits<double>::infinity();
    }
    return pdf_R(std::sqrt(y / d.gbar), d.moments, d.mode) / (2.0 * std::sqrt(d.gbar * y));
}

inline double cdf_snr(double y, const SnrDistribution& d) {
    if (!(y >= 0.0)) throw std::invalid_argument("cdf_snr: y must be >= 0");
    return cdf_R(std::sqrt(y / d.gbar), d.moments, d.mode);
}

/// P(gamma <= gamma_th).
inline double outage(double gamma_th, const SnrDistribution& d) { return cdf_snr(gamma_th, d); }

/// E[lambda_u^n] = (2 xi_u)^(n/2) Gamma(n/2 + 1).
inline double moment_lambda_u(unsigned n, double xi_u) {
    if (!(xi_u > 0.0)) throw std::invalid_argument("moment_lambda_u: xi_u must be positive");
    return std::pow(2.0 * xi_u, n / 2.0) * specfun::gamma_fn(n / 2.0 + 1.0);
}

/// E[Ytilde^n] for n <= 4, by binomial expansion over one-sided Gaussian
/// moment integrals.
inline double moment_Y_trunc(unsigned n, const CltMoments& m, FormulaMode mode = FormulaMode::Rederived) {
    if (n > 4) throw std::invalid_argument("moment_Y_trunc: n must be in 0..4");
    static constexpr std::array<std::array<double, 5>, 5> binom{{
        {1, 0, 0, 0, 0}, {1, 1, 0, 0, 0}, {1, 2, 1, 0, 0}, {1, 3, 3, 1, 0}, {1, 4, 6, 4, 1}}};
    const double lower = mode == FormulaMode::Rederived ? -m.mu_y / std::sqrt(2.0 * m.sigma2_y)
                                                        : -m.mu_y / (2.0 * m.sigma2_y);
    double sum = 0.0;
    for (unsigned i = 0; i <= n; ++i) {
        sum += binom[n][i] * std::pow(2.0 * m.sigma2_y, (n - i) / 2.0) * std::pow(m.mu_y, static_cast<double>(i)) *
               specfun::i_kernel(n - i, lower);
    }
    return m.psi / (2.0 * std::sqrt(std::numbers::pi)) * sum;
}

namespace detail {

// E[Rtilde^k] for k in {2, 4} from the independent-sum binomial expansion.
inline double moment_R_trunc(unsigned k, const CltMoments& m) {
    static constexpr std::array<double, 5> binom4{1, 4, 6, 4, 1};
    static constexpr std::array<double, 3> binom2{1, 2, 1};
    double sum = 0.0;
    for (unsigned i = 0; i <= k; ++i) {
        const double c = k == 4 ? binom4[i] : binom2[i];
        sum += c * moment_lambda_u(k - i, m.xi_u) * moment_Y_trunc(i, m);
    }
    return sum;
}

}  // namespace detail

/// E[gbar R^2].
inline double mean_snr(const SnrDistribution& d) {
    const auto& m = d.moments;
    const double cross = m.sigma2_y + 2.0 * m.mu_u * m.mu_y + m.mu_y * m.mu_y;
    if (d.mode == FormulaMode::AsPrinted) return d.gbar * (m.xi_u + m.mu_u * m.mu_u + cross);
    return d.gbar * (2.0 * m.xi_u + cross);
}

/// Jensen upper bound log2(1 + E[gamma]).
inline double rate_upper(const SnrDistribution& d) { return std::log2(1.0 + mean_snr(d)); }

/// Jensen lower bound log2(1 + 1 / E[1/gamma]), with E[1/gamma] expanded to
/// second order as 1/E[gamma] + Var[gamma]/E[gamma]^3.
inline double rate_lower(const SnrDistribution& d) {
    const auto& m = d.moments;
    if (d.mode == FormulaMode::AsPrinted) {
        const double second = m.xi_u + m.sigma2_y + 2.0 * m.mu_u * m.mu_y + m.mu_u * m.mu_u + m.mu_y * m.mu_y;
        static constexpr std::array<double, 5> binom4{1, 4, 6, 4, 1};
        double fourth = 0.0;
        for (unsigned n = 0; n <= 4; ++n)
            fourth += binom4[n] * moment_lambda_u(n, m.xi_u) * moment_Y_trunc(n, m, FormulaMode::AsPrinted);
        return std::log2(1.0 + d.gbar * second * second * second / fourth);
    }
    const double second = detail::moment_R_trunc(2, m);
    const double fourth = detail::moment_R_trunc(4, m);
    return std::log2(1.0 + d.gbar * second * second * second / fourth);
}

/// Jensen upper bound when each phase carries an independent error uniform
/// on [-tau, tau), tau = pi / 2^B.
inline double rate_upper_quantized(const SnrDistribution& d, int bits) {
    if (bits < 1) throw std::invalid_argument("rate_upper_quantized: bits must be >= 1");
    const auto& m = d.moments;
    const double tau = std::numbers::pi / std::ldexp(1.0, bits);
    const double sinc = std::sin(tau) / tau;
    const double pi2 = std::numbers::pi * std::numbers::pi;
    const double direct = d.mode == FormulaMode::AsPrinted ? m.xi_u : 2.0 * m.xi_u;
    const double coherent = m.mu_y * sinc * (2.0 * m.mu_u + m.mu_y * sinc);
    const double scatter = 4.0 * m.sigma2_y / (16.0 - pi2) * (4.0 - pi2 * sinc * sinc / 4.0);
    return std::log2(1.0 + d.gbar * (direct + coherent + scatter));
}

/// Transmit SNR (linear) at which the outage probability equals `target`.
inline double gbar_for_outage(double target, double gamma_th, const CltMoments& m,
                              FormulaMode mode = FormulaMode::Rederived) {
    if (!(target > 0.0 && target < 1.0)) throw std::invalid_argument("gbar_for_outage: target must be in (0, 1)");
    if (!(gamma_th > 0.0)) throw std::invalid_argument("gbar_for_outage: gamma_th must be positive");
    double hi = m.mu_y + m.mu_u + 1.0;
    while (cdf_R(hi, m, mode) < target) hi *= 2.0;
    double lo = 0.0;
    std::uintmax_t iterations = 200;
    const auto root = boost::math::tools::toms748_solve(
        [&](double x) { return cdf_R(x, m, mode) - target; }, lo, hi, -target, cdf_R(hi, m, mode) - target,
        boost::math::tools::eps_tolerance<double>(50), iterations);
    const double x = 0.5 * (root.first + root.second);
    return gamma_th / (x * x);
}

// Direct link only (no IRS): lambda_u^2 is exponential with mean 2 xi_u.

inline double direct_cdf_snr(double y, double xi_u, double gbar) {
    if (!(y >= 0.0)) throw std::invalid_argument("direct_cdf_snr: y must be >= 0");
    return -std::expm1(-y / (2.0 * xi_u * gbar));
}

inline double direct_mean_snr(double xi_u, double gbar) { return 2.0 * xi_u * gbar; }

inline double direct_rate_upper(double xi_u, double gbar) { return std::log2(1.0 + direct_mean_snr(xi_u, gbar)); }

/// E[log2(1 + gamma)] for exponential gamma with mean c: e^(1/c) E1(1/c) / ln 2.
inline double direct_rate_exact(double xi_u, double gbar) {
    const double z = 1.0 / direct_mean_snr(xi_u, gbar);
    double scaled;
    if (z < 50.0) {
        scaled = std::exp(z) * boost::math::expint(1, z);
    } else {
        // e^z E1(z) ~ (1/z) sum_k (-1)^k k! / z^k
        double term = 1.0;
        scaled = 1.0;
        for (int k = 1; k <= 8; ++k) {
            term *= -k / z;
            scaled += term;
        }
        scaled /= z;
    }
    return scaled / std::numbers::ln2;
}

inline double direct_gbar_for_outage(double target, double gamma_th, double xi_u) {
    if (!(target > 0.0 && target < 1.0)) throw std::invalid_argument("direct_gbar_for_outage: target must be in (0, 1)");
    return gamma_th / (2.0 * xi_u * -std::log1p(-target));
}

}  // namespace irslab
