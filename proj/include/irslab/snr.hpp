// SPDX-License-Identifier: Apache-2.0
//
// Per-realization received SNR: co-phased (optimal) IRS phases, quantized
// phases, and the direct-only baseline.

#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "irslab/channel.hpp"

namespace irslab {

struct ReflectionConfig {
    std::vector<double> beta;             // attenuation magnitudes, one per element
    std::optional<int> quantization_bits;  // phase resolution, absent for continuous phases

    static ReflectionConfig uniform(std::size_t n, double beta, std::optional<int> bits = std::nullopt) {
        ReflectionConfig cfg{std::vector<double>(n, beta), bits};
        cfg.validate();
        return cfg;
    }

    std::size_t element_count() const { return beta.size(); }

    void validate() const {
        for (std::size_t i = 0; i < beta.size(); ++i) {
            if (!(beta[i] >= 0.0 && beta[i] <= 1.0))
                throw std::invalid_argument("reflection config: beta[" + std::to_string(i) + "] outside [0, 1]");
        }
        if (quantization_bits && *quantization_bits < 1)
            throw std::invalid_argument("reflection config: quantization_bits must be >= 1");
    }
};

struct SnrSample {
    double gamma_opt = 0.0;
    std::optional<double> gamma_quant;
    double gamma_direct = 0.0;
    double gbar = 0.0;
};

/// Wraps an angle into [-pi, pi).
inline double wrap_phase(double theta) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    double w = std::fmod(theta + std::numbers::pi, two_pi);
    if (w < 0.0) w += two_pi;
    w -= std::numbers::pi;
    // fmod can land exactly on +pi after the shift back.
    return w >= std::numbers::pi ? -std::numbers::pi : w;
}

namespace detail {
inline void check_lengths(const ChannelRealization& real, std::size_t n, const char* who) {
    if (real.lambda_g.size() != n || real.lambda_h.size() != n)
        throw std::invalid_argument(std::string(who) + ": realization has " + std::to_string(real.lambda_g.size()) +
                                    " elements, configuration has " + std::to_string(n));
}

inline void check_phases(const ChannelRealization& real, const char* who) {
    if (real.theta_g.size() != real.lambda_g.size() || real.theta_h.size() != real.lambda_h.size())
        throw std::invalid_argument(std::string(who) + ": realization carries no phases");
}
}  // namespace detail

/// theta_n = theta_u - (theta_g_n + theta_h_n), wrapped. Every reflected path
/// then arrives with the phase of the direct path.
inline std::vector<double> optimal_phases(const ChannelRealization& real) {
    detail::check_phases(real, "optimal_phases");
    std::vector<double> phases(real.element_count());
    for (std::size_t n = 0; n < phases.size(); ++n)
        phases[n] = wrap_phase(real.theta_u - (real.theta_g[n] + real.theta_h[n]));
    return phases;
}

/// SNR for arbitrary IRS phases, from the complex sum.
inline double snr_with_phases(const ChannelRealization& real, const ReflectionConfig& cfg,
                              std::span<const double> phases, double gbar) {
    detail::check_lengths(real, cfg.element_count(), "snr_with_phases");
    detail::check_phases(real, "snr_with_phases");
    if (phases.size() != cfg.element_count()) throw std::invalid_argument("snr_with_phases: phase vector length mismatch");
    std::complex<double> sum = std::polar(real.lambda_u, real.theta_u);
    for (std::size_t n = 0; n < phases.size(); ++n) {
        sum += std::polar(cfg.beta[n] * real.lambda_g[n] * real.lambda_h[n],
                          phases[n] + real.theta_g[n] + real.theta_h[n]);
    }
    return gbar * std::norm(sum);
}

/// Amplitude of the co-phased sum, lambda_u + sum beta_n lambda_g_n lambda_h_n.
inline double coherent_amplitude(const ChannelRealization& real, const ReflectionConfig& cfg) {
    detail::check_lengths(real, cfg.element_count(), "coherent_amplitude");
    double y = 0.0;
    for (std::size_t n = 0; n < cfg.element_count(); ++n) y += cfg.beta[n] * real.lambda_g[n] * real.lambda_h[n];
    return real.lambda_u + y;
}

inline double snr_optimal(const ChannelRealization& real, const ReflectionConfig& cfg, double gbar) {
    const double r = coherent_amplitude(real, cfg);
    return gbar * r * r;
}

inline double snr_direct(const ChannelRealization& real, double gbar) {
    return gbar * real.lambda_u * real.lambda_u;
}

struct QuantizedPhase {
    double phase;  // grid point, wrapped to [-pi, pi)
    double error;  // theta - q * pi / 2^(B-1); |error| <= pi / 2^B
};

/// Nearest point of the grid pi q / 2^(B-1), q in {0, +-1, ..., +-2^(B-1)}.
/// Exact midpoints go to the candidate with the smaller |q|.
inline QuantizedPhase quantize_phase(double theta, int bits) {
    if (bits < 1) throw std::invalid_argument("quantize_phase: bits must be >= 1");
    if (!(theta >= -std::numbers::pi && theta < std::numbers::pi))
        throw std::invalid_argument("quantize_phase: theta must lie in [-pi, pi)");
    const double step = std::numbers::pi / std::ldexp(1.0, bits - 1);
    const double ratio = theta / step;
    const double lo = std::floor(ratio);
    const double hi = lo + 1.0;
    const double d_lo = ratio - lo;
    const double d_hi = hi - ratio;
    double q;
    if (d_lo < d_hi) {
        q = lo;
    } else if (d_hi < d_lo) {
        q = hi;
    } else {
        q = std::abs(lo) < std::abs(hi) ? lo : hi;
    }
    const double grid = q * step;
    return {wrap_phase(grid), theta - grid};
}

/// gbar ((lambda_u + Y_R)^2 + Y_I^2) for given per-element phase errors.
inline double snr_with_phase_errors(const ChannelRealization& real, const ReflectionConfig& cfg,
                                    std::span<const double> errors, double gbar) {
    detail::check_lengths(real, cfg.element_count(), "snr_with_phase_errors");
    if (errors.size() != cfg.element_count()) throw std::invalid_argument("snr_with_phase_errors: error vector length mismatch");
    double yr = 0.0;
    double yi = 0.0;
    for (std::size_t n = 0; n < errors.size(); ++n) {
        const double c = cfg.beta[n] * real.lambda_g[n] * real.lambda_h[n];
        yr += c * std::cos(errors[n]);
        yi += c * std::sin(errors[n]);
    }
    const double re = real.lambda_u + yr;
    return gbar * (re * re + yi * yi);
}

/// SNR after quantizing each optimal phase to the configured grid.
inline double snr_quantized(const ChannelRealization& real, const ReflectionConfig& cfg, double gbar) {
    if (!cfg.quantization_bits) throw std::invalid_argument("snr_quantized: quantization_bits not set");
    detail::check_lengths(real, cfg.element_count(), "snr_quantized");
    const auto phases = optimal_phases(real);
    std::vector<double> errors(phases.size());
    for (std::size_t n = 0; n < phases.size(); ++n) errors[n] = quantize_phase(phases[n], *cfg.quantization_bits).error;
    return snr_with_phase_errors(real, cfg, errors, gbar);
}

inline SnrSample evaluate_snr(const ChannelRealization& real, const ReflectionConfig& cfg, double gbar) {
    SnrSample s;
    s.gbar = gbar;
    s.gamma_opt = snr_optimal(real, cfg, gbar);
    s.gamma_direct = snr_direct(real, gbar);
    if (cfg.quantization_bits) s.gamma_quant = snr_quantized(real, cfg, gbar);
    return s;
}

}  // namespace irslab
