// SPDX-License-Identifier: Apache-2.0
//
// Monte-Carlo trial engine.
//
// Trial t draws from substream (seed, Trial, t). Trials are grouped into
// fixed-size chunks; workers claim chunks dynamically but every chunk's
// partial sums are stored by chunk index and reduced in index order, so the
// output is bit-identical for any worker count.

#pragma once

#include <algorithm>
#include <atomic>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <memory>
#include <new>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "irslab/analytic.hpp"
#include "irslab/channel.hpp"
#include "irslab/random.hpp"
#include "irslab/snr.hpp"
#include "irslab/units.hpp"

namespace irslab {

/// How quantized-phase errors are produced in simulation.
enum class PhaseErrorModel {
    Quantizer,  // quantize the actual optimal phases
    Uniform,    // draw each error independently from U[-tau, tau)
};

struct SimConfig {
    std::size_t trials = 100000;
    std::uint64_t seed = 1;
    std::vector<double> gbar_db_grid{0.0};
    double gamma_th_db = 0.0;
    std::optional<int> quantization_bits;
    PhaseErrorModel error_model = PhaseErrorModel::Quantizer;
    std::size_t histogram_bins = 50;
    unsigned workers = 0;  // 0: one per hardware thread

    void validate() const {
        if (trials < 1) throw std::invalid_argument("sim config: trials must be >= 1");
        if (histogram_bins < 10) throw std::invalid_argument("sim config: histogram_bins must be >= 10");
        if (gbar_db_grid.empty()) throw std::invalid_argument("sim config: gbar_db_grid is empty");
        if (quantization_bits && *quantization_bits < 1)
            throw std::invalid_argument("sim config: quantization_bits must be >= 1");
    }
};

class SimulationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Estimate {
    double value = 0.0;
    double std_error = 0.0;
};

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

struct Histogram {
    std::vector<double> edges;  // bins + 1 ascending edges
    std::vector<double> mass;   // probability per bin; samples past the last edge count in the last bin
};

/// Empirical CDF over a shared sorted sample, scaled by a constant factor.
class Ecdf {
public:
    Ecdf() = default;
    Ecdf(std::shared_ptr<const std::vector<double>> sorted, double scale)
        : sorted_(std::move(sorted)), scale_(scale) {}

    std::size_t size() const { return sorted_ ? sorted_->size() : 0; }
    bool empty() const { return size() == 0; }

    /// i-th order statistic.
    double sample(std::size_t i) const { return scale_ * (*sorted_)[i]; }

    /// Fraction of samples <= x.
    double operator()(double x) const {
        if (empty()) return 0.0;
        const auto it = std::upper_bound(sorted_->begin(), sorted_->end(), x,
                                         [this](double v, double s) { return v < scale_ * s; });
        return static_cast<double>(it - sorted_->begin()) / static_cast<double>(size());
    }

    /// Lower empirical quantile.
    double quantile(double p) const {
        if (empty()) throw std::logic_error("ecdf: empty sample");
        const double pos = std::clamp(p, 0.0, 1.0) * static_cast<double>(size() - 1);
        return sample(static_cast<std::size_t>(pos));
    }

private:
    std::shared_ptr<const std::vector<double>> sorted_;
    double scale_ = 1.0;
};

/// Running central moments up to fourth order, mergeable (Pebay's update).
class MomentAccumulator {
public:
    void add(double x) {
        const double n1 = static_cast<double>(n_);
        ++n_;
        const double n = static_cast<double>(n_);
        const double delta = x - mean_;
        const double dn = delta / n;
        const double dn2 = dn * dn;
        const double term1 = delta * dn * n1;
        mean_ += dn;
        m4_ += term1 * dn2 * (n * n - 3.0 * n + 3.0) + 6.0 * dn2 * m2_ - 4.0 * dn * m3_;
        m3_ += term1 * dn * (n - 2.0) - 3.0 * dn * m2_;
        m2_ += term1;
    }

    void merge(const MomentAccumulator& b) {
        if (b.n_ == 0) return;
        if (n_ == 0) {
            *this = b;
            return;
        }
        const double na = static_cast<double>(n_);
        const double nb = static_cast<double>(b.n_);
        const double n = na + nb;
        const double delta = b.mean_ - mean_;
        const double d2 = delta * delta;
        const double d3 = d2 * delta;
        const double d4 = d2 * d2;
        const double m2 = m2_ + b.m2_ + d2 * na * nb / n;
        const double m3 = m3_ + b.m3_ + d3 * na * nb * (na - nb) / (n * n) + 3.0 * delta * (na * b.m2_ - nb * m2_) / n;
        const double m4 = m4_ + b.m4_ + d4 * na * nb * (na * na - na * nb + nb * nb) / (n * n * n) +
                          6.0 * d2 * (na * na * b.m2_ + nb * nb * m2_) / (n * n) +
                          4.0 * delta * (na * b.m3_ - nb * m3_) / n;
        n_ += b.n_;
        mean_ += delta * nb / n;
        m2_ = m2;
        m3_ = m3;
        m4_ = m4;
    }

    std::size_t count() const { return n_; }
    double mean() const { return mean_; }
    double variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
    double central_moment4() const { return n_ > 0 ? m4_ / static_cast<double>(n_) : 0.0; }
    double mean_std_error() const { return n_ > 0 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0; }

    /// Large-sample standard error of the sample variance, sqrt((mu4 - sigma^4) / n).
    double variance_std_error() const {
        if (n_ < 2) return 0.0;
        const double s2 = m2_ / static_cast<double>(n_);
        return std::sqrt(std::max(0.0, central_moment4() - s2 * s2) / static_cast<double>(n_));
    }

private:
    std::size_t n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
    double m3_ = 0.0;
    double m4_ = 0.0;
};

/// Statistics of the co-phased SNR at one transmit SNR.
struct EmpiricalStats {
    double gbar_db = 0.0;
    Estimate mean_snr;
    Estimate rate;       // E[log2(1 + gamma)]
    double outage_rate = 0.0;
    Interval outage_ci;  // 95 % normal approximation
    Histogram histogram;
    Ecdf ecdf;
    std::optional<Estimate> rate_quantized;
    std::optional<double> outage_quantized;
    Estimate rate_direct;
    double outage_direct = 0.0;
};

struct TrialSummary {
    std::size_t trials = 0;
    std::vector<EmpiricalStats> points;  // one per grid point, grid order
    MomentAccumulator y;                 // IRS amplitude sum_n beta_n lambda_g_n lambda_h_n
    MomentAccumulator r;                 // lambda_u + Y
};

namespace detail {

inline constexpr std::size_t kChunkTrials = 4096;

struct ChunkTally {
    std::vector<double> rate_sum, rate_sq;
    std::vector<double> rate_q_sum, rate_q_sq;
    std::vector<double> rate_d_sum, rate_d_sq;
    std::vector<std::uint64_t> outage, outage_q, outage_d;
    MomentAccumulator y, r, r2;

    explicit ChunkTally(std::size_t k)
        : rate_sum(k), rate_sq(k), rate_q_sum(k), rate_q_sq(k), rate_d_sum(k), rate_d_sq(k),
          outage(k), outage_q(k), outage_d(k) {}

    void merge(const ChunkTally& o) {
        for (std::size_t i = 0; i < rate_sum.size(); ++i) {
            rate_sum[i] += o.rate_sum[i];
            rate_sq[i] += o.rate_sq[i];
            rate_q_sum[i] += o.rate_q_sum[i];
            rate_q_sq[i] += o.rate_q_sq[i];
            rate_d_sum[i] += o.rate_d_sum[i];
            rate_d_sq[i] += o.rate_d_sq[i];
            outage[i] += o.outage[i];
            outage_q[i] += o.outage_q[i];
            outage_d[i] += o.outage_d[i];
        }
        y.merge(o.y);
        r.merge(o.r);
        r2.merge(o.r2);
    }
};

inline Estimate mean_estimate(double sum, double sq, std::size_t n) {
    const double nn = static_cast<double>(n);
    const double mean = sum / nn;
    const double var = n > 1 ? std::max(0.0, (sq - nn * mean * mean) / (nn - 1.0)) : 0.0;
    return {mean, std::sqrt(var / nn)};
}

inline Histogram histogram_of(const std::vector<double>& sorted, std::size_t bins) {
    Histogram h;
    const std::size_t n = sorted.size();
    double upper = sorted[static_cast<std::size_t>(0.9999 * static_cast<double>(n - 1))];
    if (!(upper > 0.0)) upper = sorted.back() > 0.0 ? sorted.back() : 1.0;
    h.edges.resize(bins + 1);
    for (std::size_t b = 0; b <= bins; ++b) h.edges[b] = upper * static_cast<double>(b) / static_cast<double>(bins);
    std::vector<std::size_t> counts(bins, 0);
    for (double v : sorted) {
        auto b = static_cast<std::size_t>(v / upper * static_cast<double>(bins));
        counts[std::min(b, bins - 1)]++;
    }
    h.mass.resize(bins);
    for (std::size_t b = 0; b < bins; ++b) h.mass[b] = static_cast<double>(counts[b]) / static_cast<double>(n);
    return h;
}

}  // namespace detail

/// Runs `sim.trials` independent channel draws and evaluates every grid point
/// on each draw.
inline TrialSummary run_trials(const LinkGains& gains, const ReflectionConfig& cfg, const SimConfig& sim) {
    sim.validate();
    cfg.validate();
    const std::size_t n_el = cfg.element_count();
    const std::size_t k = sim.gbar_db_grid.size();
    const bool quantized = sim.quantization_bits.has_value();
    const bool need_phases = quantized && sim.error_model == PhaseErrorModel::Quantizer;
    const double tau = quantized ? std::numbers::pi / std::ldexp(1.0, *sim.quantization_bits) : 0.0;

    std::vector<double> gbar(k);
    std::vector<double> r2_threshold(k);
    const double gamma_th = db_to_linear(sim.gamma_th_db);
    for (std::size_t i = 0; i < k; ++i) {
        gbar[i] = db_to_linear(sim.gbar_db_grid[i]);
        r2_threshold[i] = gamma_th / gbar[i];
    }

    const std::size_t trials = sim.trials;
    const std::size_t chunks = (trials + detail::kChunkTrials - 1) / detail::kChunkTrials;
    std::shared_ptr<std::vector<double>> r2_samples;
    std::vector<std::optional<detail::ChunkTally>> tallies;
    try {
        r2_samples = std::make_shared<std::vector<double>>(trials);
        tallies.resize(chunks);
    } catch (const std::bad_alloc&) {
        throw SimulationError("run_trials: cannot allocate storage for " + std::to_string(trials) + " trials");
    } catch (const std::length_error&) {
        throw SimulationError("run_trials: cannot allocate storage for " + std::to_string(trials) + " trials");
    }

    std::atomic<std::size_t> next_chunk{0};
    auto work = [&] {
        ChannelRealization real;
        std::vector<double> errors(n_el);
        for (;;) {
            const std::size_t c = next_chunk.fetch_add(1);
            if (c >= chunks) return;
            detail::ChunkTally tally(k);
            const std::size_t begin = c * detail::kChunkTrials;
            const std::size_t end = std::min(trials, begin + detail::kChunkTrials);
            for (std::size_t t = begin; t < end; ++t) {
                auto rng = substream(sim.seed, StreamTag::Trial, t);
                sample_realization_into(gains, n_el, rng, real, need_phases);
                double y = 0.0;
                for (std::size_t n = 0; n < n_el; ++n) y += cfg.beta[n] * real.lambda_g[n] * real.lambda_h[n];
                const double r = real.lambda_u + y;
                const double r2 = r * r;
                const double d2 = real.lambda_u * real.lambda_u;
                double q2 = r2;
                if (quantized) {
                    if (need_phases) {
                        for (std::size_t n = 0; n < n_el; ++n) {
                            const double opt = wrap_phase(real.theta_u - (real.theta_g[n] + real.theta_h[n]));
                            errors[n] = quantize_phase(opt, *sim.quantization_bits).error;
                        }
                    } else {
                        for (std::size_t n = 0; n < n_el; ++n) errors[n] = uniform(rng, -tau, tau);
                    }
                    q2 = snr_with_phase_errors(real, cfg, errors, 1.0);
                }
                assert(d2 <= r2 * (1.0 + 1e-12));
                assert(q2 <= r2 * (1.0 + 1e-12));

                (*r2_samples)[t] = r2;
                tally.y.add(y);
                tally.r.add(r);
                tally.r2.add(r2);
                for (std::size_t i = 0; i < k; ++i) {
                    const double rate = std::log2(1.0 + gbar[i] * r2);
                    tally.rate_sum[i] += rate;
                    tally.rate_sq[i] += rate * rate;
                    tally.outage[i] += r2 <= r2_threshold[i];
                    const double rate_d = std::log2(1.0 + gbar[i] * d2);
                    tally.rate_d_sum[i] += rate_d;
                    tally.rate_d_sq[i] += rate_d * rate_d;
                    tally.outage_d[i] += d2 <= r2_threshold[i];
                    if (quantized) {
                        const double rate_q = std::log2(1.0 + gbar[i] * q2);
                        tally.rate_q_sum[i] += rate_q;
                        tally.rate_q_sq[i] += rate_q * rate_q;
                        tally.outage_q[i] += q2 <= r2_threshold[i];
                    }
                }
            }
            tallies[c].emplace(std::move(tally));
        }
    };

    const unsigned workers = sim.workers ? sim.workers : std::max(1u, std::thread::hardware_concurrency());
    if (workers == 1) {
        work();
    } else {
        std::vector<std::exception_ptr> failures(workers);
        {
            std::vector<std::jthread> pool;
            pool.reserve(workers);
            for (unsigned w = 0; w < workers; ++w) {
                pool.emplace_back([&, w] {
                    try {
                        work();
                    } catch (...) {
                        failures[w] = std::current_exception();
                        next_chunk.store(chunks);
                    }
                });
            }
        }
        for (const auto& f : failures) {
            if (!f) continue;
            try {
                std::rethrow_exception(f);
            } catch (const std::bad_alloc&) {
                throw SimulationError("run_trials: out of memory in worker");
            }
        }
    }

    detail::ChunkTally total(k);
    for (auto& t : tallies) {
        if (!t) throw SimulationError("run_trials: a trial chunk did not complete");
        total.merge(*t);
    }

    std::sort(r2_samples->begin(), r2_samples->end());
    const Histogram base_hist = detail::histogram_of(*r2_samples, sim.histogram_bins);
    std::shared_ptr<const std::vector<double>> sorted = r2_samples;

    TrialSummary summary;
    summary.trials = trials;
    summary.y = total.y;
    summary.r = total.r;
    const double nn = static_cast<double>(trials);
    for (std::size_t i = 0; i < k; ++i) {
        EmpiricalStats s;
        s.gbar_db = sim.gbar_db_grid[i];
        s.mean_snr = {gbar[i] * total.r2.mean(), gbar[i] * total.r2.mean_std_error()};
        s.rate = detail::mean_estimate(total.rate_sum[i], total.rate_sq[i], trials);
        s.outage_rate = static_cast<double>(total.outage[i]) / nn;
        const double half = 1.96 * std::sqrt(s.outage_rate * (1.0 - s.outage_rate) / nn);
        s.outage_ci = {std::max(0.0, s.outage_rate - half), std::min(1.0, s.outage_rate + half)};
        s.histogram = base_hist;
        for (double& e : s.histogram.edges) e *= gbar[i];
        s.ecdf = Ecdf(sorted, gbar[i]);
        s.rate_direct = detail::mean_estimate(total.rate_d_sum[i], total.rate_d_sq[i], trials);
        s.outage_direct = static_cast<double>(total.outage_d[i]) / nn;
        if (quantized) {
            s.rate_quantized = detail::mean_estimate(total.rate_q_sum[i], total.rate_q_sq[i], trials);
            s.outage_quantized = static_cast<double>(total.outage_q[i]) / nn;
        }
        summary.points.push_back(std::move(s));
    }
    return summary;
}

/// Supremum distance between an empirical CDF and a model CDF.
template <class Cdf>
double ks_distance(const Ecdf& ecdf, Cdf&& model_cdf) {
    if (ecdf.empty()) throw std::invalid_argument("ks_distance: empty sample");
    const std::size_t n = ecdf.size();
    const double nn = static_cast<double>(n);
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double f = model_cdf(ecdf.sample(i));
        worst = std::max({worst, f - static_cast<double>(i) / nn, static_cast<double>(i + 1) / nn - f});
    }
    return std::min(worst, 1.0);
}

inline double ks_distance(const EmpiricalStats& stats, const SnrDistribution& d) {
    return ks_distance(stats.ecdf, [&](double y) { return cdf_snr(y, d); });
}

}  // namespace irslab
