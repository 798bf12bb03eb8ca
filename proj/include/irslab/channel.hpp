// SPDX-License-Identifier: Apache-2.0
//
// Cell-free + IRS geometry, large-scale fading and Rayleigh small-scale
// sampling.
//
// Per-AP links are aggregated before sampling: the sum over APs of
// independent circularly-symmetric Gaussian channels is again Rayleigh with
// parameter equal to the sum of the per-link parameters. A realization
// therefore holds one direct envelope/phase and one AP->IRS envelope/phase
// per IRS element.

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "irslab/random.hpp"
#include "irslab/specfun.hpp"

namespace irslab {

struct Point {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point&, const Point&) = default;
};

inline double distance(const Point& a, const Point& b) { return std::hypot(a.x - b.x, a.y - b.y); }

struct Topology {
    std::vector<Point> ap_positions;
    Point irs_position;
    Point dest_position;
    double kappa = 2.8;            // path-loss exponent
    double d0 = 1.0;               // reference distance [m]
    double shadow_sigma_db = 8.0;  // shadowing standard deviation [dB]
    // Gain common to every link [dB]. Absorbs antenna gains and the noise
    // reference so that the transmit SNR axis lands in a useful range.
    double reference_gain_db = 0.0;

    std::size_t ap_count() const { return ap_positions.size(); }

    /// Throws std::invalid_argument naming the first violated invariant.
    void validate() const {
        auto finite = [](const Point& p) { return std::isfinite(p.x) && std::isfinite(p.y); };
        if (ap_positions.empty()) throw std::invalid_argument("topology: at least one AP is required");
        for (std::size_t m = 0; m < ap_positions.size(); ++m) {
            if (!finite(ap_positions[m]))
                throw std::invalid_argument("topology: ap_positions[" + std::to_string(m) + "] is not finite");
        }
        if (!finite(irs_position)) throw std::invalid_argument("topology: irs_position is not finite");
        if (!finite(dest_position)) throw std::invalid_argument("topology: dest_position is not finite");
        if (!(kappa > 0.0)) throw std::invalid_argument("topology: kappa must be positive");
        if (!(d0 > 0.0)) throw std::invalid_argument("topology: d0 must be positive");
        if (!(shadow_sigma_db >= 0.0)) throw std::invalid_argument("topology: shadow_sigma_db must be >= 0");
        if (!std::isfinite(reference_gain_db)) throw std::invalid_argument("topology: reference_gain_db is not finite");
        if (!(distance(irs_position, dest_position) > 0.0))
            throw std::invalid_argument("topology: IRS and destination must not coincide");
    }
};

/// Large-scale gains. The IRS elements are co-located, so every element sees
/// the same AP->IRS and IRS->destination gains.
struct LinkGains {
    std::vector<double> zeta_u;  // AP m -> destination
    std::vector<double> zeta_h;  // AP m -> IRS
    double zeta_g = 0.0;         // IRS -> destination
    double xi_u = 0.0;           // sum(zeta_u) / 2
    double xi_h = 0.0;           // sum(zeta_h) / 2
    double xi_g = 0.0;           // zeta_g / 2

    /// Recomputes the aggregate Rayleigh parameters from the per-link gains.
    void update_aggregates() {
        xi_u = 0.5 * std::accumulate(zeta_u.begin(), zeta_u.end(), 0.0);
        xi_h = 0.5 * std::accumulate(zeta_h.begin(), zeta_h.end(), 0.0);
        xi_g = 0.5 * zeta_g;
    }

    void validate() const {
        if (zeta_u.empty() || zeta_u.size() != zeta_h.size())
            throw std::invalid_argument("link gains: zeta_u and zeta_h must be non-empty and of equal length");
        for (std::size_t m = 0; m < zeta_u.size(); ++m) {
            if (!(zeta_u[m] > 0.0) || !(zeta_h[m] > 0.0))
                throw std::invalid_argument("link gains: gains for AP " + std::to_string(m) + " must be positive");
        }
        if (!(zeta_g > 0.0)) throw std::invalid_argument("link gains: zeta_g must be positive");
        LinkGains expected = *this;
        expected.update_aggregates();
        auto close = [](double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(std::abs(a), std::abs(b)); };
        if (!close(xi_u, expected.xi_u) || !close(xi_h, expected.xi_h) || !close(xi_g, expected.xi_g))
            throw std::invalid_argument("link gains: aggregate parameters disagree with per-link gains");
    }
};

/// One draw of all small-scale envelopes and phases.
struct ChannelRealization {
    double lambda_u = 0.0;
    double theta_u = 0.0;
    std::vector<double> lambda_h;
    std::vector<double> theta_h;
    std::vector<double> lambda_g;
    std::vector<double> theta_g;

    std::size_t element_count() const { return lambda_g.size(); }
};

/// Positions the IRS and destination on the vertical centre line, `separation`
/// apart and centred at three quarters of the area height. For the default
/// 1000 m square and 250 m this gives D = (500, 625) and IRS = (500, 875).
inline void place_irs_and_destination(Topology& topo, double area_m, double separation_m) {
    const double cx = 0.5 * area_m;
    const double cy = 0.75 * area_m;
    topo.dest_position = {cx, cy - 0.5 * separation_m};
    topo.irs_position = {cx, cy + 0.5 * separation_m};
}

/// APs uniform over [0, area_m]^2. AP m's position depends only on (seed, m),
/// so a topology with fewer APs is a prefix of one with more.
inline Topology generate_topology(std::size_t m, std::uint64_t seed, double area_m = 1000.0,
                                  double irs_dest_dist_m = 250.0) {
    if (m < 1) throw std::invalid_argument("generate_topology: at least one AP is required");
    if (!(area_m > 0.0) || !std::isfinite(area_m))
        throw std::invalid_argument("generate_topology: area_m must be positive");
    if (!(irs_dest_dist_m > 0.0) || irs_dest_dist_m > 0.5 * area_m)
        throw std::invalid_argument("generate_topology: irs_dest_dist_m must be in (0, area_m / 2]");

    Topology topo;
    topo.ap_positions.reserve(m);
    for (std::size_t i = 0; i < m; ++i) {
        auto rng = substream(seed, StreamTag::ApPosition, i);
        const double x = uniform(rng, 0.0, area_m);
        const double y = uniform(rng, 0.0, area_m);
        topo.ap_positions.push_back({x, y});
    }
    place_irs_and_destination(topo, area_m, irs_dest_dist_m);
    return topo;
}

/// (d0 / d)^kappa * 10^(shadow_db / 10). Distances below d0 are rejected.
inline double path_gain(double dist_m, double kappa, double d0, double shadow_db) {
    if (!(d0 > 0.0)) throw DomainError("path_gain: d0 must be positive");
    if (!(kappa > 0.0)) throw DomainError("path_gain: kappa must be positive");
    if (!(dist_m >= d0)) throw DomainError("path_gain: distance below reference distance d0");
    return std::pow(d0 / dist_m, kappa) * std::pow(10.0, shadow_db / 10.0);
}

/// One lognormal shadowing draw per physical link (AP->D, AP->IRS, IRS->D).
/// Distances shorter than d0 are clamped to d0.
inline LinkGains build_link_gains(const Topology& topo, std::uint64_t seed) {
    topo.validate();
    const double ref = std::pow(10.0, topo.reference_gain_db / 10.0);
    auto gain = [&](const Point& a, const Point& b, StreamTag tag, std::uint64_t index) {
        auto rng = substream(seed, tag, index);
        const double shadow_db = topo.shadow_sigma_db * standard_normal(rng);
        const double d = std::max(distance(a, b), topo.d0);
        return ref * path_gain(d, topo.kappa, topo.d0, shadow_db);
    };

    LinkGains g;
    const std::size_t m = topo.ap_count();
    g.zeta_u.reserve(m);
    g.zeta_h.reserve(m);
    for (std::size_t i = 0; i < m; ++i) {
        g.zeta_u.push_back(gain(topo.ap_positions[i], topo.dest_position, StreamTag::ShadowDirect, i));
        g.zeta_h.push_back(gain(topo.ap_positions[i], topo.irs_position, StreamTag::ShadowApIrs, i));
    }
    g.zeta_g = gain(topo.irs_position, topo.dest_position, StreamTag::ShadowIrsDest, 0);
    g.update_aggregates();
    return g;
}

/// Draws into `out`, reusing its storage. Envelopes are drawn before phases,
/// so skipping the phases leaves the envelopes unchanged.
template <class Engine>
void sample_realization_into(const LinkGains& gains, std::size_t n, Engine& rng, ChannelRealization& out,
                             bool with_phases = true) {
    out.lambda_h.resize(n);
    out.lambda_g.resize(n);
    out.lambda_u = rayleigh(rng, gains.xi_u);
    for (std::size_t i = 0; i < n; ++i) out.lambda_h[i] = rayleigh(rng, gains.xi_h);
    for (std::size_t i = 0; i < n; ++i) out.lambda_g[i] = rayleigh(rng, gains.xi_g);
    if (!with_phases) {
        out.theta_h.clear();
        out.theta_g.clear();
        out.theta_u = 0.0;
        return;
    }
    out.theta_h.resize(n);
    out.theta_g.resize(n);
    out.theta_u = uniform_phase(rng);
    for (std::size_t i = 0; i < n; ++i) out.theta_h[i] = uniform_phase(rng);
    for (std::size_t i = 0; i < n; ++i) out.theta_g[i] = uniform_phase(rng);
}

inline ChannelRealization sample_realization(const LinkGains& gains, std::size_t n, std::uint64_t seed) {
    auto rng = substream(seed, StreamTag::Trial, 0);
    ChannelRealization r;
    sample_realization_into(gains, n, rng, r);
    return r;
}

// JSON: positions in metres as [x, y] pairs, gains linear.

inline void to_json(nlohmann::json& j, const Point& p) { j = nlohmann::json::array({p.x, p.y}); }

inline void from_json(const nlohmann::json& j, Point& p) {
    if (!j.is_array() || j.size() != 2) throw std::invalid_argument("point must be a [x, y] array");
    p.x = j.at(0).get<double>();
    p.y = j.at(1).get<double>();
}

inline void to_json(nlohmann::json& j, const Topology& t) {
    j = nlohmann::json{{"ap_positions", t.ap_positions}, {"irs_position", t.irs_position},
                       {"dest_position", t.dest_position}, {"kappa", t.kappa},
                       {"d0", t.d0}, {"shadow_sigma_db", t.shadow_sigma_db},
                       {"reference_gain_db", t.reference_gain_db}};
}

inline void from_json(const nlohmann::json& j, Topology& t) {
    t.ap_positions = j.at("ap_positions").get<std::vector<Point>>();
    t.irs_position = j.at("irs_position").get<Point>();
    t.dest_position = j.at("dest_position").get<Point>();
    t.kappa = j.value("kappa", 2.8);
    t.d0 = j.value("d0", 1.0);
    t.shadow_sigma_db = j.value("shadow_sigma_db", 8.0);
    t.reference_gain_db = j.value("reference_gain_db", 0.0);
    t.validate();
}

inline void to_json(nlohmann::json& j, const LinkGains& g) {
    j = nlohmann::json{{"zeta_u", g.zeta_u}, {"zeta_h", g.zeta_h}, {"zeta_g", g.zeta_g},
                       {"xi_u", g.xi_u},     {"xi_h", g.xi_h},     {"xi_g", g.xi_g}};
}

inline void from_json(const nlohmann::json& j, LinkGains& g) {
    g.zeta_u = j.at("zeta_u").get<std::vector<double>>();
    g.zeta_h = j.at("zeta_h").get<std::vector<double>>();
    g.zeta_g = j.at("zeta_g").get<double>();
    if (j.contains("xi_u")) {
        g.xi_u = j.at("xi_u").get<double>();
        g.xi_h = j.at("xi_h").get<double>();
        g.xi_g = j.at("xi_g").get<double>();
    } else {
        g.update_aggregates();
    }
    g.validate();
}

}  // namespace irslab
