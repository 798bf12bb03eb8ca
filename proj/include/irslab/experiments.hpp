// SPDX-License-Identifier: Apache-2.0
//
// Experiment specs, the runner that turns a spec into result series, and the
// comparison of analytic against simulated columns.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <future>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "irslab/analytic.hpp"
#include "irslab/channel.hpp"
#include "irslab/montecarlo.hpp"
#include "irslab/series.hpp"
#include "irslab/snr.hpp"
#include "irslab/units.hpp"

namespace irslab {

/// Invalid spec field. `path` names the offending field, e.g. "cases[2].N".
class SpecError : public std::invalid_argument {
public:
    SpecError(std::string path, const std::string& what)
        : std::invalid_argument(path + ": " + what), path_(std::move(path)) {}
    const std::string& path() const { return path_; }

private:
    std::string path_;
};

enum class OutputKind { Analytic, MonteCarlo, Both };

inline std::string_view to_string(OutputKind k) {
    switch (k) {
        case OutputKind::Analytic: return "analytic";
        case OutputKind::MonteCarlo: return "montecarlo";
        case OutputKind::Both: return "both";
    }
    return "both";
}

inline bool has_analytic(OutputKind k) { return k != OutputKind::MonteCarlo; }
inline bool has_montecarlo(OutputKind k) { return k != OutputKind::Analytic; }

struct CaseSpec {
    std::string label;
    std::size_t aps = 0;       // M
    std::size_t elements = 0;  // N; 0 is the direct-only baseline
    std::optional<int> bits;   // B
    OutputKind output = OutputKind::Both;

    friend bool operator==(const CaseSpec&, const CaseSpec&) = default;
};

/// Geometry and propagation shared by every case of an experiment.
struct Scenario {
    std::uint64_t topology_seed = 2954;
    double reference_gain_db = 49.0;
    double area_m = 1000.0;
    double irs_dest_dist_m = 250.0;
    double kappa = 2.8;
    double d0 = 1.0;
    double shadow_sigma_db = 8.0;
    double beta = 0.9;
    double gamma_th_db = 0.0;

    friend bool operator==(const Scenario&, const Scenario&) = default;
};

struct ExperimentSpec {
    std::string name;
    std::vector<CaseSpec> cases;
    std::vector<double> gbar_db_grid;
    std::size_t trials = 1000000;
    std::uint64_t seed = 1;
    Scenario scenario;
    PhaseErrorModel error_model = PhaseErrorModel::Quantizer;
    std::optional<double> distribution_gbar_db;  // also emit pdf/cdf tables at this transmit SNR
    std::size_t histogram_bins = 100;

    friend bool operator==(const ExperimentSpec&, const ExperimentSpec&) = default;

    void validate() const {
        auto is_identifier = [](const std::string& s) {
            return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) {
                return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' ||
                       c == '-';
            });
        };
        if (!is_identifier(name)) throw SpecError("name", "must be a non-empty identifier [A-Za-z0-9_-]");
        if (cases.empty()) throw SpecError("cases", "must not be empty");
        for (std::size_t i = 0; i < cases.size(); ++i) {
            const auto& c = cases[i];
            const std::string p = "cases[" + std::to_string(i) + "]";
            if (!is_identifier(c.label)) throw SpecError(p + ".label", "must be a non-empty identifier");
            for (std::size_t j = 0; j < i; ++j)
                if (cases[j].label == c.label) throw SpecError(p + ".label", "duplicate label '" + c.label + "'");
            if (c.aps < 1) throw SpecError(p + ".M", "must be >= 1");
            if (c.bits && *c.bits < 1) throw SpecError(p + ".B", "must be >= 1");
            if (c.bits && c.elements == 0) throw SpecError(p + ".B", "requires N >= 1");
        }
        if (gbar_db_grid.empty()) throw SpecError("gbar_db_grid", "must not be empty");
        for (std::size_t i = 0; i < gbar_db_grid.size(); ++i) {
            if (!std::isfinite(gbar_db_grid[i]))
                throw SpecError("gbar_db_grid[" + std::to_string(i) + "]", "must be finite");
            if (i > 0 && !(gbar_db_grid[i] > gbar_db_grid[i - 1]))
                throw SpecError("gbar_db_grid[" + std::to_string(i) + "]", "grid must be strictly ascending");
        }
        if (trials < 1) throw SpecError("trials", "must be >= 1");
        if (histogram_bins < 10) throw SpecError("histogram_bins", "must be >= 10");
        if (distribution_gbar_db &&
            std::find(gbar_db_grid.begin(), gbar_db_grid.end(), *distribution_gbar_db) == gbar_db_grid.end())
            throw SpecError("distribution_gbar_db", "must be one of gbar_db_grid");
        const auto& s = scenario;
        if (!(s.area_m > 0.0)) throw SpecError("scenario.area_m", "must be positive");
        if (!(s.irs_dest_dist_m > 0.0 && s.irs_dest_dist_m <= 0.5 * s.area_m))
            throw SpecError("scenario.irs_dest_dist_m", "must be in (0, area_m / 2]");
        if (!(s.kappa > 0.0)) throw SpecError("scenario.kappa", "must be positive");
        if (!(s.d0 > 0.0)) throw SpecError("scenario.d0", "must be positive");
        if (!(s.shadow_sigma_db >= 0.0)) throw SpecError("scenario.shadow_sigma_db", "must be >= 0");
        if (!(s.beta >= 0.0 && s.beta <= 1.0)) throw SpecError("scenario.beta", "must be in [0, 1]");
        if (!std::isfinite(s.reference_gain_db)) throw SpecError("scenario.reference_gain_db", "must be finite");
        if (!std::isfinite(s.gamma_th_db)) throw SpecError("scenario.gamma_th_db", "must be finite");
    }
};

inline std::vector<double> db_grid(double start, double stop, double step) {
    if (!(step > 0.0) || !(stop >= start)) throw std::invalid_argument("db_grid: need step > 0 and stop >= start");
    std::vector<double> g;
    const auto n = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9));
    for (std::size_t i = 0; i <= n; ++i) g.push_back(start + static_cast<double>(i) * step);
    return g;
}

// ---------------------------------------------------------------------------
// JSON form of specs

inline std::string case_label(std::string_view prefix, std::size_t m, std::size_t n, std::optional<int> bits) {
    std::string s = std::string(prefix) + "_M" + std::to_string(m) + "_N" + std::to_string(n);
    if (bits) s += "_B" + std::to_string(*bits);
    return s;
}

namespace detail {

template <class T>
T spec_get(const nlohmann::json& j, const std::string& path) {
    try {
        return j.get<T>();
    } catch (const nlohmann::json::exception&) {
        throw SpecError(path, "wrong type");
    }
}

inline OutputKind parse_output(const nlohmann::json& j, const std::string& path) {
    const auto s = spec_get<std::string>(j, path);
    if (s == "analytic") return OutputKind::Analytic;
    if (s == "montecarlo") return OutputKind::MonteCarlo;
    if (s == "both") return OutputKind::Both;
    throw SpecError(path, "expected analytic|montecarlo|both, got '" + s + "'");
}

}  // namespace detail

inline nlohmann::json spec_to_json(const ExperimentSpec& s) {
    nlohmann::json cases = nlohmann::json::array();
    for (const auto& c : s.cases) {
        nlohmann::json jc{{"label", c.label}, {"M", c.aps}, {"N", c.elements}, {"output", to_string(c.output)}};
        jc["B"] = c.bits ? nlohmann::json(*c.bits) : nlohmann::json(nullptr);
        cases.push_back(std::move(jc));
    }
    const auto& sc = s.scenario;
    nlohmann::json j{{"name", s.name},
                     {"cases", cases},
                     {"gbar_db_grid", s.gbar_db_grid},
                     {"trials", s.trials},
                     {"seed", s.seed},
                     {"error_model", s.error_model == PhaseErrorModel::Uniform ? "uniform" : "quantizer"},
                     {"histogram_bins", s.histogram_bins},
                     {"scenario",
                      {{"topology_seed", sc.topology_seed},
                       {"reference_gain_db", sc.reference_gain_db},
                       {"area_m", sc.area_m},
                       {"irs_dest_dist_m", sc.irs_dest_dist_m},
                       {"kappa", sc.kappa},
                       {"d0", sc.d0},
                       {"shadow_sigma_db", sc.shadow_sigma_db},
                       {"beta", sc.beta},
                       {"gamma_th_db", sc.gamma_th_db}}}};
    j["distribution_gbar_db"] = s.distribution_gbar_db ? nlohmann::json(*s.distribution_gbar_db) : nlohmann::json(nullptr);
    return j;
}

/// Parses and validates a spec. Missing optional fields take the defaults
/// above; `gbar_db_grid` may be a list or {"start", "stop", "step"}.
inline ExperimentSpec spec_from_json(const nlohmann::json& j) {
    using detail::spec_get;
    if (!j.is_object()) throw SpecError("$", "spec must be a JSON object");
    static const std::vector<std::string> known{"name",  "cases",       "gbar_db_grid",         "trials",
                                                "seed",  "error_model", "distribution_gbar_db", "histogram_bins",
                                                "scenario", "outputs", "$schema", "description"};
    for (const auto& [key, _] : j.items())
        if (std::find(known.begin(), known.end(), key) == known.end()) throw SpecError(key, "unknown field");

    ExperimentSpec s;
    if (!j.contains("name")) throw SpecError("name", "required");
    s.name = spec_get<std::string>(j["name"], "name");

    std::optional<OutputKind> default_output;
    if (j.contains("outputs")) default_output = detail::parse_output(j["outputs"], "outputs");

    if (!j.contains("cases") || !j["cases"].is_array()) throw SpecError("cases", "required list");
    for (std::size_t i = 0; i < j["cases"].size(); ++i) {
        const auto& jc = j["cases"][i];
        const std::string p = "cases[" + std::to_string(i) + "]";
        if (!jc.is_object()) throw SpecError(p, "must be an object");
        CaseSpec c;
        if (!jc.contains("M")) throw SpecError(p + ".M", "required");
        const auto m = spec_get<long long>(jc["M"], p + ".M");
        if (m < 1) throw SpecError(p + ".M", "must be >= 1");
        c.aps = static_cast<std::size_t>(m);
        const auto n = jc.contains("N") ? spec_get<long long>(jc["N"], p + ".N") : 0LL;
        if (n < 0) throw SpecError(p + ".N", "must be >= 0");
        c.elements = static_cast<std::size_t>(n);
        if (jc.contains("B") && !jc["B"].is_null()) c.bits = spec_get<int>(jc["B"], p + ".B");
        c.output = jc.contains("output") ? detail::parse_output(jc["output"], p + ".output")
                                         : default_output.value_or(OutputKind::Both);
        c.label = jc.contains("label") ? spec_get<std::string>(jc["label"], p + ".label")
                                       : case_label("case", c.aps, c.elements, c.bits);
        s.cases.push_back(std::move(c));
    }

    if (!j.contains("gbar_db_grid")) {
        s.gbar_db_grid = db_grid(-20.0, 20.0, 1.0);
    } else if (j["gbar_db_grid"].is_object()) {
        const auto& g = j["gbar_db_grid"];
        for (const char* k : {"start", "stop", "step"})
            if (!g.contains(k)) throw SpecError(std::string("gbar_db_grid.") + k, "required");
        const auto start = spec_get<double>(g["start"], "gbar_db_grid.start");
        const auto stop = spec_get<double>(g["stop"], "gbar_db_grid.stop");
        const auto step = spec_get<double>(g["step"], "gbar_db_grid.step");
        if (!(step > 0.0)) throw SpecError("gbar_db_grid.step", "must be positive");
        if (!(stop >= start)) throw SpecError("gbar_db_grid.stop", "must be >= start");
        s.gbar_db_grid = db_grid(start, stop, step);
    } else {
        s.gbar_db_grid = spec_get<std::vector<double>>(j["gbar_db_grid"], "gbar_db_grid");
    }

    if (j.contains("trials")) {
        const auto t = spec_get<long long>(j["trials"], "trials");
        if (t < 1) throw SpecError("trials", "must be >= 1");
        s.trials = static_cast<std::size_t>(t);
    }
    if (j.contains("seed")) s.seed = spec_get<std::uint64_t>(j["seed"], "seed");
    if (j.contains("error_model")) {
        const auto m = spec_get<std::string>(j["error_model"], "error_model");
        if (m == "quantizer") s.error_model = PhaseErrorModel::Quantizer;
        else if (m == "uniform") s.error_model = PhaseErrorModel::Uniform;
        else throw SpecError("error_model", "expected quantizer|uniform, got '" + m + "'");
    }
    if (j.contains("distribution_gbar_db") && !j["distribution_gbar_db"].is_null())
        s.distribution_gbar_db = spec_get<double>(j["distribution_gbar_db"], "distribution_gbar_db");
    if (j.contains("histogram_bins")) {
        const auto b = spec_get<long long>(j["histogram_bins"], "histogram_bins");
        if (b < 10) throw SpecError("histogram_bins", "must be >= 10");
        s.histogram_bins = static_cast<std::size_t>(b);
    }
    if (j.contains("scenario")) {
        const auto& js = j["scenario"];
        if (!js.is_object()) throw SpecError("scenario", "must be an object");
        auto& sc = s.scenario;
        auto num = [&](const char* key, double& field) {
            if (js.contains(key)) field = spec_get<double>(js[key], std::string("scenario.") + key);
        };
        for (const auto& [key, _] : js.items()) {
            static const std::vector<std::string> fields{"topology_seed", "reference_gain_db", "area_m",
                                                         "irs_dest_dist_m", "kappa", "d0",
                                                         "shadow_sigma_db", "beta", "gamma_th_db"};
            if (std::find(fields.begin(), fields.end(), key) == fields.end())
                throw SpecError("scenario." + key, "unknown field");
        }
        if (js.contains("topology_seed"))
            sc.topology_seed = spec_get<std::uint64_t>(js["topology_seed"], "scenario.topology_seed");
        num("reference_gain_db", sc.reference_gain_db);
        num("area_m", sc.area_m);
        num("irs_dest_dist_m", sc.irs_dest_dist_m);
        num("kappa", sc.kappa);
        num("d0", sc.d0);
        num("shadow_sigma_db", sc.shadow_sigma_db);
        num("beta", sc.beta);
        num("gamma_th_db", sc.gamma_th_db);
    }
    s.validate();
    return s;
}

// ---------------------------------------------------------------------------
// Built-in specs

inline ExperimentSpec builtin_spec(std::string_view name) {
    ExperimentSpec s;
    s.name = std::string(name);
    s.gbar_db_grid = db_grid(-20.0, 20.0, 1.0);
    auto add = [&](std::string prefix, std::size_t m, std::size_t n, std::optional<int> bits = std::nullopt) {
        s.cases.push_back({case_label(prefix, m, n, bits), m, n, bits, OutputKind::Both});
    };
    if (name == "fig2") {
        for (auto [m, n] : {std::pair{64, 32}, {64, 64}, {144, 64}, {64, 128}})
            add("case" + std::to_string(s.cases.size() + 1), m, n);
        s.gbar_db_grid = {-10.0};
        s.distribution_gbar_db = -10.0;
        s.trials = 1000000;
    } else if (name == "fig3") {
        for (auto [m, n] : {std::pair{36, 16}, {36, 32}, {16, 64}, {36, 64}, {64, 64}, {36, 128}})
            add("case" + std::to_string(s.cases.size() + 1), m, n);
        add("noirs", 64, 0);
        s.trials = 10000000;
    } else if (name == "fig4") {
        for (std::size_t n : {16, 32, 64, 128, 256}) add("rate", 64, n);
        add("noirs", 64, 0);
        s.trials = 1000000;
    } else if (name == "fig5") {
        for (auto [m, n] : {std::pair{36, 32}, {64, 32}, {36, 64}, {64, 64}}) {
            const std::string prefix = "case" + std::to_string(s.cases.size() / 4 + 1);
            for (int b = 1; b <= 4; ++b) add(prefix, m, n, b);
        }
        s.error_model = PhaseErrorModel::Uniform;
        s.trials = 250000;
    } else {
        throw std::invalid_argument("unknown built-in spec '" + std::string(name) + "' (fig2|fig3|fig4|fig5)");
    }
    s.validate();
    return s;
}

inline std::vector<std::string> builtin_spec_names() { return {"fig2", "fig3", "fig4", "fig5"}; }

// ---------------------------------------------------------------------------
// Running

struct RunOptions {
    FormulaMode mode = FormulaMode::Rederived;
    bool parallel_cases = false;
    unsigned workers = 0;  // trial workers per case; 0 = hardware threads
};

inline Topology scenario_topology(const Scenario& sc, std::size_t aps) {
    Topology t = generate_topology(aps, sc.topology_seed, sc.area_m, sc.irs_dest_dist_m);
    t.kappa = sc.kappa;
    t.d0 = sc.d0;
    t.shadow_sigma_db = sc.shadow_sigma_db;
    t.reference_gain_db = sc.reference_gain_db;
    return t;
}

inline LinkGains scenario_gains(const Scenario& sc, std::size_t aps) {
    return build_link_gains(scenario_topology(sc, aps), sc.topology_seed);
}

namespace detail {

// Distribution table over the bin centres of the simulated histogram.
inline ResultSeries distribution_series(const std::string& name, const EmpiricalStats* mc,
                                        const std::optional<SnrDistribution>& model, double direct_xi, double gbar,
                                        std::size_t bins) {
    ResultSeries s;
    s.name = name;
    s.x_name = "snr";
    std::vector<double> edges;
    if (mc) {
        edges = mc->histogram.edges;
    } else {
        // Analytic only: grid up to a high quantile of the model.
        double hi = 1.0;
        auto cdf = [&](double y) { return model ? cdf_snr(y, *model) : direct_cdf_snr(y, direct_xi, gbar); };
        while (cdf(hi) < 0.9999) hi *= 2.0;
        for (std::size_t b = 0; b <= bins; ++b) edges.push_back(hi * static_cast<double>(b) / static_cast<double>(bins));
    }
    const std::size_t n = edges.size() - 1;
    std::vector<double> pdf_a(n), cdf_a(n), pdf_m(n), cdf_m(n);
    for (std::size_t b = 0; b < n; ++b) {
        const double x = 0.5 * (edges[b] + edges[b + 1]);
        s.x.push_back(x);
        if (model) {
            pdf_a[b] = pdf_snr(x, *model);
            cdf_a[b] = cdf_snr(x, *model);
        } else {
            const double mean = 2.0 * direct_xi * gbar;
            pdf_a[b] = std::exp(-x / mean) / mean;
            cdf_a[b] = direct_cdf_snr(x, direct_xi, gbar);
        }
        if (mc) {
            pdf_m[b] = mc->histogram.mass[b] / (edges[b + 1] - edges[b]);
            cdf_m[b] = mc->ecdf(x);
        }
    }
    if (model || !mc) {
        s.add("pdf_analytic", std::move(pdf_a));
        s.add("cdf_analytic", std::move(cdf_a));
    }
    if (mc) {
        s.add("pdf_mc", std::move(pdf_m));
        s.add("cdf_mc", std::move(cdf_m));
    }
    return s;
}

}  // namespace detail

/// Runs one case and returns its curve series, plus a distribution series
/// when the spec asks for one.
inline std::vector<ResultSeries> run_case(const ExperimentSpec& spec, const CaseSpec& c, const RunOptions& opt) {
    const auto& sc = spec.scenario;
    const LinkGains gains = scenario_gains(sc, c.aps);
    const ReflectionConfig cfg = ReflectionConfig::uniform(c.elements, sc.beta, c.bits);
    const bool irs = c.elements > 0;
    const double gamma_th = db_to_linear(sc.gamma_th_db);
    const std::size_t k = spec.gbar_db_grid.size();

    std::optional<CltMoments> moments;
    if (irs) moments = clt_moments(gains, cfg);
    auto model_at = [&](double gbar_db) -> std::optional<SnrDistribution> {
        if (!moments) return std::nullopt;
        return SnrDistribution(*moments, db_to_linear(gbar_db), opt.mode);
    };

    std::optional<TrialSummary> mc;
    if (has_montecarlo(c.output)) {
        SimConfig sim;
        sim.trials = spec.trials;
        sim.seed = spec.seed;
        sim.gbar_db_grid = spec.gbar_db_grid;
        sim.gamma_th_db = sc.gamma_th_db;
        sim.quantization_bits = c.bits;
        sim.error_model = spec.error_model;
        sim.histogram_bins = spec.histogram_bins;
        sim.workers = opt.workers;
        mc = run_trials(gains, cfg, sim);
    }

    ResultSeries curve;
    curve.name = spec.name + "_" + c.label;
    curve.x_name = "gbar_db";
    curve.x = spec.gbar_db_grid;
    nlohmann::json meta{{"case", c.label},
                        {"M", c.aps},
                        {"N", c.elements},
                        {"output", to_string(c.output)},
                        {"mode", to_string(opt.mode)},
                        {"trials", spec.trials},
                        {"seed", spec.seed},
                        {"version", kVersion},
                        {"xi_u", gains.xi_u},
                        {"xi_h", gains.xi_h},
                        {"xi_g", gains.xi_g}};
    meta["B"] = c.bits ? nlohmann::json(*c.bits) : nlohmann::json(nullptr);

    if (has_analytic(c.output)) {
        std::vector<double> out(k), ub(k), lb(k);
        for (std::size_t i = 0; i < k; ++i) {
            const double gbar = db_to_linear(spec.gbar_db_grid[i]);
            if (irs) {
                const auto d = *model_at(spec.gbar_db_grid[i]);
                out[i] = outage(gamma_th, d);
                ub[i] = rate_upper(d);
                lb[i] = rate_lower(d);
            } else {
                out[i] = direct_cdf_snr(gamma_th, gains.xi_u, gbar);
                ub[i] = direct_rate_upper(gains.xi_u, gbar);
                lb[i] = direct_rate_exact(gains.xi_u, gbar);
            }
        }
        curve.add("outage_analytic", std::move(out));
        curve.add("rate_ub", std::move(ub));
        // Without an IRS the exact ergodic rate is known in closed form.
        curve.add(irs ? "rate_lb" : "rate_exact", std::move(lb));
        if (c.bits) {
            std::vector<double> ubq(k), ratio(k);
            for (std::size_t i = 0; i < k; ++i) {
                const auto d = *model_at(spec.gbar_db_grid[i]);
                ubq[i] = rate_upper_quantized(d, *c.bits);
                ratio[i] = ubq[i] / rate_upper(d);
            }
            curve.add("rate_ub_quantized", std::move(ubq));
            curve.add("rate_ratio_quantized", std::move(ratio));
        }
        if (moments) {
            meta["mu_y"] = moments->mu_y;
            meta["sigma2_y"] = moments->sigma2_y;
            meta["gbar_db_outage_1e-2"] = linear_to_db(gbar_for_outage(0.01, gamma_th, *moments, opt.mode));
        } else {
            meta["gbar_db_outage_1e-2"] = linear_to_db(direct_gbar_for_outage(0.01, gamma_th, gains.xi_u));
        }
    }

    if (mc) {
        std::vector<double> out(k), out_lo(k), out_hi(k), rate(k), rate_se(k);
        std::vector<double> rq(k), rq_se(k), ratio(k);
        for (std::size_t i = 0; i < k; ++i) {
            const auto& p = mc->points[i];
            out[i] = irs ? p.outage_rate : p.outage_direct;
            const double nn = static_cast<double>(mc->trials);
            const double half = 1.96 * std::sqrt(out[i] * (1.0 - out[i]) / nn);
            out_lo[i] = std::max(0.0, out[i] - half);
            out_hi[i] = std::min(1.0, out[i] + half);
            rate[i] = irs ? p.rate.value : p.rate_direct.value;
            rate_se[i] = irs ? p.rate.std_error : p.rate_direct.std_error;
            if (c.bits) {
                rq[i] = p.rate_quantized->value;
                rq_se[i] = p.rate_quantized->std_error;
                ratio[i] = rq[i] / rate[i];
            }
        }
        curve.add("outage_mc", std::move(out));
        curve.add("outage_mc_ci_lo", std::move(out_lo));
        curve.add("outage_mc_ci_hi", std::move(out_hi));
        curve.add("rate_mc", std::move(rate));
        curve.add("rate_mc_se", std::move(rate_se));
        if (c.bits) {
            curve.add("rate_mc_quantized", std::move(rq));
            curve.add("rate_mc_quantized_se", std::move(rq_se));
            curve.add("rate_ratio_quantized_mc", std::move(ratio));
        }
        if (irs) {
            meta["y_mean_mc"] = mc->y.mean();
            meta["y_mean_se"] = mc->y.mean_std_error();
            meta["y_var_mc"] = mc->y.variance();
            meta["y_var_se"] = mc->y.variance_std_error();
        }
    }

    std::vector<ResultSeries> result;
    if (spec.distribution_gbar_db) {
        const double gdb = *spec.distribution_gbar_db;
        const auto idx = static_cast<std::size_t>(
            std::find(spec.gbar_db_grid.begin(), spec.gbar_db_grid.end(), gdb) - spec.gbar_db_grid.begin());
        const EmpiricalStats* stats = mc ? &mc->points[idx] : nullptr;
        const auto model = has_analytic(c.output) ? model_at(gdb) : std::nullopt;
        const double gbar = db_to_linear(gdb);
        if (!irs && !has_analytic(c.output) && !stats) throw std::logic_error("run_case: nothing to tabulate");
        auto dist = detail::distribution_series(curve.name + "_dist", stats, model, gains.xi_u, gbar,
                                                spec.histogram_bins);
        dist.metadata = {{"case", c.label}, {"gbar_db", gdb}, {"version", kVersion}, {"seed", spec.seed}};
        if (stats && has_analytic(c.output)) {
            double ks;
            if (model) {
                ks = ks_distance(*stats, *model);
            } else {
                ks = ks_distance(stats->ecdf, [&](double y) { return direct_cdf_snr(y, gains.xi_u, gbar); });
            }
            meta["ks"] = ks;
            dist.metadata["ks"] = ks;
        }
        result.push_back(std::move(dist));
    }
    curve.metadata = std::move(meta);
    result.insert(result.begin(), std::move(curve));
    return result;
}

struct ExperimentResult {
    ExperimentSpec spec;
    FormulaMode mode = FormulaMode::Rederived;
    std::vector<ResultSeries> series;

    friend bool operator==(const ExperimentResult& a, const ExperimentResult& b) {
        return a.spec == b.spec && a.mode == b.mode && a.series == b.series;
    }
};

inline ExperimentResult run_experiment(const ExperimentSpec& spec, const RunOptions& opt = {}) {
    spec.validate();
    ExperimentResult r{spec, opt.mode, {}};
    std::vector<std::vector<ResultSeries>> per_case(spec.cases.size());
    if (opt.parallel_cases && spec.cases.size() > 1) {
        RunOptions inner = opt;
        if (inner.workers == 0) inner.workers = 1;
        std::vector<std::future<std::vector<ResultSeries>>> jobs;
        for (const auto& c : spec.cases)
            jobs.push_back(std::async(std::launch::async, [&spec, &c, inner] { return run_case(spec, c, inner); }));
        for (std::size_t i = 0; i < jobs.size(); ++i) per_case[i] = jobs[i].get();
    } else {
        for (std::size_t i = 0; i < spec.cases.size(); ++i) per_case[i] = run_case(spec, spec.cases[i], opt);
    }
    for (auto& v : per_case)
        for (auto& s : v) r.series.push_back(std::move(s));
    return r;
}

// ---------------------------------------------------------------------------
// Files

inline constexpr std::string_view kManifestName = "manifest.json";

inline nlohmann::json manifest_json(const ExperimentResult& r) {
    nlohmann::json files = nlohmann::json::array();
    for (const auto& s : r.series)
        files.push_back({{"name", s.name}, {"file", s.name + ".csv"}, {"x", s.x_name}, {"metadata", s.metadata}});
    return {{"version", kVersion},
            {"seed", r.spec.seed},
            {"mode", to_string(r.mode)},
            {"spec", spec_to_json(r.spec)},
            {"series", files}};
}

inline void write_experiment(const ExperimentResult& r, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    for (const auto& s : r.series) {
        const auto path = dir / (s.name + ".csv");
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
        write_csv(out, s);
        if (!out) throw std::runtime_error("write failed: " + path.string());
    }
    const auto path = dir / kManifestName;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << manifest_json(r).dump(2) << '\n';
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

inline ExperimentResult read_experiment(const std::filesystem::path& dir) {
    const auto mpath = dir / kManifestName;
    std::ifstream min(mpath, std::ios::binary);
    if (!min) throw std::runtime_error("cannot open " + mpath.string());
    nlohmann::json m;
    try {
        m = nlohmann::json::parse(min);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(mpath.string() + ": " + e.what());
    }
    ExperimentResult r;
    r.spec = spec_from_json(m.at("spec"));
    r.mode = parse_formula_mode(m.at("mode").get<std::string>());
    for (const auto& f : m.at("series")) {
        const auto path = dir / f.at("file").get<std::string>();
        std::ifstream in(path, std::ios::binary);
        if (!in) throw std::runtime_error("cannot open " + path.string());
        ResultSeries s;
        try {
            s = read_csv(in);
        } catch (const std::invalid_argument& e) {
            throw std::runtime_error(path.string() + ": " + e.what());
        }
        s.name = f.at("name").get<std::string>();
        s.metadata = f.at("metadata");
        r.series.push_back(std::move(s));
    }
    return r;
}

// ---------------------------------------------------------------------------
// Comparison

struct Check {
    std::string criterion;  // e.g. "rate_bracketing"
    std::string subject;    // series and point the check applies to
    bool passed = false;
    std::string detail;
};

struct PointDelta {
    std::string series;
    std::string quantity;  // "outage" or "rate"
    double x = 0.0;
    double analytic = 0.0;
    double montecarlo = 0.0;
    double delta = 0.0;  // montecarlo - analytic
};

struct Verdict {
    std::vector<Check> checks;
    std::vector<PointDelta> deltas;
    std::vector<std::pair<std::string, double>> ks;

    bool passed() const {
        return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
    }
};

/// Acceptance thresholds applied by compare().
struct Thresholds {
    double ks_max = 0.01;
    double moment_sigmas = 3.0;
    double outage_sigmas = 3.0;
    double outage_rel = 0.10;
    double outage_floor = 1e-4;
    double outage_reduction = 0.99;
    double irs_benefit_db = 10.0;
    double rate_sigmas = 3.0;
    double rate_gain_ratio = 2.5;
    double ratio_b1 = 0.90;
    double ratio_b2 = 0.98;
    double ratio_b4 = 0.995;
    double ratio_mc_tol = 0.01;
};

namespace detail {

inline std::string fmt(double v) {
    std::ostringstream o;
    o.precision(6);
    o << v;
    return o.str();
}

inline const ResultSeries* find_curve(const ExperimentResult& r, std::size_t m, std::size_t n,
                                      std::optional<int> bits = std::nullopt) {
    for (const auto& s : r.series) {
        if (s.x_name != "gbar_db") continue;
        const auto& md = s.metadata;
        if (!md.contains("M") || !md.contains("N")) continue;
        const bool same_bits = bits ? (md.contains("B") && !md["B"].is_null() && md["B"].get<int>() == *bits)
                                    : (!md.contains("B") || md["B"].is_null());
        if (md["M"].get<std::size_t>() == m && md["N"].get<std::size_t>() == n && same_bits) return &s;
    }
    return nullptr;
}

inline std::optional<std::size_t> index_of(const ResultSeries& s, double x) {
    for (std::size_t i = 0; i < s.x.size(); ++i)
        if (std::abs(s.x[i] - x) < 1e-9) return i;
    return std::nullopt;
}

inline bool has_columns(const ResultSeries& s, std::initializer_list<std::string_view> names) {
    return std::all_of(names.begin(), names.end(), [&](std::string_view n) { return s.find(n) != nullptr; });
}

}  // namespace detail

/// Checks every acceptance threshold whose inputs are present in `r`.
/// Throws std::invalid_argument if a series declared as "both" lacks a column.
inline Verdict compare(const ExperimentResult& r, const Thresholds& t = {}) {
    using detail::fmt;
    Verdict v;
    auto add = [&](std::string criterion, std::string subject, bool ok, std::string detail) {
        v.checks.push_back({std::move(criterion), std::move(subject), ok, std::move(detail)});
    };

    for (const auto& s : r.series) {
        const auto& md = s.metadata;
        if (s.x_name != "gbar_db") {
            if (md.contains("ks")) {
                const double ks = md["ks"].get<double>();
                v.ks.emplace_back(s.name, ks);
                add("ks_distribution", s.name, ks <= t.ks_max, "KS " + fmt(ks) + " <= " + fmt(t.ks_max));
            }
            continue;
        }
        const auto output = md.value("output", std::string("both"));
        if (output != "both") continue;
        const bool irs = md.value("N", std::size_t{0}) > 0;
        for (auto col : {"outage_analytic", "outage_mc", "rate_ub", "rate_mc", "rate_mc_se"})
            if (!s.find(col)) throw std::invalid_argument("series '" + s.name + "': missing column '" + col + "'");
        if (irs && !s.find("rate_lb")) throw std::invalid_argument("series '" + s.name + "': missing column 'rate_lb'");

        const auto& oa = s.at("outage_analytic");
        const auto& om = s.at("outage_mc");
        const auto& ub = s.at("rate_ub");
        const auto& rm = s.at("rate_mc");
        const auto& rse = s.at("rate_mc_se");
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            v.deltas.push_back({s.name, "outage", s.x[i], oa[i], om[i], om[i] - oa[i]});
            const double ra = irs ? 0.5 * (s.at("rate_lb")[i] + ub[i]) : s.at("rate_exact")[i];
            v.deltas.push_back({s.name, "rate", s.x[i], ra, rm[i], rm[i] - ra});
        }

        if (irs && md.contains("y_mean_mc") && md.contains("mu_y")) {
            const double mu = md["mu_y"].get<double>(), s2 = md["sigma2_y"].get<double>();
            const double m = md["y_mean_mc"].get<double>(), mse = md["y_mean_se"].get<double>();
            const double var = md["y_var_mc"].get<double>(), vse = md["y_var_se"].get<double>();
            add("moment_mean", s.name, std::abs(m - mu) <= t.moment_sigmas * mse,
                "mean " + fmt(m) + " vs " + fmt(mu) + " (se " + fmt(mse) + ")");
            add("moment_variance", s.name, std::abs(var - s2) <= t.moment_sigmas * vse,
                "variance " + fmt(var) + " vs " + fmt(s2) + " (se " + fmt(vse) + ")");
        }

        if (irs && md.value("mode", std::string("rederived")) == "rederived") {
            const auto& lb = s.at("rate_lb");
            bool ok = true;
            std::string worst;
            for (std::size_t i = 0; i < s.x.size(); ++i) {
                const double slack = t.rate_sigmas * rse[i];
                if (!(lb[i] <= rm[i] + slack && rm[i] - slack <= ub[i])) {
                    ok = false;
                    worst += " " + fmt(s.x[i]) + "dB[" + fmt(lb[i]) + "," + fmt(rm[i]) + "," + fmt(ub[i]) + "]";
                }
            }
            add("rate_bracketing", s.name, ok, ok ? "lb <= mc <= ub at all " + std::to_string(s.x.size()) + " points"
                                                   : "violated at" + worst);
        }

        if (md.contains("B") && !md["B"].is_null()) {
            if (!detail::has_columns(s, {"rate_ratio_quantized", "rate_ratio_quantized_mc"}))
                throw std::invalid_argument("series '" + s.name + "': missing quantized ratio columns");
            // The analytic ratio is a ratio of upper bounds, so it is only
            // expected to track the simulated ratio at high SNR.
            if (const auto i = detail::index_of(s, 20.0)) {
                const double gap = std::abs(s.at("rate_ratio_quantized")[*i] - s.at("rate_ratio_quantized_mc")[*i]);
                add("quantization_ratio_mc", s.name + "@20dB", gap <= t.ratio_mc_tol,
                    "|analytic - mc| ratio gap " + fmt(gap) + " <= " + fmt(t.ratio_mc_tol));
            }
        }
    }

    // Outage agreement and reduction, M = 36, N = 16 -> 32 at -5 dB.
    {
        const auto* s16 = detail::find_curve(r, 36, 16);
        const auto* s32 = detail::find_curve(r, 36, 32);
        double reduction_a = -1.0, reduction_m = -1.0;
        std::optional<double> a16, m16;
        const double trials = static_cast<double>(r.spec.trials);
        for (const auto* s : {s16, s32}) {
            if (!s || !detail::has_columns(*s, {"outage_analytic", "outage_mc"})) continue;
            const auto i = detail::index_of(*s, -5.0);
            if (!i) continue;
            const double a = s->at("outage_analytic")[*i], m = s->at("outage_mc")[*i];
            if (m >= t.outage_floor) {
                const double se = std::sqrt(m * (1.0 - m) / trials);
                const double tol = std::max(t.outage_sigmas * se, t.outage_rel * m);
                add("outage_agreement", s->name + "@-5dB", std::abs(a - m) <= tol,
                    "analytic " + fmt(a) + " vs mc " + fmt(m) + ", tolerance " + fmt(tol));
            }
            if (s == s16) {
                a16 = a;
                m16 = m;
            } else if (a16 && m16) {
                reduction_a = 1.0 - a / *a16;
                reduction_m = 1.0 - m / *m16;
                add("outage_reduction", "M36 N16->N32 @-5dB",
                    reduction_a >= t.outage_reduction && reduction_m >= t.outage_reduction,
                    "analytic " + fmt(100.0 * reduction_a) + "%, mc " + fmt(100.0 * reduction_m) + "%");
            }
        }
    }

    // IRS benefit at 1e-2 outage, M = 64, N = 64 against no IRS.
    {
        const auto* irs = detail::find_curve(r, 64, 64);
        const auto* base = detail::find_curve(r, 64, 0);
        if (irs && base && irs->metadata.contains("gbar_db_outage_1e-2") &&
            base->metadata.contains("gbar_db_outage_1e-2")) {
            const double gi = irs->metadata["gbar_db_outage_1e-2"].get<double>();
            const double gb = base->metadata["gbar_db_outage_1e-2"].get<double>();
            add("irs_benefit", "M64 N64 vs no IRS", gb - gi >= t.irs_benefit_db,
                "no IRS " + fmt(gb) + " dB, IRS " + fmt(gi) + " dB, gap " + fmt(gb - gi) + " dB");
        }
    }

    // Rate gain of N = 16 over no IRS at 0 dB.
    {
        const auto* irs = detail::find_curve(r, 64, 16);
        const auto* base = detail::find_curve(r, 64, 0);
        if (irs && base && irs->find("rate_mc") && base->find("rate_mc")) {
            const auto i = detail::index_of(*irs, 0.0);
            const auto j = detail::index_of(*base, 0.0);
            if (i && j) {
                const double ratio = irs->at("rate_mc")[*i] / base->at("rate_mc")[*j];
                add("rate_gain", "M64 N16 vs no IRS @0dB", ratio >= t.rate_gain_ratio,
                    "rate ratio " + fmt(ratio) + " (gain " + fmt(100.0 * (ratio - 1.0)) + "%)");
            }
        }
    }

    // Quantization recovery at 20 dB, N = 64.
    for (std::size_t m : {36, 64}) {
        for (auto [bits, floor] : {std::pair{1, t.ratio_b1}, {2, t.ratio_b2}, {4, t.ratio_b4}}) {
            const auto* s = detail::find_curve(r, m, 64, bits);
            if (!s || !s->find("rate_ratio_quantized")) continue;
            const auto i = detail::index_of(*s, 20.0);
            if (!i) continue;
            const double ratio = s->at("rate_ratio_quantized")[*i];
            add("quantization_ratio", s->name + "@20dB", ratio >= floor, "ratio " + fmt(ratio) + " >= " + fmt(floor));
        }
    }
    return v;
}

inline nlohmann::json verdict_json(const Verdict& v) {
    nlohmann::json checks = nlohmann::json::array();
    for (const auto& c : v.checks)
        checks.push_back({{"criterion", c.criterion}, {"subject", c.subject}, {"passed", c.passed}, {"detail", c.detail}});
    nlohmann::json deltas = nlohmann::json::array();
    for (const auto& d : v.deltas)
        deltas.push_back({{"series", d.series}, {"quantity", d.quantity}, {"x", d.x}, {"analytic", d.analytic},
                          {"montecarlo", d.montecarlo}, {"delta", d.delta}});
    nlohmann::json ks = nlohmann::json::object();
    for (const auto& [name, value] : v.ks) ks[name] = value;
    return {{"passed", v.passed()}, {"checks", checks}, {"ks", ks}, {"deltas", deltas}};
}

}  // namespace irslab
