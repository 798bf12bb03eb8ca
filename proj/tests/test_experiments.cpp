#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "irslab/experiments.hpp"

using namespace irslab;
namespace fs = std::filesystem;

namespace {

ExperimentSpec small_spec() {
    ExperimentSpec s;
    s.name = "small";
    s.cases = {{"a", 36, 16, std::nullopt, OutputKind::Both},
               {"b", 36, 32, std::nullopt, OutputKind::Both},
               {"q", 36, 64, 2, OutputKind::Both},
               {"base", 64, 0, std::nullopt, OutputKind::Both},
               {"only", 16, 8, std::nullopt, OutputKind::Analytic}};
    s.gbar_db_grid = {-5.0, 0.0, 20.0};
    s.trials = 20000;
    s.seed = 3;
    s.distribution_gbar_db = 0.0;
    s.histogram_bins = 40;
    return s;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("irslab_test_" + name);
    fs::remove_all(p);
    return p;
}

std::string error_path(const nlohmann::json& j) {
    try {
        spec_from_json(j);
    } catch (const SpecError& e) {
        return e.path();
    }
    return "<none>";
}

ResultSeries synthetic(std::size_t m, std::size_t n, std::optional<int> bits = std::nullopt) {
    ResultSeries s;
    s.name = "syn_M" + std::to_string(m) + "_N" + std::to_string(n) + (bits ? "_B" + std::to_string(*bits) : "");
    s.x_name = "gbar_db";
    s.x = {-5.0, 0.0, 20.0};
    s.metadata = {{"M", m}, {"N", n}, {"output", "both"}, {"mode", "rederived"}};
    s.metadata["B"] = bits ? nlohmann::json(*bits) : nlohmann::json(nullptr);
    s.add("outage_analytic", {0.05, 0.01, 0.0});
    s.add("outage_mc", {0.05, 0.01, 0.0});
    s.add("rate_ub", {2.0, 3.0, 9.0});
    s.add(n ? "rate_lb" : "rate_exact", {1.8, 2.8, 8.8});
    s.add("rate_mc", {1.9, 2.9, 8.9});
    s.add("rate_mc_se", {0.001, 0.001, 0.001});
    return s;
}

const Check* find_check(const Verdict& v, std::string_view criterion) {
    for (const auto& c : v.checks)
        if (c.criterion == criterion) return &c;
    return nullptr;
}

}  // namespace

TEST(Specs, BuiltinsValidateAndRoundTrip) {
    for (const auto& name : builtin_spec_names()) {
        const auto s = builtin_spec(name);
        EXPECT_EQ(s.name, name);
        EXPECT_EQ(spec_from_json(spec_to_json(s)), s) << name;
        EXPECT_EQ(spec_from_json(nlohmann::json::parse(spec_to_json(s).dump())), s) << name;
    }
    EXPECT_THROW(builtin_spec("fig9"), std::invalid_argument);
    EXPECT_EQ(builtin_spec("fig3").cases.size(), 7u);
    EXPECT_EQ(builtin_spec("fig5").cases.size(), 16u);
}

TEST(Specs, DefaultsAndGridObject) {
    const auto s = spec_from_json(nlohmann::json::parse(R"({
        "name": "g", "outputs": "analytic",
        "cases": [{"M": 4, "N": 2}, {"M": 4, "output": "both"}],
        "gbar_db_grid": {"start": -1, "stop": 1, "step": 0.5}
    })"));
    EXPECT_EQ(s.gbar_db_grid, (std::vector<double>{-1, -0.5, 0, 0.5, 1}));
    EXPECT_EQ(s.cases[0].output, OutputKind::Analytic);
    EXPECT_EQ(s.cases[1].output, OutputKind::Both);
    EXPECT_EQ(s.cases[1].elements, 0u);
    EXPECT_EQ(s.cases[0].label, "case_M4_N2");
    EXPECT_EQ(s.trials, 1000000u);
    EXPECT_EQ(s.scenario.reference_gain_db, 49.0);
    EXPECT_EQ(db_grid(-20, 20, 1).size(), 41u);
}

TEST(Specs, ErrorsNameTheField) {
    auto base = spec_to_json(small_spec());
    auto with = [&](auto mutate) {
        auto j = base;
        mutate(j);
        return error_path(j);
    };
    EXPECT_EQ(with([](auto& j) { j["cases"][1]["N"] = -1; }), "cases[1].N");
    EXPECT_EQ(with([](auto& j) { j["cases"][0]["M"] = 0; }), "cases[0].M");
    EXPECT_EQ(with([](auto& j) { j["cases"][2]["B"] = 0; }), "cases[2].B");
    EXPECT_EQ(with([](auto& j) { j["cases"][3]["B"] = 2; }), "cases[3].B");
    EXPECT_EQ(with([](auto& j) { j["cases"][1]["label"] = "a"; }), "cases[1].label");
    EXPECT_EQ(with([](auto& j) { j["cases"][0]["output"] = "plots"; }), "cases[0].output");
    EXPECT_EQ(with([](auto& j) { j["cases"][0]["M"] = "many"; }), "cases[0].M");
    EXPECT_EQ(with([](auto& j) { j["trials"] = 0; }), "trials");
    EXPECT_EQ(with([](auto& j) { j["gbar_db_grid"] = {1.0, 0.0}; }), "gbar_db_grid[1]");
    EXPECT_EQ(with([](auto& j) { j["gbar_db_grid"] = nlohmann::json::object({{"start", 0}, {"stop", 1}}); }),
              "gbar_db_grid.step");
    EXPECT_EQ(with([](auto& j) { j["distribution_gbar_db"] = 7.0; }), "distribution_gbar_db");
    EXPECT_EQ(with([](auto& j) { j["scenario"]["kappa"] = -2; }), "scenario.kappa");
    EXPECT_EQ(with([](auto& j) { j["scenario"]["colour"] = 1; }), "scenario.colour");
    EXPECT_EQ(with([](auto& j) { j["bogus"] = 1; }), "bogus");
    EXPECT_EQ(with([](auto& j) { j.erase("name"); }), "name");
    EXPECT_EQ(with([](auto& j) { j["error_model"] = "gaussian"; }), "error_model");
    EXPECT_EQ(error_path(nlohmann::json::array()), "$");
}

TEST(Runner, ReproducibleAndRoundTrips) {
    const auto spec = small_spec();
    const auto a = run_experiment(spec);
    RunOptions par;
    par.parallel_cases = true;
    const auto b = run_experiment(spec, par);
    EXPECT_EQ(a, b);

    const auto d1 = scratch("run1"), d2 = scratch("run2");
    write_experiment(a, d1);
    write_experiment(b, d2);
    for (const auto& e : fs::directory_iterator(d1))
        EXPECT_EQ(slurp(e.path()), slurp(d2 / e.path().filename())) << e.path();
    EXPECT_EQ(read_experiment(d1), a);
    fs::remove_all(d1);
    fs::remove_all(d2);
}

TEST(Runner, SeriesLayout) {
    const auto r = run_experiment(small_spec());
    // Curve plus distribution table per case.
    ASSERT_EQ(r.series.size(), 10u);
    const auto& a = r.series[0];
    EXPECT_EQ(a.name, "small_a");
    for (auto col : {"outage_analytic", "rate_ub", "rate_lb", "outage_mc", "outage_mc_ci_lo", "outage_mc_ci_hi",
                     "rate_mc", "rate_mc_se"})
        EXPECT_NE(a.find(col), nullptr) << col;
    EXPECT_EQ(a.metadata["version"], std::string(kVersion));
    EXPECT_EQ(a.metadata["seed"], 3);
    const auto& dist = r.series[1];
    EXPECT_EQ(dist.x_name, "snr");
    EXPECT_EQ(dist.name, "small_a_dist");
    const auto& cdf = dist.at("cdf_analytic");
    EXPECT_TRUE(std::is_sorted(cdf.begin(), cdf.end()));
    EXPECT_TRUE(dist.metadata.contains("ks"));

    const auto& q = r.series[4];
    EXPECT_NE(q.find("rate_ratio_quantized"), nullptr);
    EXPECT_NE(q.find("rate_ratio_quantized_mc"), nullptr);
    const auto& base = r.series[6];
    EXPECT_NE(base.find("rate_exact"), nullptr);
    EXPECT_EQ(base.find("rate_lb"), nullptr);
    const auto& only = r.series[8];
    EXPECT_EQ(only.find("outage_mc"), nullptr);
    EXPECT_NE(only.find("outage_analytic"), nullptr);
    EXPECT_FALSE(only.metadata.contains("ks"));

    for (const auto& s : r.series) {
        if (s.x_name != "gbar_db" || !s.find("outage_mc")) continue;
        const auto& lo = s.at("outage_mc_ci_lo");
        const auto& hi = s.at("outage_mc_ci_hi");
        for (std::size_t i = 0; i < s.x.size(); ++i) EXPECT_LE(lo[i], hi[i]);
    }
}

TEST(Runner, SmallRunPassesItsChecks) {
    const auto v = compare(run_experiment(small_spec()));
    for (const auto& c : v.checks) EXPECT_TRUE(c.passed) << c.criterion << ' ' << c.subject << ' ' << c.detail;
    EXPECT_NE(find_check(v, "rate_bracketing"), nullptr);
    EXPECT_NE(find_check(v, "moment_mean"), nullptr);
    EXPECT_NE(find_check(v, "ks_distribution"), nullptr);
    EXPECT_NE(find_check(v, "quantization_ratio_mc"), nullptr);
    EXPECT_FALSE(v.deltas.empty());
    const auto j = verdict_json(v);
    EXPECT_EQ(j["passed"], v.passed());
    EXPECT_EQ(j["checks"].size(), v.checks.size());
}

TEST(Compare, SyntheticAgreementPasses) {
    ExperimentResult r;
    r.spec = small_spec();
    r.series = {synthetic(36, 16), synthetic(64, 0)};
    const auto v = compare(r);
    ASSERT_NE(find_check(v, "rate_bracketing"), nullptr);
    EXPECT_TRUE(v.passed());
    for (const auto& d : v.deltas)
        if (d.quantity == "outage") EXPECT_EQ(d.delta, 0.0);
}

TEST(Compare, CorruptedColumnFailsNamedCriterion) {
    ExperimentResult r;
    r.spec = small_spec();
    r.series = {synthetic(36, 16)};
    r.series[0].columns[4].values[1] = 3.5;  // rate_mc above the upper bound
    const auto v = compare(r);
    EXPECT_FALSE(v.passed());
    const auto* c = find_check(v, "rate_bracketing");
    ASSERT_NE(c, nullptr);
    EXPECT_FALSE(c->passed);
    EXPECT_NE(c->detail.find("0dB"), std::string::npos);
}

TEST(Compare, OutageChecks) {
    ExperimentResult r;
    r.spec = small_spec();
    r.spec.trials = 1000000;
    auto s16 = synthetic(36, 16);
    auto s32 = synthetic(36, 32);
    s32.columns[0].values[0] = 1e-4;  // analytic
    s32.columns[1].values[0] = 2e-4;  // mc, 2x off
    r.series = {s16, s32};
    const auto v = compare(r);
    const auto* red = find_check(v, "outage_reduction");
    ASSERT_NE(red, nullptr);
    EXPECT_TRUE(red->passed);
    int failed = 0;
    for (const auto& c : v.checks)
        if (c.criterion == "outage_agreement" && !c.passed) ++failed;
    EXPECT_EQ(failed, 1);
}

TEST(Compare, MissingColumnThrows) {
    ExperimentResult r;
    r.spec = small_spec();
    r.series = {synthetic(36, 16)};
    r.series[0].columns.erase(r.series[0].columns.begin() + 3);  // rate_lb
    EXPECT_THROW(compare(r), std::invalid_argument);
    r.series = {synthetic(36, 64, 2)};
    EXPECT_THROW(compare(r), std::invalid_argument);
}

TEST(Files, ReadErrors) {
    const auto d = scratch("bad");
    EXPECT_THROW(read_experiment(d), std::runtime_error);
    fs::create_directories(d);
    std::ofstream(d / "manifest.json") << "{not json";
    EXPECT_THROW(read_experiment(d), std::runtime_error);
    fs::remove_all(d);
}
