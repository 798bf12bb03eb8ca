// SPDX-License-Identifier: Apache-2.0
//
// irslab command-line driver.
//
//   irslab run <spec-name|spec-file> [--trials T] [--seed S] [--out DIR]
//              [--mode as-printed|rederived] [--parallel]
//   irslab compare <dir> [--json FILE]
//   irslab topology [--aps M] [--seed S] [--reference-gain DB]
//   irslab specs

#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "irslab/experiments.hpp"

namespace {

irslab::ExperimentSpec load_spec(const std::string& ref) {
    if (std::filesystem::is_regular_file(ref)) {
        std::ifstream in(ref);
        if (!in) throw std::runtime_error("cannot open spec file " + ref);
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(in);
        } catch (const nlohmann::json::exception& e) {
            throw std::runtime_error(ref + ": " + e.what());
        }
        return irslab::spec_from_json(j);
    }
    return irslab::builtin_spec(ref);
}

int print_verdict(const irslab::Verdict& v, const std::optional<std::string>& json_path) {
    for (const auto& c : v.checks)
        std::cout << (c.passed ? "PASS " : "FAIL ") << c.criterion << "  " << c.subject << "  " << c.detail << '\n';
    if (v.checks.empty()) std::cout << "no acceptance checks apply to this result set\n";
    if (json_path) {
        std::ofstream out(*json_path);
        if (!out) throw std::runtime_error("cannot write " + *json_path);
        out << irslab::verdict_json(v).dump(2) << '\n';
    }
    std::cout << (v.passed() ? "all checks passed" : "some checks failed") << '\n';
    return v.passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"IRS-aided cell-free link simulator"};
    app.require_subcommand(1);

    std::string spec_ref, out_dir = "results", mode_text = "rederived";
    std::optional<std::size_t> trials;
    std::optional<std::uint64_t> seed;
    bool parallel = false;
    unsigned workers = 0;
    auto* run = app.add_subcommand("run", "run an experiment and write CSV + manifest");
    run->add_option("spec", spec_ref, "built-in spec name (fig2..fig5) or JSON spec file")->required();
    run->add_option("--trials", trials, "Monte-Carlo trials per case");
    run->add_option("--seed", seed, "Monte-Carlo seed");
    run->add_option("--out", out_dir, "output directory");
    run->add_option("--mode", mode_text, "closed-form variant")->check(CLI::IsMember({"as-printed", "rederived"}));
    run->add_flag("--parallel", parallel, "run cases concurrently");
    run->add_option("--workers", workers, "trial worker threads per case (0 = all cores)");

    std::string cmp_dir;
    std::optional<std::string> json_out;
    auto* cmp = app.add_subcommand("compare", "check a result directory against the acceptance thresholds");
    cmp->add_option("dir", cmp_dir, "result directory")->required();
    cmp->add_option("--json", json_out, "also write the verdict as JSON");

    std::size_t topo_aps = 64;
    std::uint64_t topo_seed = irslab::Scenario{}.topology_seed;
    double topo_gain = irslab::Scenario{}.reference_gain_db;
    auto* topo = app.add_subcommand("topology", "print the default topology and link gains as JSON");
    topo->add_option("--aps", topo_aps, "number of APs");
    topo->add_option("--seed", topo_seed, "topology seed");
    topo->add_option("--reference-gain", topo_gain, "reference gain [dB]");

    auto* specs = app.add_subcommand("specs", "print the built-in specs as JSON");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            auto spec = load_spec(spec_ref);
            if (trials) spec.trials = *trials;
            if (seed) spec.seed = *seed;
            spec.validate();
            irslab::RunOptions opt;
            opt.mode = irslab::parse_formula_mode(mode_text);
            opt.parallel_cases = parallel;
            opt.workers = workers;
            const auto result = irslab::run_experiment(spec, opt);
            irslab::write_experiment(result, out_dir);
            std::cout << "wrote " << result.series.size() << " series to " << out_dir << '\n';
            return print_verdict(irslab::compare(result), std::nullopt);
        }
        if (*cmp) return print_verdict(irslab::compare(irslab::read_experiment(cmp_dir)), json_out);
        if (*topo) {
            irslab::Scenario sc;
            sc.topology_seed = topo_seed;
            sc.reference_gain_db = topo_gain;
            const auto t = irslab::scenario_topology(sc, topo_aps);
            nlohmann::json j{{"topology", t}, {"gains", irslab::build_link_gains(t, topo_seed)}};
            std::cout << j.dump(2) << '\n';
            return 0;
        }
        if (*specs) {
            nlohmann::json j = nlohmann::json::array();
            for (const auto& name : irslab::builtin_spec_names()) j.push_back(irslab::spec_to_json(irslab::builtin_spec(name)));
            std::cout << j.dump(2) << '\n';
            return 0;
        }
    } catch (const irslab::SpecError& e) {
        std::cerr << "invalid spec: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
