#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "dlab/scenario.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Moser iteration and Harnack certification on Dirichlet spaces"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "bundle";
    long long seed = -1;
    bool strict = false;
    auto* run = app.add_subcommand("run", "run a scenario config and write a result bundle");
    run->add_option("config", config_path, "config JSON file or scenario id (S1..S5)")->required();
    run->add_option("--out-dir", out_dir, "bundle directory");
    run->add_option("--seed", seed, "override the config seed");
    run->add_flag("--strict", strict, "treat unverified items as failures");

    std::string bundle, scratch;
    auto* replay = app.add_subcommand("replay", "re-run a bundle and compare its files");
    replay->add_option("bundle", bundle, "bundle directory")->required();
    replay->add_option("--scratch", scratch, "scratch directory");

    std::vector<std::string> kinds;
    auto* tables = app.add_subcommand("tables", "write CSV tables from a bundle");
    tables->add_option("bundle", bundle, "bundle directory")->required();
    tables->add_option("--kinds", kinds, "margins, ledger, iteration_trace, lorentz_grid");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            dlab::json cfg;
            std::ifstream is(config_path);
            if (is) {
                try {
                    cfg = dlab::json::parse(is);
                } catch (const dlab::json::parse_error& e) {
                    throw dlab::ConfigError(std::string("config is not valid JSON: ") + e.what());
                }
            } else {
                cfg = {{"scenario", config_path}};
            }
            if (seed >= 0) cfg["seed"] = seed;
            auto res = dlab::run_scenario(cfg, out_dir, strict);
            std::printf("%zu reports, %zu failed, %zu unverified\n", res.reports,
                        res.failures.size(), res.unverified.size());
            for (const auto& f : res.failures) std::printf("FAIL %s\n", f.c_str());
            for (const auto& f : res.unverified) std::printf("UNVERIFIED %s\n", f.c_str());
            return res.exit_code;
        }
        if (*replay) {
            if (scratch.empty()) scratch = bundle + ".replay";
            auto rr = dlab::replay_bundle(bundle, scratch);
            for (const auto& d : rr.differing) std::printf("DIFFERS %s\n", d.c_str());
            std::printf("identical: %s, ledger relative difference: %.3g\n",
                        rr.identical ? "yes" : "no", rr.ledger_rel_diff);
            return rr.identical && rr.ledger_rel_diff <= 1e-12 ? 0 : 1;
        }
        if (*tables) {
            dlab::emit_tables(bundle, kinds.empty() ? dlab::table_kinds() : kinds);
            return 0;
        }
    } catch (const dlab::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
    return 0;
}
