#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "maglorentz/config.hpp"
#include "maglorentz/experiments.hpp"

namespace {

unsigned resolve_workers(std::optional<unsigned> flag, const mlg::Config &cfg) {
    if (flag) return std::max(1u, *flag);
    if (const char *env = std::getenv("MAGLORENTZ_WORKERS")) {
        char *end = nullptr;
        long v = std::strtol(env, &end, 10);
        if (*env == '\0' || *end != '\0' || v < 1)
            throw mlg::ConfigError("MAGLORENTZ_WORKERS", "MAGLORENTZ_WORKERS must be a positive integer");
        return static_cast<unsigned>(v);
    }
    long c = cfg.integer("run.workers");
    return c > 0 ? static_cast<unsigned>(c) : 1u;
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"Magnetic Lorentz gas: scattering, microscopic dynamics and kinetic solvers"};
    app.require_subcommand(1);
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> workers;
    std::optional<std::string> out;
    const char *names[][2] = {{"scatter", "scattering-angle table and cross section"},
                              {"micro", "microscopic trajectories, per-seed and aggregate tables"},
                              {"kinetic", "kinetic equation solve (and optional DSMC)"},
                              {"converge", "convergence study across an eps list"},
                              {"pathology", "pathological-event frequencies across an eps list"},
                              {"compare", "memory contrast: microsim vs GBE vs Markov"}};
    for (auto &n : names) {
        auto *sub = app.add_subcommand(n[0], n[1]);
        sub->add_option("--config", config_path, "configuration file")->check(CLI::ExistingFile);
        sub->add_option("--seed", seed, "master seed (u64)");
        sub->add_option("--workers", workers, "worker threads (falls back to MAGLORENTZ_WORKERS)");
        sub->add_option("--out", out, "output directory");
    }
    CLI11_PARSE(app, argc, argv);
    const std::string experiment = app.get_subcommands().front()->get_name();
    try {
        mlg::Config cfg = config_path.empty() ? mlg::Config() : mlg::Config::load(config_path);
        cfg.set("run.experiment", experiment);
        cfg.validate();
        unsigned w = resolve_workers(workers, cfg);
        std::uint64_t s = seed ? *seed : cfg.u64("run.seed");
        std::string dir = out ? *out : cfg.str("run.out");
        auto report = mlg::run_experiment(cfg, dir, w, s);
        for (const auto &f : report.files) std::cout << "wrote " << f << "\n";
        for (const auto &f : report.failures) std::cerr << "check failed: " << f << "\n";
        return report.ok ? 0 : 1;
    } catch (const mlg::ConfigError &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
