// ifseq-cli: solve generations of an IFS, export figure data, extrapolate the
// capacity, evaluate potentials.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "ifseq/cli/commands.hpp"

namespace {

// Output directory: --output-dir, else IFSEQ_OUTPUT_DIR, else the config.
ifseq::cli::RunConfig load(const std::string& path, const std::string& output_dir) {
    auto cfg = ifseq::cli::load_config(path);
    if (!output_dir.empty()) {
        cfg.output_dir = output_dir;
    } else if (const char* env = std::getenv("IFSEQ_OUTPUT_DIR"); env != nullptr && *env != '\0') {
        cfg.output_dir = env;
    }
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Equilibrium measures on attractors of affine iterated function systems"};
    app.require_subcommand(1);

    std::string config;
    std::string output_dir;
    bool no_cache = false;
    bool solve_missing = false;
    std::string which = "all";
    std::string points;
    std::optional<int> generation;

    const auto common = [&](CLI::App* sub) {
        sub->add_option("--config,-c", config, "JSON run configuration")->required();
        sub->add_option("--output-dir,-o", output_dir, "overrides output_dir and IFSEQ_OUTPUT_DIR");
        sub->add_flag("--no-cache", no_cache, "ignore stored solutions");
    };

    auto* solve = app.add_subcommand("solve", "solve generations 1..n_max and store gen_<n>.json");
    common(solve);

    auto* figures = app.add_subcommand("figures", "write the CSV data of the figures");
    common(figures);
    figures->add_option("--which,-w", which, "all, or comma-separated ids / numbers 1-8")->capture_default_str();
    figures->add_flag("--solve", solve_missing, "solve generations missing from the output directory");

    auto* capacity = app.add_subcommand("capacity", "per-generation potentials and extrapolated capacity");
    common(capacity);
    capacity->add_flag("--solve", solve_missing, "solve generations missing from the output directory");

    auto* potential = app.add_subcommand("potential", "V(z) at given points");
    common(potential);
    potential->add_option("--points,-p", points, "file with x or x,y per line, or a grid lo:hi:count")->required();
    potential->add_option("--generation,-n", generation, "generation to use (default n_max)");
    potential->add_flag("--solve", solve_missing, "solve generations missing from the output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : ifseq::cli::kConfigError;
    }

    ifseq::cli::RunConfig cfg;
    try {
        cfg = load(config, output_dir);
    } catch (const ifseq::cli::ConfigError& e) {
        std::cerr << e.what() << "\n";
        return ifseq::cli::kConfigError;
    }
    if (no_cache) {
        cfg.cache = false;
    }

    if (solve->parsed()) {
        return ifseq::cli::cmd_solve(cfg, std::cout, std::cerr);
    }
    if (figures->parsed()) {
        return ifseq::cli::cmd_figures(cfg, which, solve_missing, std::cout, std::cerr);
    }
    if (capacity->parsed()) {
        return ifseq::cli::cmd_capacity(cfg, solve_missing, std::cout, std::cerr);
    }
    return ifseq::cli::cmd_potential(cfg, points, generation, solve_missing, std::cout, std::cerr);
}
