// Command-line front end: parse the config, apply flag overrides, dispatch.
// Exit codes: 0 ok, 2 config error, 3 numeric failure, 4 acceptance failure.

#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "fracbubble/io.hpp"

int main(int argc, char** argv) {
    CLI::App app{
        "fracbubble: bubbling solutions of the fractional Lane-Emden problem "
        "at nearly critical exponents"};
    app.require_subcommand(1);
    app.fallthrough(true);
    app.footer(std::string("Cache directory for Green tables: $") +
               fracbubble::kCacheEnvVar + " (unset disables caching).");

    std::string config_path, out_dir;
    int threads = 0;
    double tol = 0.0;
    unsigned seed = 0;
    auto* opt_config =
        app.add_option("--config", config_path, "flat key = value config file");
    auto* opt_out = app.add_option("--out", out_dir, "output directory");
    auto* opt_threads =
        app.add_option("--threads", threads, "worker threads (0 = default)");
    auto* opt_tol = app.add_option("--tol", tol, "numeric tolerance");
    auto* opt_seed = app.add_option("--seed", seed, "random seed");

    app.add_subcommand("constants",
                       "resolve the profile constants and their residuals");
    app.add_subcommand("green", "tabulate Green and regular-part fields");
    app.add_subcommand("robin", "scan the Robin function along rays");
    app.add_subcommand("psi_scan", "evaluate the reduced energy on a grid");
    app.add_subcommand("find_critical",
                       "search the reduced energy for critical points");
    app.add_subcommand("ansatz",
                       "expand the ansatz energy and solve the projected "
                       "correction");
    app.add_subcommand("verify", "run the acceptance suite");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    fracbubble::ExperimentConfig cfg;
    try {
        if (opt_config->count())
            cfg = fracbubble::parse_config_file(config_path);
        fracbubble::CliOverrides o;
        if (opt_out->count()) o.out = out_dir;
        if (opt_threads->count()) o.threads = threads;
        if (opt_tol->count()) o.tol = tol;
        if (opt_seed->count()) o.seed = seed;
        fracbubble::apply_overrides(cfg, o);
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    }

    const std::string name = app.get_subcommands().front()->get_name();
    return fracbubble::run_command(name, cfg, std::cout);
}
