// Command-line front end: five subcommands over one shared run description.
// A --config file supplies defaults; explicit flags win.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pdcbell/pdcbell.hpp"

namespace {

// --config is resolved before CLI11 runs so that file values become the
// option defaults, letting CLI11's normal precedence do the overriding.
std::string find_config_path(int argc, char** argv) {
    for (int i = 1; i < argc; ++i) {
        std::string arg = argv[i];
        if (arg == "--config" && i + 1 < argc) return argv[i + 1];
        if (arg.rfind("--config=", 0) == 0) return arg.substr(9);
    }
    return "";
}

void add_run_options(CLI::App* cmd, pdcbell::RunConfig& cfg, std::string& config_path) {
    cmd->add_option("--config", config_path, "config file of key=value lines (flags override)");
    cmd->add_option("--source", cfg.source, "photon source: spin, vacuum, or qiopa");
    cmd->add_option("--n", cfg.n, "pair count for the spin source and count-rule targets");
    cmd->add_option("--r", cfg.r, "amplifier gain");
    cmd->add_option("--rule", cfg.rule, "outcome rule: fraction, exact-n, or window");
    cmd->add_option("--f", cfg.f, "threshold fraction for the fraction rule");
    cmd->add_option("--xm", cfg.xm, "window center; 0 derives it from the gain");
    cmd->add_option("--delta", cfg.delta, "window half-width (highflux: largest half-width swept)");
    cmd->add_option("--t", cfg.t, "detector transmission");
    cmd->add_option("--t-min", cfg.t_min, "sweep start transmission");
    cmd->add_option("--t-max", cfg.t_max, "sweep end transmission");
    cmd->add_option("--t-steps", cfg.t_steps, "number of sweep points");
    cmd->add_option("--psi", cfg.psi, "analyzer step in radians, or 'optimize'");
    cmd->add_option("--window-form", cfg.window_form, "window convention: text or caption");
    cmd->add_option("--eps", cfg.eps, "weight truncation tolerance");
    cmd->add_option("--out", cfg.out, "output file (default: stdout)");
}

} // namespace

int main(int argc, char** argv) {
    pdcbell::RunConfig cfg;
    std::string config_path = find_config_path(argc, argv);
    if (!config_path.empty()) {
        try {
            cfg = pdcbell::RunConfig::parse_file(config_path);
        } catch (const std::exception& e) {
            std::cerr << "config error: " << e.what() << "\n";
            return 2;
        }
    }

    CLI::App app{"Bell-inequality test bench for multi-pair parametric photon sources"};
    app.require_subcommand(1);
    std::string ignored;
    for (const char* name : {"bell", "optimize", "dist", "sweep-t", "highflux"}) {
        CLI::App* sub = app.add_subcommand(name, "");
        add_run_options(sub, cfg, ignored);
    }
    app.get_subcommand("bell")->description("scores at one analyzer step psi");
    app.get_subcommand("optimize")->description("scores at the strong-optimal psi");
    app.get_subcommand("dist")->description("pair-number distribution of the source");
    app.get_subcommand("sweep-t")->description("scores across a transmission sweep");
    app.get_subcommand("highflux")->description("window-rule scores vs half-width and transmission");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    std::string name = app.get_subcommands().front()->get_name();
    return pdcbell::run_command(name, cfg, std::cout, std::cerr);
}
