#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "commands.hpp"
#include "isingmfg/errors.hpp"

using namespace isingmfg;
using namespace isingmfg::cli;

int main(int argc, char** argv) {
    CLI::App app{"isingmfg: forward-backward solver and 1D profile problems for the mean-field Ising game"};
    app.require_subcommand(1);

    std::string config_path, out_dir, field_path;
    int threads = -1;
    std::vector<double> s0_grid, g_grid, c_grid, beta_inverse;

    auto common = [&](CLI::App* sub) {
        sub->add_option("-c,--config", config_path, "JSON run configuration (defaults when omitted)");
        sub->add_option("-o,--out", out_dir, "output directory, overrides outputs.directory");
        sub->add_option("-t,--threads", threads, "OpenMP threads, overrides the threads key");
    };

    auto* solve = app.add_subcommand("solve", "solve the forward-backward system and write fields and reports");
    common(solve);
    auto* energy = app.add_subcommand("energy", "itemised cost of a stored spin field");
    common(energy);
    energy->add_option("-f,--field", field_path, "spin field file (.bin or .csv)")->required();
    auto* layers = app.add_subcommand("layers", "initial and terminal boundary-layer tables");
    common(layers);
    layers->add_option("--s0", s0_grid, "s0 values in units of s_star")->delimiter(',');
    layers->add_option("--g", g_grid, "g values in units of the terminal bound")->delimiter(',');
    auto* wave = app.add_subcommand("wave", "traveling-wave interfacial cost over front speeds");
    common(wave);
    wave->add_option("--speeds", c_grid, "front speeds c >= 0")->delimiter(',');
    auto* sweep = app.add_subcommand("sweep", "constant equilibria and double-well curves over beta");
    common(sweep);
    sweep->add_option("--beta-inverse", beta_inverse, "values of 1/beta")->delimiter(',');
    auto* print = app.add_subcommand("print-config", "print the full configuration with defaults filled in");
    print->add_option("-c,--config", config_path, "configuration to complete");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_config;
    }

    try {
        RunConfig config = config_path.empty() ? RunConfig{} : load_config(config_path);
        if (!out_dir.empty()) config.outputs.directory = out_dir;
        if (threads >= 0) config.threads = threads;
        if (!s0_grid.empty()) config.layers.s0_grid = s0_grid;
        if (!g_grid.empty()) config.layers.g_grid = g_grid;
        if (!c_grid.empty()) config.wave.c_grid = c_grid;
        if (!beta_inverse.empty()) config.sweep.beta_inverse = beta_inverse;
        // Re-validate after command-line overrides.
        config = parse_config(to_json(config));

        if (*print) {
            std::cout << to_json(config).dump(2) << '\n';
            return exit_ok;
        }
        if (*solve) return run_solve(config, std::cerr);
        if (*energy) return run_energy(config, field_path, std::cerr);
        if (*layers) return run_layers(config, std::cerr);
        if (*wave) return run_wave(config, std::cerr);
        if (*sweep) return run_sweep(config, std::cerr);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return exit_config;
    } catch (const ParameterError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return exit_config;
    } catch (const ShapeError& e) {
        std::cerr << "input error: " << e.what() << '\n';
        return exit_config;
    } catch (const ConvergenceError& e) {
        std::cerr << "no convergence: " << e.what() << '\n';
        return exit_nonconvergence;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_failure;
    }
    return exit_failure;
}
