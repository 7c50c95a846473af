#pragma once

// Subcommands of the driver.  Each writes its artifacts under
// config.outputs.directory and returns the process exit code (0, or 3 when a
// numerical solve did not converge).  Configuration problems throw.

#include <filesystem>
#include <iosfwd>

#include "run_config.hpp"

namespace isingmfg::cli {

enum ExitCode { exit_ok = 0, exit_failure = 1, exit_config = 2, exit_nonconvergence = 3 };

int run_solve(const RunConfig& config, std::ostream& log);
int run_energy(const RunConfig& config, const std::filesystem::path& field_path, std::ostream& log);
int run_layers(const RunConfig& config, std::ostream& log);
int run_wave(const RunConfig& config, std::ostream& log);
int run_sweep(const RunConfig& config, std::ostream& log);

/// Sets the OpenMP thread count when threads > 0.
void apply_threads(int threads);

}  // namespace isingmfg::cli
