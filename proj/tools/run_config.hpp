#pragma once

// Run configuration for the isingmfg driver.  JSON on disk; every key has a
// default so `print-config` shows a complete, runnable file.

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "isingmfg/fields.hpp"
#include "isingmfg/kernel.hpp"
#include "isingmfg/potential.hpp"
#include "isingmfg/profiles.hpp"
#include "isingmfg/solver.hpp"

namespace isingmfg::cli {

/// Raised for malformed or out-of-range configuration; what() starts with the
/// dotted path of the offending field.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// DataExpr plus the name of the unit its values are measured in:
/// "one", "s_star" or "g_max" (the terminal-cost bound).
struct DataSpec {
    DataExpr expr;
    std::string scale = "one";
};

struct ModelConfig {
    double beta = 1.0 / 0.9;
    KernelSpec kernel;  ///< kernel.mass plays the role of j_hat
    double lambda = 1.0 / 40.0;
    double T = 1.5;
    int d = 2;
    std::size_t nx = 80;
    std::size_t nt = 300;
    double extent = 1.0;
    bool allow_subcritical = false;

    GridGeometry geometry() const;
};

struct OutputConfig {
    std::filesystem::path directory = "out";
    bool fields = true;      ///< s.bin and p.bin
    bool slice_csv = false;  ///< per-slice summary table
    bool field_csv = false;  ///< full s field as CSV
    bool interface_csv = false;
};

struct LayersConfig {
    std::vector<double> s0_grid;  ///< in units of s_star
    std::vector<double> g_grid;   ///< in units of g_max
    double h = 0.01;
    double R = 0.0;
    double R_max = 512.0;
};

struct WaveConfig {
    std::vector<double> c_grid;
    double h = 0.05;
    int axis = 0;
    double R = 0.0;
    double R_max = 512.0;
};

struct SweepConfig {
    std::vector<double> beta_inverse;
    std::size_t well_samples = 201;
};

struct RunConfig {
    ModelConfig model;
    DataSpec s0;
    DataSpec g;
    SolverConfig solver;
    OutputConfig outputs;
    LayersConfig layers;
    WaveConfig wave;
    SweepConfig sweep;
    int threads = 0;          ///< 0 keeps the OpenMP default
    std::uint64_t seed = 0;   ///< recorded in reports; no command draws random numbers

    RunConfig();
};

RunConfig parse_config(const nlohmann::json& j);
RunConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& config);

/// Model parameters with j_hat equal to the continuum kernel mass.
PotentialParams model_params(const RunConfig& config);

/// s0 and g on the spatial grid, validated against the bounds.
BoundaryData boundary_data(const RunConfig& config, const PotentialParams& params);

LayerOptions layer_options(const LayersConfig& c);
LayerOptions layer_options(const WaveConfig& c);

}  // namespace isingmfg::cli
