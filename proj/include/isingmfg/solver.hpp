#pragma once

// Damped forward-backward iteration for the macroscopic optimality system
//
//     lambda ds/dt =  sinh(beta p) - s cosh(beta p),     s(0) = s0
//    -lambda dp/dt = -sinh(beta p)/beta + (J * s),       p(T) = -g
//
// Backward: implicit Euler in p (scalar safeguarded Newton per point) with the
// convolution explicit.  Forward: exact integration of the linear ODE in s
// with p frozen on each step, or an implicit Euler step in the semi-implicit
// mode.

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>

#include "isingmfg/energy.hpp"
#include "isingmfg/fields.hpp"
#include "isingmfg/kernel.hpp"
#include "isingmfg/potential.hpp"

namespace isingmfg {

enum class StiffMode { exponential_integrator, semi_implicit };

std::string to_string(StiffMode mode);
StiffMode stiff_mode_from_string(const std::string& name);

struct SolverConfig {
    double theta = 0.5;          ///< damping: s <- theta s_new + (1 - theta) s_old
    std::size_t max_iters = 20000;
    double tol_l1 = 1e-7;        ///< relative L1 change of s between iterations
    StiffMode stiff_mode = StiffMode::exponential_integrator;
    std::size_t newton_max = 60;
    /// History length of Anderson mixing on the map s -> forward(backward(s));
    /// 0 gives plain damped iteration.  theta is the mixing weight either way.
    std::size_t anderson_depth = 5;
    std::size_t progress_every = 0;   ///< 0 disables progress lines
    std::ostream* progress = nullptr;
    std::size_t checkpoint_every = 0; ///< 0 disables checkpoints
    std::filesystem::path checkpoint_dir;

    void validate() const;
};

struct SolveReport {
    std::size_t iterations = 0;
    double final_residual = 0.0;  ///< last relative L1 change of s
    double defect = 0.0;          ///< residual() of the returned pair
    bool converged = false;
    EnergyBreakdown energy;
    double wall_time = 0.0;       ///< seconds
    double theta = 0.0;
    double tol_l1 = 0.0;
};

struct SolveResult {
    SpinField s;
    CostateField p;
    SolveReport report;
};

/// p from p(T) = -g backwards.  Throws ConvergenceError naming the step and
/// cell if a scalar solve fails.
CostateField backward_sweep(const SpinField& s, std::span<const double> g, const InteractionKernel& kernel,
                            const PotentialParams& params, std::size_t newton_max = 60);

SpinField forward_sweep(const CostateField& p, std::span<const double> s0, const PotentialParams& params,
                        StiffMode mode = StiffMode::exponential_integrator);

/// Iterates from `initial` (or s(t) = s0 when null).  Never throws on
/// non-convergence; the report says whether tol_l1 was met.
SolveResult solve(const BoundaryData& bdata, const GridGeometry& geometry, const InteractionKernel& kernel,
                  const PotentialParams& params, const SolverConfig& config,
                  const SpinField* initial = nullptr);

/// Largest of the mean absolute defects of the two discrete equations (and of
/// the initial and terminal conditions) under the solver stencils.
double residual(const SpinField& s, const CostateField& p, const BoundaryData& bdata,
                const InteractionKernel& kernel, const PotentialParams& params,
                StiffMode mode = StiffMode::exponential_integrator);

/// Single-threaded reference versions: plain slice-by-slice loops with the
/// same scalar updates.  The parallel path must reproduce them bit for bit.
namespace serial {

CostateField backward_sweep(const SpinField& s, std::span<const double> g, const InteractionKernel& kernel,
                            const PotentialParams& params, std::size_t newton_max = 60);
SpinField forward_sweep(const CostateField& p, std::span<const double> s0, const PotentialParams& params,
                        StiffMode mode = StiffMode::exponential_integrator);
SolveResult solve(const BoundaryData& bdata, const GridGeometry& geometry, const InteractionKernel& kernel,
                  const PotentialParams& params, const SolverConfig& config);

}  // namespace serial

}  // namespace isingmfg
