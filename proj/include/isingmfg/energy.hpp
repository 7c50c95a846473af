#pragma once

// Cost and energy functionals of a spin field.
//
// Discretisation.  Each time interval [t_n, t_{n+1}] contributes once.  On it
// the velocity is V = lambda (s_{n+1} - s_n) / dt and every running term is
// evaluated at S* = phi_mean_value_point(s_n, s_{n+1}), the point where Phi'
// equals the divided difference of Phi.  With this choice the Phi transport
// term sums to (Phi(s(T)) - Phi(s(0))) / (2 beta) exactly, so the raw cost and
// its decomposition agree to rounding.  Space uses the cell-centre rule.
//
// All functions expect params.j_hat to be the discrete mass of the kernel
// (see params_for) and throw ParameterError otherwise.

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "isingmfg/fields.hpp"
#include "isingmfg/kernel.hpp"
#include "isingmfg/potential.hpp"

namespace isingmfg {

/// Potential parameters with j_hat taken from the discrete kernel mass.
PotentialParams params_for(const InteractionKernel& kernel, double beta, bool allow_subcritical = false);

struct EnergyBreakdown {
    double double_well = 0.0;
    double kinetic_psi = 0.0;
    double phi_transport = 0.0;  ///< running V Phi'(S)/(2 beta) term; telescopes to phi_boundary
    double nonlocal = 0.0;
    double terminal_g = 0.0;     ///< sum of g s(T) dz
    double phi_terminal = 0.0;   ///< sum of Phi(s(T)) dz / (2 beta)
    double phi_initial = 0.0;    ///< sum of Phi(s(0)) dz / (2 beta)
    double phi_boundary = 0.0;   ///< phi_terminal - phi_initial
    double total_raw = 0.0;
    double total_decomposed = 0.0;

    /// The running energy G over the whole domain.
    double running() const { return double_well + kinetic_psi + nonlocal; }
};

/// Space-time window: time intervals [t_begin, t_end) and an axis-aligned box
/// of cells [lo, hi) per axis (empty lo/hi means the whole torus).  With
/// `complement` set the spatial part is the complement of the box.
struct Window {
    std::size_t t_begin = 0;
    std::size_t t_end = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> lo;
    std::vector<std::size_t> hi;
    bool complement = false;

    /// One flag per cell, 1 inside the spatial part.
    std::vector<unsigned char> mask(const SpatialGrid& grid) const;
};

/// Macroscopic cost through the optimal flip rates and the Lagrangian.
double cost_raw(const SpinField& s, const BoundaryData& bdata, const InteractionKernel& kernel,
                const PotentialParams& params);

/// Itemised cost; also fills total_raw.
EnergyBreakdown cost_decomposed(const SpinField& s, const BoundaryData& bdata,
                                const InteractionKernel& kernel, const PotentialParams& params);

/// Localised running energy with the nonlocal term restricted to A x A.
double energy_G(const SpinField& s, const Window& A, const InteractionKernel& kernel,
                const PotentialParams& params);
/// Local terms only (double well and kinetic).
double energy_G_loc(const SpinField& s, const Window& A, const InteractionKernel& kernel,
                    const PotentialParams& params);
/// Nonlocal term over A x (whole torus, periodically extended).
double energy_F(const SpinField& s, const Window& A, const InteractionKernel& kernel,
                const PotentialParams& params);
/// (1/(4 lambda)) sum over A x A' of J(z-w) (S*(z) - S*(w))^2, integrated over
/// the time intervals of A.
double locality_defect(const SpinField& s, const Window& A, const Window& A_prime,
                       const InteractionKernel& kernel, const PotentialParams& params);

/// Running energy per interval and cell, shape (nt-1) x N, already weighted
/// by dt dx^d.  Sums to cost_decomposed(...).running().
std::vector<double> energy_density(const SpinField& s, const InteractionKernel& kernel,
                                   const PotentialParams& params);

struct ScalingResult {
    double lhs = 0.0;
    double rhs = 0.0;
    double discrepancy = 0.0;  ///< |lhs - rhs| / max(|lhs|, tiny)
};

/// Compares F^lambda(s; [tau, tau + r T_window] x torus) with
/// r^d F^{lambda/r}(R s; [0, T_window] x torus/r).  tau and tau + r T_window
/// must be time nodes of s.
ScalingResult scaling_check(const SpinField& s, double tau, std::span<const double> z, double r,
                            double T_window, const InteractionKernel& kernel,
                            const PotentialParams& params);

}  // namespace isingmfg
