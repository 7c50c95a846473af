#pragma once

// Constant equilibria and the pitchfork at beta j_hat = 1, extraction of the
// s = 0 interface in space-time, and assembly of the sharp-interface cost from
// tabulated layer and traveling-wave values.

#include <cstddef>
#include <filesystem>
#include <limits>
#include <span>
#include <vector>

#include "isingmfg/fields.hpp"
#include "isingmfg/potential.hpp"

namespace isingmfg {

enum class Stability { stable, unstable };

const char* to_string(Stability s);

struct EquilibriumBranch {
    double s = 0.0;
    double p = 0.0;
    double w_second = 0.0;  ///< Wbeta''(s)
    Stability stability = Stability::stable;
};

struct BifurcationPoint {
    double beta = 0.0;
    double beta_j_product = 0.0;
    std::vector<EquilibriumBranch> equilibria;  ///< ordered by s
};

/// Solves cosh(beta p) = beta j_hat, s = tanh(beta p) together with the
/// trivial branch.  Works on both sides of the transition.
BifurcationPoint constant_equilibria(const PotentialParams& params);

/// Max-norm residual of the stationary system for constant (s, p):
/// sinh(beta p) - s cosh(beta p) and -sinh(beta p)/beta + j_hat s.
double stationary_residual(double s, double p, const PotentialParams& params);

std::vector<BifurcationPoint> bifurcation_sweep(std::span<const double> betas, double j_hat);

struct WellCurve {
    double beta = 0.0;
    std::vector<double> S;
    std::vector<double> W;
};

/// Wbeta on `samples` equispaced points of [-S_max, S_max].
WellCurve double_well_curve(double beta, double j_hat, std::size_t samples, double S_max = 0.99);

// ---------------------------------------------------------------------------

/// One planar piece of the level set inside a simplex of the space-time grid.
struct Facet {
    double tau = 0.0;
    std::vector<double> z;   ///< centroid, wrapped into the torus
    std::vector<double> nu;  ///< unit normal (nu_t, nu_x...), pointing towards s > 0
    double area = 0.0;       ///< d-dimensional measure in (tau, z) units
    double nu_x_norm() const;
    /// Front speed nu_t / |nu_x|; +-inf for a purely temporal facet.
    double speed() const;
};

struct InterfaceMesh {
    int d = 0;
    std::vector<Facet> facets;
    double total_area() const;
    bool empty() const { return facets.empty(); }
};

/// Piecewise-linear level set {s = level} over a Kuhn triangulation of each
/// space-time cell (time nodes x cell centres, periodic in space).
InterfaceMesh extract_interface(const SpinField& s, double level = 0.0);

void save_interface_csv(const std::filesystem::path& path, const InterfaceMesh& mesh);

/// Sign of each value (+1 for value >= 0).
std::vector<int> phase_of(std::span<const double> values);

// ---------------------------------------------------------------------------

/// Piecewise-linear interpolation on increasing abscissae; values outside the
/// range are clamped and reported.
struct Table1D {
    std::vector<double> x;
    std::vector<double> y;

    double operator()(double v, bool* outside = nullptr) const;
    void validate(const char* name) const;
};

struct MacroscopicCost {
    double initial = 0.0;      ///< integral of V^init(s0, phase at 0)
    double terminal = 0.0;     ///< integral of V^end(phase at T, g)
    double interfacial = 0.0;  ///< conjectured Lbar from the traveling-wave table
    double total = 0.0;
    std::size_t extrapolated_cells = 0;
    std::size_t extrapolated_facets = 0;
};

/// v_init_plus(s0) = V^init(s0, +s_star), v_end_plus(g) = V^end(+s_star, g);
/// the minus phase follows by the symmetry s -> -s.  wave holds L~(c) on a
/// c-grid; the interfacial density is Lbar(nu) = L~(|c|) / sqrt(1 + c^2),
/// frozen at the last tabulated speed beyond the table (flagged).
MacroscopicCost macroscopic_cost(const InterfaceMesh& mesh, const BoundaryData& bdata,
                                 const GridGeometry& geometry, std::span<const int> phase_initial,
                                 std::span<const int> phase_terminal, const Table1D& v_init_plus,
                                 const Table1D& v_end_plus, const Table1D& wave);

}  // namespace isingmfg
