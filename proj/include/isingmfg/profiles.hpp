#pragma once

// One-dimensional variational problems: boundary-layer costs at the initial
// and terminal times and the traveling-wave interfacial cost.
//
// A profile q lives on nodes xi_i = xi_0 + i h.  The discrete functional is
//
//   E[q] = sum_i h [ Wbeta(m_i) + kinetic(m_i, c (q_{i+1} - q_i) / h) ]
//        + nonlocal pair sum (traveling waves only) + endpoint term,
//
// with m_i the interval midpoint value.  The midpoint rule is symmetric under
// q(xi) -> q(-xi), which makes the discrete boundary-layer symmetry exact.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/SparseCore>

#include "isingmfg/kernel.hpp"
#include "isingmfg/potential.hpp"

namespace isingmfg {

struct Profile1D {
    std::vector<double> xi;
    std::vector<double> q;
    double speed = 0.0;   ///< front speed c, 0 for boundary layers
    double horizon = 0.0; ///< R
};

struct LayerResult {
    double value = 0.0;
    Profile1D profile;
    double R_used = 0.0;
    bool converged = false;
    std::size_t iterations = 0;   ///< Newton iterations of the final solve
    double gradient_norm = 0.0;   ///< max-norm of the free gradient at exit
    bool boundary_hit = false;    ///< profile not settled at the truncation boundary
    bool hypothesis_holds = true; ///< traveling waves: Fourier condition on the kernel
};

struct LayerOptions {
    double h = 0.01;          ///< node spacing in the fast variable
    double R = 0.0;           ///< horizon; <= 0 selects it by doubling
    double R_max = 512.0;
    double value_tol = 1e-8;  ///< doubling stops when the value moves less than this
    std::size_t max_newton = 500;
    double grad_tol = 1e-12;
};

/// Discrete functional with value, gradient and (sparse) Hessian over all
/// nodes.  Pinned nodes are handled by the optimiser.
class ProfileFunctional {
public:
    ProfileFunctional(const PotentialParams& params, double h, double speed = 1.0);

    /// Adds the pair term 1/4 sum_ij h^2 J(|i-j| h) (q_i - q_j)^2 over the
    /// lattice extended by constant values `left` (before node 0) and
    /// `right` (after the last node).
    void set_nonlocal(const LineKernel& kernel, double left, double right);
    /// Adds g q_0 + Phi(q_0) / (2 beta) at the first node.
    void set_endpoint(double g);

    double value(std::span<const double> q) const;
    void gradient(std::span<const double> q, std::span<double> out) const;
    Eigen::SparseMatrix<double> hessian(std::span<const double> q) const;

    double h() const { return h_; }

private:
    PotentialParams params_;
    double h_;
    double speed_;
    std::optional<LineKernel> kernel_;
    double left_ = 0.0, right_ = 0.0;
    std::optional<double> endpoint_g_;
};

struct MinimizeResult {
    std::vector<double> q;
    double value = 0.0;
    bool converged = false;
    std::size_t iterations = 0;
    double gradient_norm = 0.0;
};

/// Modified Newton (Levenberg shift until the LDL^T factor is positive
/// definite, Armijo backtracking, values kept in [-1 + 1e-9, 1 - 1e-9]) over
/// the nodes not listed in `pinned`.
MinimizeResult minimize_profile(const ProfileFunctional& f, std::vector<double> q0,
                                const std::vector<std::size_t>& pinned, std::size_t max_iter,
                                double grad_tol);

/// V^init(s0, s_bar): min over q(0) = s0, q(R) = s_bar of E[q], minus Phi(s0)/(2 beta).
LayerResult v_init(double s0, double s_bar, const PotentialParams& params, const LayerOptions& options = {});

/// V^end(s_bar, g): min over q(-R) = s_bar, q(0) free of E[q] + g q(0) + Phi(q(0))/(2 beta).
/// The profile is stored with xi running from the free end (xi = 0) into the past.
LayerResult v_end(double s_bar, double g, const PotentialParams& params, const LayerOptions& options = {});

struct InitMinimum {
    double value = 0.0;
    double s0 = 0.0;
    bool converged = true;  ///< every v_init solve along the search converged
};

/// min over s0 in [-s_star, s_star] of V^init(s0, s_bar) + g s0 + Phi(s0)/beta:
/// a coarse scan followed by golden-section refinement.  Equals V^end(s_bar, g)
/// by the time-reversal symmetry of the decomposed energy.
InitMinimum v_end_from_init(double s_bar, double g, const PotentialParams& params,
                            const LayerOptions& options = {});

/// Traveling-wave cost L~_R(c): min over q(-R) = -s_star, q(R) = s_star,
/// q(0) = 0 of E[q] with speed c and the marginal of `spec` along `axis` as the
/// nonlocal kernel (unscaled, lambda = 1).  hypothesis_holds reports the Fourier
/// condition when a sampled kernel is supplied.
LayerResult traveling_wave(double c, const KernelSpec& spec, int d, int axis, const PotentialParams& params,
                           const LayerOptions& options = {}, const InteractionKernel* sampled = nullptr);

/// Sup over interval midpoints of |q' K_V(q, q') - K(q, q') - Wbeta(q)|.
double beltrami_defect(const Profile1D& profile, const PotentialParams& params);

/// Default horizon seed 10 / sqrt(Wbeta''(s_star)).
double layer_width_seed(const PotentialParams& params);

}  // namespace isingmfg
