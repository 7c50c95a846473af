#pragma once

// Closed-form scalar functions of the Ising game: the double-well potential,
// the kinetic penalty of the time derivative, the entropy term Phi, optimal
// flip rates and the Hamiltonian.
//
// Conventions: S is the local mean spin in (-1,1), V its (mesoscopic) velocity,
// sigma(S) = sqrt((1-S)(1+S)).  The local cost W(S,V) splits exactly as
//
//     W(S,V) = Wbeta(S) + V * Phi'(S) / (2 beta) + kinetic(S,V)
//
// with kinetic(S,V) = (2/beta) * psi(S,V) and psi carrying the factor 1/2 in
// front of its defining integral.

#include <cmath>

namespace isingmfg {

struct PotentialParams {
    double beta = 1.0 / 0.9;
    double j_hat = 1.0;
    /// Allow beta*j_hat <= 1.  The equilibrium magnetisation is then 0 and
    /// equilibrium-specific checks are skipped.
    bool allow_subcritical = false;

    PotentialParams() = default;
    PotentialParams(double beta_, double j_hat_, bool allow_subcritical_ = false);

    bool supercritical() const { return beta * j_hat > 1.0; }
    /// Stationary running cost subtracted from the Lagrangian.
    double lambda_const() const { return -0.5 * j_hat - 0.5 / (beta * beta * j_hat); }
    /// Throws ParameterError unless supercritical or explicitly opted into subcritical use.
    void require_supercritical(const char* what) const;
};

struct EquilibriumInfo {
    double s_star = 0.0;        ///< magnetisation of the two stable constant equilibria
    double lambda_const = 0.0;  ///< stationary cost
    double p_star = 0.0;        ///< costate magnitude of the equilibria, beta^-1 arccosh(beta j_hat)
};

EquilibriumInfo equilibrium(const PotentialParams& params);

/// Double-well potential Wbeta(S) = -sqrt(1-S^2)/beta - j_hat S^2/2 - Lambda.
/// Evaluated as (j_hat/2) (sqrt(1-S^2) - 1/(beta j_hat))^2, which is the same
/// function without the cancellation near the minima.
double double_well(double S, const PotentialParams& params);
double double_well_prime(double S, const PotentialParams& params);
double double_well_second(double S, const PotentialParams& params);

/// psi(S,V) = 1/2 int_0^V (V-Z) / sqrt(Z^2 + (1-S)(1+S)) dZ, closed form.
double psi(double S, double V);
/// d psi / dV = asinh(V / sigma) / 2.
double psi_v(double S, double V);

/// Value and derivatives of kinetic(S,V) = W - Wbeta - V Phi'/(2 beta).
struct KineticJet {
    double value = 0.0;
    double dS = 0.0, dV = 0.0;
    double dSS = 0.0, dSV = 0.0, dVV = 0.0;
};
double kinetic(double S, double V, const PotentialParams& params);
KineticJet kinetic_jet(double S, double V, const PotentialParams& params);

/// Phi(S) = (1+S)log(1+S) + (1-S)log(1-S).  Defined on [-1,1]; the endpoints
/// return the continuous limit 2 log 2.
double phi(double S);
/// Phi'(S) = log((1+S)/(1-S)).  Returns +-inf at S = +-1 unless strict, in
/// which case the endpoints throw DomainError.
double phi_prime(double S, bool strict = false);
double phi_second(double S);
double phi_third(double S);

/// The point S* between a and b with Phi'(S*) = (Phi(b) - Phi(a)) / (b - a).
/// Evaluating the running cost at S* makes the Phi transport term telescope
/// exactly on a discrete time grid.
double phi_mean_value_point(double a, double b);
/// The divided difference (Phi(b) - Phi(a)) / (b - a), Phi'(a) when a == b.
double phi_divided_difference(double a, double b);

struct Controls {
    double a_plus = 1.0;   ///< rate of flipping from +1 to -1
    double a_minus = 1.0;  ///< rate of flipping from -1 to +1
};

/// Cost-minimising flip rates that produce velocity V at spin S:
/// (1 +- S) A_+- = sqrt(V^2 + (1-S)(1+S)) -+ V.
Controls optimal_controls(double S, double V);
/// Velocity produced by the rates: a_- (1-S)/2 - a_+ (1+S)/2.
double evolution_velocity(double S, const Controls& a);
/// Entropic control cost L(S, a_+-).
double lagrangian(double S, const Controls& a, const PotentialParams& params);

/// W(S,V) from the optimal controls and the Lagrangian (direct route).
double local_cost_W(double S, double V, const PotentialParams& params);
/// W(S,V) assembled from the double well, the Phi transport and the kinetic term.
double local_cost_W_decomposed(double S, double V, const PotentialParams& params);

/// H(s,p) = cosh(beta p)/beta - s sinh(beta p)/beta, evaluated term-wise in
/// log space so large |beta p| saturates to +inf instead of producing NaN.
double hamiltonian(double s, double p, const PotentialParams& params);

}  // namespace isingmfg
