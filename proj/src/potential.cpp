#include "isingmfg/potential.hpp"

#include <cassert>
#include <limits>
#include <string>

#include "isingmfg/errors.hpp"

namespace isingmfg {

namespace {

double sigma_of(double S) {
    if (!(std::abs(S) < 1.0)) {
        throw DomainError("spin value " + std::to_string(S) + " outside (-1,1)");
    }
    return std::sqrt((1.0 - S) * (1.0 + S));
}

}  // namespace

PotentialParams::PotentialParams(double beta_, double j_hat_, bool allow_subcritical_)
    : beta(beta_), j_hat(j_hat_), allow_subcritical(allow_subcritical_) {
    if (!(beta > 0.0) || !(j_hat > 0.0)) {
        throw ParameterError("beta and j_hat must be positive");
    }
}

void PotentialParams::require_supercritical(const char* what) const {
    if (!supercritical() && !allow_subcritical) {
        throw ParameterError(std::string(what) + ": beta*j_hat = " + std::to_string(beta * j_hat) +
                             " <= 1 (subcritical); enable allow_subcritical to evaluate anyway");
    }
}

EquilibriumInfo equilibrium(const PotentialParams& params) {
    EquilibriumInfo info;
    info.lambda_const = params.lambda_const();
    const double bj = params.beta * params.j_hat;
    if (bj > 1.0) {
        // 1 - 1/(bj)^2 written as a product to keep relative accuracy near bj = 1.
        info.s_star = std::sqrt((1.0 - 1.0 / bj) * (1.0 + 1.0 / bj));
        info.p_star = std::acosh(bj) / params.beta;
    }
    return info;
}

double double_well(double S, const PotentialParams& params) {
    params.require_supercritical("double_well");
    const double gap = sigma_of(S) - 1.0 / (params.beta * params.j_hat);
    return 0.5 * params.j_hat * gap * gap;
}

double double_well_prime(double S, const PotentialParams& params) {
    params.require_supercritical("double_well_prime");
    const double sigma = sigma_of(S);
    const double gap = sigma - 1.0 / (params.beta * params.j_hat);
    return -params.j_hat * gap * S / sigma;
}

double double_well_second(double S, const PotentialParams& params) {
    params.require_supercritical("double_well_second");
    // Wbeta'' = 1/(beta sigma^3) - j_hat
    const double sigma = sigma_of(S);
    return 1.0 / (params.beta * sigma * sigma * sigma) - params.j_hat;
}

double psi(double S, double V) {
    const double sigma = sigma_of(S);
    const double r = std::hypot(V, sigma);
    // V asinh(V/sigma) - (r - sigma), with r - sigma = V^2/(r + sigma).
    return 0.5 * (V * std::asinh(V / sigma) - V * V / (r + sigma));
}

double psi_v(double S, double V) { return 0.5 * std::asinh(V / sigma_of(S)); }

double kinetic(double S, double V, const PotentialParams& params) {
    return 2.0 / params.beta * psi(S, V);
}

KineticJet kinetic_jet(double S, double V, const PotentialParams& params) {
    const double sigma = sigma_of(S);
    const double s2 = sigma * sigma;
    const double r = std::hypot(V, sigma);
    const double u = V * V / (r + sigma);  // r - sigma
    const double ib = 1.0 / params.beta;
    KineticJet k;
    k.value = ib * (V * std::asinh(V / sigma) - u);
    k.dV = ib * std::asinh(V / sigma);
    k.dVV = ib / r;
    k.dS = ib * S * u / s2;
    k.dSV = ib * S * V / (s2 * r);
    k.dSS = ib * u / s2 * (1.0 + S * S / (r * sigma) + 2.0 * S * S / s2);
    return k;
}

double phi(double S) {
    const double a = std::abs(S);
    if (a > 1.0 || std::isnan(S)) {
        throw DomainError("phi: spin value " + std::to_string(S) + " outside [-1,1]");
    }
    if (a == 1.0) {
        return 2.0 * std::log(2.0);
    }
    return (1.0 + S) * std::log1p(S) + (1.0 - S) * std::log1p(-S);
}

double phi_prime(double S, bool strict) {
    const double a = std::abs(S);
    if (a > 1.0 || std::isnan(S) || (strict && a == 1.0)) {
        throw DomainError("phi_prime: spin value " + std::to_string(S) + " outside (-1,1)");
    }
    if (a == 1.0) {
        return std::copysign(std::numeric_limits<double>::infinity(), S);
    }
    return 2.0 * std::atanh(S);
}

double phi_second(double S) { return 2.0 / (sigma_of(S) * sigma_of(S)); }

double phi_third(double S) {
    const double s2 = (1.0 - S) * (1.0 + S);
    if (!(s2 > 0.0)) {
        throw DomainError("phi_third: spin value outside (-1,1)");
    }
    return 4.0 * S / (s2 * s2);
}

double phi_divided_difference(double a, double b) {
    const double h = b - a;
    if (std::abs(h) < 1e-5) {
        // Symmetric Taylor expansion about the midpoint; the next term is O(h^4).
        const double m = 0.5 * (a + b);
        return phi_prime(m, true) + phi_third(m) * h * h / 24.0;
    }
    return (phi(b) - phi(a)) / h;
}

double phi_mean_value_point(double a, double b) {
    if (a == b) {
        sigma_of(a);
        return a;
    }
    return std::tanh(0.5 * phi_divided_difference(a, b));
}

Controls optimal_controls(double S, double V) {
    const double sigma = sigma_of(S);
    const double r = std::hypot(V, sigma);
    // Pick the cancellation-free branch for each root; a_+ a_- = 1.
    Controls a;
    if (V >= 0.0) {
        a.a_minus = (r + V) / (1.0 - S);
        a.a_plus = 1.0 / a.a_minus;
    } else {
        a.a_plus = (r - V) / (1.0 + S);
        a.a_minus = 1.0 / a.a_plus;
    }
    return a;
}

double evolution_velocity(double S, const Controls& a) {
    return 0.5 * (a.a_minus * (1.0 - S) - a.a_plus * (1.0 + S));
}

double lagrangian(double S, const Controls& a, const PotentialParams& params) {
    if (!(a.a_plus > 0.0) || !(a.a_minus > 0.0)) {
        throw DomainError("lagrangian: flip rates must be positive");
    }
    const double lp = a.a_plus * (std::log(a.a_plus) - 1.0) * 0.5 * (1.0 + S);
    const double lm = a.a_minus * (std::log(a.a_minus) - 1.0) * 0.5 * (1.0 - S);
    return (lp + lm) / params.beta;
}

double local_cost_W(double S, double V, const PotentialParams& params) {
    params.require_supercritical("local_cost_W");
    const Controls a = optimal_controls(S, V);
    const double direct =
        lagrangian(S, a, params) - 0.5 * params.j_hat * S * S - params.lambda_const();
#ifndef NDEBUG
    const double split = local_cost_W_decomposed(S, V, params);
    assert(std::abs(direct - split) <= 1e-10 * (1.0 + std::abs(direct)));
#endif
    return direct;
}

double local_cost_W_decomposed(double S, double V, const PotentialParams& params) {
    return double_well(S, params) + V * phi_prime(S, true) / (2.0 * params.beta) +
           kinetic(S, V, params);
}

double hamiltonian(double s, double p, const PotentialParams& params) {
    const double x = params.beta * p;
    // ((1-s)/2) e^{x} + ((1+s)/2) e^{-x}, each term as exp(log coefficient +- x).
    auto term = [](double weight, double exponent) {
        if (weight <= 0.0) {
            return 0.0;
        }
        return std::exp(std::log(weight) + exponent);
    };
    return (term(0.5 * (1.0 - s), x) + term(0.5 * (1.0 + s), -x)) / params.beta;
}

}  // namespace isingmfg
