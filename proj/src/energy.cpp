#include "isingmfg/energy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "isingmfg/errors.hpp"
#include "parallel.hpp"

namespace isingmfg {

namespace {

enum class Nonlocal { none, inner, full };

void check_inputs(const SpinField& s, const InteractionKernel& kernel, const PotentialParams& params) {
    const GridGeometry& g = s.geometry();
    if (!(g.spatial() == kernel.grid())) {
        throw ShapeError("spin field grid does not match the kernel grid");
    }
    if (std::abs(g.lambda - kernel.lambda()) > 1e-12 * kernel.lambda()) {
        throw ParameterError("field lambda differs from kernel lambda");
    }
    if (std::abs(params.j_hat - kernel.j_hat()) > 1e-9 * kernel.j_hat()) {
        throw ParameterError("params.j_hat must equal the discrete kernel mass (use params_for)");
    }
}

// Mean-value points S* and velocities V of one time interval.
void interval_state(const SpinField& s, std::size_t n, std::vector<double>& S, std::vector<double>& V) {
    const GridGeometry& g = s.geometry();
    const auto a = s.slice(n);
    const auto b = s.slice(n + 1);
    const double scale = g.lambda / g.dt();
    for (std::size_t i = 0; i < a.size(); ++i) {
        S[i] = phi_mean_value_point(a[i], b[i]);
        V[i] = scale * (b[i] - a[i]);
    }
}

double mean(std::span<const double> u) {
    return std::accumulate(u.begin(), u.end(), 0.0) / static_cast<double>(u.size());
}

// sum over z in A of sum over w in B of J(z-w) (u(z)-u(w))^2 dw, for one slice.
// The caller multiplies by dz / (4 lambda).
double masked_pair_sum(const InteractionKernel& kernel, std::span<const double> S,
                       const std::vector<unsigned char>& A, const std::vector<unsigned char>& B) {
    const std::size_t N = S.size();
    const double c = mean(S);
    std::vector<double> u(N), mb(N), mbu(N), mbu2(N);
    for (std::size_t i = 0; i < N; ++i) {
        u[i] = S[i] - c;
        mb[i] = B[i];
        mbu[i] = B[i] * u[i];
        mbu2[i] = B[i] * u[i] * u[i];
    }
    const auto jb = kernel.convolve(mb);
    const auto jbu = kernel.convolve(mbu);
    const auto jbu2 = kernel.convolve(mbu2);
    double acc = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
        if (!A[i]) continue;
        acc += u[i] * u[i] * jb[i] - 2.0 * u[i] * jbu[i] + jbu2[i];
    }
    return acc;
}

// Per-cell nonlocal density with the partner integrated over the whole torus:
// u^2 J_hat - 2 u (J*u) + J*(u^2).
void full_pair_density(const InteractionKernel& kernel, std::span<const double> S, std::vector<double>& out) {
    const std::size_t N = S.size();
    const double c = mean(S);
    std::vector<double> u(N), u2(N);
    for (std::size_t i = 0; i < N; ++i) {
        u[i] = S[i] - c;
        u2[i] = u[i] * u[i];
    }
    const auto ju = kernel.convolve(u);
    const auto ju2 = kernel.convolve(u2);
    out.resize(N);
    for (std::size_t i = 0; i < N; ++i) out[i] = u2[i] * kernel.j_hat() - 2.0 * u[i] * ju[i] + ju2[i];
}

struct Terms {
    double well = 0.0, kinetic = 0.0, transport = 0.0, nonlocal = 0.0, raw = 0.0;
};

std::size_t interval_end(const Window& A, const GridGeometry& g) {
    const std::size_t end = std::min(A.t_end, g.nt - 1);
    if (A.t_begin > end) {
        throw ParameterError("window time range is empty or outside the grid");
    }
    return end;
}

// Sums the running terms over the window.  Per-interval partial sums are
// reduced serially, so the result does not depend on the thread count.
Terms accumulate(const SpinField& s, const Window& A, const InteractionKernel& kernel,
                 const PotentialParams& params, Nonlocal mode, bool raw) {
    const GridGeometry& g = s.geometry();
    const std::size_t N = g.slice_size();
    const std::size_t t0 = A.t_begin;
    const std::size_t t1 = interval_end(A, g);
    const auto mask = A.mask(g.spatial());
    const std::vector<unsigned char> everywhere(N, 1);
    const double w = g.dt() * g.spatial().cell_volume() / g.lambda;
    const double ib2 = 0.5 / params.beta;

    std::vector<Terms> parts(t1 - t0);
    detail::parallel_for(t1 - t0, [&](std::size_t k) {
        const std::size_t n = t0 + k;
        std::vector<double> S(N), V(N);
        interval_state(s, n, S, V);
        Terms t;
        for (std::size_t i = 0; i < N; ++i) {
            if (!mask[i]) continue;
            t.well += double_well(S[i], params);
            t.kinetic += kinetic(S[i], V[i], params);
            t.transport += V[i] * phi_prime(S[i], true) * ib2;
        }
        if (mode == Nonlocal::inner) {
            t.nonlocal = 0.25 * masked_pair_sum(kernel, S, mask, mask);
        } else if (mode == Nonlocal::full) {
            std::vector<double> dens;
            full_pair_density(kernel, S, dens);
            for (std::size_t i = 0; i < N; ++i) {
                if (mask[i]) t.nonlocal += 0.25 * dens[i];
            }
        }
        if (raw) {
            const auto JS = kernel.convolve(S);
            for (std::size_t i = 0; i < N; ++i) {
                const Controls a = optimal_controls(S[i], V[i]);
                t.raw += lagrangian(S[i], a, params) - 0.5 * S[i] * JS[i] - params.lambda_const();
            }
        }
        t.well *= w;
        t.kinetic *= w;
        t.transport *= w;
        t.nonlocal *= w;
        t.raw *= w;
        parts[k] = t;
    });

    Terms total;
    for (const Terms& t : parts) {
        total.well += t.well;
        total.kinetic += t.kinetic;
        total.transport += t.transport;
        total.nonlocal += t.nonlocal;
        total.raw += t.raw;
    }
    return total;
}

void check_boundary(const SpinField& s, const BoundaryData& bdata) {
    const std::size_t N = s.geometry().slice_size();
    if (bdata.g.size() != N) {
        throw ShapeError("terminal cost g does not match the spatial grid");
    }
}

}  // namespace

PotentialParams params_for(const InteractionKernel& kernel, double beta, bool allow_subcritical) {
    return PotentialParams(beta, kernel.j_hat(), allow_subcritical);
}

std::vector<unsigned char> Window::mask(const SpatialGrid& grid) const {
    const std::size_t N = grid.size();
    std::vector<unsigned char> m(N, 1);
    if (!lo.empty() || !hi.empty()) {
        if (lo.size() != static_cast<std::size_t>(grid.d) || hi.size() != lo.size()) {
            throw ParameterError("window box needs d lower and d upper cell indices");
        }
        for (int a = 0; a < grid.d; ++a) {
            if (lo[a] > hi[a] || hi[a] > grid.nx) {
                throw ParameterError("window box outside the grid");
            }
        }
        for (std::size_t idx = 0; idx < N; ++idx) {
            const std::size_t ks[2] = {grid.d == 1 ? idx : idx / grid.nx, idx % grid.nx};
            bool inside = true;
            for (int a = 0; a < grid.d; ++a) inside = inside && ks[a] >= lo[a] && ks[a] < hi[a];
            m[idx] = inside ? 1 : 0;
        }
    }
    if (complement) {
        for (auto& v : m) v = v ? 0 : 1;
    }
    return m;
}

double cost_raw(const SpinField& s, const BoundaryData& bdata, const InteractionKernel& kernel,
                const PotentialParams& params) {
    return cost_decomposed(s, bdata, kernel, params).total_raw;
}

EnergyBreakdown cost_decomposed(const SpinField& s, const BoundaryData& bdata,
                                const InteractionKernel& kernel, const PotentialParams& params) {
    check_inputs(s, kernel, params);
    check_boundary(s, bdata);
    const GridGeometry& g = s.geometry();
    const Terms t = accumulate(s, Window{}, kernel, params, Nonlocal::full, true);

    EnergyBreakdown e;
    e.double_well = t.well;
    e.kinetic_psi = t.kinetic;
    e.phi_transport = t.transport;
    e.nonlocal = t.nonlocal;

    const double dz = g.spatial().cell_volume();
    const auto sT = s.slice(g.nt - 1);
    const auto s0 = s.slice(0);
    double gs = 0.0, pT = 0.0, p0 = 0.0;
    for (std::size_t i = 0; i < sT.size(); ++i) {
        gs += bdata.g[i] * sT[i];
        pT += phi(sT[i]);
        p0 += phi(s0[i]);
    }
    const double ib2 = 0.5 / params.beta;
    e.terminal_g = gs * dz;
    e.phi_terminal = pT * dz * ib2;
    e.phi_initial = p0 * dz * ib2;
    e.phi_boundary = e.phi_terminal - e.phi_initial;
    e.total_raw = t.raw + e.terminal_g;
    e.total_decomposed = e.double_well + e.kinetic_psi + e.nonlocal + e.terminal_g + e.phi_boundary;
    return e;
}

double energy_G(const SpinField& s, const Window& A, const InteractionKernel& kernel,
                const PotentialParams& params) {
    check_inputs(s, kernel, params);
    const Terms t = accumulate(s, A, kernel, params, Nonlocal::inner, false);
    return t.well + t.kinetic + t.nonlocal;
}

double energy_G_loc(const SpinField& s, const Window& A, const InteractionKernel& kernel,
                    const PotentialParams& params) {
    check_inputs(s, kernel, params);
    const Terms t = accumulate(s, A, kernel, params, Nonlocal::none, false);
    return t.well + t.kinetic;
}

double energy_F(const SpinField& s, const Window& A, const InteractionKernel& kernel,
                const PotentialParams& params) {
    check_inputs(s, kernel, params);
    const Terms t = accumulate(s, A, kernel, params, Nonlocal::full, false);
    return t.well + t.kinetic + t.nonlocal;
}

double locality_defect(const SpinField& s, const Window& A, const Window& A_prime,
                       const InteractionKernel& kernel, const PotentialParams& params) {
    check_inputs(s, kernel, params);
    const GridGeometry& g = s.geometry();
    const std::size_t t0 = A.t_begin;
    const std::size_t t1 = interval_end(A, g);
    const std::size_t N = g.slice_size();
    const auto ma = A.mask(g.spatial());
    const auto mb = A_prime.mask(g.spatial());
    const double w = g.dt() * g.spatial().cell_volume() / g.lambda;
    std::vector<double> parts(t1 - t0);
    detail::parallel_for(t1 - t0, [&](std::size_t k) {
        std::vector<double> S(N), V(N);
        interval_state(s, t0 + k, S, V);
        parts[k] = 0.25 * w * masked_pair_sum(kernel, S, ma, mb);
    });
    return std::accumulate(parts.begin(), parts.end(), 0.0);
}

std::vector<double> energy_density(const SpinField& s, const InteractionKernel& kernel,
                                   const PotentialParams& params) {
    check_inputs(s, kernel, params);
    const GridGeometry& g = s.geometry();
    const std::size_t N = g.slice_size();
    const double w = g.dt() * g.spatial().cell_volume() / g.lambda;
    std::vector<double> out((g.nt - 1) * N);
    detail::parallel_for(g.nt - 1, [&](std::size_t n) {
        std::vector<double> S(N), V(N), dens;
        interval_state(s, n, S, V);
        full_pair_density(kernel, S, dens);
        for (std::size_t i = 0; i < N; ++i) {
            out[n * N + i] = w * (double_well(S[i], params) + kinetic(S[i], V[i], params) + 0.25 * dens[i]);
        }
    });
    return out;
}

ScalingResult scaling_check(const SpinField& s, double tau, std::span<const double> z, double r,
                            double T_window, const InteractionKernel& kernel,
                            const PotentialParams& params) {
    check_inputs(s, kernel, params);
    const GridGeometry& g = s.geometry();
    auto node_of = [&](double t) {
        const double u = t / g.dt();
        const double k = std::round(u);
        if (std::abs(u - k) > 1e-9) {
            std::ostringstream msg;
            msg << "scaling_check: time " << t << " is not a grid node";
            throw ParameterError(msg.str());
        }
        return static_cast<std::size_t>(k);
    };
    Window A;
    A.t_begin = node_of(tau);
    A.t_end = node_of(tau + r * T_window);
    if (A.t_end > g.nt - 1) {
        throw ParameterError("scaling_check: window leaves the time domain");
    }

    ScalingResult res;
    res.lhs = energy_F(s, A, kernel, params);

    const SpinField scaled = rescale(s, tau, z, r, T_window);
    const GridGeometry& gs = scaled.geometry();
    const InteractionKernel k2 = InteractionKernel::build(kernel.spec(), gs.lambda, gs.spatial());
    PotentialParams p2 = params;
    p2.j_hat = k2.j_hat();
    res.rhs = std::pow(r, g.d) * energy_F(scaled, Window{}, k2, p2);
    res.discrepancy = std::abs(res.lhs - res.rhs) / std::max(std::abs(res.lhs), 1e-300);
    return res;
}

}  // namespace isingmfg
