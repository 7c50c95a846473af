#include <doctest.h>

#include <cmath>
#include <numeric>

#include "isingmfg/energy.hpp"
#include "isingmfg/errors.hpp"
#include "oracles.hpp"

using namespace isingmfg;

namespace {

struct Setup {
    GridGeometry geo;
    InteractionKernel kernel;
    PotentialParams params;
};

Setup make_setup(std::size_t nx = 8, std::size_t nt = 5, double lambda = 0.15) {
    GridGeometry g;
    g.d = 2;
    g.nx = nx;
    g.nt = nt;
    g.T = 1.0;
    g.lambda = lambda;
    KernelSpec spec;
    spec.enforce_resolution = false;
    auto k = InteractionKernel::build(spec, lambda, g.spatial());
    const PotentialParams p = params_for(k, 1.0 / 0.9);
    return {g, std::move(k), p};
}

// Mean-value point by bisection on the plain-log derivative of Phi.
double mean_value_point(double a, double b) {
    if (std::abs(b - a) < 1e-7) return 0.5 * (a + b);
    auto Phi = [](double s) { return (1 + s) * std::log(1 + s) + (1 - s) * std::log(1 - s); };
    const double target = (Phi(b) - Phi(a)) / (b - a);
    double lo = std::min(a, b), hi = std::max(a, b);
    for (int it = 0; it < 200; ++it) {
        const double m = 0.5 * (lo + hi);
        (std::log((1 + m) / (1 - m)) < target ? lo : hi) = m;
    }
    return 0.5 * (lo + hi);
}

// Raw cost from the definitions: brute-force minimised Lagrangian, direct
// pair sums for the interaction, cell-centre rule in space.
double raw_cost_oracle(const SpinField& s, const std::vector<double>& g, const InteractionKernel& k,
                       const PotentialParams& P) {
    const GridGeometry& geo = s.geometry();
    const std::size_t N = geo.slice_size();
    const double dz = geo.spatial().cell_volume();
    const double w = geo.dt() * dz / geo.lambda;
    const double Lambda = -0.5 * P.j_hat - 0.5 / (P.beta * P.beta * P.j_hat);
    double total = 0.0;
    for (std::size_t n = 0; n + 1 < geo.nt; ++n) {
        std::vector<double> S(N), V(N);
        for (std::size_t i = 0; i < N; ++i) {
            S[i] = mean_value_point(s.at(n, i), s.at(n + 1, i));
            V[i] = geo.lambda * (s.at(n + 1, i) - s.at(n, i)) / geo.dt();
        }
        const auto JS = oracle::convolve_direct(k, S);
        for (std::size_t i = 0; i < N; ++i) {
            // local_cost_by_minimisation subtracts j S^2/2 and Lambda; put back the local
            // j S^2 / 2 and use the nonlocal product instead.
            const double L = oracle::local_cost_by_minimisation(S[i], V[i], P.beta, P.j_hat) +
                             0.5 * P.j_hat * S[i] * S[i] + Lambda;
            total += w * (L - 0.5 * S[i] * JS[i] - Lambda);
        }
    }
    for (std::size_t i = 0; i < N; ++i) total += g[i] * s.at(geo.nt - 1, i) * dz;
    return total;
}

}  // namespace

TEST_CASE("params_for takes the discrete mass") {
    const Setup st = make_setup();
    CHECK(st.params.j_hat == st.kernel.j_hat());
    SpinField s(st.geo, 0.1);
    BoundaryData b{std::vector<double>(64, 0.1), std::vector<double>(64, 0.0)};
    CHECK_THROWS_AS(cost_raw(s, b, st.kernel, PotentialParams(1.0 / 0.9, 2.0)), ParameterError);
}

TEST_CASE("raw cost against the definition") {
    const Setup st = make_setup();
    for (std::uint64_t seed : {1u, 2u}) {
        const SpinField s = oracle::smooth_field(st.geo, seed, 0.8);
        std::vector<double> g(64);
        for (std::size_t i = 0; i < 64; ++i) g[i] = 0.2 * std::cos(0.3 * i);
        const BoundaryData b{std::vector<double>(s.slice(0).begin(), s.slice(0).end()), g};
        const double ref = raw_cost_oracle(s, g, st.kernel, st.params);
        CHECK(cost_raw(s, b, st.kernel, st.params) == doctest::Approx(ref).epsilon(1e-8));
    }
}

TEST_CASE("decomposition matches the raw cost") {
    const Setup st = make_setup(16, 12, 0.1);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const SpinField s = oracle::smooth_field(st.geo, 100 + seed, 0.95);
        const BoundaryData b{std::vector<double>(256, 0.0), std::vector<double>(256, 0.1)};
        const EnergyBreakdown e = cost_decomposed(s, b, st.kernel, st.params);
        CHECK(std::abs(e.total_raw - e.total_decomposed) <= 1e-10 * (1 + std::abs(e.total_raw)));
        // Phi transport telescopes exactly.
        CHECK(e.phi_transport == doctest::Approx(e.phi_boundary).epsilon(1e-10));
        CHECK(e.phi_boundary == doctest::Approx(e.phi_terminal - e.phi_initial));
    }
}

TEST_CASE("equilibrium has zero running energy, random fields nonnegative") {
    const Setup st = make_setup();
    const SpinField eq(st.geo, equilibrium(st.params).s_star);
    CHECK(std::abs(energy_G(eq, Window{}, st.kernel, st.params)) <= 1e-14);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const SpinField s = oracle::smooth_field(st.geo, seed, 0.99);
        CHECK(energy_G(s, Window{}, st.kernel, st.params) >= 0.0);
        CHECK(energy_F(s, Window{}, st.kernel, st.params) >= 0.0);
    }
}

TEST_CASE("windowed energies and the locality defect") {
    const Setup st = make_setup(16, 9, 0.1);
    const SpinField s = oracle::smooth_field(st.geo, 7, 0.9);
    Window A;
    A.t_begin = 2;
    A.t_end = 6;
    A.lo = {3, 4};
    A.hi = {10, 12};
    Window Ac = A;
    Ac.complement = true;
    const double F = energy_F(s, A, st.kernel, st.params);
    const double G = energy_G(s, A, st.kernel, st.params);
    const double Gloc = energy_G_loc(s, A, st.kernel, st.params);
    const double dAA = locality_defect(s, A, A, st.kernel, st.params);
    const double dAc = locality_defect(s, A, Ac, st.kernel, st.params);
    CHECK(F == doctest::Approx(G + dAc).epsilon(1e-12));
    CHECK(G == doctest::Approx(Gloc + dAA).epsilon(1e-12));
    CHECK(dAc >= 0.0);

    // Pair sums agree with the direct double sum on one interval.
    Window one = A;
    one.t_end = A.t_begin + 1;
    const GridGeometry& g = st.geo;
    const auto mask = A.mask(g.spatial());
    const auto table = st.kernel.samples();
    double direct = 0.0;
    for (std::size_t i = 0; i < 256; ++i) {
        for (std::size_t j = 0; j < 256; ++j) {
            if (!mask[i] || mask[j]) continue;
            const double Si = phi_mean_value_point(s.at(2, i), s.at(3, i));
            const double Sj = phi_mean_value_point(s.at(2, j), s.at(3, j));
            const std::size_t o0 = (i / 16 + 16 - j / 16) % 16, o1 = (i % 16 + 16 - j % 16) % 16;
            direct += table[o0 * 16 + o1] * (Si - Sj) * (Si - Sj);
        }
    }
    const double dz = g.spatial().cell_volume();
    direct *= 0.25 * dz * dz * g.dt() / g.lambda;
    CHECK(locality_defect(s, one, Ac, st.kernel, st.params) == doctest::Approx(direct).epsilon(1e-11));
}

TEST_CASE("energy density sums to the running energy") {
    const Setup st = make_setup();
    const SpinField s = oracle::smooth_field(st.geo, 3, 0.7);
    const auto dens = energy_density(s, st.kernel, st.params);
    const double sum = std::accumulate(dens.begin(), dens.end(), 0.0);
    const BoundaryData b{std::vector<double>(64, 0.0), std::vector<double>(64, 0.0)};
    CHECK(sum == doctest::Approx(cost_decomposed(s, b, st.kernel, st.params).running()).epsilon(1e-12));
}

TEST_CASE("cutoff does not raise the running energy on sample fields") {
    const Setup st = make_setup(16, 9, 0.1);
    const double s_star = equilibrium(st.params).s_star;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const SpinField s = oracle::smooth_field(st.geo, 40 + seed, 0.95);
        const double before = energy_G(s, Window{}, st.kernel, st.params);
        const double after = energy_G(cutoff(s, s_star), Window{}, st.kernel, st.params);
        CHECK(after <= before + 1e-10);
    }
}

TEST_CASE("scaling check is exact for translation and close for rescaling") {
    const Setup st = make_setup(32, 17, 0.1);
    const SpinField s = oracle::smooth_field(st.geo, 5, 0.8, 2);
    const std::vector<double> z{0.0, 0.0};
    const ScalingResult r1 = scaling_check(s, 0.0, z, 1.0, 1.0, st.kernel, st.params);
    CHECK(r1.discrepancy <= 1e-12);
    const ScalingResult r2 = scaling_check(s, 0.25, z, 0.5, 1.0, st.kernel, st.params);
    CHECK(r2.discrepancy <= 0.2);
    CHECK_THROWS_AS(scaling_check(s, 0.1, z, 0.5, 1.0, st.kernel, st.params), ParameterError);
}
