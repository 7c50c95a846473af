#include <doctest.h>

#include <cmath>
#include <random>

#include "isingmfg/errors.hpp"
#include "isingmfg/profiles.hpp"
#include "oracles.hpp"

using namespace isingmfg;

namespace {

const PotentialParams P;
const double s_star = std::sqrt(1.0 - 0.81);

double Phi(double s) { return (1 + s) * std::log(1 + s) + (1 - s) * std::log(1 - s); }

// Zero-energy Beltrami integral for the half-heteroclinic from s0 up to s_star.
// Along a minimiser V K_V - K = W with K = (V asinh(V/sigma) - sqrt(V^2+sigma^2) + sigma)/beta,
// so V K_V - K = (sqrt(V^2+sigma^2) - sigma)/beta and V(q) is explicit.
double heteroclinic_half(double s0) {
    auto integrand = [](double q) {
        const double sig = std::sqrt(1 - q * q);
        // -sig/beta - q^2/2 - Lambda, rewritten as a square to avoid cancellation near s_star.
        const double W = 0.5 * (sig - 1.0 / P.beta) * (sig - 1.0 / P.beta);
        const double V = std::sqrt(P.beta * W * (P.beta * W + 2.0 * sig));
        if (V == 0.0) return 0.0;
        const double K = (V * std::asinh(V / sig) - std::sqrt(V * V + sig * sig) + sig) / P.beta;
        return (W + K) / V;
    };
    return oracle::simpson(integrand, s0, s_star, 1e-11);
}

}  // namespace

TEST_CASE("functional derivatives against finite differences") {
    ProfileFunctional f(P, 0.1, 0.7);
    KernelSpec spec;
    f.set_nonlocal(sample_marginal(spec, 2, 0, 0.1), -s_star, s_star);
    f.set_endpoint(0.1);
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> U(-0.6, 0.6);
    std::vector<double> q(30);
    for (double& v : q) v = U(rng);
    std::vector<double> g(q.size());
    f.gradient(q, g);
    const auto H = f.hessian(q);
    const double h = 1e-6;
    for (std::size_t i : {0u, 1u, 14u, 29u}) {
        auto qp = q, qm = q;
        qp[i] += h;
        qm[i] -= h;
        CHECK(g[i] == doctest::Approx((f.value(qp) - f.value(qm)) / (2 * h)).epsilon(1e-6));
        std::vector<double> gp(q.size()), gm(q.size());
        f.gradient(qp, gp);
        f.gradient(qm, gm);
        for (std::size_t j : {0u, 1u, 2u, 13u, 14u, 15u, 29u}) {
            CHECK(H.coeff(j, i) == doctest::Approx((gp[j] - gm[j]) / (2 * h)).epsilon(1e-5).scale(1e-6));
        }
    }
}

TEST_CASE("v_init at the equilibrium is the bare Phi term") {
    const LayerResult r = v_init(s_star, s_star, P);
    CHECK(r.converged);
    CHECK(r.value == doctest::Approx(-Phi(s_star) / (2 * P.beta)).epsilon(1e-12));
    for (double v : r.profile.q) CHECK(v == doctest::Approx(s_star).epsilon(1e-12));
}

TEST_CASE("v_init from 0 matches the Beltrami quadrature") {
    LayerOptions opt;
    opt.h = 2e-3;
    const LayerResult r = v_init(0.0, s_star, P, opt);
    REQUIRE(r.converged);
    CHECK_FALSE(r.boundary_hit);
    const double ref = heteroclinic_half(0.0);
    CHECK(ref > 0.0);
    CHECK(r.value == doctest::Approx(ref).epsilon(1e-5));
    // Monotone profile from 0 to s_star.
    for (std::size_t i = 1; i < r.profile.q.size(); ++i) CHECK(r.profile.q[i] >= r.profile.q[i - 1] - 1e-12);
}

TEST_CASE("beltrami defect shrinks with h") {
    double prev = 1.0;
    for (double h : {1e-2, 5e-3, 2.5e-3}) {
        LayerOptions opt;
        opt.h = h;
        const LayerResult r = v_init(0.0, s_star, P, opt);
        const double d = beltrami_defect(r.profile, P);
        CHECK(d < prev);
        prev = d;
    }
    CHECK(prev <= 1e-4);
}

TEST_CASE("layer symmetries") {
    LayerOptions opt;
    opt.h = 0.01;
    CHECK(v_init(0.2, -s_star, P, opt).value == doctest::Approx(v_init(-0.2, s_star, P, opt).value).epsilon(1e-12));
    const double gmax = equilibrium(P).p_star;
    CHECK(v_end(-s_star, 0.3 * gmax, P, opt).value ==
          doctest::Approx(v_end(s_star, -0.3 * gmax, P, opt).value).epsilon(1e-12));
}

TEST_CASE("v_end relaxes towards 0 when g vanishes") {
    const LayerResult r = v_end(s_star, 0.0, P);
    REQUIRE(r.converged);
    const double q0 = r.profile.q.front();
    CHECK(q0 > 0.0);
    CHECK(q0 < s_star);
    // The free end can stay at s_star for value Phi(s_star)/(2 beta); relaxing is cheaper.
    CHECK(r.value < Phi(s_star) / (2 * P.beta));
}

TEST_CASE("v_end equals the minimised initial layer") {
    const double gmax = equilibrium(P).p_star;
    for (double f : {-0.3, 0.0, 0.3}) {
        const LayerResult e = v_end(s_star, f * gmax, P);
        const InitMinimum m = v_end_from_init(s_star, f * gmax, P);
        CHECK(m.converged);
        CHECK(e.value == doctest::Approx(m.value).epsilon(1e-8));
        CHECK(m.s0 == doctest::Approx(e.profile.q.front()).epsilon(1e-4));
    }
}

TEST_CASE("traveling waves") {
    KernelSpec spec;
    LayerOptions opt;
    opt.h = 0.05;
    const LayerResult w0 = traveling_wave(0.0, spec, 2, 0, P, opt);
    REQUIRE(w0.converged);
    CHECK_FALSE(w0.boundary_hit);
    // Odd profile about the pinned centre.
    const auto& q = w0.profile.q;
    double odd = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) odd = std::max(odd, std::abs(q[i] + q[q.size() - 1 - i]));
    CHECK(odd <= 1e-4);
    CHECK(w0.value > 0.0);

    double prev = w0.value;
    for (double c : {1.0, 2.0}) {
        const LayerResult w = traveling_wave(c, spec, 2, 0, P, opt);
        CHECK(w.converged);
        CHECK(w.value >= prev);
        prev = w.value;
    }
}

TEST_CASE("traveling wave approaches the infinite-speed transition") {
    KernelSpec spec;
    LayerOptions opt;
    opt.h = 0.05;
    const double c = 8.0;
    const LayerResult w = traveling_wave(c, spec, 2, 0, P, opt);
    REQUIRE(w.converged);
    // Two half-heteroclinics from 0, by quadrature.
    const double het = 2.0 * heteroclinic_half(0.0);
    CHECK(w.value / std::sqrt(1 + c * c) == doctest::Approx(het).epsilon(0.05));
}

TEST_CASE("horizon seed and validation") {
    CHECK(layer_width_seed(P) == doctest::Approx(10.0 / std::sqrt(double_well_second(s_star, P))));
    LayerOptions bad;
    bad.h = -1.0;
    CHECK_THROWS_AS(v_init(0.0, s_star, P, bad), ParameterError);
    CHECK_THROWS_AS(v_init(0.5, s_star, P), ParameterError);
    CHECK_THROWS_AS(v_end(0.2, 0.0, P), ParameterError);
    CHECK_THROWS_AS(traveling_wave(-1.0, KernelSpec{}, 2, 0, P), ParameterError);
}
