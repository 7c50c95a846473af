#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "isingmfg/analysis.hpp"
#include "isingmfg/errors.hpp"

using namespace isingmfg;

namespace {

SpinField field_from(const GridGeometry& g, auto&& f) {
    SpinField s(g);
    for (std::size_t n = 0; n < g.nt; ++n) {
        for (std::size_t i = 0; i < g.slice_size(); ++i) {
            const double x0 = ((g.d == 1 ? i : i / g.nx) + 0.5) * g.dx();
            const double x1 = g.d == 1 ? 0.0 : (i % g.nx + 0.5) * g.dx();
            s.at(n, i) = f(g.time(n), x0, x1);
        }
    }
    return s;
}

}  // namespace

TEST_CASE("constant equilibria on both sides of the transition") {
    for (double binv : {0.66, 0.9}) {
        const PotentialParams P(1.0 / binv, 1.0);
        const BifurcationPoint b = constant_equilibria(P);
        REQUIRE(b.equilibria.size() == 3);
        const double s = std::sqrt(1 - binv * binv);
        CHECK(b.equilibria[0].s == doctest::Approx(-s).epsilon(1e-12));
        CHECK(b.equilibria[1].s == 0.0);
        CHECK(b.equilibria[2].s == doctest::Approx(s).epsilon(1e-12));
        CHECK(b.equilibria[2].p == doctest::Approx(binv * std::acosh(1 / binv)).epsilon(1e-12));
        CHECK(b.equilibria[0].stability == Stability::stable);
        CHECK(b.equilibria[1].stability == Stability::unstable);
        for (const auto& e : b.equilibria) CHECK(stationary_residual(e.s, e.p, P) <= 1e-14);
    }
    const BifurcationPoint sub = constant_equilibria(PotentialParams(1.0 / 1.1, 1.0));
    REQUIRE(sub.equilibria.size() == 1);
    CHECK(sub.equilibria[0].s == 0.0);
    CHECK(sub.equilibria[0].stability == Stability::stable);
    CHECK(std::string(to_string(Stability::unstable)) == "unstable");
}

TEST_CASE("bifurcation sweep and well curves") {
    const std::vector<double> betas{1 / 0.66, 1 / 0.9, 1 / 1.1};
    const auto sweep = bifurcation_sweep(betas, 1.0);
    REQUIRE(sweep.size() == 3);
    CHECK(sweep[1].beta_j_product == doctest::Approx(1 / 0.9));
    CHECK(sweep[2].equilibria.size() == 1);
    const WellCurve w = double_well_curve(1 / 0.9, 1.0, 101);
    CHECK(w.S.front() == doctest::Approx(-0.99));
    CHECK(w.W[50] == doctest::Approx(0.005).epsilon(1e-12));
    CHECK_THROWS_AS(double_well_curve(1 / 0.9, 1.0, 1), ParameterError);
}

TEST_CASE("static planar interface in d = 1") {
    GridGeometry g;
    g.d = 1;
    g.nx = 40;
    g.nt = 21;
    g.T = 1.0;
    const SpinField s = field_from(g, [](double, double x, double) { return 0.4 - x; });
    const InterfaceMesh m = extract_interface(s);
    REQUIRE_FALSE(m.empty());
    // The periodic wrap adds a second front between the last and first cells.
    CHECK(m.total_area() == doctest::Approx(2.0).epsilon(1e-12));
    for (const Facet& f : m.facets) {
        CHECK(std::abs(f.speed()) <= 1e-12);
        // Normal points towards s > 0: decreasing x at the interior front.
        const bool interior = f.z[0] > 0.2 && f.z[0] < 0.8;
        CHECK(f.nu[1] == doctest::Approx(interior ? -1.0 : 1.0));
    }
}

TEST_CASE("moving planar interface") {
    GridGeometry g;
    g.d = 2;
    g.nx = 32;
    g.nt = 33;
    g.T = 0.5;
    const double v = 0.4;
    const SpinField s = field_from(g, [&](double t, double x, double) { return x - 0.3 - v * t; });
    const InterfaceMesh m = extract_interface(s);
    REQUIRE_FALSE(m.empty());
    // Interior plane in (t, x, y): area T sqrt(1 + v^2) extent.  The wrap front is skipped.
    double area = 0.0;
    for (const Facet& f : m.facets) {
        if (f.z[0] < 0.2 || f.z[0] > 0.8) continue;
        area += f.area;
        CHECK(std::abs(f.speed()) == doctest::Approx(v).epsilon(1e-10));
    }
    CHECK(area == doctest::Approx(0.5 * std::sqrt(1 + v * v)).epsilon(1e-10));
}

TEST_CASE("cylinder area of a static disk") {
    GridGeometry g;
    g.d = 2;
    g.nx = 64;
    g.nt = 5;
    g.T = 1.0;
    const double r0 = 0.3;
    const SpinField s = field_from(g, [&](double, double x, double y) {
        return r0 - std::hypot(x - 0.5, y - 0.5);
    });
    const InterfaceMesh m = extract_interface(s);
    CHECK(m.total_area() == doctest::Approx(2 * std::numbers::pi * r0).epsilon(0.03));
    // Normals point inwards, towards the positive phase.
    for (const Facet& f : m.facets) {
        const double rx = f.z[0] - 0.5, ry = f.z[1] - 0.5;
        CHECK(f.nu[1] * rx + f.nu[2] * ry < 0.0);
    }
}

TEST_CASE("interface csv") {
    GridGeometry g;
    g.d = 1;
    g.nx = 8;
    g.nt = 3;
    const SpinField s = field_from(g, [](double, double x, double) { return 0.5 - x; });
    const auto path = std::filesystem::temp_directory_path() / "isingmfg_interface.csv";
    save_interface_csv(path, extract_interface(s));
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    CHECK(line == "# isingmfg-interface-csv v1 d=1");
    std::getline(in, line);
    CHECK(line == "tau,z0,nu_t,nu_x0,area,speed");
}

TEST_CASE("tables and phases") {
    const Table1D t{{0.0, 1.0, 2.0}, {0.0, 10.0, 30.0}};
    CHECK(t(0.5) == doctest::Approx(5.0));
    CHECK(t(1.5) == doctest::Approx(20.0));
    bool outside = false;
    CHECK(t(3.0, &outside) == 30.0);
    CHECK(outside);
    CHECK_THROWS_AS((Table1D{{0.0, 0.0}, {1.0, 2.0}}).validate("t"), ParameterError);
    CHECK(phase_of(std::vector<double>{-0.1, 0.0, 0.2}) == std::vector<int>{-1, 1, 1});
}

TEST_CASE("macroscopic cost assembly") {
    GridGeometry g;
    g.d = 1;
    g.nx = 10;
    g.nt = 11;
    g.T = 1.0;
    // Static front at x = 0.5.
    const SpinField s = field_from(g, [](double, double x, double) { return 0.5 - x; });
    const InterfaceMesh mesh = extract_interface(s);
    BoundaryData b{std::vector<double>(10, 0.1), std::vector<double>(10, 0.0)};
    const auto ph0 = phase_of(s.slice(0));
    const auto phT = phase_of(s.slice(g.nt - 1));
    const Table1D vi{{-1.0, 1.0}, {2.0, 4.0}};   // V^init(0.1) = 3.1 in the + phase, 2.9 in the - phase
    const Table1D ve{{-1.0, 1.0}, {1.0, 1.0}};
    const Table1D wave{{0.0, 1.0}, {0.7, 0.9}};
    const MacroscopicCost c = macroscopic_cost(mesh, b, g, ph0, phT, vi, ve, wave);
    CHECK(c.initial == doctest::Approx(0.5 * 3.1 + 0.5 * 2.9));
    CHECK(c.terminal == doctest::Approx(1.0));
    // Interior and wrap fronts, each of length 1 at speed 0.
    CHECK(c.interfacial == doctest::Approx(1.4));
    CHECK(c.total == doctest::Approx(c.initial + c.terminal + c.interfacial));
    CHECK(c.extrapolated_facets == 0);
}
