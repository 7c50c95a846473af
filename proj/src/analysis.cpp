#include "isingmfg/analysis.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <stdexcept>
#include <string>

#include "isingmfg/errors.hpp"
#include "parallel.hpp"

namespace isingmfg {

const char* to_string(Stability s) { return s == Stability::stable ? "stable" : "unstable"; }

namespace {

PotentialParams permissive(const PotentialParams& params) {
    PotentialParams p = params;
    p.allow_subcritical = true;
    return p;
}

EquilibriumBranch branch(double s, double p, const PotentialParams& params) {
    EquilibriumBranch b;
    b.s = s;
    b.p = p;
    b.w_second = double_well_second(s, permissive(params));
    // A degenerate well (beta j_hat = 1) is still a minimum.
    b.stability = b.w_second >= 0.0 ? Stability::stable : Stability::unstable;
    return b;
}

}  // namespace

BifurcationPoint constant_equilibria(const PotentialParams& params) {
    if (!(params.beta > 0.0) || !(params.j_hat > 0.0)) {
        throw ParameterError("constant_equilibria: beta and j_hat must be positive");
    }
    BifurcationPoint out;
    out.beta = params.beta;
    out.beta_j_product = params.beta * params.j_hat;
    if (out.beta_j_product > 1.0) {
        const double p = std::acosh(out.beta_j_product) / params.beta;
        const double s = std::tanh(params.beta * p);
        out.equilibria = {branch(-s, -p, params), branch(0.0, 0.0, params), branch(s, p, params)};
    } else {
        out.equilibria = {branch(0.0, 0.0, params)};
    }
    return out;
}

double stationary_residual(double s, double p, const PotentialParams& params) {
    const double bp = params.beta * p;
    const double r1 = std::sinh(bp) - s * std::cosh(bp);
    const double r2 = -std::sinh(bp) / params.beta + params.j_hat * s;
    return std::max(std::abs(r1), std::abs(r2));
}

std::vector<BifurcationPoint> bifurcation_sweep(std::span<const double> betas, double j_hat) {
    std::vector<BifurcationPoint> out(betas.size());
    detail::parallel_for(betas.size(), [&](std::size_t i) {
        out[i] = constant_equilibria(PotentialParams(betas[i], j_hat, true));
    });
    return out;
}

WellCurve double_well_curve(double beta, double j_hat, std::size_t samples, double S_max) {
    if (samples < 2) throw ParameterError("double_well_curve: need at least two samples");
    if (!(S_max > 0.0 && S_max < 1.0)) throw ParameterError("double_well_curve: S_max must lie in (0, 1)");
    const PotentialParams params(beta, j_hat, true);
    WellCurve c;
    c.beta = beta;
    c.S.resize(samples);
    c.W.resize(samples);
    for (std::size_t k = 0; k < samples; ++k) {
        const double S = -S_max + 2.0 * S_max * static_cast<double>(k) / static_cast<double>(samples - 1);
        c.S[k] = S;
        c.W[k] = double_well(S, params);
    }
    return c;
}

// ---------------------------------------------------------------------------

double Facet::nu_x_norm() const {
    double a = 0.0;
    for (std::size_t k = 1; k < nu.size(); ++k) a += nu[k] * nu[k];
    return std::sqrt(a);
}

double Facet::speed() const {
    const double nx = nu_x_norm();
    if (nx == 0.0) return std::copysign(std::numeric_limits<double>::infinity(), nu[0]);
    return nu[0] / nx;
}

double InterfaceMesh::total_area() const {
    double a = 0.0;
    for (const Facet& f : facets) a += f.area;
    return a;
}

namespace {

using Point = std::array<double, 3>;

Point lerp(const Point& a, const Point& b, double t) {
    return {a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]), a[2] + t * (b[2] - a[2])};
}

double triangle_area(const Point& a, const Point& b, const Point& c) {
    const Point u{b[0] - a[0], b[1] - a[1], b[2] - a[2]};
    const Point v{c[0] - a[0], c[1] - a[1], c[2] - a[2]};
    const double x = u[1] * v[2] - u[2] * v[1];
    const double y = u[2] * v[0] - u[0] * v[2];
    const double z = u[0] * v[1] - u[1] * v[0];
    return 0.5 * std::sqrt(x * x + y * y + z * z);
}

// Level-set piece inside one simplex with vertices P[0..D] and values F.
// Consecutive vertices differ by one grid step along axis[k], so the
// gradient of the linear interpolant is a set of one-sided differences.
void simplex_facet(int D, const Point* P, const double* F, const int* axis, const double* step,
                   double extent, std::vector<Facet>& out) {
    int npos = 0;
    for (int k = 0; k <= D; ++k) npos += F[k] > 0.0 ? 1 : 0;
    if (npos == 0 || npos == D + 1) return;

    std::array<double, 3> grad{0.0, 0.0, 0.0};
    for (int k = 0; k < D; ++k) grad[axis[k]] = (F[k + 1] - F[k]) / step[axis[k]];
    double gnorm = 0.0;
    for (int a = 0; a < D; ++a) gnorm += grad[a] * grad[a];
    gnorm = std::sqrt(gnorm);
    if (!(gnorm > 0.0)) return;

    std::array<Point, 4> pts{};
    int np = 0;
    auto cut = [&](int a, int b) {
        pts[np++] = lerp(P[a], P[b], F[a] / (F[a] - F[b]));
    };
    double area = 0.0;
    if (D == 2) {
        for (int a = 0; a < 3; ++a)
            for (int b = a + 1; b < 3; ++b)
                if ((F[a] > 0.0) != (F[b] > 0.0)) cut(a, b);
        area = std::hypot(pts[1][0] - pts[0][0], pts[1][1] - pts[0][1]);
    } else {
        std::array<int, 4> pos{}, neg{};
        int ip = 0, in = 0;
        for (int k = 0; k < 4; ++k) (F[k] > 0.0 ? pos[ip++] : neg[in++]) = k;
        if (ip == 2) {
            // Quadrilateral; this order walks around it.
            cut(pos[0], neg[0]);
            cut(pos[0], neg[1]);
            cut(pos[1], neg[1]);
            cut(pos[1], neg[0]);
            area = triangle_area(pts[0], pts[1], pts[2]) + triangle_area(pts[0], pts[2], pts[3]);
        } else {
            const int lone = ip == 1 ? pos[0] : neg[0];
            for (int k = 0; k < 4; ++k)
                if (k != lone) cut(lone, k);
            area = triangle_area(pts[0], pts[1], pts[2]);
        }
    }
    if (!(area > 0.0)) return;

    Facet f;
    Point c{0.0, 0.0, 0.0};
    for (int k = 0; k < np; ++k)
        for (int a = 0; a < D; ++a) c[a] += pts[k][a] / np;
    f.tau = c[0];
    f.z.resize(D - 1);
    for (int a = 1; a < D; ++a) {
        double z = std::fmod(c[a], extent);
        if (z < 0.0) z += extent;
        f.z[a - 1] = z;
    }
    f.nu.resize(D);
    for (int a = 0; a < D; ++a) f.nu[a] = grad[a] / gnorm;
    f.area = area;
    out.push_back(std::move(f));
}

}  // namespace

InterfaceMesh extract_interface(const SpinField& s, double level) {
    const GridGeometry& g = s.geometry();
    if (g.d != 1 && g.d != 2) throw ParameterError("extract_interface supports d = 1 and d = 2");
    InterfaceMesh mesh;
    mesh.d = g.d;
    if (g.nt < 2) return mesh;

    const int D = g.d + 1;
    const std::size_t nx = g.nx, N = g.slice_size();
    const double step[3] = {g.dt(), g.dx(), g.dx()};

    std::vector<std::array<int, 3>> perms;
    std::array<int, 3> perm{0, 1, 2};
    do {
        perms.push_back(perm);
    } while (std::next_permutation(perm.begin(), perm.begin() + D));

    std::vector<std::vector<Facet>> per_step(g.nt - 1);
    detail::parallel_for(g.nt - 1, [&](std::size_t n) {
        std::array<double, 8> F{};
        std::array<Point, 8> P{};
        const int corners = 1 << D;
        for (std::size_t cell = 0; cell < N; ++cell) {
            const std::size_t i0 = g.d == 1 ? cell : cell / nx;
            const std::size_t i1 = g.d == 1 ? 0 : cell % nx;
            bool any_pos = false, any_neg = false;
            for (int c = 0; c < corners; ++c) {
                const std::size_t o0 = c & 1, o1 = (c >> 1) & 1, o2 = (c >> 2) & 1;
                const std::size_t j0 = (i0 + o1) % nx, j1 = (i1 + o2) % nx;
                const std::size_t flat = g.d == 1 ? j0 : j0 * nx + j1;
                F[c] = s.at(n + o0, flat) - level;
                P[c] = {static_cast<double>(n + o0) * step[0],
                        (static_cast<double>(i0 + o1) + 0.5) * step[1],
                        (static_cast<double>(i1 + o2) + 0.5) * step[2]};
                (F[c] > 0.0 ? any_pos : any_neg) = true;
            }
            if (!(any_pos && any_neg)) continue;
            for (const auto& pm : perms) {
                Point sp[4];
                double sf[4];
                int v = 0;
                sp[0] = P[0];
                sf[0] = F[0];
                for (int k = 0; k < D; ++k) {
                    v |= 1 << pm[k];
                    sp[k + 1] = P[v];
                    sf[k + 1] = F[v];
                }
                simplex_facet(D, sp, sf, pm.data(), step, g.extent, per_step[n]);
            }
        }
    });
    for (auto& v : per_step) {
        mesh.facets.insert(mesh.facets.end(), std::make_move_iterator(v.begin()), std::make_move_iterator(v.end()));
    }
    return mesh;
}

void save_interface_csv(const std::filesystem::path& path, const InterfaceMesh& mesh) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "# isingmfg-interface-csv v1 d=" << mesh.d << "\n";
    out << "tau";
    for (int a = 0; a < mesh.d; ++a) out << ",z" << a;
    out << ",nu_t";
    for (int a = 0; a < mesh.d; ++a) out << ",nu_x" << a;
    out << ",area,speed\n";
    out << std::setprecision(17);
    for (const Facet& f : mesh.facets) {
        out << f.tau;
        for (double z : f.z) out << ',' << z;
        for (double v : f.nu) out << ',' << v;
        out << ',' << f.area << ',' << f.speed() << '\n';
    }
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::vector<int> phase_of(std::span<const double> values) {
    std::vector<int> out(values.size());
    std::transform(values.begin(), values.end(), out.begin(), [](double v) { return v >= 0.0 ? 1 : -1; });
    return out;
}

// ---------------------------------------------------------------------------

void Table1D::validate(const char* name) const {
    if (x.empty() || x.size() != y.size()) {
        throw ParameterError(std::string(name) + ": table needs matching, non-empty columns");
    }
    for (std::size_t k = 1; k < x.size(); ++k) {
        if (!(x[k] > x[k - 1])) throw ParameterError(std::string(name) + ": abscissae must increase");
    }
}

double Table1D::operator()(double v, bool* outside) const {
    const bool out_of_range = !(v >= x.front() && v <= x.back());
    if (outside != nullptr) *outside = out_of_range;
    if (out_of_range) return v < x.front() ? y.front() : y.back();
    if (x.size() == 1) return y.front();
    auto it = std::upper_bound(x.begin(), x.end(), v);
    const std::size_t k = it == x.end() ? x.size() - 1 : static_cast<std::size_t>(it - x.begin());
    const double t = (v - x[k - 1]) / (x[k] - x[k - 1]);
    return y[k - 1] + t * (y[k] - y[k - 1]);
}

MacroscopicCost macroscopic_cost(const InterfaceMesh& mesh, const BoundaryData& bdata,
                                 const GridGeometry& geometry, std::span<const int> phase_initial,
                                 std::span<const int> phase_terminal, const Table1D& v_init_plus,
                                 const Table1D& v_end_plus, const Table1D& wave) {
    v_init_plus.validate("v_init table");
    v_end_plus.validate("v_end table");
    wave.validate("wave table");
    const std::size_t N = geometry.slice_size();
    if (bdata.s0.size() != N || bdata.g.size() != N || phase_initial.size() != N || phase_terminal.size() != N) {
        throw ShapeError("macroscopic_cost: boundary data and phases must have one value per cell");
    }
    if (wave.x.front() < 0.0) throw ParameterError("wave table: speeds must be non-negative");

    MacroscopicCost out;
    const double vol = geometry.spatial().cell_volume();
    for (std::size_t i = 0; i < N; ++i) {
        bool outside = false;
        const double s0 = phase_initial[i] > 0 ? bdata.s0[i] : -bdata.s0[i];
        out.initial += vol * v_init_plus(s0, &outside);
        out.extrapolated_cells += outside ? 1 : 0;
        const double g = phase_terminal[i] > 0 ? bdata.g[i] : -bdata.g[i];
        out.terminal += vol * v_end_plus(g, &outside);
        out.extrapolated_cells += outside ? 1 : 0;
    }

    Table1D lbar{wave.x, wave.y};
    for (std::size_t k = 0; k < lbar.x.size(); ++k) lbar.y[k] /= std::sqrt(1.0 + lbar.x[k] * lbar.x[k]);
    for (const Facet& f : mesh.facets) {
        const double c = std::abs(f.speed());
        bool outside = false;
        out.interfacial += f.area * lbar(std::isfinite(c) ? c : lbar.x.back() + 1.0, &outside);
        out.extrapolated_facets += outside ? 1 : 0;
    }
    out.total = out.initial + out.terminal + out.interfacial;
    return out;
}

}  // namespace isingmfg
