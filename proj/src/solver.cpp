#include "isingmfg/solver.hpp"

#include <algorithm>
#include <chrono>
#include <limits>
#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>

#include "isingmfg/errors.hpp"
#include "parallel.hpp"

namespace isingmfg {

namespace {

constexpr std::size_t block_size = 256;

// sinh and cosh from a single expm1.
struct HyperbolicPair {
    double sinh, cosh;
};

HyperbolicPair sinh_cosh(double x) {
    if (std::abs(x) > 20.0) return {std::sinh(x), std::cosh(x)};
    const double em = std::expm1(x);
    const double e = em + 1.0;
    return {0.5 * em * (em + 2.0) / e, 1.0 + 0.5 * em * em / e};
}

// Root of f(q) = q - p_next - a (js - sinh(beta q) / beta).  f is increasing
// and the root lies between p_next and p_next - f(p_next), so Newton is kept
// inside that bracket and falls back to bisection when it leaves it.
bool costate_step(double p_next, double js, double a, double beta, std::size_t newton_max, double& q) {
    HyperbolicPair h{};
    auto f = [&](double x) {
        h = sinh_cosh(beta * x);
        return x - p_next - a * (js - h.sinh / beta);
    };
    q = p_next;
    double fq = f(q);
    if (fq == 0.0) return true;
    double lo = fq < 0.0 ? q : q - fq;
    double hi = fq < 0.0 ? q - fq : q;
    for (std::size_t k = 0; k < newton_max; ++k) {
        const double step = fq / (1.0 + a * h.cosh);
        double next = q - step;
        if (next >= lo && next <= hi) {
            // Quadratic convergence: the error after a step this small is below rounding.
            if (std::abs(step) <= 1e-9 * (1.0 + std::abs(q))) {
                q = next;
                return true;
            }
        } else {
            next = 0.5 * (lo + hi);
        }
        const double moved = std::abs(next - q);
        q = next;
        fq = f(q);
        if (fq == 0.0) return true;
        if (fq < 0.0) lo = q; else hi = q;
        const double tol = 1e-15 * (1.0 + std::abs(q));
        if (moved <= tol || hi - lo <= tol) return true;
    }
    return false;
}

double spin_step(double s, double p, double a, double beta, StiffMode mode) {
    const HyperbolicPair h = sinh_cosh(beta * p);
    if (mode == StiffMode::semi_implicit) {
        return (s + a * h.sinh) / (1.0 + a * h.cosh);
    }
    const double e = std::exp(-a * h.cosh);
    return e * s + (1.0 - e) * (h.sinh / h.cosh);
}

void check_sweep_inputs(const SpaceTimeField& f, std::span<const double> boundary, const char* what) {
    if (boundary.size() != f.geometry().slice_size()) {
        throw ShapeError(std::string(what) + ": boundary slice does not match the grid");
    }
}

[[noreturn]] void newton_failure(std::size_t n, std::size_t i) {
    std::ostringstream msg;
    msg << "backward sweep: scalar Newton did not converge at step " << n << ", cell " << i;
    throw ConvergenceError(msg.str());
}

double relative_change(const SpinField& next, const SpinField& cur) {
    const GridGeometry& g = cur.geometry();
    std::vector<double> num(g.nt), den(g.nt);
    detail::parallel_for(g.nt, [&](std::size_t n) {
        const auto a = next.slice(n);
        const auto b = cur.slice(n);
        double x = 0.0, y = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            x += std::abs(a[i] - b[i]);
            y += std::abs(b[i]);
        }
        num[n] = x;
        den[n] = y;
    });
    const double top = std::accumulate(num.begin(), num.end(), 0.0);
    const double bottom = std::accumulate(den.begin(), den.end(), 0.0);
    return bottom > 0.0 ? top / bottom : top / static_cast<double>(g.size());
}

SpinField initial_guess(const BoundaryData& bdata, const GridGeometry& geometry) {
    SpinField s(geometry);
    for (std::size_t n = 0; n < geometry.nt; ++n) {
        std::copy(bdata.s0.begin(), bdata.s0.end(), s.slice(n).begin());
    }
    return s;
}

void check_solve_inputs(const BoundaryData& bdata, const GridGeometry& geometry,
                        const InteractionKernel& kernel, const PotentialParams& params,
                        const SolverConfig& config) {
    geometry.validate();
    config.validate();
    if (!(geometry.spatial() == kernel.grid())) {
        throw ShapeError("solver geometry does not match the kernel grid");
    }
    if (std::abs(geometry.lambda - kernel.lambda()) > 1e-12 * kernel.lambda()) {
        throw ParameterError("solver lambda differs from kernel lambda");
    }
    params.require_supercritical("solve");
    bdata.validate(geometry.spatial(), params);
}

void save_checkpoint(const SolverConfig& config, const SpinField& s, const CostateField& p) {
    std::filesystem::create_directories(config.checkpoint_dir);
    save_field_binary(config.checkpoint_dir / "checkpoint_s.bin", s, "spin");
    save_field_binary(config.checkpoint_dir / "checkpoint_p.bin", p, "costate");
}

// Dot product with fixed blocking so the result does not depend on the thread count.
double dot(const std::vector<double>& a, const std::vector<double>& b) {
    constexpr std::size_t chunk = 4096;
    const std::size_t blocks = (a.size() + chunk - 1) / chunk;
    std::vector<double> parts(blocks);
    detail::parallel_for(blocks, [&](std::size_t k) {
        const std::size_t end = std::min(a.size(), (k + 1) * chunk);
        double acc = 0.0;
        for (std::size_t i = k * chunk; i < end; ++i) acc += a[i] * b[i];
        parts[k] = acc;
    });
    return std::accumulate(parts.begin(), parts.end(), 0.0);
}

template <class F>
void blocked(std::size_t n, F&& body) {
    detail::parallel_for((n + block_size - 1) / block_size, [&](std::size_t b) {
        const std::size_t end = std::min(n, (b + 1) * block_size);
        for (std::size_t i = b * block_size; i < end; ++i) body(i);
    });
}

// Anderson mixing for x = G(x) with residual f = G(x) - x:
// x+ = x + theta f - sum_j gamma_j (dx_j + theta df_j), gamma the least-squares
// fit of f by the df_j.  Depth 0 reduces to x+ = x + theta f.
class Mixer {
public:
    Mixer(std::size_t depth, double theta) : depth_(depth), theta_(theta) {}

    void update(std::vector<double>& x, const std::vector<double>& f) {
        const std::size_t n = x.size();
        if (depth_ > 0) {
            if (!x_prev_.empty()) {
                std::vector<double> dx(n), df(n);
                blocked(n, [&](std::size_t i) {
                    dx[i] = x[i] - x_prev_[i];
                    df[i] = f[i] - f_prev_[i];
                });
                dx_.push_back(std::move(dx));
                df_.push_back(std::move(df));
                if (dx_.size() > depth_) {
                    dx_.erase(dx_.begin());
                    df_.erase(df_.begin());
                }
            }
            x_prev_ = x;
            f_prev_ = f;
        }
        const std::vector<double> gamma = coefficients(f);
        const double th = theta_;
        blocked(n, [&](std::size_t i) {
            double v = x[i] + th * f[i];
            for (std::size_t j = 0; j < gamma.size(); ++j) v -= gamma[j] * (dx_[j][i] + th * df_[j][i]);
            x[i] = v;
        });
    }

    void reset() {
        dx_.clear();
        df_.clear();
        x_prev_.clear();
        f_prev_.clear();
    }

private:
    std::vector<double> coefficients(const std::vector<double>& f) const {
        const std::size_t m = df_.size();
        if (m == 0) return {};
        // Normal equations with a small Tikhonov shift, solved by Gaussian
        // elimination with partial pivoting (m is at most a handful).
        std::vector<double> A(m * m), b(m);
        double trace = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j <= i; ++j) A[i * m + j] = A[j * m + i] = dot(df_[i], df_[j]);
            b[i] = dot(df_[i], f);
            trace += A[i * m + i];
        }
        if (!(trace > 0.0)) return std::vector<double>(m, 0.0);
        for (std::size_t i = 0; i < m; ++i) A[i * m + i] += 1e-10 * trace / static_cast<double>(m);
        for (std::size_t c = 0; c < m; ++c) {
            std::size_t piv = c;
            for (std::size_t r = c + 1; r < m; ++r) {
                if (std::abs(A[r * m + c]) > std::abs(A[piv * m + c])) piv = r;
            }
            if (piv != c) {
                for (std::size_t k = 0; k < m; ++k) std::swap(A[c * m + k], A[piv * m + k]);
                std::swap(b[c], b[piv]);
            }
            for (std::size_t r = c + 1; r < m; ++r) {
                const double factor = A[r * m + c] / A[c * m + c];
                for (std::size_t k = c; k < m; ++k) A[r * m + k] -= factor * A[c * m + k];
                b[r] -= factor * b[c];
            }
        }
        std::vector<double> g(m);
        for (std::size_t c = m; c-- > 0;) {
            double v = b[c];
            for (std::size_t k = c + 1; k < m; ++k) v -= A[c * m + k] * g[k];
            g[c] = v / A[c * m + c];
        }
        for (double v : g) {
            if (!std::isfinite(v)) return std::vector<double>(m, 0.0);
        }
        return g;
    }

    std::size_t depth_;
    double theta_;
    std::vector<std::vector<double>> dx_, df_;
    std::vector<double> x_prev_, f_prev_;
};

using BackwardFn = CostateField (*)(const SpinField&, std::span<const double>, const InteractionKernel&,
                                    const PotentialParams&, std::size_t);
using ForwardFn = SpinField (*)(const CostateField&, std::span<const double>, const PotentialParams&, StiffMode);

SolveResult iterate(const BoundaryData& bdata, const GridGeometry& geometry, const InteractionKernel& kernel,
                    const PotentialParams& params, const SolverConfig& config, const SpinField* initial,
                    BackwardFn backward, ForwardFn forward) {
    check_solve_inputs(bdata, geometry, kernel, params, config);
    const auto start = std::chrono::steady_clock::now();
    SpinField s = initial != nullptr ? *initial : initial_guess(bdata, geometry);
    if (!(s.geometry() == geometry)) {
        throw ShapeError("initial iterate does not match the solver geometry");
    }
    SolveReport report;
    report.theta = config.theta;
    report.tol_l1 = config.tol_l1;
    Mixer mixer(config.anderson_depth, config.theta);
    SpinField image;
    std::vector<double> f(s.values().size());
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t it = 1; it <= config.max_iters; ++it) {
        const CostateField p = backward(s, bdata.g, kernel, params, config.newton_max);
        image = forward(p, bdata.s0, params, config.stiff_mode);
        const double change = relative_change(image, s);
        report.iterations = it;
        report.final_residual = change;
        if (config.progress != nullptr && config.progress_every > 0 &&
            (it % config.progress_every == 0 || change <= config.tol_l1)) {
            *config.progress << "iteration " << it << " change " << change << '\n';
        }
        if (config.checkpoint_every > 0 && it % config.checkpoint_every == 0) {
            save_checkpoint(config, image, p);
        }
        if (change <= config.tol_l1) {
            report.converged = true;
            break;
        }
        // A mixed iterate that made things much worse restarts the history.
        if (change > 10.0 * best) mixer.reset();
        best = std::min(best, change);
        const auto& gv = image.values();
        const auto& sv = s.values();
        blocked(f.size(), [&](std::size_t i) { f[i] = gv[i] - sv[i]; });
        mixer.update(s.values(), f);
    }
    // Return the last forward image (it lies in (-1, 1) by construction) and a
    // costate consistent with it.
    s = std::move(image);
    CostateField p = backward(s, bdata.g, kernel, params, config.newton_max);
    report.defect = residual(s, p, bdata, kernel, params, config.stiff_mode);
    report.energy = cost_decomposed(s, bdata, kernel, params);
    report.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return {std::move(s), std::move(p), report};
}

}  // namespace

std::string to_string(StiffMode mode) {
    return mode == StiffMode::semi_implicit ? "semi_implicit" : "exponential_integrator";
}

StiffMode stiff_mode_from_string(const std::string& name) {
    if (name == "exponential_integrator") return StiffMode::exponential_integrator;
    if (name == "semi_implicit") return StiffMode::semi_implicit;
    throw ParameterError("unknown stiff_mode '" + name + "'");
}

void SolverConfig::validate() const {
    if (!(theta > 0.0 && theta <= 1.0)) {
        throw ParameterError("solver.theta must lie in (0, 1]");
    }
    if (!(tol_l1 > 0.0)) {
        throw ParameterError("solver.tol_l1 must be positive");
    }
    if (max_iters == 0) {
        throw ParameterError("solver.max_iters must be positive");
    }
    if (checkpoint_every > 0 && checkpoint_dir.empty()) {
        throw ParameterError("solver.checkpoint_every needs a checkpoint directory");
    }
}

CostateField backward_sweep(const SpinField& s, std::span<const double> g, const InteractionKernel& kernel,
                            const PotentialParams& params, std::size_t newton_max) {
    check_sweep_inputs(s, g, "backward_sweep");
    const GridGeometry& geo = s.geometry();
    const std::size_t N = geo.slice_size();
    const std::size_t nt = geo.nt;
    const double a = geo.dt() / geo.lambda;

    SpaceTimeField js(geo);
    detail::parallel_for(nt - 1, [&](std::size_t n) { kernel.convolve(s.slice(n), js.slice(n)); });

    CostateField p(geo);
    auto last = p.slice(nt - 1);
    for (std::size_t i = 0; i < N; ++i) last[i] = -g[i];

    detail::parallel_for((N + block_size - 1) / block_size, [&](std::size_t b) {
        const std::size_t i0 = b * block_size;
        const std::size_t i1 = std::min(N, i0 + block_size);
        for (std::size_t n = nt - 1; n-- > 0;) {
            for (std::size_t i = i0; i < i1; ++i) {
                double q;
                if (!costate_step(p.at(n + 1, i), js.at(n, i), a, params.beta, newton_max, q)) {
                    newton_failure(n, i);
                }
                p.at(n, i) = q;
            }
        }
    });
    return p;
}

SpinField forward_sweep(const CostateField& p, std::span<const double> s0, const PotentialParams& params,
                        StiffMode mode) {
    check_sweep_inputs(p, s0, "forward_sweep");
    const GridGeometry& geo = p.geometry();
    const std::size_t N = geo.slice_size();
    const double a = geo.dt() / geo.lambda;
    SpinField s(geo);
    std::copy(s0.begin(), s0.end(), s.slice(0).begin());
    detail::parallel_for((N + block_size - 1) / block_size, [&](std::size_t b) {
        const std::size_t i0 = b * block_size;
        const std::size_t i1 = std::min(N, i0 + block_size);
        for (std::size_t n = 0; n + 1 < geo.nt; ++n) {
            for (std::size_t i = i0; i < i1; ++i) {
                s.at(n + 1, i) = spin_step(s.at(n, i), p.at(n, i), a, params.beta, mode);
            }
        }
    });
    return s;
}

SolveResult solve(const BoundaryData& bdata, const GridGeometry& geometry, const InteractionKernel& kernel,
                  const PotentialParams& params, const SolverConfig& config, const SpinField* initial) {
    return iterate(bdata, geometry, kernel, params, config, initial, &backward_sweep, &forward_sweep);
}

double residual(const SpinField& s, const CostateField& p, const BoundaryData& bdata,
                const InteractionKernel& kernel, const PotentialParams& params, StiffMode mode) {
    const GridGeometry& geo = s.geometry();
    if (!(p.geometry() == geo)) {
        throw ShapeError("residual: spin and costate grids differ");
    }
    check_sweep_inputs(s, bdata.s0, "residual");
    check_sweep_inputs(s, bdata.g, "residual");
    const std::size_t N = geo.slice_size();
    const std::size_t nt = geo.nt;
    const double a = geo.dt() / geo.lambda;
    const double beta = params.beta;

    std::vector<double> fwd(nt - 1), bwd(nt - 1);
    detail::parallel_for(nt - 1, [&](std::size_t n) {
        const auto js = kernel.convolve(s.slice(n));
        double x = 0.0, y = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            const double pn = p.at(n, i);
            x += std::abs(s.at(n + 1, i) - spin_step(s.at(n, i), pn, a, beta, mode));
            y += std::abs(pn - p.at(n + 1, i) - a * (js[i] - sinh_cosh(beta * pn).sinh / beta));
        }
        fwd[n] = x;
        bwd[n] = y;
    });
    const double steps = static_cast<double>((nt - 1) * N);
    double init = 0.0, term = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
        init += std::abs(s.at(0, i) - bdata.s0[i]);
        term += std::abs(p.at(nt - 1, i) + bdata.g[i]);
    }
    return std::max({std::accumulate(fwd.begin(), fwd.end(), 0.0) / steps,
                     std::accumulate(bwd.begin(), bwd.end(), 0.0) / steps, init / static_cast<double>(N),
                     term / static_cast<double>(N)});
}

namespace serial {

CostateField backward_sweep(const SpinField& s, std::span<const double> g, const InteractionKernel& kernel,
                            const PotentialParams& params, std::size_t newton_max) {
    check_sweep_inputs(s, g, "backward_sweep");
    const GridGeometry& geo = s.geometry();
    const std::size_t N = geo.slice_size();
    const double a = geo.dt() / geo.lambda;
    CostateField p(geo);
    for (std::size_t i = 0; i < N; ++i) p.at(geo.nt - 1, i) = -g[i];
    for (std::size_t n = geo.nt - 1; n-- > 0;) {
        const auto js = kernel.convolve(s.slice(n));
        for (std::size_t i = 0; i < N; ++i) {
            double q;
            if (!costate_step(p.at(n + 1, i), js[i], a, params.beta, newton_max, q)) {
                newton_failure(n, i);
            }
            p.at(n, i) = q;
        }
    }
    return p;
}

SpinField forward_sweep(const CostateField& p, std::span<const double> s0, const PotentialParams& params,
                        StiffMode mode) {
    check_sweep_inputs(p, s0, "forward_sweep");
    const GridGeometry& geo = p.geometry();
    const std::size_t N = geo.slice_size();
    const double a = geo.dt() / geo.lambda;
    SpinField s(geo);
    for (std::size_t i = 0; i < N; ++i) s.at(0, i) = s0[i];
    for (std::size_t n = 0; n + 1 < geo.nt; ++n) {
        for (std::size_t i = 0; i < N; ++i) {
            s.at(n + 1, i) = spin_step(s.at(n, i), p.at(n, i), a, params.beta, mode);
        }
    }
    return s;
}

SolveResult solve(const BoundaryData& bdata, const GridGeometry& geometry, const InteractionKernel& kernel,
                  const PotentialParams& params, const SolverConfig& config) {
    return iterate(bdata, geometry, kernel, params, config, nullptr, &serial::backward_sweep,
                   &serial::forward_sweep);
}

}  // namespace serial

}  // namespace isingmfg
