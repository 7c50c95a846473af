#include "isingmfg/profiles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/SparseCholesky>

#include "isingmfg/errors.hpp"

namespace isingmfg {

namespace {

constexpr double bound_eps = 1e-9;

double clamp_open(double v) { return std::clamp(v, -1.0 + bound_eps, 1.0 - bound_eps); }

// Profile on n+1 nodes relaxing from `start` to `end` at rate mu, hitting `end` exactly at the last node.
std::vector<double> exponential_guess(double start, double end, std::size_t n, double h, double mu) {
    std::vector<double> q(n + 1);
    const double R = static_cast<double>(n) * h;
    for (std::size_t i = 0; i <= n; ++i) {
        const double xi = static_cast<double>(i) * h;
        q[i] = end + (start - end) * std::exp(-mu * xi) * (1.0 - xi / R);
    }
    return q;
}

// Extends a profile defined on a shorter horizon by holding its last value.
std::vector<double> extend_profile(const std::vector<double>& q, std::size_t n) {
    std::vector<double> out(n + 1, q.back());
    std::copy_n(q.begin(), std::min(q.size(), n + 1), out.begin());
    return out;
}

std::size_t node_count(double length, double h) {
    const double n = std::round(length / h);
    if (!(n >= 2.0)) {
        throw ParameterError("profile horizon must cover at least two grid steps");
    }
    return static_cast<std::size_t>(n);
}

double decay_rate(const PotentialParams& params) {
    const double s = equilibrium(params).s_star;
    const double sigma = std::sqrt((1.0 - s) * (1.0 + s));
    return std::sqrt(params.beta * sigma * double_well_second(s, params));
}

void check_options(const LayerOptions& o) {
    if (!(o.h > 0.0)) throw ParameterError("layer grid spacing must be positive");
    if (!(o.R_max > 0.0)) throw ParameterError("R_max must be positive");
    if (!(o.value_tol > 0.0) || !(o.grad_tol > 0.0)) throw ParameterError("tolerances must be positive");
}

template <class Solve>
LayerResult with_horizon(const LayerOptions& options, double seed, Solve&& solve_at) {
    if (options.R > 0.0) {
        return solve_at(options.R, nullptr);
    }
    double R = std::min(seed, options.R_max);
    LayerResult best = solve_at(R, nullptr);
    while (2.0 * R <= options.R_max) {
        R *= 2.0;
        LayerResult next = solve_at(R, &best);
        const bool settled = std::abs(next.value - best.value) < options.value_tol;
        best = std::move(next);
        if (settled) break;
    }
    return best;
}

}  // namespace

ProfileFunctional::ProfileFunctional(const PotentialParams& params, double h, double speed)
    : params_(params), h_(h), speed_(speed) {
    if (!(h > 0.0)) throw ParameterError("profile spacing must be positive");
    params_.require_supercritical("profile functional");
}

void ProfileFunctional::set_nonlocal(const LineKernel& kernel, double left, double right) {
    if (std::abs(kernel.spacing - h_) > 1e-12 * h_) {
        throw ParameterError("line kernel spacing differs from the profile spacing");
    }
    kernel_ = kernel;
    left_ = left;
    right_ = right;
}

void ProfileFunctional::set_endpoint(double g) { endpoint_g_ = g; }

double ProfileFunctional::value(std::span<const double> q) const {
    const std::size_t n = q.size() - 1;
    double E = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double m = 0.5 * (q[i] + q[i + 1]);
        const double v = speed_ * (q[i + 1] - q[i]) / h_;
        E += h_ * (double_well(m, params_) + kinetic(m, v, params_));
    }
    if (kernel_) {
        const auto& half = kernel_->half;
        const double h2 = h_ * h_;
        const long nn = static_cast<long>(n);
        double pairs = 0.0;
        for (long i = 0; i <= nn; ++i) {
            for (std::size_t k = 1; k < half.size(); ++k) {
                const double w = h2 * half[k];
                const long j = i + static_cast<long>(k);
                const double qj = j <= nn ? q[j] : right_;
                const double d = q[i] - qj;
                pairs += 0.5 * w * d * d;
                if (i - static_cast<long>(k) < 0) {
                    const double dl = q[i] - left_;
                    pairs += 0.5 * w * dl * dl;
                }
            }
        }
        E += pairs;
    }
    if (endpoint_g_) {
        E += *endpoint_g_ * q[0] + phi(q[0]) / (2.0 * params_.beta);
    }
    return E;
}

void ProfileFunctional::gradient(std::span<const double> q, std::span<double> out) const {
    const std::size_t n = q.size() - 1;
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double m = 0.5 * (q[i] + q[i + 1]);
        const double v = speed_ * (q[i + 1] - q[i]) / h_;
        const KineticJet k = kinetic_jet(m, v, params_);
        const double fs = double_well_prime(m, params_) + k.dS;
        out[i] += 0.5 * h_ * fs - speed_ * k.dV;
        out[i + 1] += 0.5 * h_ * fs + speed_ * k.dV;
    }
    if (kernel_) {
        const auto& half = kernel_->half;
        const double h2 = h_ * h_;
        const long nn = static_cast<long>(n);
        for (long i = 0; i <= nn; ++i) {
            for (std::size_t k = 1; k < half.size(); ++k) {
                const double w = h2 * half[k];
                const long j = i + static_cast<long>(k);
                if (j <= nn) {
                    const double d = w * (q[i] - q[j]);
                    out[i] += d;
                    out[j] -= d;
                } else {
                    out[i] += w * (q[i] - right_);
                }
                if (i - static_cast<long>(k) < 0) out[i] += w * (q[i] - left_);
            }
        }
    }
    if (endpoint_g_) {
        out[0] += *endpoint_g_ + phi_prime(q[0], true) / (2.0 * params_.beta);
    }
}

Eigen::SparseMatrix<double> ProfileFunctional::hessian(std::span<const double> q) const {
    const std::size_t n = q.size() - 1;
    std::vector<Eigen::Triplet<double>> trips;
    const double c = speed_ / h_;
    for (std::size_t i = 0; i < n; ++i) {
        const double m = 0.5 * (q[i] + q[i + 1]);
        const double v = speed_ * (q[i + 1] - q[i]) / h_;
        const KineticJet k = kinetic_jet(m, v, params_);
        const double fss = double_well_second(m, params_) + k.dSS;
        // u_L = (1/2, -c), u_R = (1/2, c) in (S, V) coordinates.
        const double ll = h_ * (0.25 * fss - c * k.dSV + c * c * k.dVV);
        const double rr = h_ * (0.25 * fss + c * k.dSV + c * c * k.dVV);
        const double lr = h_ * (0.25 * fss - c * c * k.dVV);
        const int a = static_cast<int>(i), b = static_cast<int>(i + 1);
        trips.emplace_back(a, a, ll);
        trips.emplace_back(b, b, rr);
        trips.emplace_back(a, b, lr);
        trips.emplace_back(b, a, lr);
    }
    if (kernel_) {
        const auto& half = kernel_->half;
        const double h2 = h_ * h_;
        const long nn = static_cast<long>(n);
        for (long i = 0; i <= nn; ++i) {
            double diag = 0.0;
            for (std::size_t k = 1; k < half.size(); ++k) {
                const double w = h2 * half[k];
                const long j = i + static_cast<long>(k);
                diag += w;  // partner on the right, grid or padding
                if (j <= nn) {
                    trips.emplace_back(static_cast<int>(i), static_cast<int>(j), -w);
                    trips.emplace_back(static_cast<int>(j), static_cast<int>(i), -w);
                }
                diag += w;  // partner on the left, grid or padding
            }
            trips.emplace_back(static_cast<int>(i), static_cast<int>(i), diag);
        }
    }
    if (endpoint_g_) {
        trips.emplace_back(0, 0, phi_second(q[0]) / (2.0 * params_.beta));
    }
    Eigen::SparseMatrix<double> H(static_cast<int>(n + 1), static_cast<int>(n + 1));
    H.setFromTriplets(trips.begin(), trips.end());
    return H;
}

MinimizeResult minimize_profile(const ProfileFunctional& f, std::vector<double> q0,
                                const std::vector<std::size_t>& pinned, std::size_t max_iter,
                                double grad_tol) {
    const std::size_t total = q0.size();
    std::vector<int> free_index(total, -1);
    std::vector<std::size_t> free_nodes;
    {
        std::vector<bool> is_pinned(total, false);
        for (std::size_t p : pinned) is_pinned.at(p) = true;
        for (std::size_t i = 0; i < total; ++i) {
            if (!is_pinned[i]) {
                free_index[i] = static_cast<int>(free_nodes.size());
                free_nodes.push_back(i);
            }
        }
    }
    for (std::size_t i : free_nodes) q0[i] = clamp_open(q0[i]);

    MinimizeResult res;
    res.q = std::move(q0);
    const int nf = static_cast<int>(free_nodes.size());
    std::vector<double> grad(total);
    double E = f.value(res.q);
    double shift = 0.0;
    using Solver = Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::NaturalOrdering<int>>;

    for (std::size_t it = 0; it < max_iter; ++it) {
        f.gradient(res.q, grad);
        double gnorm = 0.0;
        Eigen::VectorXd g(nf);
        for (int k = 0; k < nf; ++k) {
            g[k] = grad[free_nodes[k]];
            gnorm = std::max(gnorm, std::abs(g[k]));
        }
        res.gradient_norm = gnorm;
        res.iterations = it;
        if (gnorm <= grad_tol || nf == 0) {
            res.converged = true;
            break;
        }

        const Eigen::SparseMatrix<double> Hfull = f.hessian(res.q);
        std::vector<Eigen::Triplet<double>> trips;
        trips.reserve(static_cast<std::size_t>(Hfull.nonZeros()));
        double diag_max = 0.0;
        for (int col = 0; col < Hfull.outerSize(); ++col) {
            for (Eigen::SparseMatrix<double>::InnerIterator e(Hfull, col); e; ++e) {
                const int r = free_index[e.row()], c = free_index[e.col()];
                if (r < 0 || c < 0) continue;
                trips.emplace_back(r, c, e.value());
                if (r == c) diag_max = std::max(diag_max, std::abs(e.value()));
            }
        }
        Eigen::SparseMatrix<double> H(nf, nf);
        H.setFromTriplets(trips.begin(), trips.end());

        // Levenberg shift until the factor is positive definite.
        Solver ldlt;
        Eigen::VectorXd d;
        Eigen::SparseMatrix<double> I(nf, nf);
        I.setIdentity();
        for (int attempt = 0; attempt < 80; ++attempt) {
            ldlt.compute(shift > 0.0 ? Eigen::SparseMatrix<double>(H + shift * I) : H);
            if (ldlt.info() == Eigen::Success && ldlt.vectorD().minCoeff() > 0.0) {
                d = ldlt.solve(-g);
                break;
            }
            shift = std::max(2.0 * shift, 1e-10 * (1.0 + diag_max));
        }
        if (d.size() != nf || !d.allFinite()) break;

        const double slope = g.dot(d);
        if (!(slope < 0.0)) break;
        if (-slope <= 1e-20 * (1.0 + std::abs(E))) {
            res.converged = true;
            break;
        }
        // Projected Armijo backtracking.
        double t = 1.0;
        bool accepted = false;
        std::vector<double> trial = res.q;
        for (int ls = 0; ls < 60; ++ls) {
            double decrease = 0.0;
            for (int k = 0; k < nf; ++k) {
                const std::size_t i = free_nodes[k];
                trial[i] = clamp_open(res.q[i] + t * d[k]);
                decrease += g[k] * (trial[i] - res.q[i]);
            }
            double Et;
            try {
                Et = f.value(trial);
            } catch (const DomainError&) {
                Et = std::numeric_limits<double>::infinity();
            }
            bool ok = Et <= E + 1e-4 * decrease;
            if (!ok && ls == 0 && Et <= E + 1e-14 * (1.0 + std::abs(E))) {
                // Energy differences below rounding: accept a full step that
                // reduces the gradient instead.
                std::vector<double> gt(total);
                f.gradient(trial, gt);
                double gt_norm = 0.0;
                for (std::size_t i : free_nodes) gt_norm = std::max(gt_norm, std::abs(gt[i]));
                ok = gt_norm < 0.5 * gnorm;
            }
            if (ok) {
                accepted = true;
                E = Et;
                res.q = trial;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) break;
        shift = t == 1.0 ? 0.25 * shift : shift;
        if (shift < 1e-14 * (1.0 + diag_max)) shift = 0.0;
    }
    res.value = E;
    return res;
}

double layer_width_seed(const PotentialParams& params) {
    const double s = equilibrium(params).s_star;
    return 10.0 / std::sqrt(double_well_second(s, params));
}

LayerResult v_init(double s0, double s_bar, const PotentialParams& params, const LayerOptions& options) {
    check_options(options);
    params.require_supercritical("v_init");
    const double s_star = equilibrium(params).s_star;
    if (std::abs(std::abs(s_bar) - s_star) > 1e-12) {
        throw ParameterError("v_init: s_bar must be +-s_star");
    }
    if (!(std::abs(s0) <= s_star * (1.0 + 1e-12))) {
        throw ParameterError("v_init: s0 must lie in [-s_star, s_star]");
    }
    const double mu = decay_rate(params);
    const double boundary = phi(s0) / (2.0 * params.beta);
    auto solve_at = [&](double R, const LayerResult* previous) {
        const std::size_t n = node_count(R, options.h);
        std::vector<double> q = previous != nullptr ? extend_profile(previous->profile.q, n)
                                                    : exponential_guess(s0, s_bar, n, options.h, mu);
        q.front() = s0;
        q.back() = s_bar;
        ProfileFunctional f(params, options.h);
        MinimizeResult m = minimize_profile(f, std::move(q), {0, n}, options.max_newton, options.grad_tol);
        LayerResult r;
        r.value = m.value - boundary;
        r.R_used = static_cast<double>(n) * options.h;
        r.converged = m.converged;
        r.iterations = m.iterations;
        r.gradient_norm = m.gradient_norm;
        r.profile.q = std::move(m.q);
        r.profile.horizon = r.R_used;
        r.profile.xi.resize(n + 1);
        for (std::size_t i = 0; i <= n; ++i) r.profile.xi[i] = static_cast<double>(i) * options.h;
        return r;
    };
    return with_horizon(options, layer_width_seed(params), solve_at);
}

LayerResult v_end(double s_bar, double g, const PotentialParams& params, const LayerOptions& options) {
    check_options(options);
    params.require_supercritical("v_end");
    const double s_star = equilibrium(params).s_star;
    if (std::abs(std::abs(s_bar) - s_star) > 1e-12) {
        throw ParameterError("v_end: s_bar must be +-s_star");
    }
    auto solve_at = [&](double R, const LayerResult* previous) {
        const std::size_t n = node_count(R, options.h);
        std::vector<double> q = previous != nullptr ? extend_profile(previous->profile.q, n)
                                                    : std::vector<double>(n + 1, s_bar);
        q.back() = s_bar;
        ProfileFunctional f(params, options.h);
        f.set_endpoint(g);
        MinimizeResult m = minimize_profile(f, std::move(q), {n}, options.max_newton, options.grad_tol);
        LayerResult r;
        r.value = m.value;
        r.R_used = static_cast<double>(n) * options.h;
        r.converged = m.converged;
        r.iterations = m.iterations;
        r.gradient_norm = m.gradient_norm;
        r.profile.q = std::move(m.q);
        r.profile.horizon = r.R_used;
        r.profile.xi.resize(n + 1);
        for (std::size_t i = 0; i <= n; ++i) r.profile.xi[i] = static_cast<double>(i) * options.h;
        return r;
    };
    return with_horizon(options, layer_width_seed(params), solve_at);
}

InitMinimum v_end_from_init(double s_bar, double g, const PotentialParams& params,
                            const LayerOptions& options) {
    const double s_star = equilibrium(params).s_star;
    InitMinimum best;
    auto F = [&](double s0) { return v_init(s0, s_bar, params, options).value + g * s0 + phi(s0) / params.beta; };
    constexpr int scan = 20;
    int k_best = 0;
    double f_best = std::numeric_limits<double>::infinity();
    for (int k = 0; k <= scan; ++k) {
        const double f = F(-s_star + 2.0 * s_star * k / scan);
        if (f < f_best) {
            f_best = f;
            k_best = k;
        }
    }
    const double step = 2.0 * s_star / scan;
    double a = std::max(-s_star, -s_star + (k_best - 1) * step);
    double b = std::min(s_star, -s_star + (k_best + 1) * step);
    const double r = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - r * (b - a), d = a + r * (b - a);
    double fc = F(c), fd = F(d);
    while (b - a > 1e-10) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = F(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = F(d);
        }
    }
    best.s0 = fc < fd ? c : d;
    best.value = std::min({fc, fd, f_best});
    if (f_best < std::min(fc, fd)) best.s0 = -s_star + k_best * step;
    // The opposite equilibrium has no minimiser (only an infimum); judge convergence at the argmin.
    best.converged = v_init(best.s0, s_bar, params, options).converged;
    return best;
}

LayerResult traveling_wave(double c, const KernelSpec& spec, int d, int axis, const PotentialParams& params,
                           const LayerOptions& options, const InteractionKernel* sampled) {
    check_options(options);
    params.require_supercritical("traveling_wave");
    if (!(c >= 0.0)) throw ParameterError("traveling_wave: speed must be non-negative");
    const double s_star = equilibrium(params).s_star;
    const LineKernel line = sample_marginal(spec, d, axis, options.h);
    const bool holds = sampled == nullptr || fourier_max_check(*sampled, axis).holds;

    auto solve_at = [&](double R, const LayerResult* previous) {
        const std::size_t half_n = node_count(R, options.h);
        const std::size_t n = 2 * half_n;
        std::vector<double> q(n + 1);
        for (std::size_t i = 0; i <= n; ++i) {
            const double xi = (static_cast<double>(i) - static_cast<double>(half_n)) * options.h;
            q[i] = s_star * std::tanh(0.5 * xi);
        }
        if (previous != nullptr) {
            // Re-centre the coarser-horizon solution on the new grid.
            const std::size_t old_half = (previous->profile.q.size() - 1) / 2;
            for (std::size_t i = 0; i <= 2 * old_half; ++i) q[half_n - old_half + i] = previous->profile.q[i];
        }
        q.front() = -s_star;
        q.back() = s_star;
        q[half_n] = 0.0;
        ProfileFunctional f(params, options.h, c);
        f.set_nonlocal(line, -s_star, s_star);
        MinimizeResult m = minimize_profile(f, std::move(q), {0, half_n, n}, options.max_newton, options.grad_tol);
        LayerResult r;
        r.value = m.value;
        r.R_used = static_cast<double>(half_n) * options.h;
        r.converged = m.converged;
        r.iterations = m.iterations;
        r.gradient_norm = m.gradient_norm;
        r.hypothesis_holds = holds;
        r.boundary_hit = std::abs(m.q[1] + s_star) > 1e-6 || std::abs(m.q[n - 1] - s_star) > 1e-6;
        r.profile.q = std::move(m.q);
        r.profile.speed = c;
        r.profile.horizon = r.R_used;
        r.profile.xi.resize(n + 1);
        for (std::size_t i = 0; i <= n; ++i) {
            r.profile.xi[i] = (static_cast<double>(i) - static_cast<double>(half_n)) * options.h;
        }
        return r;
    };
    // The front widens roughly linearly with the speed.
    return with_horizon(options, (1.0 + c) * layer_width_seed(params), solve_at);
}

double beltrami_defect(const Profile1D& profile, const PotentialParams& params) {
    const auto& q = profile.q;
    double worst = 0.0;
    for (std::size_t i = 0; i + 1 < q.size(); ++i) {
        const double h = profile.xi[i + 1] - profile.xi[i];
        const double m = 0.5 * (q[i] + q[i + 1]);
        const double v = (q[i + 1] - q[i]) / h;
        const KineticJet k = kinetic_jet(m, v, params);
        worst = std::max(worst, std::abs(v * k.dV - k.value - double_well(m, params)));
    }
    return worst;
}

}  // namespace isingmfg
