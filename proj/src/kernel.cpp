#include "isingmfg/kernel.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <mutex>
#include <numbers>
#include <sstream>

#include "isingmfg/errors.hpp"

namespace isingmfg {

namespace {

// The FFTW planner is not thread-safe; execution with new arrays is.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

template <class T>
struct FftwBuffer {
    T* data = nullptr;
    explicit FftwBuffer(std::size_t n) : data(static_cast<T*>(fftw_malloc(sizeof(T) * n))) {
        if (data == nullptr) {
            throw std::bad_alloc();
        }
    }
    ~FftwBuffer() { fftw_free(data); }
    FftwBuffer(const FftwBuffer&) = delete;
    FftwBuffer& operator=(const FftwBuffer&) = delete;
};

std::size_t half_spectrum_size(const SpatialGrid& g) {
    return g.d == 1 ? g.nx / 2 + 1 : g.nx * (g.nx / 2 + 1);
}

double axis_scale(const KernelSpec& spec, std::size_t axis) {
    return axis < spec.anisotropy.size() ? spec.anisotropy[axis] : 1.0;
}

double axis_shift(const KernelSpec& spec, std::size_t axis) {
    return axis < spec.shift.size() ? spec.shift[axis] : 0.0;
}

double unit_ball_volume(int d) {
    switch (d) {
        case 1: return 2.0;
        case 2: return std::numbers::pi;
        case 3: return 4.0 * std::numbers::pi / 3.0;
        default: throw ParameterError("unsupported dimension for top-hat kernel");
    }
}

// Offset of index k on a periodic axis of n cells, mapped to (-n/2, n/2].
long signed_offset(std::size_t k, std::size_t n) {
    const long kk = static_cast<long>(k);
    const long nn = static_cast<long>(n);
    return kk > nn / 2 ? kk - nn : kk;
}

}  // namespace

std::size_t SpatialGrid::size() const {
    std::size_t n = 1;
    for (int a = 0; a < d; ++a) {
        n *= nx;
    }
    return n;
}

double SpatialGrid::cell_volume() const { return std::pow(dx(), d); }

void SpatialGrid::validate() const {
    if (d < 1 || d > 2) {
        throw ParameterError("spatial dimension must be 1 or 2");
    }
    if (nx < 2) {
        throw ParameterError("need at least 2 cells per axis");
    }
    if (!(extent > 0.0)) {
        throw ParameterError("torus extent must be positive");
    }
}

std::string to_string(KernelFamily family) {
    switch (family) {
        case KernelFamily::gaussian: return "gaussian";
        case KernelFamily::top_hat: return "top_hat";
        case KernelFamily::custom_table: return "custom_table";
    }
    return "unknown";
}

KernelFamily kernel_family_from_string(const std::string& name) {
    if (name == "gaussian") return KernelFamily::gaussian;
    if (name == "top_hat") return KernelFamily::top_hat;
    if (name == "custom_table") return KernelFamily::custom_table;
    throw ParameterError("unknown kernel family '" + name + "'");
}

double KernelSpec::value(std::span<const double> x) const {
    const int d = static_cast<int>(x.size());
    switch (family) {
        case KernelFamily::gaussian: {
            double v = mass;
            for (int a = 0; a < d; ++a) {
                const double s = sigma * axis_scale(*this, a);
                const double y = (x[a] - axis_shift(*this, a)) / s;
                v *= std::exp(-0.5 * y * y) / (std::sqrt(2.0 * std::numbers::pi) * s);
            }
            return v;
        }
        case KernelFamily::top_hat: {
            double r2 = 0.0;
            double scale = 1.0;
            for (int a = 0; a < d; ++a) {
                const double y = (x[a] - axis_shift(*this, a)) / (radius * axis_scale(*this, a));
                r2 += y * y;
                scale *= radius * axis_scale(*this, a);
            }
            return r2 <= 1.0 ? mass / (unit_ball_volume(d) * scale) : 0.0;
        }
        case KernelFamily::custom_table:
            throw ParameterError("custom_table kernels have no continuum form");
    }
    return 0.0;
}

double KernelSpec::support_radius() const {
    double amax = 1.0;
    for (double a : anisotropy) amax = std::max(amax, a);
    double shift_norm = 0.0;
    for (double c : shift) shift_norm += c * c;
    shift_norm = std::sqrt(shift_norm);
    switch (family) {
        case KernelFamily::gaussian: return 9.0 * sigma * amax + shift_norm;
        case KernelFamily::top_hat: return radius * amax + shift_norm;
        case KernelFamily::custom_table: return 0.0;
    }
    return 0.0;
}

double KernelSpec::width() const {
    double amin = 1.0;
    for (double a : anisotropy) amin = std::min(amin, a);
    switch (family) {
        case KernelFamily::gaussian: return 2.0 * sigma * amin;
        case KernelFamily::top_hat: return 2.0 * radius * amin;
        case KernelFamily::custom_table: return 0.0;
    }
    return 0.0;
}

double MarginalTable::j_hat() const {
    double sum = 0.0;
    for (double v : values) sum += v;
    return sum * spacing;
}

double LineKernel::mass() const {
    double sum = half.empty() ? 0.0 : half[0];
    for (std::size_t k = 1; k < half.size(); ++k) sum += 2.0 * half[k];
    return sum * spacing;
}

struct InteractionKernel::Plans {
    fftw_plan forward = nullptr;
    fftw_plan backward = nullptr;

    explicit Plans(const SpatialGrid& g) {
        const std::size_t n = g.size();
        FftwBuffer<double> real(n);
        FftwBuffer<fftw_complex> cplx(half_spectrum_size(g));
        const int nx = static_cast<int>(g.nx);
        std::lock_guard lock(planner_mutex());
        if (g.d == 1) {
            forward = fftw_plan_dft_r2c_1d(nx, real.data, cplx.data, FFTW_ESTIMATE);
            backward = fftw_plan_dft_c2r_1d(nx, cplx.data, real.data, FFTW_ESTIMATE);
        } else {
            forward = fftw_plan_dft_r2c_2d(nx, nx, real.data, cplx.data, FFTW_ESTIMATE);
            backward = fftw_plan_dft_c2r_2d(nx, nx, cplx.data, real.data, FFTW_ESTIMATE);
        }
        if (forward == nullptr || backward == nullptr) {
            throw std::runtime_error("FFTW planning failed");
        }
    }
    ~Plans() {
        std::lock_guard lock(planner_mutex());
        fftw_destroy_plan(forward);
        fftw_destroy_plan(backward);
    }
    Plans(const Plans&) = delete;
    Plans& operator=(const Plans&) = delete;
};

InteractionKernel InteractionKernel::build(const KernelSpec& spec, double lambda,
                                           const SpatialGrid& grid) {
    grid.validate();
    if (!(lambda > 0.0)) {
        throw ParameterError("lambda must be positive");
    }
    InteractionKernel k;
    k.grid_ = grid;
    k.spec_ = spec;
    k.lambda_ = lambda;

    const std::size_t n = grid.size();
    const std::size_t nx = grid.nx;
    const double dx = grid.dx();
    k.samples_.assign(n, 0.0);

    if (spec.family == KernelFamily::custom_table) {
        if (spec.table.size() != n) {
            throw ShapeError("custom kernel table has " + std::to_string(spec.table.size()) +
                             " samples, grid needs " + std::to_string(n));
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (!(spec.table[i] >= 0.0)) {
                throw ParameterError("custom kernel table has a negative or NaN sample at offset " +
                                     std::to_string(i));
            }
        }
        k.samples_ = spec.table;
    } else {
        if (!(spec.mass > 0.0)) {
            throw ParameterError("kernel mass must be positive");
        }
        if (spec.enforce_resolution && lambda * spec.width() < 2.0 * dx) {
            std::ostringstream msg;
            msg << "kernel width " << lambda * spec.width() << " is below two grid cells (dx = "
                << dx << "); refine the grid or disable enforce_resolution";
            throw ParameterError(msg.str());
        }
        const double reach = lambda * spec.support_radius();
        const long images = static_cast<long>(std::ceil(reach / grid.extent)) + 1;
        const double scale = std::pow(lambda, -grid.d);
        std::vector<double> x(grid.d);
        for (std::size_t idx = 0; idx < n; ++idx) {
            std::size_t ks[2] = {grid.d == 1 ? idx : idx / nx, idx % nx};
            double acc = 0.0;
            if (grid.d == 1) {
                for (long m = -images; m <= images; ++m) {
                    x[0] = (static_cast<double>(ks[0]) * dx + static_cast<double>(m) * grid.extent) / lambda;
                    if (std::abs(x[0]) * lambda > reach + grid.extent) continue;
                    acc += spec.value(x);
                }
            } else {
                for (long m0 = -images; m0 <= images; ++m0) {
                    x[0] = (static_cast<double>(ks[0]) * dx + static_cast<double>(m0) * grid.extent) / lambda;
                    if (std::abs(x[0]) * lambda > reach + grid.extent) continue;
                    for (long m1 = -images; m1 <= images; ++m1) {
                        x[1] = (static_cast<double>(ks[1]) * dx + static_cast<double>(m1) * grid.extent) / lambda;
                        acc += spec.value(x);
                    }
                }
            }
            k.samples_[idx] = scale * acc;
        }
    }

    double mass = 0.0;
    for (double v : k.samples_) mass += v;
    mass *= grid.cell_volume();
    if (!(mass > 0.0)) {
        throw ParameterError("kernel has zero discrete mass on this grid");
    }
    if (spec.normalize && spec.family != KernelFamily::custom_table) {
        const double f = spec.mass / mass;
        for (double& v : k.samples_) v *= f;
        mass = 0.0;
        for (double v : k.samples_) mass += v;
        mass *= grid.cell_volume();
    }
    k.j_hat_ = mass;

    double moment = 0.0;
    for (std::size_t idx = 0; idx < n; ++idx) {
        double h2 = 0.0;
        const std::size_t ks[2] = {grid.d == 1 ? idx : idx / nx, idx % nx};
        for (int a = 0; a < grid.d; ++a) {
            const double h = static_cast<double>(signed_offset(ks[a], nx)) * dx;
            h2 += h * h;
        }
        moment += std::sqrt(h2) * k.samples_[idx];
    }
    k.first_moment_ = moment * grid.cell_volume();
    if (!std::isfinite(k.first_moment_)) {
        throw ParameterError("kernel first moment is not finite");
    }

    k.plans_ = std::make_shared<const Plans>(grid);
    const std::size_t nh = half_spectrum_size(grid);
    FftwBuffer<double> real(n);
    FftwBuffer<fftw_complex> cplx(nh);
    for (std::size_t i = 0; i < n; ++i) real.data[i] = k.samples_[i] * grid.cell_volume();
    fftw_execute_dft_r2c(k.plans_->forward, real.data, cplx.data);
    k.spectrum_.resize(nh);
    for (std::size_t i = 0; i < nh; ++i) k.spectrum_[i] = {cplx.data[i][0], cplx.data[i][1]};
    return k;
}

void InteractionKernel::convolve(std::span<const double> field, std::span<double> out) const {
    const std::size_t n = grid_.size();
    if (field.size() != n || out.size() != n) {
        throw ShapeError("convolve: field has " + std::to_string(field.size()) +
                         " values, kernel grid has " + std::to_string(n));
    }
    const std::size_t nh = spectrum_.size();
    FftwBuffer<double> real(n);
    FftwBuffer<fftw_complex> cplx(nh);
    std::copy(field.begin(), field.end(), real.data);
    fftw_execute_dft_r2c(plans_->forward, real.data, cplx.data);
    for (std::size_t i = 0; i < nh; ++i) {
        const std::complex<double> v{cplx.data[i][0], cplx.data[i][1]};
        const std::complex<double> w = v * spectrum_[i];
        cplx.data[i][0] = w.real();
        cplx.data[i][1] = w.imag();
    }
    fftw_execute_dft_c2r(plans_->backward, cplx.data, real.data);
    const double inv = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = real.data[i] * inv;
}

std::vector<double> InteractionKernel::convolve(std::span<const double> field) const {
    std::vector<double> out(field.size());
    convolve(field, out);
    return out;
}

void InteractionKernel::convolve_direct(std::span<const double> field, std::span<double> out) const {
    const std::size_t n = grid_.size();
    if (field.size() != n || out.size() != n) {
        throw ShapeError("convolve_direct: shape mismatch");
    }
    const std::size_t nx = grid_.nx;
    const double vol = grid_.cell_volume();
    if (grid_.d == 1) {
        for (std::size_t z = 0; z < nx; ++z) {
            double acc = 0.0;
            for (std::size_t w = 0; w < nx; ++w) {
                acc += samples_[(z + nx - w) % nx] * field[w];
            }
            out[z] = acc * vol;
        }
        return;
    }
    for (std::size_t zi = 0; zi < nx; ++zi) {
        for (std::size_t zj = 0; zj < nx; ++zj) {
            double acc = 0.0;
            for (std::size_t wi = 0; wi < nx; ++wi) {
                const std::size_t oi = (zi + nx - wi) % nx;
                for (std::size_t wj = 0; wj < nx; ++wj) {
                    const std::size_t oj = (zj + nx - wj) % nx;
                    acc += samples_[oi * nx + oj] * field[wi * nx + wj];
                }
            }
            out[zi * nx + zj] = acc * vol;
        }
    }
}

MarginalTable marginal_1d(const InteractionKernel& kernel, int axis) {
    const SpatialGrid& g = kernel.grid();
    if (axis < 0 || axis >= g.d) {
        throw ParameterError("marginal_1d: only coordinate axes 0.." + std::to_string(g.d - 1) +
                             " are supported");
    }
    MarginalTable m;
    m.spacing = g.dx();
    m.values.assign(g.nx, 0.0);
    const auto samples = kernel.samples();
    if (g.d == 1) {
        m.values.assign(samples.begin(), samples.end());
        return m;
    }
    for (std::size_t i = 0; i < g.nx; ++i) {
        for (std::size_t j = 0; j < g.nx; ++j) {
            const double v = samples[i * g.nx + j] * g.dx();
            m.values[axis == 0 ? i : j] += v;
        }
    }
    return m;
}

LineKernel sample_marginal(const KernelSpec& spec, int d, int axis, double spacing) {
    if (axis < 0 || axis >= d) {
        throw ParameterError("sample_marginal: axis outside [0, d)");
    }
    if (!(spacing > 0.0)) {
        throw ParameterError("sample_marginal: spacing must be positive");
    }
    if (std::abs(axis_shift(spec, axis)) > 0.0) {
        throw ParameterError("sample_marginal: kernel shifted along the marginal axis is not symmetric");
    }
    const double scale_axis = axis_scale(spec, axis);
    std::function<double(double)> marginal;
    double reach = 0.0;
    switch (spec.family) {
        case KernelFamily::gaussian: {
            const double s = spec.sigma * scale_axis;
            reach = 9.0 * s;
            marginal = [s, mass = spec.mass](double t) {
                return mass * std::exp(-0.5 * t * t / (s * s)) / (std::sqrt(2.0 * std::numbers::pi) * s);
            };
            break;
        }
        case KernelFamily::top_hat: {
            const double R = spec.radius * scale_axis;
            reach = R;
            marginal = [R, d, mass = spec.mass](double t) {
                const double u = 1.0 - (t / R) * (t / R);
                if (u < 0.0) return 0.0;
                switch (d) {
                    case 1: return mass / (2.0 * R);
                    case 2: return mass * 2.0 * std::sqrt(u) / (std::numbers::pi * R);
                    default: return mass * 0.75 * u / R;
                }
            };
            break;
        }
        case KernelFamily::custom_table:
            throw ParameterError("sample_marginal: custom_table kernels have no analytic marginal");
    }
    LineKernel line;
    line.spacing = spacing;
    const auto m = static_cast<std::size_t>(std::ceil(reach / spacing));
    line.half.resize(m + 1);
    for (std::size_t k = 0; k <= m; ++k) line.half[k] = marginal(static_cast<double>(k) * spacing);
    if (spec.normalize) {
        const double f = spec.mass / line.mass();
        for (double& v : line.half) v *= f;
    }
    return line;
}

FourierCheck fourier_max_check(const InteractionKernel& kernel, int axis) {
    const SpatialGrid& g = kernel.grid();
    FourierCheck check;
    if (axis < 0 || axis >= g.d) {
        check.diagnostics = "axis outside [0, d)";
        return check;
    }
    const auto spec = kernel.spectrum();
    const double tol = 1e-12 * kernel.j_hat();
    for (const auto& v : spec) check.max_imag = std::max(check.max_imag, std::abs(v.imag()));

    const std::size_t nh = g.nx / 2 + 1;
    check.max_violation = -std::numeric_limits<double>::infinity();
    if (g.d == 1) {
        for (const auto& v : spec) {
            check.max_violation = std::max(check.max_violation, v.real() - spec[0].real());
        }
    } else {
        for (std::size_t i = 0; i < g.nx; ++i) {
            for (std::size_t j = 0; j < nh; ++j) {
                const double here = spec[i * nh + j].real();
                const double perp = axis == 0 ? spec[j].real() : spec[i * nh].real();
                check.max_violation = std::max(check.max_violation, here - perp);
            }
        }
    }
    const bool real_spectrum = check.max_imag <= tol;
    const bool dominated = check.max_violation <= tol;
    check.holds = real_spectrum && dominated;
    std::ostringstream msg;
    msg << "max Re violation " << check.max_violation << ", max |Im| " << check.max_imag;
    if (!real_spectrum) msg << "; kernel is not even";
    if (!dominated) msg << "; spectrum not maximised on the orthogonal subspace";
    check.diagnostics = msg.str();
    return check;
}

}  // namespace isingmfg
