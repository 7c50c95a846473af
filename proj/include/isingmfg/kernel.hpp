#pragma once

// Interaction kernels on the periodic unit torus: sampling and periodising
// J^lambda(z) = lambda^-d J(z / lambda), FFT-based circular convolution with a
// direct-sum reference path, axis marginals and the Fourier hypothesis used by
// the traveling-wave reduction.

#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace isingmfg {

/// Uniform periodic grid on [0, extent)^d with nx cells per axis.  Points sit
/// at cell centres.  Flat index is row-major with axis 0 slowest.
struct SpatialGrid {
    int d = 2;
    std::size_t nx = 64;
    double extent = 1.0;

    std::size_t size() const;
    double dx() const { return extent / static_cast<double>(nx); }
    double cell_volume() const;
    void validate() const;
    bool operator==(const SpatialGrid&) const = default;
};

enum class KernelFamily { gaussian, top_hat, custom_table };

std::string to_string(KernelFamily family);
KernelFamily kernel_family_from_string(const std::string& name);

struct KernelSpec {
    KernelFamily family = KernelFamily::gaussian;
    double sigma = 1.0;   ///< gaussian standard deviation, unscaled units
    double radius = 1.0;  ///< top-hat radius, unscaled units
    double mass = 1.0;    ///< continuum total mass of J
    /// Optional per-axis stretch factors: J(x) -> J(x_i / a_i) / prod(a_i).
    std::vector<double> anisotropy;
    /// Optional centre offset (unscaled units).  Non-zero offsets break evenness.
    std::vector<double> shift;
    /// custom_table: samples of J^lambda on the grid, offset-indexed like
    /// InteractionKernel::samples().  Used as given (times the normalisation).
    std::vector<double> table;
    /// Rescale the periodised samples so their discrete mass equals `mass`.
    bool normalize = true;
    /// Reject grids that do not resolve the kernel (support below two cells).
    bool enforce_resolution = true;

    /// Unscaled J at a point of R^d (d = x.size()).
    double value(std::span<const double> x) const;
    /// Radius beyond which J is negligible (below 1e-17 relative) or zero.
    double support_radius() const;
    /// Characteristic width used for the resolution check.
    double width() const;
};

/// Axis marginal of a periodised kernel table: values[k] at offset k*spacing (mod the period).
struct MarginalTable {
    double spacing = 0.0;
    std::vector<double> values;
    double j_hat() const;
};

/// Symmetric 1D kernel on the line, half[k] = J^e(k * spacing) for k = 0..m.
struct LineKernel {
    double spacing = 0.0;
    std::vector<double> half;
    double mass() const;
};

class InteractionKernel {
public:
    /// Samples J^lambda on the grid with periodic wrapping of the tails.
    static InteractionKernel build(const KernelSpec& spec, double lambda, const SpatialGrid& grid);

    const SpatialGrid& grid() const { return grid_; }
    const KernelSpec& spec() const { return spec_; }
    double lambda() const { return lambda_; }
    /// Discrete total mass: sum(samples) * cell_volume.
    double j_hat() const { return j_hat_; }
    double cell_volume() const { return grid_.cell_volume(); }
    double first_moment() const { return first_moment_; }

    /// J^lambda at every grid offset; samples()[0] is the value at zero offset.
    std::span<const double> samples() const { return samples_; }
    /// Real-to-complex transform of samples * cell_volume (so spectrum()[0] == j_hat()).
    /// Half-spectrum layout of FFTW: last axis has nx/2+1 entries.
    std::span<const std::complex<double>> spectrum() const { return spectrum_; }

    /// (J^lambda * u)(z) = sum_w J^lambda(z-w) u(w) dx^d, by FFT.
    void convolve(std::span<const double> field, std::span<double> out) const;
    std::vector<double> convolve(std::span<const double> field) const;
    /// Same convolution by the O(N^2) periodic double sum.
    void convolve_direct(std::span<const double> field, std::span<double> out) const;

private:
    struct Plans;

    SpatialGrid grid_;
    KernelSpec spec_;
    double lambda_ = 1.0;
    double j_hat_ = 0.0;
    double first_moment_ = 0.0;
    std::vector<double> samples_;
    std::vector<std::complex<double>> spectrum_;
    std::shared_ptr<const Plans> plans_;
};

/// Marginal of the periodised kernel along a coordinate axis (sum over the
/// orthogonal offsets times their cell volume).  Throws ParameterError for an
/// axis outside [0, d).
MarginalTable marginal_1d(const InteractionKernel& kernel, int axis);

/// Analytic marginal J^e of the unscaled kernel along `axis`, sampled at
/// `spacing` out to the support radius and rescaled to `spec.mass` when
/// spec.normalize is set.
LineKernel sample_marginal(const KernelSpec& spec, int d, int axis, double spacing);

struct FourierCheck {
    bool holds = false;
    double max_violation = 0.0;  ///< max of Re FJ(xi) - Re FJ(xi_perp), should be <= 0
    double max_imag = 0.0;       ///< max |Im FJ|, non-zero for kernels that are not even
    std::string diagnostics;
};

/// Checks that Re FJ(xi) <= Re FJ(xi with its `axis` component removed) on the
/// discrete spectrum and that FJ is real.
FourierCheck fourier_max_check(const InteractionKernel& kernel, int axis);

}  // namespace isingmfg
