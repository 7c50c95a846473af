#pragma once

// Space-time grids for the spin field s and the costate p, boundary data,
// cutoff and rescaling, and file formats.

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "isingmfg/kernel.hpp"
#include "isingmfg/potential.hpp"

namespace isingmfg {

/// nt time nodes on [0, T] and nx^d cells on the periodic box [0, extent)^d.
struct GridGeometry {
    int d = 2;
    std::size_t nx = 80;
    std::size_t nt = 300;
    double T = 1.5;
    double lambda = 1.0 / 40.0;
    double extent = 1.0;

    SpatialGrid spatial() const { return {d, nx, extent}; }
    std::size_t slice_size() const { return spatial().size(); }
    std::size_t size() const { return nt * slice_size(); }
    double dt() const { return T / static_cast<double>(nt - 1); }
    double dx() const { return extent / static_cast<double>(nx); }
    double time(std::size_t n) const { return static_cast<double>(n) * dt(); }
    void validate() const;
    bool operator==(const GridGeometry&) const = default;
};

/// Time-major storage: slice n occupies [n*N, (n+1)*N) with N = nx^d.
class SpaceTimeField {
public:
    SpaceTimeField() = default;
    explicit SpaceTimeField(const GridGeometry& geometry, double fill = 0.0);
    SpaceTimeField(const GridGeometry& geometry, std::vector<double> values);

    const GridGeometry& geometry() const { return geometry_; }
    std::span<double> slice(std::size_t n);
    std::span<const double> slice(std::size_t n) const;
    double& at(std::size_t n, std::size_t i) { return values_[n * geometry_.slice_size() + i]; }
    double at(std::size_t n, std::size_t i) const { return values_[n * geometry_.slice_size() + i]; }
    std::vector<double>& values() { return values_; }
    const std::vector<double>& values() const { return values_; }

    bool operator==(const SpaceTimeField&) const = default;

private:
    GridGeometry geometry_;
    std::vector<double> values_;
};

struct SpinField : SpaceTimeField {
    using SpaceTimeField::SpaceTimeField;
};

struct CostateField : SpaceTimeField {
    using SpaceTimeField::SpaceTimeField;
};

/// Initial spin s0 and terminal cost density g, one value per cell.
struct BoundaryData {
    std::vector<double> s0;
    std::vector<double> g;

    /// Checks shapes against the grid, |s0| <= s_star and |g| <= Phi'(s_star)/(2 beta)
    /// (each up to a relative 1e-12).  Throws ShapeError or ParameterError naming
    /// the first offending cell.
    void validate(const SpatialGrid& grid, const PotentialParams& params) const;
};

/// Largest admissible |g|: Phi'(s_star) / (2 beta), which equals p_star.
double terminal_cost_bound(const PotentialParams& params);

/// Forward differences (s[n+1] - s[n]) / dt; the last slice repeats the
/// backward difference.  Shape nt x N.
std::vector<double> time_derivative(const SpaceTimeField& field);

/// Clamps every value to [-s_star, s_star].
SpinField cutoff(const SpinField& field, double s_star);

/// R s(t, x) = s(tau + r t, z + r x) on a grid with the same nx and nt,
/// spatial extent extent/r and horizon T_window.  Values come from multilinear
/// interpolation (periodic in space, linear in time).  The time window
/// [tau, tau + r T_window] must lie in [0, T].  The lambda of the result is lambda/r.
SpinField rescale(const SpinField& field, double tau, std::span<const double> z, double r,
                  double T_window);

// ---------------------------------------------------------------------------
// Data expressions for s0 and g.

enum class DataKind { constant, step, disk, file };

/// A scalar field on the torus.  Values are multiplied by `unit` (for
/// instance s_star or the terminal bound) before use.
struct DataExpr {
    DataKind kind = DataKind::constant;
    double value = 0.0;        ///< constant
    int axis = 0;              ///< step: coordinate axis
    double position = 0.5;     ///< step: location of the jump along `axis`
    double width = 0.0;        ///< step/disk: tanh smoothing width, 0 for a sharp jump
    double inside = 1.0;       ///< step: value for coordinate < position; disk: inside value
    double outside = -1.0;     ///< step: value for coordinate > position; disk: outside value
    std::vector<double> center;  ///< disk centre
    double radius = 0.25;      ///< disk radius
    std::string path;          ///< file: single-slice field file (binary or CSV)
    double unit = 1.0;

    std::vector<double> sample(const SpatialGrid& grid) const;
};

DataKind data_kind_from_string(const std::string& name);
std::string to_string(DataKind kind);

// ---------------------------------------------------------------------------
// File formats.  Binary: one JSON header line, then nt*N little-endian float64.
// CSV: a version comment, a column header, one row per (n, cell).

void save_field_binary(const std::filesystem::path& path, const SpaceTimeField& field,
                       const std::string& kind);
SpaceTimeField load_field_binary(const std::filesystem::path& path, std::string* kind = nullptr);
void save_field_csv(const std::filesystem::path& path, const SpaceTimeField& field);
SpaceTimeField load_field_csv(const std::filesystem::path& path);
/// Dispatches on the extension (.csv, otherwise binary).
SpaceTimeField load_field(const std::filesystem::path& path);

}  // namespace isingmfg
