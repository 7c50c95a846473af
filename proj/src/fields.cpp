#include "isingmfg/fields.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "isingmfg/errors.hpp"

namespace isingmfg {

namespace {

using nlohmann::json;

double cell_centre(std::size_t i, double dx) { return (static_cast<double>(i) + 0.5) * dx; }

// Periodic linear interpolation weights for coordinate x on an axis of n cells.
struct AxisStencil {
    std::size_t i0, i1;
    double w1;
};

AxisStencil periodic_stencil(double x, double dx, std::size_t n) {
    const double u = x / dx - 0.5;
    const double fl = std::floor(u);
    const double frac = u - fl;
    const auto nn = static_cast<long>(n);
    long k = static_cast<long>(fl) % nn;
    if (k < 0) k += nn;
    return {static_cast<std::size_t>(k), static_cast<std::size_t>((k + 1) % nn), frac};
}

json geometry_to_json(const GridGeometry& g) {
    return {{"d", g.d}, {"nx", g.nx}, {"nt", g.nt}, {"T", g.T}, {"lambda", g.lambda}, {"extent", g.extent}};
}

GridGeometry geometry_from_json(const json& j) {
    GridGeometry g;
    g.d = j.at("d").get<int>();
    g.nx = j.at("nx").get<std::size_t>();
    g.nt = j.at("nt").get<std::size_t>();
    g.T = j.at("T").get<double>();
    g.lambda = j.at("lambda").get<double>();
    g.extent = j.value("extent", 1.0);
    return g;
}

}  // namespace

void GridGeometry::validate() const {
    spatial().validate();
    if (nt < 2) {
        throw ParameterError("need at least 2 time nodes");
    }
    if (!(T > 0.0)) {
        throw ParameterError("horizon T must be positive");
    }
    if (!(lambda > 0.0)) {
        throw ParameterError("lambda must be positive");
    }
}

SpaceTimeField::SpaceTimeField(const GridGeometry& geometry, double fill)
    : geometry_(geometry), values_(geometry.size(), fill) {
    geometry_.validate();
}

SpaceTimeField::SpaceTimeField(const GridGeometry& geometry, std::vector<double> values)
    : geometry_(geometry), values_(std::move(values)) {
    geometry_.validate();
    if (values_.size() != geometry_.size()) {
        throw ShapeError("field has " + std::to_string(values_.size()) + " values, geometry needs " +
                         std::to_string(geometry_.size()));
    }
}

std::span<double> SpaceTimeField::slice(std::size_t n) {
    const std::size_t N = geometry_.slice_size();
    return std::span<double>(values_).subspan(n * N, N);
}

std::span<const double> SpaceTimeField::slice(std::size_t n) const {
    const std::size_t N = geometry_.slice_size();
    return std::span<const double>(values_).subspan(n * N, N);
}

double terminal_cost_bound(const PotentialParams& params) {
    const double s = equilibrium(params).s_star;
    return phi_prime(s, true) / (2.0 * params.beta);
}

void BoundaryData::validate(const SpatialGrid& grid, const PotentialParams& params) const {
    const std::size_t n = grid.size();
    if (s0.size() != n) {
        throw ShapeError("s0 has " + std::to_string(s0.size()) + " values, grid needs " + std::to_string(n));
    }
    if (g.size() != n) {
        throw ShapeError("g has " + std::to_string(g.size()) + " values, grid needs " + std::to_string(n));
    }
    const double s_star = equilibrium(params).s_star;
    const double g_max = terminal_cost_bound(params);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(std::abs(s0[i]) <= s_star * (1.0 + 1e-12))) {
            std::ostringstream msg;
            msg << "s0[" << i << "] = " << s0[i] << " exceeds s_star = " << s_star;
            throw ParameterError(msg.str());
        }
        if (!(std::abs(g[i]) <= g_max * (1.0 + 1e-12))) {
            std::ostringstream msg;
            msg << "g[" << i << "] = " << g[i] << " exceeds Phi'(s_star)/(2 beta) = " << g_max;
            throw ParameterError(msg.str());
        }
    }
}

std::vector<double> time_derivative(const SpaceTimeField& field) {
    const GridGeometry& g = field.geometry();
    const std::size_t N = g.slice_size();
    const double inv_dt = 1.0 / g.dt();
    std::vector<double> out(g.size());
    for (std::size_t n = 0; n + 1 < g.nt; ++n) {
        const auto a = field.slice(n);
        const auto b = field.slice(n + 1);
        for (std::size_t i = 0; i < N; ++i) out[n * N + i] = (b[i] - a[i]) * inv_dt;
    }
    std::copy_n(out.begin() + static_cast<long>((g.nt - 2) * N), N,
                out.begin() + static_cast<long>((g.nt - 1) * N));
    return out;
}

SpinField cutoff(const SpinField& field, double s_star) {
    SpinField out = field;
    for (double& v : out.values()) v = std::clamp(v, -s_star, s_star);
    return out;
}

SpinField rescale(const SpinField& field, double tau, std::span<const double> z, double r,
                  double T_window) {
    const GridGeometry& g = field.geometry();
    if (!(r > 0.0) || !(T_window > 0.0)) {
        throw ParameterError("rescale: r and the window horizon must be positive");
    }
    if (z.size() != static_cast<std::size_t>(g.d)) {
        throw ShapeError("rescale: centre has the wrong dimension");
    }
    const double t_end = tau + r * T_window;
    const double slack = 1e-12 * g.T;
    if (tau < -slack || t_end > g.T + slack) {
        std::ostringstream msg;
        msg << "rescale: time window [" << tau << ", " << t_end << "] leaves [0, " << g.T << "]";
        throw ParameterError(msg.str());
    }
    GridGeometry out_geom = g;
    out_geom.extent = g.extent / r;
    out_geom.T = T_window;
    out_geom.lambda = g.lambda / r;
    SpinField out(out_geom);

    const double dx = g.dx();
    const double dxo = out_geom.dx();
    const std::size_t nx = g.nx;
    for (std::size_t n = 0; n < out_geom.nt; ++n) {
        const double t = std::clamp(tau + r * out_geom.time(n), 0.0, g.T);
        const double u = t / g.dt();
        std::size_t k = std::min(static_cast<std::size_t>(std::floor(u)), g.nt - 2);
        const double wt = u - static_cast<double>(k);
        auto lerp_time = [&](std::size_t i) {
            return (1.0 - wt) * field.at(k, i) + wt * field.at(k + 1, i);
        };
        auto dst = out.slice(n);
        if (g.d == 1) {
            for (std::size_t i = 0; i < nx; ++i) {
                const AxisStencil a = periodic_stencil(z[0] + r * cell_centre(i, dxo), dx, nx);
                dst[i] = (1.0 - a.w1) * lerp_time(a.i0) + a.w1 * lerp_time(a.i1);
            }
        } else {
            for (std::size_t i = 0; i < nx; ++i) {
                const AxisStencil a = periodic_stencil(z[0] + r * cell_centre(i, dxo), dx, nx);
                for (std::size_t j = 0; j < nx; ++j) {
                    const AxisStencil b = periodic_stencil(z[1] + r * cell_centre(j, dxo), dx, nx);
                    dst[i * nx + j] = (1.0 - a.w1) * ((1.0 - b.w1) * lerp_time(a.i0 * nx + b.i0) +
                                                      b.w1 * lerp_time(a.i0 * nx + b.i1)) +
                                      a.w1 * ((1.0 - b.w1) * lerp_time(a.i1 * nx + b.i0) +
                                              b.w1 * lerp_time(a.i1 * nx + b.i1));
                }
            }
        }
    }
    return out;
}

DataKind data_kind_from_string(const std::string& name) {
    if (name == "constant") return DataKind::constant;
    if (name == "step") return DataKind::step;
    if (name == "disk") return DataKind::disk;
    if (name == "file") return DataKind::file;
    throw ParameterError("unknown data expression type '" + name + "'");
}

std::string to_string(DataKind kind) {
    switch (kind) {
        case DataKind::constant: return "constant";
        case DataKind::step: return "step";
        case DataKind::disk: return "disk";
        case DataKind::file: return "file";
    }
    return "unknown";
}

std::vector<double> DataExpr::sample(const SpatialGrid& grid) const {
    grid.validate();
    const std::size_t n = grid.size();
    const double dx = grid.dx();
    std::vector<double> out(n);
    auto blend = [this](double signed_distance) {
        // signed_distance < 0 on the `inside` side.
        if (width > 0.0) {
            const double w = 0.5 * (1.0 - std::tanh(signed_distance / width));
            return w * inside + (1.0 - w) * outside;
        }
        return signed_distance < 0.0 ? inside : (signed_distance > 0.0 ? outside : 0.5 * (inside + outside));
    };
    switch (kind) {
        case DataKind::constant:
            std::fill(out.begin(), out.end(), value);
            break;
        case DataKind::step: {
            if (axis < 0 || axis >= grid.d) {
                throw ParameterError("step axis outside [0, d)");
            }
            for (std::size_t idx = 0; idx < n; ++idx) {
                const std::size_t k = grid.d == 1 ? idx : (axis == 0 ? idx / grid.nx : idx % grid.nx);
                out[idx] = blend(cell_centre(k, dx) - position);
            }
            break;
        }
        case DataKind::disk: {
            if (center.size() != static_cast<std::size_t>(grid.d)) {
                throw ParameterError("disk centre must have d coordinates");
            }
            for (std::size_t idx = 0; idx < n; ++idx) {
                const std::size_t ks[2] = {grid.d == 1 ? idx : idx / grid.nx, idx % grid.nx};
                double r2 = 0.0;
                for (int a = 0; a < grid.d; ++a) {
                    // Minimal-image distance on the periodic box.
                    double h = cell_centre(ks[a], dx) - center[a];
                    h -= grid.extent * std::round(h / grid.extent);
                    r2 += h * h;
                }
                out[idx] = blend(std::sqrt(r2) - radius);
            }
            break;
        }
        case DataKind::file: {
            const SpaceTimeField f = load_field(path);
            if (!(f.geometry().spatial() == grid)) {
                throw ShapeError("data file " + path + " does not match the spatial grid");
            }
            const auto s = f.slice(0);
            out.assign(s.begin(), s.end());
            break;
        }
    }
    for (double& v : out) v *= unit;
    return out;
}

void save_field_binary(const std::filesystem::path& path, const SpaceTimeField& field,
                       const std::string& kind) {
    json header = geometry_to_json(field.geometry());
    header["format"] = "isingmfg-field";
    header["version"] = 1;
    header["kind"] = kind;
    header["dtype"] = "float64";
    header["endianness"] = "little";
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot open " + path.string() + " for writing");
    }
    out << header.dump() << '\n';
    static_assert(std::endian::native == std::endian::little, "big-endian hosts are not supported");
    out.write(reinterpret_cast<const char*>(field.values().data()),
              static_cast<std::streamsize>(field.values().size() * sizeof(double)));
    if (!out) {
        throw std::runtime_error("write failed for " + path.string());
    }
}

SpaceTimeField load_field_binary(const std::filesystem::path& path, std::string* kind) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open field file " + path.string());
    }
    std::string line;
    std::getline(in, line);
    json header;
    try {
        header = json::parse(line);
    } catch (const json::exception& e) {
        throw ShapeError("field file " + path.string() + " has no JSON header: " + e.what());
    }
    if (header.value("format", "") != "isingmfg-field" || header.value("dtype", "") != "float64" ||
        header.value("endianness", "") != "little") {
        throw ShapeError("field file " + path.string() + " has an unsupported header");
    }
    const GridGeometry g = geometry_from_json(header);
    std::vector<double> values(g.size());
    in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(double)));
    if (in.gcount() != static_cast<std::streamsize>(values.size() * sizeof(double))) {
        throw ShapeError("field file " + path.string() + " is truncated");
    }
    if (kind != nullptr) *kind = header.value("kind", "");
    return SpaceTimeField(g, std::move(values));
}

void save_field_csv(const std::filesystem::path& path, const SpaceTimeField& field) {
    const GridGeometry& g = field.geometry();
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot open " + path.string() + " for writing");
    }
    out << "# isingmfg-field-csv v1 " << geometry_to_json(g).dump() << '\n';
    out << (g.d == 1 ? "n,tau,x0,value\n" : "n,tau,x0,x1,value\n");
    out.precision(17);
    const double dx = g.dx();
    for (std::size_t n = 0; n < g.nt; ++n) {
        const auto s = field.slice(n);
        for (std::size_t i = 0; i < s.size(); ++i) {
            out << n << ',' << g.time(n) << ',';
            if (g.d == 1) {
                out << cell_centre(i, dx) << ',';
            } else {
                out << cell_centre(i / g.nx, dx) << ',' << cell_centre(i % g.nx, dx) << ',';
            }
            out << s[i] << '\n';
        }
    }
}

SpaceTimeField load_field_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open field file " + path.string());
    }
    std::string line;
    std::getline(in, line);
    const std::string tag = "# isingmfg-field-csv v1 ";
    if (line.rfind(tag, 0) != 0) {
        throw ShapeError("CSV field file " + path.string() + " lacks the version header");
    }
    const GridGeometry g = geometry_from_json(json::parse(line.substr(tag.size())));
    std::getline(in, line);
    std::vector<double> values;
    values.reserve(g.size());
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto pos = line.find_last_of(',');
        values.push_back(std::stod(line.substr(pos + 1)));
    }
    return SpaceTimeField(g, std::move(values));
}

SpaceTimeField load_field(const std::filesystem::path& path) {
    if (path.extension() == ".csv") {
        return load_field_csv(path);
    }
    return load_field_binary(path);
}

}  // namespace isingmfg
