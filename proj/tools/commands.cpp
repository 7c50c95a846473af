#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <omp.h>

#include "isingmfg/analysis.hpp"
#include "isingmfg/energy.hpp"
#include "isingmfg/errors.hpp"
#include "isingmfg/profiles.hpp"
#include "isingmfg/solver.hpp"

namespace isingmfg::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

class CsvWriter {
public:
    CsvWriter(const fs::path& path, const std::string& schema, const std::vector<std::string>& columns)
        : path_(path), out_(path) {
        if (!out_) throw std::runtime_error("cannot write " + path.string());
        out_ << "# isingmfg-" << schema << "-csv v1\n";
        for (std::size_t k = 0; k < columns.size(); ++k) out_ << (k ? "," : "") << columns[k];
        out_ << '\n' << std::setprecision(17);
    }
    ~CsvWriter() = default;

    template <class... T>
    void row(const T&... values) {
        bool first = true;
        ((out_ << (first ? "" : ",") << cell(values), first = false), ...);
        out_ << '\n';
        if (!out_) throw std::runtime_error("failed writing " + path_.string());
    }

private:
    static const char* cell(bool b) { return b ? "1" : "0"; }
    template <class T>
    static const T& cell(const T& v) { return v; }

    fs::path path_;
    std::ofstream out_;
};

void write_json(const fs::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

fs::path prepare_output(const RunConfig& config) {
    fs::create_directories(config.outputs.directory);
    return config.outputs.directory;
}

InteractionKernel build_kernel(const RunConfig& config) {
    try {
        return InteractionKernel::build(config.model.kernel, config.model.lambda, config.model.geometry().spatial());
    } catch (const ParameterError& e) {
        throw ConfigError(std::string("model.kernel: ") + e.what());
    }
}

PotentialParams grid_params(const RunConfig& config, const InteractionKernel& kernel) {
    try {
        return params_for(kernel, config.model.beta, config.model.allow_subcritical);
    } catch (const ParameterError& e) {
        throw ConfigError(std::string("model: ") + e.what());
    }
}

json breakdown_json(const EnergyBreakdown& e) {
    return json{{"double_well", e.double_well},
                {"kinetic_psi", e.kinetic_psi},
                {"phi_transport", e.phi_transport},
                {"nonlocal", e.nonlocal},
                {"terminal_g", e.terminal_g},
                {"phi_terminal", e.phi_terminal},
                {"phi_initial", e.phi_initial},
                {"phi_boundary", e.phi_boundary},
                {"running_G", e.running()},
                {"total_raw", e.total_raw},
                {"total_decomposed", e.total_decomposed},
                {"decomposition_gap", std::abs(e.total_raw - e.total_decomposed)}};
}

// Parts of the config that describe results; the thread count and the output
// location are execution details and stay out of result files.
json result_config(const RunConfig& config) {
    json j = to_json(config);
    j.erase("threads");
    j["outputs"].erase("directory");
    return j;
}

double odd_defect(const std::vector<double>& q) {
    double worst = 0.0;
    const std::size_t n = q.size();
    for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, std::abs(q[i] + q[n - 1 - i]));
    return worst;
}

void require_two_phases(const PotentialParams& params, const char* command) {
    if (!params.supercritical()) {
        throw ConfigError(std::string("model.beta: ") + command + " needs beta j_hat > 1 (two phases)");
    }
}

}  // namespace

void apply_threads(int threads) {
    if (threads > 0) omp_set_num_threads(threads);
}

int run_solve(const RunConfig& config, std::ostream& log) {
    apply_threads(config.threads);
    const GridGeometry geometry = config.model.geometry();
    const InteractionKernel kernel = build_kernel(config);
    const PotentialParams params = grid_params(config, kernel);
    const BoundaryData bdata = boundary_data(config, params);
    const fs::path out = prepare_output(config);

    SolverConfig sc = config.solver;
    sc.progress = &log;
    sc.checkpoint_dir = out / "checkpoints";
    SolveResult r = solve(bdata, geometry, kernel, params, sc);
    const SolveReport& rep = r.report;

    if (config.outputs.fields) {
        save_field_binary(out / "s.bin", r.s, "spin");
        save_field_binary(out / "p.bin", r.p, "costate");
    }
    if (config.outputs.field_csv) save_field_csv(out / "s.csv", r.s);

    json energy = breakdown_json(rep.energy);
    energy["cost_raw"] = rep.energy.total_raw;
    write_json(out / "energy.json", energy);

    json report{{"converged", rep.converged},
                {"iterations", rep.iterations},
                {"final_change", rep.final_residual},
                {"residual", rep.defect},
                {"theta", rep.theta},
                {"tol_l1", rep.tol_l1},
                {"stiff_mode", to_string(sc.stiff_mode)},
                {"anderson_depth", sc.anderson_depth},
                {"seed", config.seed}};
    write_json(out / "report.json", report);
    write_json(out / "config.json", result_config(config));

    if (config.outputs.slice_csv) {
        const std::vector<double> density = energy_density(r.s, kernel, params);
        const std::size_t N = geometry.slice_size();
        CsvWriter csv(out / "slices.csv", "slices", {"n", "t", "mean_s", "min_s", "max_s", "mean_p", "interval_energy"});
        for (std::size_t n = 0; n < geometry.nt; ++n) {
            auto s = r.s.slice(n);
            auto p = r.p.slice(n);
            double ms = 0.0, mp = 0.0, e = std::numeric_limits<double>::quiet_NaN();
            for (std::size_t i = 0; i < N; ++i) {
                ms += s[i];
                mp += p[i];
            }
            if (n + 1 < geometry.nt) {
                e = 0.0;
                for (std::size_t i = 0; i < N; ++i) e += density[n * N + i];
            }
            const auto [lo, hi] = std::minmax_element(s.begin(), s.end());
            csv.row(n, geometry.time(n), ms / N, *lo, *hi, mp / N, e);
        }
    }
    if (config.outputs.interface_csv) save_interface_csv(out / "interface.csv", extract_interface(r.s));

    log << "solve: " << (rep.converged ? "converged" : "NOT converged") << " after " << rep.iterations
        << " iterations, residual " << rep.defect << ", cost " << rep.energy.total_raw << ", " << std::fixed
        << std::setprecision(1) << rep.wall_time << " s\n"
        << std::defaultfloat << std::setprecision(6);
    return rep.converged ? exit_ok : exit_nonconvergence;
}

int run_energy(const RunConfig& config, const fs::path& field_path, std::ostream& log) {
    apply_threads(config.threads);
    const GridGeometry geometry = config.model.geometry();
    const InteractionKernel kernel = build_kernel(config);
    const PotentialParams params = grid_params(config, kernel);
    const BoundaryData bdata = boundary_data(config, params);

    if (!fs::exists(field_path)) throw ConfigError("field: " + field_path.string() + " does not exist");
    SpaceTimeField raw = load_field(field_path);
    if (!(raw.geometry() == geometry)) {
        throw ShapeError("field: grid of " + field_path.string() + " differs from the configured model grid");
    }
    const SpinField s(geometry, raw.values());
    for (double v : s.values()) {
        if (!(std::abs(v) < 1.0)) throw ConfigError("field: values must lie in (-1, 1)");
    }
    const fs::path out = prepare_output(config);

    const EnergyBreakdown e = cost_decomposed(s, bdata, kernel, params);
    json j = breakdown_json(e);
    if (params.supercritical()) {
        const double s_star = equilibrium(params).s_star;
        const SpinField c = cutoff(s, s_star);
        const EnergyBreakdown ec = cost_decomposed(c, bdata, kernel, params);
        j["cutoff"] = {{"s_star", s_star},
                       {"cost", e.total_raw},
                       {"cost_cutoff", ec.total_raw},
                       {"slack", e.total_raw - ec.total_raw}};
    }
    write_json(out / "energy.json", j);
    log << "energy: cost " << e.total_raw << " (decomposed " << e.total_decomposed << ")\n";
    return exit_ok;
}

int run_layers(const RunConfig& config, std::ostream& log) {
    apply_threads(config.threads);
    const PotentialParams params = model_params(config);
    require_two_phases(params, "layers");
    const double s_star = equilibrium(params).s_star;
    const double g_max = terminal_cost_bound(params);
    const LayerOptions opts = layer_options(config.layers);
    const fs::path out = prepare_output(config);
    bool all_ok = true;

    {
        CsvWriter csv(out / "layers_init.csv", "layers-init",
                      {"s0_over_s_star", "s0", "v_init_plus", "v_init_minus", "R_used", "beltrami_plus",
                       "converged_plus", "converged_minus"});
        for (double f : config.layers.s0_grid) {
            const double s0 = f * s_star;
            double vp = std::numeric_limits<double>::quiet_NaN(), vm = vp, R = vp, belt = vp;
            bool cp = false, cm = false;
            try {
                const LayerResult p = v_init(s0, s_star, params, opts);
                vp = p.value;
                R = p.R_used;
                cp = p.converged;
                belt = beltrami_defect(p.profile, params);
                const LayerResult m = v_init(s0, -s_star, params, opts);
                vm = m.value;
                cm = m.converged;
            } catch (const std::exception& e) {
                log << "layers: v_init(" << s0 << "): " << e.what() << '\n';
            }
            // From the opposite equilibrium the infimum is not attained, so the
            // optimiser cannot converge there; those rows do not fail the run.
            all_ok = all_ok && (cp || f == -1.0) && (cm || f == 1.0);
            csv.row(f, s0, vp, vm, R, belt, cp, cm);
        }
    }
    {
        CsvWriter csv(out / "layers_end.csv", "layers-end",
                      {"g_over_g_max", "g", "v_end_plus", "q0_plus", "v_end_minus", "symmetry_min", "symmetry_s0",
                       "symmetry_residual", "converged"});
        for (double f : config.layers.g_grid) {
            const double g = f * g_max;
            double vp = std::numeric_limits<double>::quiet_NaN(), q0 = vp, vm = vp, smin = vp, s0 = vp, res = vp;
            bool ok = false;
            try {
                const LayerResult p = v_end(s_star, g, params, opts);
                const LayerResult m = v_end(-s_star, g, params, opts);
                const InitMinimum sym = v_end_from_init(s_star, g, params, opts);
                vp = p.value;
                q0 = p.profile.q.front();
                vm = m.value;
                smin = sym.value;
                s0 = sym.s0;
                res = std::abs(vp - smin);
                ok = p.converged && m.converged && sym.converged;
            } catch (const std::exception& e) {
                log << "layers: v_end(" << g << "): " << e.what() << '\n';
            }
            all_ok = all_ok && ok;
            csv.row(f, g, vp, q0, vm, smin, s0, res, ok);
        }
    }
    log << "layers: wrote " << config.layers.s0_grid.size() << " initial and " << config.layers.g_grid.size()
        << " terminal rows\n";
    return all_ok ? exit_ok : exit_nonconvergence;
}

int run_wave(const RunConfig& config, std::ostream& log) {
    apply_threads(config.threads);
    const PotentialParams params = model_params(config);
    require_two_phases(params, "wave");
    const double s_star = equilibrium(params).s_star;
    const LayerOptions opts = layer_options(config.wave);
    const fs::path out = prepare_output(config);

    // The Fourier condition is checked on the configured grid when the kernel resolves there.
    std::optional<InteractionKernel> sampled;
    try {
        sampled = build_kernel(config);
    } catch (const std::exception& e) {
        log << "wave: Fourier condition not checked: " << e.what() << '\n';
    }

    bool all_ok = true;
    double last_ratio = std::numeric_limits<double>::quiet_NaN(), last_c = last_ratio;
    {
        CsvWriter csv(out / "wave.csv", "wave",
                      {"c", "L_tilde", "L_bar", "R_used", "odd_defect", "converged", "boundary_hit",
                       "hypothesis_checked", "hypothesis_holds"});
        for (double c : config.wave.c_grid) {
            double L = std::numeric_limits<double>::quiet_NaN(), R = L, odd = L;
            bool conv = false, hit = false, holds = false;
            try {
                const LayerResult r = traveling_wave(c, config.model.kernel, config.model.d, config.wave.axis, params,
                                                     opts, sampled ? &*sampled : nullptr);
                L = r.value;
                R = r.R_used;
                odd = odd_defect(r.profile.q);
                conv = r.converged;
                hit = r.boundary_hit;
                holds = r.hypothesis_holds;
            } catch (const std::exception& e) {
                log << "wave: c = " << c << ": " << e.what() << '\n';
            }
            all_ok = all_ok && conv;
            const double Lbar = L / std::sqrt(1.0 + c * c);
            if (!(c < last_c)) {
                last_c = c;
                last_ratio = Lbar;
            }
            csv.row(c, L, Lbar, R, odd, conv, hit, sampled.has_value(), holds);
        }
    }
    // Infinite speed limit: a switch from -s_star to s_star in microscopic time.
    const double half = v_init(0.0, s_star, params, layer_options(config.layers)).value;
    const double e_het = 2.0 * (half + phi(0.0) / (2.0 * params.beta));
    json summary{{"heteroclinic_cost", e_het},
                 {"largest_speed", last_c},
                 {"L_bar_at_largest_speed", last_ratio},
                 {"relative_gap", std::abs(last_ratio - e_het) / e_het},
                 {"note", "L_bar from traveling waves is the conjectured interfacial cost"}};
    write_json(out / "wave_summary.json", summary);
    log << "wave: " << config.wave.c_grid.size() << " speeds, heteroclinic cost " << e_het << '\n';
    return all_ok ? exit_ok : exit_nonconvergence;
}

int run_sweep(const RunConfig& config, std::ostream& log) {
    apply_threads(config.threads);
    const fs::path out = prepare_output(config);
    const double j_hat = config.model.kernel.mass;
    std::vector<double> betas;
    for (double bi : config.sweep.beta_inverse) betas.push_back(1.0 / bi);
    const std::vector<BifurcationPoint> points = bifurcation_sweep(betas, j_hat);
    {
        CsvWriter csv(out / "bifurcation.csv", "bifurcation",
                      {"beta_inverse", "beta_j_hat", "s", "p", "w_second", "stability", "stationary_residual"});
        for (std::size_t k = 0; k < points.size(); ++k) {
            const PotentialParams params(betas[k], j_hat, true);
            for (const EquilibriumBranch& b : points[k].equilibria) {
                csv.row(config.sweep.beta_inverse[k], points[k].beta_j_product, b.s, b.p, b.w_second,
                        std::string(to_string(b.stability)), stationary_residual(b.s, b.p, params));
            }
        }
    }
    {
        CsvWriter csv(out / "double_well.csv", "double-well", {"beta_inverse", "S", "W"});
        for (std::size_t k = 0; k < betas.size(); ++k) {
            const WellCurve c = double_well_curve(betas[k], j_hat, config.sweep.well_samples);
            for (std::size_t i = 0; i < c.S.size(); ++i) csv.row(config.sweep.beta_inverse[k], c.S[i], c.W[i]);
        }
    }
    log << "sweep: " << points.size() << " values of beta\n";
    return exit_ok;
}

}  // namespace isingmfg::cli
