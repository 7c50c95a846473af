#include "run_config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "isingmfg/errors.hpp"

namespace isingmfg::cli {

using nlohmann::json;

namespace {

// Reads an object strictly: each key is typed and consumed, leftovers are errors.
class Reader {
public:
    Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) fail(path_.empty() ? "(root)" : path_, "expected an object");
    }

    std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    [[noreturn]] static void fail(const std::string& where, const std::string& what) {
        throw ConfigError(where + ": " + what);
    }

    const json* find(const std::string& key) {
        auto it = j_.find(key);
        if (it == j_.end()) return nullptr;
        seen_.insert(key);
        return &*it;
    }

    void number(const std::string& key, double& out) {
        if (const json* v = find(key)) {
            if (!v->is_number()) fail(at(key), "expected a number");
            out = v->get<double>();
            if (!std::isfinite(out)) fail(at(key), "must be finite");
        }
    }

    template <class Int>
    void integer(const std::string& key, Int& out) {
        if (const json* v = find(key)) {
            if (!v->is_number_integer()) fail(at(key), "expected an integer");
            if constexpr (std::is_unsigned_v<Int>) {
                if (v->get<long long>() < 0) fail(at(key), "must be non-negative");
            }
            out = v->get<Int>();
        }
    }

    void boolean(const std::string& key, bool& out) {
        if (const json* v = find(key)) {
            if (!v->is_boolean()) fail(at(key), "expected true or false");
            out = v->get<bool>();
        }
    }

    void string(const std::string& key, std::string& out) {
        if (const json* v = find(key)) {
            if (!v->is_string()) fail(at(key), "expected a string");
            out = v->get<std::string>();
        }
    }

    void numbers(const std::string& key, std::vector<double>& out) {
        if (const json* v = find(key)) {
            if (!v->is_array()) fail(at(key), "expected an array of numbers");
            out.clear();
            for (std::size_t k = 0; k < v->size(); ++k) {
                if (!(*v)[k].is_number()) fail(at(key) + "[" + std::to_string(k) + "]", "expected a number");
                out.push_back((*v)[k].get<double>());
            }
        }
    }

    bool has(const std::string& key) const { return j_.contains(key); }

    Reader child(const std::string& key) {
        const json* v = find(key);
        static const json empty = json::object();
        return Reader(v != nullptr ? *v : empty, at(key));
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            if (!seen_.count(it.key())) fail(at(it.key()), "unknown key");
        }
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

template <class F>
void guarded(const std::string& where, F&& f) {
    try {
        f();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(where + ": " + e.what());
    }
}

void read_kernel(Reader r, KernelSpec& k) {
    std::string family = to_string(k.family);
    r.string("family", family);
    guarded(r.at("family"), [&] { k.family = kernel_family_from_string(family); });
    r.number("sigma", k.sigma);
    r.number("radius", k.radius);
    r.number("mass", k.mass);
    r.numbers("anisotropy", k.anisotropy);
    r.numbers("shift", k.shift);
    r.numbers("table", k.table);
    r.boolean("normalize", k.normalize);
    r.boolean("enforce_resolution", k.enforce_resolution);
    r.finish();
    if (!(k.sigma > 0.0)) Reader::fail(r.at("sigma"), "must be positive");
    if (!(k.radius > 0.0)) Reader::fail(r.at("radius"), "must be positive");
    if (!(k.mass > 0.0)) Reader::fail(r.at("mass"), "must be positive");
}

void read_data(Reader r, DataSpec& spec) {
    DataExpr& e = spec.expr;
    std::string kind = to_string(e.kind);
    r.string("kind", kind);
    guarded(r.at("kind"), [&] { e.kind = data_kind_from_string(kind); });
    r.number("value", e.value);
    r.integer("axis", e.axis);
    r.number("position", e.position);
    r.number("width", e.width);
    r.number("inside", e.inside);
    r.number("outside", e.outside);
    r.numbers("center", e.center);
    r.number("radius", e.radius);
    r.string("path", e.path);
    r.string("scale", spec.scale);
    r.finish();
    if (spec.scale != "one" && spec.scale != "s_star" && spec.scale != "g_max") {
        Reader::fail(r.at("scale"), "expected \"one\", \"s_star\" or \"g_max\"");
    }
    if (e.width < 0.0) Reader::fail(r.at("width"), "must be non-negative");
    if (e.kind == DataKind::file && e.path.empty()) Reader::fail(r.at("path"), "required for kind \"file\"");
}

json data_json(const DataSpec& spec) {
    const DataExpr& e = spec.expr;
    return json{{"kind", to_string(e.kind)}, {"value", e.value},     {"axis", e.axis},
                {"position", e.position},    {"width", e.width},     {"inside", e.inside},
                {"outside", e.outside},      {"center", e.center},   {"radius", e.radius},
                {"path", e.path},            {"scale", spec.scale}};
}

}  // namespace

GridGeometry ModelConfig::geometry() const {
    GridGeometry g;
    g.d = d;
    g.nx = nx;
    g.nt = nt;
    g.T = T;
    g.lambda = lambda;
    g.extent = extent;
    return g;
}

RunConfig::RunConfig() {
    s0.expr.kind = DataKind::step;
    s0.expr.inside = 1.0;
    s0.expr.outside = -1.0;
    s0.scale = "s_star";
    g.expr.kind = DataKind::step;
    g.expr.inside = 0.5;
    g.expr.outside = -0.5;
    g.scale = "g_max";
    layers.s0_grid = {-1.0, -0.75, -0.5, -0.25, 0.0, 0.25, 0.5, 0.75, 1.0};
    layers.g_grid = {-1.0, -0.5, -0.3, 0.0, 0.3, 0.5, 1.0};
    wave.c_grid = {0.0, 0.5, 1.0, 2.0, 4.0, 8.0};
    sweep.beta_inverse = {0.66, 0.9, 1.1};
}

RunConfig parse_config(const json& j) {
    RunConfig c;
    Reader root(j, "");

    Reader m = root.child("model");
    m.number("beta", c.model.beta);
    if (m.has("beta_inverse")) {
        if (m.has("beta")) Reader::fail(m.at("beta_inverse"), "give either beta or beta_inverse");
        double bi = 0.0;
        m.number("beta_inverse", bi);
        if (!(bi > 0.0)) Reader::fail(m.at("beta_inverse"), "must be positive");
        c.model.beta = 1.0 / bi;
    }
    read_kernel(m.child("kernel"), c.model.kernel);
    m.number("lambda", c.model.lambda);
    m.number("T", c.model.T);
    m.integer("d", c.model.d);
    m.integer("nx", c.model.nx);
    m.integer("nt", c.model.nt);
    m.number("extent", c.model.extent);
    m.boolean("allow_subcritical", c.model.allow_subcritical);
    m.finish();
    if (!(c.model.beta > 0.0)) Reader::fail(m.at("beta"), "must be positive");
    guarded("model", [&] { c.model.geometry().validate(); });

    Reader data = root.child("data");
    read_data(data.child("s0"), c.s0);
    read_data(data.child("g"), c.g);
    data.finish();

    Reader s = root.child("solver");
    s.number("theta", c.solver.theta);
    s.integer("max_iters", c.solver.max_iters);
    s.number("tol_l1", c.solver.tol_l1);
    std::string mode = to_string(c.solver.stiff_mode);
    s.string("stiff_mode", mode);
    guarded(s.at("stiff_mode"), [&] { c.solver.stiff_mode = stiff_mode_from_string(mode); });
    s.integer("newton_max", c.solver.newton_max);
    s.integer("anderson_depth", c.solver.anderson_depth);
    s.integer("progress_every", c.solver.progress_every);
    s.integer("checkpoint_every", c.solver.checkpoint_every);
    s.finish();
    guarded("solver", [&] {
        SolverConfig probe = c.solver;
        probe.checkpoint_dir = "checkpoints";
        probe.validate();
    });

    Reader o = root.child("outputs");
    std::string dir = c.outputs.directory.string();
    o.string("directory", dir);
    c.outputs.directory = dir;
    o.boolean("fields", c.outputs.fields);
    o.boolean("slice_csv", c.outputs.slice_csv);
    o.boolean("field_csv", c.outputs.field_csv);
    o.boolean("interface_csv", c.outputs.interface_csv);
    o.finish();
    if (dir.empty()) Reader::fail(o.at("directory"), "must not be empty");

    Reader l = root.child("layers");
    l.numbers("s0_grid", c.layers.s0_grid);
    l.numbers("g_grid", c.layers.g_grid);
    l.number("h", c.layers.h);
    l.number("R", c.layers.R);
    l.number("R_max", c.layers.R_max);
    l.finish();
    for (std::size_t k = 0; k < c.layers.s0_grid.size(); ++k) {
        if (std::abs(c.layers.s0_grid[k]) > 1.0) {
            Reader::fail(l.at("s0_grid") + "[" + std::to_string(k) + "]", "must lie in [-1, 1] (units of s_star)");
        }
    }
    for (std::size_t k = 0; k < c.layers.g_grid.size(); ++k) {
        if (std::abs(c.layers.g_grid[k]) > 1.0) {
            Reader::fail(l.at("g_grid") + "[" + std::to_string(k) + "]", "must lie in [-1, 1] (units of g_max)");
        }
    }
    if (!(c.layers.h > 0.0)) Reader::fail(l.at("h"), "must be positive");
    if (!(c.layers.R_max > 0.0)) Reader::fail(l.at("R_max"), "must be positive");

    Reader w = root.child("wave");
    w.numbers("c_grid", c.wave.c_grid);
    w.number("h", c.wave.h);
    w.integer("axis", c.wave.axis);
    w.number("R", c.wave.R);
    w.number("R_max", c.wave.R_max);
    w.finish();
    for (std::size_t k = 0; k < c.wave.c_grid.size(); ++k) {
        if (!(c.wave.c_grid[k] >= 0.0)) {
            Reader::fail(w.at("c_grid") + "[" + std::to_string(k) + "]", "speeds must be non-negative");
        }
    }
    if (!(c.wave.h > 0.0)) Reader::fail(w.at("h"), "must be positive");
    if (c.wave.axis < 0 || c.wave.axis >= c.model.d) Reader::fail(w.at("axis"), "must be a spatial axis");

    Reader sw = root.child("sweep");
    sw.numbers("beta_inverse", c.sweep.beta_inverse);
    sw.integer("well_samples", c.sweep.well_samples);
    sw.finish();
    for (std::size_t k = 0; k < c.sweep.beta_inverse.size(); ++k) {
        if (!(c.sweep.beta_inverse[k] > 0.0)) {
            Reader::fail(sw.at("beta_inverse") + "[" + std::to_string(k) + "]", "must be positive");
        }
    }
    if (c.sweep.well_samples < 2) Reader::fail(sw.at("well_samples"), "must be at least 2");

    root.integer("threads", c.threads);
    if (c.threads < 0) Reader::fail("threads", "must be non-negative");
    root.integer("seed", c.seed);
    root.finish();
    return c;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path.string() + ": cannot open");
    json j;
    try {
        j = json::parse(in, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    RunConfig c = parse_config(j);
    // Data files are relative to the config file.
    for (DataSpec* spec : {&c.s0, &c.g}) {
        if (spec->expr.kind == DataKind::file && std::filesystem::path(spec->expr.path).is_relative()) {
            spec->expr.path = (path.parent_path() / spec->expr.path).string();
        }
    }
    return c;
}

json to_json(const RunConfig& c) {
    const KernelSpec& k = c.model.kernel;
    json j;
    j["model"] = {{"beta", c.model.beta},
                  {"kernel",
                   {{"family", to_string(k.family)},
                    {"sigma", k.sigma},
                    {"radius", k.radius},
                    {"mass", k.mass},
                    {"anisotropy", k.anisotropy},
                    {"shift", k.shift},
                    {"table", k.table},
                    {"normalize", k.normalize},
                    {"enforce_resolution", k.enforce_resolution}}},
                  {"lambda", c.model.lambda},
                  {"T", c.model.T},
                  {"d", c.model.d},
                  {"nx", c.model.nx},
                  {"nt", c.model.nt},
                  {"extent", c.model.extent},
                  {"allow_subcritical", c.model.allow_subcritical}};
    j["data"] = {{"s0", data_json(c.s0)}, {"g", data_json(c.g)}};
    j["solver"] = {{"theta", c.solver.theta},
                   {"max_iters", c.solver.max_iters},
                   {"tol_l1", c.solver.tol_l1},
                   {"stiff_mode", to_string(c.solver.stiff_mode)},
                   {"newton_max", c.solver.newton_max},
                   {"anderson_depth", c.solver.anderson_depth},
                   {"progress_every", c.solver.progress_every},
                   {"checkpoint_every", c.solver.checkpoint_every}};
    j["outputs"] = {{"directory", c.outputs.directory.string()},
                    {"fields", c.outputs.fields},
                    {"slice_csv", c.outputs.slice_csv},
                    {"field_csv", c.outputs.field_csv},
                    {"interface_csv", c.outputs.interface_csv}};
    j["layers"] = {{"s0_grid", c.layers.s0_grid}, {"g_grid", c.layers.g_grid}, {"h", c.layers.h},
                   {"R", c.layers.R},             {"R_max", c.layers.R_max}};
    j["wave"] = {{"c_grid", c.wave.c_grid}, {"h", c.wave.h},         {"axis", c.wave.axis},
                 {"R", c.wave.R},           {"R_max", c.wave.R_max}};
    j["sweep"] = {{"beta_inverse", c.sweep.beta_inverse}, {"well_samples", c.sweep.well_samples}};
    j["threads"] = c.threads;
    j["seed"] = c.seed;
    return j;
}

PotentialParams model_params(const RunConfig& c) {
    try {
        return PotentialParams(c.model.beta, c.model.kernel.mass, c.model.allow_subcritical);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("model: ") + e.what());
    }
}

BoundaryData boundary_data(const RunConfig& c, const PotentialParams& params) {
    const SpatialGrid grid = c.model.geometry().spatial();
    auto unit = [&](const std::string& scale) {
        if (scale == "s_star") return equilibrium(params).s_star;
        if (scale == "g_max") return terminal_cost_bound(params);
        return 1.0;
    };
    BoundaryData b;
    guarded("data.s0", [&] {
        DataExpr e = c.s0.expr;
        e.unit *= unit(c.s0.scale);
        b.s0 = e.sample(grid);
    });
    guarded("data.g", [&] {
        DataExpr e = c.g.expr;
        e.unit *= unit(c.g.scale);
        b.g = e.sample(grid);
    });
    guarded("data", [&] { b.validate(grid, params); });
    return b;
}

LayerOptions layer_options(const LayersConfig& c) {
    LayerOptions o;
    o.h = c.h;
    o.R = c.R;
    o.R_max = c.R_max;
    return o;
}

LayerOptions layer_options(const WaveConfig& c) {
    LayerOptions o;
    o.h = c.h;
    o.R = c.R;
    o.R_max = c.R_max;
    return o;
}

}  // namespace isingmfg::cli
