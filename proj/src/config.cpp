#include "ottolab/scenarios.hpp"

#include "ottolab/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>

namespace ottolab {

namespace {

struct ScenarioInfo {
    std::string name;
    std::vector<int> dims;
    std::vector<std::string> keys;      // accepted beyond scenario, dimension, seed, tolerances
    std::vector<std::string> measures;  // accepted entries of "measures"
    std::vector<std::string> checks;
};

const std::vector<ScenarioInfo>& table()
{
    static const std::vector<ScenarioInfo> t = {
        {"geodesic", {1, 2}, {"grid", "steps", "measures"}, {"source", "target"}, {"constant_speed"}},
        {"flow", {1, 2}, {"grid", "steps", "amplitude", "measures"}, {"source"},
         {"continuity_residual", "modulus_violations", "mass_drift"}},
        {"mckean-vlasov", {1}, {"particles", "n", "trials", "kappa", "measures"}, {"source"},
         {"modulus_violations", "lipschitz_violations", "self_convergence_min", "self_convergence_max"}},
        {"bracket", {1, 2}, {"grid", "trials", "epsilon", "measures"}, {"source"},
         {"antisymmetry", "pairing_identity", "cos_sin_bracket", "torsion", "metric_compatibility"}},
        {"covderiv", {1, 2}, {"grid", "kappa", "amplitude", "epsilon", "measures"}, {"source"},
         {"constant_reduction", "product_rule", "interaction_field"}},
        {"w2deriv", {1}, {"grid", "trials", "amplitude", "epsilon"}, {},
         {"directional_derivative", "self_derivative", "descent", "gradient_pairing"}},
        {"parallel", {1}, {"grid", "n", "kappa", "measures"}, {"source"},
         {"contractivity", "norm_drift", "cauchy_monotone", "scheme_agreement"}},
        {"invariants", {1, 2}, {"grid", "trials"}, {},
         {"integration_by_parts", "projection_idempotence", "projection_self_adjoint", "projection_fixes_gradients",
          "bracket_antisymmetry", "exact1d_vs_lp", "sinkhorn_vs_lp"}},
    };
    return t;
}

const ScenarioInfo* find_info(const std::string& name)
{
    for (auto& s : table())
        if (s.name == name) return &s;
    return nullptr;
}

bool contains(const std::vector<std::string>& v, const std::string& x) { return std::find(v.begin(), v.end(), x) != v.end(); }

std::string joined(const std::vector<std::string>& v)
{
    std::string out;
    for (auto& s : v) out += (out.empty() ? "" : ", ") + s;
    return out;
}

using json = io::json;

class Reader {
public:
    explicit Reader(const std::string& text) : text_(text) {}

    // Line of the key at the end of `path`, found by walking the keys in order.
    int line_of(const std::vector<std::string>& path) const
    {
        std::size_t pos = 0;
        for (auto& key : path) {
            std::string quoted = "\"" + key + "\"";
            std::size_t p = pos;
            for (;;) {
                p = text_.find(quoted, p);
                if (p == std::string::npos) return 0;
                std::size_t q = text_.find_first_not_of(" \t\r\n", p + quoted.size());
                if (q != std::string::npos && text_[q] == ':') break;
                p += quoted.size();
            }
            pos = p;
        }
        return line_at(pos);
    }

    int line_at(std::size_t byte) const
    {
        byte = std::min(byte, text_.size());
        return 1 + static_cast<int>(std::count(text_.begin(), text_.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
    }

    [[noreturn]] void fail(const std::vector<std::string>& path, const std::string& msg) const
    {
        std::string field;
        for (auto& p : path) field += (field.empty() ? "" : ".") + p;
        throw ConfigError(field, line_of(path), msg);
    }

    int integer(const json& v, const std::vector<std::string>& path, long long lo, long long hi) const
    {
        if (!v.is_number_integer()) fail(path, "expected an integer");
        long long x = v.is_number_unsigned() ? static_cast<long long>(std::min<std::uint64_t>(v.get<std::uint64_t>(), 1ull << 62))
                                             : v.get<long long>();
        if (x < lo || x > hi)
            fail(path, "value " + std::to_string(x) + " outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
        return static_cast<int>(x);
    }

    double number(const json& v, const std::vector<std::string>& path, double lo, double hi, bool open_lo = false) const
    {
        if (!v.is_number()) fail(path, "expected a number");
        double x = v.get<double>();
        bool ok = std::isfinite(x) && (open_lo ? x > lo : x >= lo) && x <= hi;
        if (!ok)
            fail(path, "value " + io::format_double(x) + " outside " + (open_lo ? "(" : "[") + io::format_double(lo) + ", " +
                           io::format_double(hi) + "]");
        return x;
    }

    Coords point(const json& v, const std::vector<std::string>& path, int dim) const
    {
        if (v.is_number()) {
            double x = number(v, path, 0.0, 1.0);
            return {x, x};
        }
        if (!v.is_array() || v.size() != static_cast<std::size_t>(dim))
            fail(path, "expected a number or an array of " + std::to_string(dim) + " numbers");
        Coords c{0.0, 0.0};
        for (int a = 0; a < dim; ++a) {
            auto p = path;
            p.back() += "[" + std::to_string(a) + "]";
            c[a] = number(v[a], p, 0.0, 1.0);
        }
        return c;
    }

    MeasureSpec measure(const json& v, const std::vector<std::string>& path, int dim) const
    {
        if (!v.is_object()) fail(path, "expected an object with a \"preset\" key");
        auto sub = [&](const char* k) {
            auto p = path;
            p.push_back(k);
            return p;
        };
        if (!v.contains("preset") || !v["preset"].is_string()) fail(sub("preset"), "expected a preset name string");
        MeasureSpec s;
        s.preset = v["preset"].get<std::string>();
        std::vector<std::string> allowed;
        if (s.preset == "uniform") allowed = {};
        else if (s.preset == "bump") allowed = {"center", "width"};
        else if (s.preset == "cosine-tilt") allowed = {"amplitude", "phase"};
        else if (s.preset == "two-bump") allowed = {"centers", "width"};
        else fail(sub("preset"), "unknown preset '" + s.preset + "' (valid: uniform, bump, cosine-tilt, two-bump)");
        for (auto& [k, val] : v.items()) {
            if (k == "preset") continue;
            if (!contains(allowed, k)) fail(sub(k.c_str()), "unknown key for preset '" + s.preset + "'");
            if (k == "center") s.center = point(val, sub("center"), dim);
            else if (k == "width") s.width = number(val, sub("width"), 0.0, 0.5, true);
            else if (k == "amplitude") s.amplitude = number(val, sub("amplitude"), -0.99, 0.99);
            else if (k == "phase") s.phase = number(val, sub("phase"), 0.0, 1.0);
            else if (k == "centers") {
                if (!val.is_array() || val.size() != 2) fail(sub("centers"), "expected an array of two centers");
                for (int i = 0; i < 2; ++i) {
                    auto p = sub("centers");
                    p.back() += "[" + std::to_string(i) + "]";
                    s.centers[i] = point(val[i], p, dim);
                }
            }
        }
        return s;
    }

private:
    const std::string& text_;
};

double bump_axis(double x, double c, double w)
{
    double s = 0.0;
    for (int m = -2; m <= 2; ++m) {
        double d = x - c + m;
        s += std::exp(-0.5 * d * d / (w * w));
    }
    return s;
}

double bump_value(const Coords& x, const Coords& c, double w, int dim)
{
    double v = bump_axis(x[0], c[0], w);
    if (dim == 2) v *= bump_axis(x[1], c[1], w);
    return v;
}

} // namespace

ConfigError::ConfigError(std::string field, int line, const std::string& message)
    : Error(ErrorKind::invalid_argument,
            "config" + (line > 0 ? " line " + std::to_string(line) : std::string()) +
                (field.empty() ? std::string() : " field '" + field + "'") + ": " + message),
      field_(std::move(field)), line_(line)
{
}

const std::vector<std::string>& scenario_names()
{
    static const std::vector<std::string> names = [] {
        std::vector<std::string> n;
        for (auto& s : table()) n.push_back(s.name);
        return n;
    }();
    return names;
}

const std::vector<std::string>& check_names(const std::string& scenario)
{
    const ScenarioInfo* info = find_info(scenario);
    require(info != nullptr, ErrorKind::invalid_argument, "unknown scenario '" + scenario + "'");
    return info->checks;
}

ScenarioConfig parse_config(const std::string& text)
{
    Reader r(text);
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError("", r.line_at(e.byte > 0 ? e.byte - 1 : 0), std::string("invalid JSON: ") + e.what());
    }
    if (!root.is_object()) throw ConfigError("", 1, "top level must be an object");
    if (!root.contains("scenario")) throw ConfigError("scenario", 0, "missing required key (valid scenarios: " + joined(scenario_names()) + ")");
    if (!root["scenario"].is_string()) r.fail({"scenario"}, "expected a string");

    ScenarioConfig cfg;
    cfg.scenario = root["scenario"].get<std::string>();
    const ScenarioInfo* info = find_info(cfg.scenario);
    if (!info) r.fail({"scenario"}, "unknown scenario '" + cfg.scenario + "' (valid scenarios: " + joined(scenario_names()) + ")");

    static const std::set<std::string> known = {"scenario", "dimension", "seed",  "tolerances", "grid",    "particles", "steps",
                                                "n",        "trials",    "kappa", "amplitude",  "epsilon", "measures"};
    for (auto& [k, v] : root.items()) {
        if (!known.count(k)) r.fail({k}, "unknown key");
        bool common = k == "scenario" || k == "dimension" || k == "seed" || k == "tolerances";
        if (!common && !contains(info->keys, k)) r.fail({k}, "not used by scenario '" + cfg.scenario + "'");
    }

    if (root.contains("dimension")) {
        cfg.dimension = r.integer(root["dimension"], {"dimension"}, 1, 2);
        if (std::find(info->dims.begin(), info->dims.end(), cfg.dimension) == info->dims.end())
            r.fail({"dimension"}, "scenario '" + cfg.scenario + "' supports dimension 1 only");
    }
    if (root.contains("seed")) {
        const json& v = root["seed"];
        if (!v.is_number_unsigned()) {
            if (v.is_number_integer()) r.fail({"seed"}, "must be non-negative");
            r.fail({"seed"}, "expected a 64-bit unsigned integer");
        }
        cfg.seed = v.get<std::uint64_t>();
    }
    const int dim = cfg.dimension;
    if (root.contains("grid")) {
        cfg.grid = r.integer(root["grid"], {"grid"}, 8, dim == 1 ? 4096 : 256);
        if (*cfg.grid % 2) r.fail({"grid"}, "must be even");
        // 2D distances between clouds use the exact LP, which takes at most 512 support points
        if (dim == 2 && (cfg.scenario == "flow" || cfg.scenario == "geodesic") && *cfg.grid > 16)
            r.fail({"grid"}, "2D " + cfg.scenario + " runs are limited to grid <= 16");
    }
    if (root.contains("particles")) cfg.particles = r.integer(root["particles"], {"particles"}, 2, 100000);
    if (root.contains("steps")) cfg.steps = r.integer(root["steps"], {"steps"}, 1, 4096);
    if (root.contains("n")) {
        int lo = cfg.scenario == "parallel" ? 4 : 1;
        cfg.n = r.integer(root["n"], {"n"}, lo, cfg.scenario == "parallel" ? 8 : 9);
    }
    if (root.contains("trials")) cfg.trials = r.integer(root["trials"], {"trials"}, 1, 10000);
    if (root.contains("kappa")) cfg.kappa = r.number(root["kappa"], {"kappa"}, -10.0, 10.0);
    if (root.contains("amplitude")) cfg.amplitude = r.number(root["amplitude"], {"amplitude"}, 0.0, 10.0, true);
    if (root.contains("epsilon")) cfg.epsilon = r.number(root["epsilon"], {"epsilon"}, 0.0, 0.1, true);

    if (root.contains("tolerances")) {
        const json& t = root["tolerances"];
        if (!t.is_object()) r.fail({"tolerances"}, "expected an object of check name -> threshold");
        for (auto& [k, v] : t.items()) {
            if (!contains(info->checks, k))
                r.fail({"tolerances", k}, "no such check in scenario '" + cfg.scenario + "' (checks: " + joined(info->checks) + ")");
            cfg.tolerances[k] = r.number(v, {"tolerances", k}, 0.0, 1e6);
        }
    }
    if (root.contains("measures")) {
        const json& m = root["measures"];
        if (!m.is_object()) r.fail({"measures"}, "expected an object");
        for (auto& [k, v] : m.items()) {
            if (!contains(info->measures, k)) r.fail({"measures", k}, "not used by scenario '" + cfg.scenario + "'");
            MeasureSpec s = r.measure(v, {"measures", k}, dim);
            (k == "source" ? cfg.source : cfg.target) = s;
        }
    }
    return cfg;
}

ScenarioConfig load_config(const std::filesystem::path& path)
{
    std::string text;
    try {
        text = io::read_file(path);
    } catch (const Error&) {
        throw ConfigError("", 0, "cannot read " + path.string());
    }
    return parse_config(text);
}

GridDensity build_measure(const MeasureSpec& spec, const Grid& g)
{
    const double floor = 2e-8;
    GridFunction f(g);
    if (spec.preset == "uniform") {
        f = GridFunction(g, 1.0);
    } else if (spec.preset == "bump") {
        f = sample(g, [&](const Coords& x) { return bump_value(x, spec.center, spec.width, g.dim) + floor; });
    } else if (spec.preset == "two-bump") {
        f = sample(g, [&](const Coords& x) {
            return 0.5 * (bump_value(x, spec.centers[0], spec.width, g.dim) + bump_value(x, spec.centers[1], spec.width, g.dim)) +
                   floor;
        });
    } else if (spec.preset == "cosine-tilt") {
        require(std::abs(spec.amplitude) < 1.0, ErrorKind::invalid_argument, "tilt amplitude must lie in (-1, 1)");
        f = sample(g, [&](const Coords& x) {
            return 1.0 + spec.amplitude * std::cos(2.0 * std::numbers::pi * (x[0] - spec.phase));
        });
    } else {
        raise(ErrorKind::invalid_argument, "unknown preset '" + spec.preset + "'");
    }
    return normalize(GridDensity(f));
}

io::json spec_json(const MeasureSpec& spec, int dim)
{
    auto pt = [dim](const Coords& c) { return dim == 1 ? json(c[0]) : json::array({c[0], c[1]}); };
    json j;
    j["preset"] = spec.preset;
    if (spec.preset == "bump") {
        j["center"] = pt(spec.center);
        j["width"] = spec.width;
    } else if (spec.preset == "two-bump") {
        j["centers"] = json::array({pt(spec.centers[0]), pt(spec.centers[1])});
        j["width"] = spec.width;
    } else if (spec.preset == "cosine-tilt") {
        j["amplitude"] = spec.amplitude;
        j["phase"] = spec.phase;
    }
    return j;
}

ParticleCloud quantile_cloud(const GridDensity& d, int count)
{
    require(d.grid.dim == 1, ErrorKind::invalid_argument, "quantile clouds are one dimensional");
    require(count >= 1, ErrorKind::invalid_argument, "need at least one particle");
    const std::size_t n = d.size();
    const double h = d.grid.spacing();
    std::vector<double> cdf(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) cdf[i + 1] = cdf[i] + d.values[i] * h;
    const double total = cdf[n];
    std::vector<Coords> pts(static_cast<std::size_t>(count));
    std::size_t cell = 0;
    for (int k = 0; k < count; ++k) {
        double u = (k + 0.5) / count * total;
        while (cell + 1 < n && cdf[cell + 1] < u) ++cell;
        double m = cdf[cell + 1] - cdf[cell];
        double s = m > 0.0 ? (u - cdf[cell]) / m : 0.5;
        // cell i covers [x_i - h/2, x_i + h/2]
        pts[static_cast<std::size_t>(k)] = {wrap_unit((static_cast<double>(cell) + s - 0.5) * h), 0.0};
    }
    return ParticleCloud::uniform_weights(1, std::move(pts));
}

bool RunResult::passed() const
{
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

int exit_code(ErrorKind kind)
{
    switch (kind) {
    case ErrorKind::numerical_failure:
    case ErrorKind::not_derivable:
    case ErrorKind::degenerate_curve:
    case ErrorKind::incompatible_rhs: return 3;
    default: return 2;
    }
}

namespace {

std::filesystem::path manifest_path(const std::filesystem::path& p)
{
    return std::filesystem::is_directory(p) ? p / "manifest.json" : p;
}

void diff_json(const json& a, const json& b, const std::string& path, double rel_tol, std::vector<FieldDiff>& out)
{
    auto text = [](const json& v) { return v.is_null() ? std::string("(missing)") : v.dump(); };
    if (a.is_number() && b.is_number()) {
        double x = a.get<double>(), y = b.get<double>();
        if (x == y) return;
        double scale = std::max(std::abs(x), std::abs(y));
        double rel = std::abs(x - y) / scale;
        if (!(rel <= rel_tol)) out.push_back({path, text(a), text(b), rel});
        return;
    }
    if (a.is_object() && b.is_object()) {
        for (auto& [k, v] : a.items()) diff_json(v, b.contains(k) ? b[k] : json(), path.empty() ? k : path + "." + k, rel_tol, out);
        for (auto& [k, v] : b.items())
            if (!a.contains(k)) diff_json(json(), v, path.empty() ? k : path + "." + k, rel_tol, out);
        return;
    }
    if (a.is_array() && b.is_array() && a.size() == b.size()) {
        for (std::size_t i = 0; i < a.size(); ++i) diff_json(a[i], b[i], path + "[" + std::to_string(i) + "]", rel_tol, out);
        return;
    }
    if (a != b) out.push_back({path, text(a), text(b), std::numeric_limits<double>::quiet_NaN()});
}

double curve_sup_w2(const std::vector<Measure>& coarse, const std::vector<Measure>& fine)
{
    std::size_t ratio = (fine.size() - 1) / (coarse.size() - 1);
    double s = 0.0;
    for (std::size_t k = 0; k < coarse.size(); ++k) s = std::max(s, w2_distance(coarse[k], fine[k * ratio]));
    return s;
}

} // namespace

io::json DiffReport::to_json() const
{
    json j;
    j["scenario"] = scenario;
    json f = json::array();
    for (auto& d : fields) {
        json e;
        e["path"] = d.path;
        e["a"] = d.a;
        e["b"] = d.b;
        if (std::isfinite(d.relative)) e["relative"] = d.relative;
        f.push_back(e);
    }
    j["fields"] = f;
    j["identical_files"] = identical_files;
    j["differing_files"] = differing_files;
    if (sup_w2) j["sup_w2"] = *sup_w2;
    return j;
}

DiffReport compare_runs(const std::filesystem::path& a, const std::filesystem::path& b, double rel_tol)
{
    auto pa = manifest_path(a), pb = manifest_path(b);
    json ma = io::read_json(pa), mb = io::read_json(pb);
    require(ma.contains("scenario") && mb.contains("scenario"), ErrorKind::invalid_argument, "not a run manifest");
    require(ma["scenario"] == mb["scenario"], ErrorKind::invalid_argument,
            "scenario mismatch: " + ma["scenario"].dump() + " vs " + mb["scenario"].dump());
    DiffReport rep;
    rep.scenario = ma["scenario"].get<std::string>();
    json qa = ma, qb = mb;
    qa.erase("files");
    qb.erase("files");
    diff_json(qa, qb, "", rel_tol, rep.fields);

    std::set<std::string> fa, fb;
    for (auto& f : ma.value("files", json::array())) fa.insert(f.get<std::string>());
    for (auto& f : mb.value("files", json::array())) fb.insert(f.get<std::string>());
    for (auto& f : fa) {
        if (!fb.count(f)) {
            rep.differing_files.push_back(f);
            continue;
        }
        bool same = io::read_file(pa.parent_path() / f) == io::read_file(pb.parent_path() / f);
        (same ? rep.identical_files : rep.differing_files).push_back(f);
    }
    for (auto& f : fb)
        if (!fa.count(f)) rep.differing_files.push_back(f);

    if (ma.contains("curve") && mb.contains("curve")) {
        auto ca = io::load_curve_states(pa.parent_path() / ma["curve"].get<std::string>());
        auto cb = io::load_curve_states(pb.parent_path() / mb["curve"].get<std::string>());
        if (ca.size() > cb.size()) std::swap(ca, cb);
        if (ca.size() >= 2 && (cb.size() - 1) % (ca.size() - 1) == 0) rep.sup_w2 = curve_sup_w2(ca, cb);
    }
    return rep;
}

} // namespace ottolab
