#include "ottolab/io.hpp"

#include "ottolab/error.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace ottolab::io {

std::string format_double(double v)
{
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

void write_atomic(const fs::path& path, std::string_view content)
{
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        require(static_cast<bool>(out), ErrorKind::invalid_argument, "cannot write " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        require(static_cast<bool>(out), ErrorKind::invalid_argument, "write failed for " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp);
        raise(ErrorKind::invalid_argument, "cannot rename onto " + path.string() + ": " + ec.message());
    }
}

std::string read_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), ErrorKind::invalid_argument, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

void write_json(const fs::path& path, const json& j) { write_atomic(path, dump_json(j)); }

json read_json(const fs::path& path)
{
    try {
        return json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        raise(ErrorKind::invalid_argument, path.string() + ": " + e.what());
    }
}

namespace {

void grid_values(std::string& out, const Grid& g, const std::vector<double>& v)
{
    const std::size_t rows = g.dim == 1 ? g.size() : static_cast<std::size_t>(g.n);
    const std::size_t cols = g.dim == 1 ? 1 : static_cast<std::size_t>(g.n);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            if (c) out += ',';
            out += format_double(v[r * cols + c]);
        }
        out += '\n';
    }
}

std::vector<double> parse_row(const std::string& line)
{
    std::vector<double> out;
    const char* p = line.data();
    const char* end = p + line.size();
    while (p < end) {
        double v = 0.0;
        auto r = std::from_chars(p, end, v);
        require(r.ec == std::errc(), ErrorKind::invalid_argument, "bad number in CSV row: " + line);
        out.push_back(v);
        p = r.ptr;
        if (p < end) {
            require(*p == ',', ErrorKind::invalid_argument, "bad separator in CSV row: " + line);
            ++p;
        }
    }
    return out;
}

} // namespace

std::string measure_csv(const Measure& mu)
{
    std::string out;
    if (const auto* d = std::get_if<GridDensity>(&mu)) {
        out = "# otto-lab density " + std::to_string(d->grid.dim) + " " + std::to_string(d->grid.n) + "\n";
        grid_values(out, d->grid, d->values);
        return out;
    }
    const auto& c = std::get<ParticleCloud>(mu);
    out = "# otto-lab cloud " + std::to_string(c.dim) + " " + std::to_string(c.size()) + "\n";
    for (std::size_t i = 0; i < c.size(); ++i) {
        out += format_double(c.points[i][0]);
        if (c.dim == 2) out += "," + format_double(c.points[i][1]);
        out += "," + format_double(c.weights[i]) + "\n";
    }
    return out;
}

std::string function_csv(const GridFunction& f, std::string_view tag)
{
    std::string out = "# otto-lab " + std::string(tag) + " " + std::to_string(f.grid.dim) + " " +
                      std::to_string(f.grid.n) + "\n";
    grid_values(out, f.grid, f.values);
    return out;
}

Measure parse_measure_csv(const std::string& text)
{
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);
    std::istringstream head(line);
    std::string hash, tool, kind;
    int dim = 0;
    std::size_t count = 0;
    head >> hash >> tool >> kind >> dim >> count;
    require(hash == "#" && tool == "otto-lab" && (dim == 1 || dim == 2), ErrorKind::invalid_argument,
            "not an otto-lab measure file");
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line))
        if (!line.empty()) rows.push_back(parse_row(line));
    if (kind == "density") {
        Grid g(dim, static_cast<int>(count));
        std::vector<double> v;
        for (auto& r : rows) v.insert(v.end(), r.begin(), r.end());
        require(v.size() == g.size(), ErrorKind::invalid_argument, "density file has the wrong number of values");
        return GridDensity(g, std::move(v));
    }
    require(kind == "cloud" && rows.size() == count, ErrorKind::invalid_argument, "malformed cloud file");
    std::vector<Coords> pts;
    std::vector<double> w;
    for (auto& r : rows) {
        require(r.size() == static_cast<std::size_t>(dim) + 1, ErrorKind::invalid_argument, "malformed cloud row");
        pts.push_back({r[0], dim == 2 ? r[1] : 0.0});
        w.push_back(r.back());
    }
    return ParticleCloud(dim, std::move(pts), std::move(w));
}

std::string plan_csv(const TransportPlan& plan)
{
    std::string out = "i,j,mass\n";
    for (auto& e : plan.entries())
        out += std::to_string(e.i) + "," + std::to_string(e.j) + "," + format_double(e.mass) + "\n";
    return out;
}

json plan_json(const TransportPlan& plan)
{
    json j;
    j["cost"] = plan.cost;
    j["method"] = std::string(to_string(plan.method));
    j["epsilon"] = plan.epsilon;
    j["residuals"] = {{"marginal", plan.marginal_residual},
                      {"duality_gap", plan.duality_gap},
                      {"iterations", plan.iterations}};
    return j;
}

void export_plan(const fs::path& dir, const std::string& stem, const TransportPlan& plan)
{
    write_atomic(dir / (stem + ".csv"), plan_csv(plan));
    write_json(dir / (stem + ".json"), plan_json(plan));
}

namespace {

std::string node_name(const std::string& stem, std::size_t k)
{
    char buf[16];
    std::snprintf(buf, sizeof buf, "_%04zu.csv", k);
    return stem + buf;
}

} // namespace

json export_curve(const fs::path& dir, const std::string& stem, const MeasureCurve& c)
{
    json m;
    m["n"] = c.size() > 1 ? static_cast<long long>(std::llround(std::log2(double(c.size() - 1)))) : 0;
    m["times"] = c.times;
    m["C1_estimate"] = c.C1;
    m["C2"] = c.C2 ? json(*c.C2) : json(nullptr);
    m["residuals"] = c.residuals;
    json states = json::array();
    for (std::size_t k = 0; k < c.size(); ++k) {
        std::string name = node_name(stem, k);
        write_atomic(dir / name, measure_csv(c.states[k]));
        states.push_back(name);
    }
    m["states"] = states;
    write_json(dir / (stem + ".json"), m);
    return m;
}

std::vector<Measure> load_curve_states(const fs::path& manifest)
{
    json m = read_json(manifest);
    require(m.contains("states") && m["states"].is_array(), ErrorKind::invalid_argument,
            manifest.string() + " is not a curve manifest");
    std::vector<Measure> out;
    for (auto& s : m["states"]) out.push_back(parse_measure_csv(read_file(manifest.parent_path() / s.get<std::string>())));
    return out;
}

json export_transport(const fs::path& dir, const std::string& stem, const TransportedField& f)
{
    json m;
    m["scheme"] = f.scheme;
    m["subdivision"] = f.times;
    m["drifts"] = norm_drift(f);
    m["norms"] = f.norms;
    if (!f.pre_projection.empty()) m["pre_projection"] = f.pre_projection;
    json pots = json::array();
    for (std::size_t k = 0; k < f.fields.size(); ++k) {
        std::string name = node_name(stem, k);
        write_atomic(dir / name, function_csv(f.fields[k]));
        pots.push_back(name);
    }
    m["potentials"] = pots;
    write_json(dir / (stem + ".json"), m);
    return m;
}

std::string table_csv(const std::vector<std::string>& columns, const std::vector<std::vector<double>>& rows)
{
    std::string out;
    for (std::size_t c = 0; c < columns.size(); ++c) out += (c ? "," : "") + columns[c];
    out += '\n';
    for (auto& r : rows) {
        for (std::size_t c = 0; c < r.size(); ++c) out += (c ? "," : "") + format_double(r[c]);
        out += '\n';
    }
    return out;
}

} // namespace ottolab::io
