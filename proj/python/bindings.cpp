#include "ottolab/calculus.hpp"
#include "ottolab/connection.hpp"
#include "ottolab/error.hpp"
#include "ottolab/scenarios.hpp"
#include "ottolab/transport.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace ottolab;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

// 1D arrays live on Grid(1, n), square 2D arrays on Grid(2, n).
GridFunction to_function(const Array& a)
{
    if (a.ndim() == 1) return GridFunction(Grid(1, static_cast<int>(a.shape(0))), std::vector<double>(a.data(), a.data() + a.size()));
    if (a.ndim() == 2 && a.shape(0) == a.shape(1))
        return GridFunction(Grid(2, static_cast<int>(a.shape(0))), std::vector<double>(a.data(), a.data() + a.size()));
    throw Error(ErrorKind::invalid_argument, "expected a 1D array or a square 2D array");
}

GridDensity to_density(const Array& a) { return normalize(GridDensity(to_function(a))); }

Array to_array(const GridFunction& f)
{
    const Grid& g = f.grid;
    std::vector<py::ssize_t> shape = g.dim == 1 ? std::vector<py::ssize_t>{g.n} : std::vector<py::ssize_t>{g.n, g.n};
    Array out(shape);
    std::copy(f.values.begin(), f.values.end(), out.mutable_data());
    return out;
}

// vector fields are (dim, *grid_shape)
VectorGridField to_field(const Array& a)
{
    if (a.ndim() < 2) throw Error(ErrorKind::invalid_argument, "vector fields have shape (dim, *grid)");
    const int dim = static_cast<int>(a.shape(0));
    if (dim != a.ndim() - 1) throw Error(ErrorKind::invalid_argument, "leading axis must equal the grid dimension");
    Grid g(dim, static_cast<int>(a.shape(1)));
    VectorGridField u(g);
    for (int c = 0; c < dim; ++c) std::copy(a.data() + c * g.size(), a.data() + (c + 1) * g.size(), u.comp[c].begin());
    return u;
}

Array from_field(const VectorGridField& u)
{
    const Grid& g = u.grid;
    std::vector<py::ssize_t> shape{g.dim, g.n};
    if (g.dim == 2) shape.push_back(g.n);
    Array out(shape);
    for (int c = 0; c < g.dim; ++c) std::copy(u.comp[c].begin(), u.comp[c].end(), out.mutable_data() + c * g.size());
    return out;
}

ParticleCloud to_cloud(const Array& x, const Array& w)
{
    if (x.ndim() != 1 || w.ndim() != 1 || x.size() != w.size())
        throw Error(ErrorKind::invalid_argument, "atoms need matching 1D position and weight arrays");
    std::vector<Coords> p;
    for (py::ssize_t i = 0; i < x.size(); ++i) p.push_back({x.data()[i], 0.0});
    return ParticleCloud(1, std::move(p), std::vector<double>(w.data(), w.data() + w.size()));
}

py::tuple support_arrays(const Measure& m)
{
    std::vector<Coords> pts;
    std::vector<double> w;
    support(m, pts, w);
    const int dim = measure_dim(m);
    Array points(std::vector<py::ssize_t>{static_cast<py::ssize_t>(pts.size()), dim});
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (int a = 0; a < dim; ++a) points.mutable_data()[i * dim + a] = pts[i][a];
    return py::make_tuple(points, Array(static_cast<py::ssize_t>(w.size()), w.data()));
}

TransportPlan plan_for(const GridDensity& mu, const GridDensity& nu)
{
    return mu.grid.dim == 1 ? w2_exact_1d(mu, nu) : w2_lp_oracle(mu, nu);
}

} // namespace

PYBIND11_MODULE(_core, m)
{
    m.doc() = "Otto calculus on the flat torus";
    m.attr("__version__") = "0.1.0";

    static py::exception<Error> error(m, "Error", PyExc_RuntimeError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            PyErr_SetObject(error.ptr(), py::make_tuple(std::string(to_string(e.kind())), e.message()).ptr());
        }
    });

    m.def("scenario_names", &scenario_names);
    m.def("check_names", &check_names, py::arg("scenario"));
    m.def(
        "_run_scenario",
        [](const std::string& config_text, const std::string& out_dir) {
            auto r = run_scenario(parse_config(config_text), out_dir);
            return io::dump_json(r.manifest);
        },
        py::arg("config_text"), py::arg("out_dir"));
    m.def(
        "_compare_runs",
        [](const std::string& a, const std::string& b, double rel_tol) { return io::dump_json(compare_runs(a, b, rel_tol).to_json()); },
        py::arg("a"), py::arg("b"), py::arg("rel_tol") = 0.0);

    m.def(
        "w2_distance", [](const Array& mu, const Array& nu) { return w2_distance(to_density(mu), to_density(nu)); },
        py::arg("mu"), py::arg("nu"), "W2 between two grid densities (normalized first).");
    m.def(
        "w2sq_atoms_1d",
        [](const Array& x, const Array& a, const Array& y, const Array& b) { return w2_exact_1d(to_cloud(x, a), to_cloud(y, b)).cost; },
        py::arg("x"), py::arg("a"), py::arg("y"), py::arg("b"), "Squared W2 between weighted atoms on the circle.");
    m.def(
        "w2sq_lp",
        [](const Array& x, const Array& a, const Array& y, const Array& b) { return w2_lp_oracle(to_cloud(x, a), to_cloud(y, b)).cost; },
        py::arg("x"), py::arg("a"), py::arg("y"), py::arg("b"));
    m.def(
        "sinkhorn_cost", [](const Array& mu, const Array& nu, double eps) { return sinkhorn(to_density(mu), to_density(nu), eps).cost; },
        py::arg("mu"), py::arg("nu"), py::arg("epsilon"));
    m.def(
        "geodesic_interpolate",
        [](const Array& mu, const Array& nu, double t) { return support_arrays(geodesic_interpolate(plan_for(to_density(mu), to_density(nu)), t)); },
        py::arg("mu"), py::arg("nu"), py::arg("t"), "Support points and weights of the displacement interpolant.");
    m.def(
        "pushforward_density_flow",
        [](const Array& mu, const Array& psi, double t) {
            return to_array(pushforward_density_flow(to_density(mu), PotentialField(to_function(psi)), t).as_function());
        },
        py::arg("mu"), py::arg("psi"), py::arg("t"));
    m.def(
        "divergence_mu", [](const Array& u, const Array& mu) { return to_array(divergence_mu(to_field(u), to_density(mu))); },
        py::arg("u"), py::arg("mu"));
    m.def(
        "project_tangent",
        [](const Array& u, const Array& mu) { return from_field(project_tangent(to_field(u), to_density(mu)).vectors); },
        py::arg("u"), py::arg("mu"));
    m.def(
        "bracket_constant_fields",
        [](const Array& p1, const Array& p2, const Array& mu) {
            return to_array(bracket_constant_fields(PotentialField(to_function(p1)), PotentialField(to_function(p2)), to_density(mu)).phi_tilde);
        },
        py::arg("psi1"), py::arg("psi2"), py::arg("mu"), "Potential of the projected bracket of two constant fields.");
    m.def(
        "w2sq_directional_derivative",
        [](const Array& sigma, const Array& mu, const Array& psi) {
            return w2sq_directional_derivative(to_density(sigma), to_density(mu), PotentialField(to_function(psi)));
        },
        py::arg("sigma"), py::arg("mu"), py::arg("psi"));
}
