#include "ottolab/transport.hpp"

#include "ottolab/error.hpp"
#include "ottolab/spectral.hpp"
#include "ottolab/torus.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace ottolab {

std::string_view to_string(PlanMethod m)
{
    switch (m) {
    case PlanMethod::exact1d: return "exact1d";
    case PlanMethod::lp: return "lp";
    case PlanMethod::sinkhorn: return "sinkhorn";
    }
    return "?";
}

std::vector<PlanEntry> TransportPlan::entries() const
{
    if (dense.empty()) return coupling;
    std::size_t m = g.size();
    std::vector<PlanEntry> out;
    for (std::size_t k = 0; k < dense.size(); ++k)
        if (dense[k] > 0.0) out.push_back({k / m, k % m, dense[k]});
    return out;
}

void support(const Measure& m, std::vector<Coords>& points, std::vector<double>& weights)
{
    points.clear();
    weights.clear();
    if (auto* d = std::get_if<GridDensity>(&m)) {
        double h = d->grid.cell_volume();
        double total = 0.0;
        for (std::size_t i = 0; i < d->size(); ++i) {
            require(d->values[i] >= 0.0 && std::isfinite(d->values[i]), ErrorKind::invalid_argument,
                    "density values must be finite and nonnegative");
            points.push_back(d->grid.point(i));
            weights.push_back(d->values[i] * h);
            total += d->values[i] * h;
        }
        require(total > 0.0, ErrorKind::invalid_argument, "empty measure");
        for (double& w : weights) w /= total;
    } else {
        const auto& c = std::get<ParticleCloud>(m);
        require(c.size() > 0, ErrorKind::invalid_argument, "empty measure");
        double total = std::accumulate(c.weights.begin(), c.weights.end(), 0.0);
        require(total > 0.0, ErrorKind::invalid_argument, "empty measure");
        for (std::size_t i = 0; i < c.size(); ++i) {
            Coords p = c.points[i];
            p[0] = wrap_unit(p[0]);
            p[1] = c.dim == 2 ? wrap_unit(p[1]) : 0.0;
            points.push_back(p);
            weights.push_back(c.weights[i] / total);
        }
    }
}

namespace {

// Quantile function on [0,1] made of affine pieces; piece k covers
// [u[k], u[k+1]] and belongs to support index idx[k].
struct Quantile {
    std::vector<double> u, a, s;
    std::vector<std::size_t> idx;

    std::size_t pieces() const { return a.size(); }
    double at(std::size_t k, double uu) const { return a[k] + s[k] * (uu - u[k]); }

    // piece containing w in [0,1)
    std::size_t locate(double w) const
    {
        auto it = std::upper_bound(u.begin(), u.end(), w);
        std::size_t k = it == u.begin() ? 0 : static_cast<std::size_t>(it - u.begin()) - 1;
        return std::min(k, pieces() - 1);
    }
};

Quantile make_quantile(const Measure& m)
{
    require(measure_dim(m) == 1, ErrorKind::invalid_argument, "exact1d needs measures on the circle");
    std::vector<Coords> pts;
    std::vector<double> w;
    support(m, pts, w);
    Quantile q;
    q.u.push_back(0.0);
    double cum = 0.0;
    if (auto* d = std::get_if<GridDensity>(&m)) {
        double h = d->grid.spacing();
        for (std::size_t i = 0; i < w.size(); ++i) {
            if (w[i] <= 0.0) continue;
            q.a.push_back(pts[i][0] - 0.5 * h);
            q.s.push_back(h / w[i]);
            q.idx.push_back(i);
            cum += w[i];
            q.u.push_back(cum);
        }
    } else {
        std::vector<std::size_t> order(w.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return pts[x][0] < pts[y][0]; });
        for (std::size_t i : order) {
            if (w[i] <= 0.0) continue;
            q.a.push_back(pts[i][0]);
            q.s.push_back(0.0);
            q.idx.push_back(i);
            cum += w[i];
            q.u.push_back(cum);
        }
    }
    q.u.back() = 1.0;
    return q;
}

struct Piece {
    double u0, u1;
    std::size_t kf, kg;
    double lift; // integer shift applied to the target quantile
};

// Walk the common refinement of F^-1(u) and G^-1(u + theta) over u in [0,1].
template <class Fn>
void walk(const Quantile& F, const Quantile& G, double theta, Fn&& fn)
{
    double nG = std::floor(theta);
    std::size_t j = G.locate(theta - nG);
    std::size_t i = 0;
    double u = 0.0;
    while (i < F.pieces()) {
        double endF = F.u[i + 1];
        double endG = G.u[j + 1] + nG - theta;
        double e = std::min(endF, endG);
        if (e > u) fn(Piece{u, e, i, j, nG});
        if (endF <= e) ++i;
        if (endG <= e) {
            if (++j == G.pieces()) {
                j = 0;
                nG += 1.0;
            }
        }
        u = std::max(u, e);
    }
}

double target_value(const Quantile& G, const Piece& p, double u, double theta)
{
    return G.at(p.kg, u + theta - p.lift) + p.lift;
}

double cut_cost(const Quantile& F, const Quantile& G, double theta)
{
    // integrand is quadratic on every piece, so 2-point Gauss is exact
    const double r = 0.5 / std::sqrt(3.0);
    double total = 0.0;
    walk(F, G, theta, [&](const Piece& p) {
        double mid = 0.5 * (p.u0 + p.u1), len = p.u1 - p.u0;
        double s = 0.0;
        for (double o : {-r, r}) {
            double uu = mid + o * len;
            double d = F.at(p.kf, uu) - target_value(G, p, uu, theta);
            s += d * d;
        }
        total += 0.5 * len * s;
    });
    return total;
}

double optimal_cut(const Quantile& F, const Quantile& G)
{
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = -1.0, b = 1.0;
    double c = b - phi * (b - a), d = a + phi * (b - a);
    double fc = cut_cost(F, G, c), fd = cut_cost(F, G, d);
    while (b - a > 1e-12) {
        if (fc <= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = cut_cost(F, G, c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = cut_cost(F, G, d);
        }
    }
    double best = fc <= fd ? c : d, cb = std::min(fc, fd);

    // Golden section only locates a smooth minimum to ~sqrt(machine eps); the cost
    // is piecewise quadratic in theta, so a parabola through nearby points lands on it.
    for (double h : {1e-3, 1e-4, 1e-5, 1e-6}) {
        double cm = cut_cost(F, G, best - h), cp = cut_cost(F, G, best + h);
        double den = cp - 2.0 * cb + cm;
        if (!(den > 0.0)) continue;
        double v = best - h * (cp - cm) / (2.0 * den);
        double cv = cut_cost(F, G, v);
        if (cv < cb) {
            best = v;
            cb = cv;
        }
    }
    // For atoms the minimum sits where breakpoints of both quantiles align.
    std::vector<double> kinks;
    for (double uf : F.u) {
        double w = uf + best;
        double lift = std::floor(w);
        std::size_t k = G.locate(w - lift);
        for (std::size_t q : {k, k + 1})
            if (q < G.u.size()) {
                double cand = G.u[q] + lift - uf;
                if (std::abs(cand - best) <= 1e-9) kinks.push_back(cand);
            }
    }
    std::sort(kinks.begin(), kinks.end());
    kinks.erase(std::unique(kinks.begin(), kinks.end()), kinks.end());
    for (double k : kinks) {
        double ck = cut_cost(F, G, k);
        if (ck <= cb) {
            best = k;
            cb = ck;
        }
    }
    return best;
}

std::vector<double> cost_matrix(int dim, const std::vector<Coords>& x, const std::vector<Coords>& y)
{
    std::vector<double> c(x.size() * y.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        for (std::size_t j = 0; j < y.size(); ++j) c[i * y.size() + j] = dist2_coords(dim, x[i], y[j]);
    return c;
}

double marginal_error(const std::vector<PlanEntry>& e, const std::vector<double>& a, const std::vector<double>& b)
{
    std::vector<double> ra(a.size(), 0.0), rb(b.size(), 0.0);
    for (auto& p : e) {
        ra[p.i] += p.mass;
        rb[p.j] += p.mass;
    }
    double err = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) err = std::max(err, std::abs(ra[i] - a[i]));
    for (std::size_t j = 0; j < b.size(); ++j) err = std::max(err, std::abs(rb[j] - b[j]));
    return err;
}

// Feasible duals by a double c-transform of f.
void c_transform(const std::vector<double>& C, std::size_t n, std::size_t m, const std::vector<double>& a,
                 const std::vector<double>& b, std::vector<double>& f, std::vector<double>& g)
{
    g.assign(m, std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < n; ++i) {
        if (a[i] <= 0.0 || std::isnan(f[i])) continue;
        for (std::size_t j = 0; j < m; ++j) g[j] = std::min(g[j], C[i * m + j] - f[i]);
    }
    for (std::size_t i = 0; i < n; ++i) {
        double v = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < m; ++j)
            if (b[j] > 0.0 || std::isfinite(g[j])) v = std::min(v, C[i * m + j] - g[j]);
        f[i] = v;
    }
    for (std::size_t j = 0; j < m; ++j) {
        double v = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) v = std::min(v, C[i * m + j] - f[i]);
        g[j] = v;
    }
}

void finish_exact_plan(TransportPlan& plan, const std::vector<double>& a, const std::vector<double>& b,
                       const std::vector<double>& C)
{
    double primal = 0.0;
    for (auto& e : plan.coupling) primal += e.mass * C[e.i * b.size() + e.j];
    double dual = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) dual += a[i] * plan.f[i];
    for (std::size_t j = 0; j < b.size(); ++j) dual += b[j] * plan.g[j];
    plan.duality_gap = primal - dual;
    plan.marginal_residual = marginal_error(plan.coupling, a, b);
}

} // namespace

TransportPlan w2_exact_1d(const Measure& mu, const Measure& nu)
{
    Quantile F = make_quantile(mu), G = make_quantile(nu);
    TransportPlan plan;
    plan.source = mu;
    plan.target = nu;
    plan.method = PlanMethod::exact1d;
    plan.theta = optimal_cut(F, G);
    plan.cost = cut_cost(F, G, plan.theta);

    walk(F, G, plan.theta, [&](const Piece& p) {
        std::size_t i = F.idx[p.kf], j = G.idx[p.kg];
        if (!plan.coupling.empty() && plan.coupling.back().i == i && plan.coupling.back().j == j)
            plan.coupling.back().mass += p.u1 - p.u0;
        else
            plan.coupling.push_back({i, j, p.u1 - p.u0});
    });
    if (plan.coupling.size() > 1 && plan.coupling.front().i == plan.coupling.back().i &&
        plan.coupling.front().j == plan.coupling.back().j) {
        plan.coupling.front().mass += plan.coupling.back().mass;
        plan.coupling.pop_back();
    }

    std::vector<Coords> x, y;
    std::vector<double> a, b;
    support(mu, x, a);
    support(nu, y, b);
    auto C = cost_matrix(1, x, y);
    const std::size_t m = y.size();
    const double nan = std::numeric_limits<double>::quiet_NaN();
    plan.f.assign(x.size(), nan);
    plan.g.assign(m, nan);
    // complementary slackness along the staircase of the monotone coupling
    for (auto& e : plan.coupling) {
        double c = C[e.i * m + e.j];
        bool fi = !std::isnan(plan.f[e.i]), gj = !std::isnan(plan.g[e.j]);
        if (fi && !gj) {
            plan.g[e.j] = c - plan.f[e.i];
        } else if (!fi && gj) {
            plan.f[e.i] = c - plan.g[e.j];
        } else if (!fi && !gj) {
            double v = std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < m; ++j)
                if (!std::isnan(plan.g[j])) v = std::min(v, C[e.i * m + j] - plan.g[j]);
            plan.f[e.i] = std::isfinite(v) ? v : 0.0;
            plan.g[e.j] = c - plan.f[e.i];
        }
    }
    c_transform(C, x.size(), m, a, b, plan.f, plan.g);
    finish_exact_plan(plan, a, b, C);
    return plan;
}

TransportPlan w2_lp_oracle(const Measure& mu, const Measure& nu)
{
    int dim = measure_dim(mu);
    require(dim == measure_dim(nu), ErrorKind::invalid_argument, "measures live on different tori");
    std::vector<Coords> x, y;
    std::vector<double> a, b;
    support(mu, x, a);
    support(nu, y, b);
    const std::size_t n = x.size(), m = y.size();
    require(n + m <= 512, ErrorKind::resource_limit,
            "LP oracle limited to 512 support points, got " + std::to_string(n + m));
    auto C = cost_matrix(dim, x, y);

    // perturbed supplies keep every basic flow positive
    const double delta = 1e-12;
    std::vector<double> ra(n), rb(m);
    for (std::size_t i = 0; i < n; ++i) ra[i] = a[i] + delta;
    for (std::size_t j = 0; j < m; ++j) rb[j] = b[j];
    rb[m - 1] += static_cast<double>(n) * delta;
    {
        double sa = std::accumulate(ra.begin(), ra.end(), 0.0), sb = std::accumulate(rb.begin(), rb.end(), 0.0);
        rb[m - 1] += sa - sb;
    }

    struct Cell {
        std::size_t i, j;
        double x;
    };
    std::vector<Cell> basis;
    {
        std::size_t i = 0, j = 0;
        std::vector<double> sa = ra, sb = rb;
        while (i < n && j < m) {
            double q = std::min(sa[i], sb[j]);
            basis.push_back({i, j, q});
            sa[i] -= q;
            sb[j] -= q;
            if (i == n - 1) ++j;
            else if (j == m - 1) ++i;
            else if (sa[i] < sb[j]) ++i;
            else ++j;
        }
    }
    // nodes: rows 0..n-1, columns n..n+m-1; adjacency stores basis cell ids
    const std::size_t nodes = n + m;
    std::vector<std::vector<std::size_t>> adj(nodes);
    for (std::size_t k = 0; k < basis.size(); ++k) {
        adj[basis[k].i].push_back(k);
        adj[n + basis[k].j].push_back(k);
    }
    auto other = [&](std::size_t node, std::size_t k) { return node < n ? n + basis[k].j : basis[k].i; };

    std::vector<double> u(n), v(m);
    auto solve_duals = [&] {
        std::vector<char> seen(nodes, 0);
        std::vector<std::size_t> stack{0};
        u[0] = 0.0;
        seen[0] = 1;
        while (!stack.empty()) {
            std::size_t node = stack.back();
            stack.pop_back();
            for (std::size_t k : adj[node]) {
                std::size_t o = other(node, k);
                if (seen[o]) continue;
                seen[o] = 1;
                double c = C[basis[k].i * m + basis[k].j];
                if (o >= n) v[o - n] = c - u[node];
                else u[o] = c - v[node - n];
                stack.push_back(o);
            }
        }
    };

    const std::size_t max_iter = 50 * (n * m + 10);
    std::size_t iter = 0;
    std::vector<std::size_t> parent_cell(nodes), parent_node(nodes);
    for (;; ++iter) {
        if (iter >= max_iter) throw NumericalFailure("LP oracle did not terminate", iter, 0.0);
        solve_duals();
        double best = -1e-15;
        std::size_t bi = n, bj = m;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j) {
                double r = C[i * m + j] - u[i] - v[j];
                if (r < best) {
                    best = r;
                    bi = i;
                    bj = j;
                }
            }
        if (bi == n) break;

        // tree path from column bj to row bi
        std::vector<char> seen(nodes, 0);
        std::vector<std::size_t> stack{n + bj};
        seen[n + bj] = 1;
        while (!stack.empty()) {
            std::size_t node = stack.back();
            stack.pop_back();
            if (node == bi) break;
            for (std::size_t k : adj[node]) {
                std::size_t o = other(node, k);
                if (seen[o]) continue;
                seen[o] = 1;
                parent_cell[o] = k;
                parent_node[o] = node;
                stack.push_back(o);
            }
        }
        // walk back from bi; cells alternate -, + starting next to the entering cell at bi
        std::vector<std::size_t> path;
        for (std::size_t node = bi; node != n + bj; node = parent_node[node]) path.push_back(parent_cell[node]);
        double step = std::numeric_limits<double>::infinity();
        std::size_t leave = 0;
        for (std::size_t q = 0; q < path.size(); q += 2) {
            if (basis[path[q]].x < step) {
                step = basis[path[q]].x;
                leave = q;
            }
        }
        for (std::size_t q = 0; q < path.size(); ++q) basis[path[q]].x += (q % 2 == 0 ? -step : step);
        std::size_t lk = path[leave];
        auto drop = [&](std::size_t node) {
            auto& l = adj[node];
            l.erase(std::find(l.begin(), l.end(), lk));
        };
        drop(basis[lk].i);
        drop(n + basis[lk].j);
        basis[lk] = {bi, bj, step};
        adj[bi].push_back(lk);
        adj[n + bj].push_back(lk);
    }

    // flows for the unperturbed marginals on the optimal basis (leaf elimination)
    {
        std::vector<double> sa = a, sb = b;
        std::vector<std::size_t> deg(nodes);
        for (std::size_t k = 0; k < nodes; ++k) deg[k] = adj[k].size();
        std::vector<char> done(basis.size(), 0);
        std::vector<std::size_t> leaves;
        for (std::size_t k = 0; k < nodes; ++k)
            if (deg[k] == 1) leaves.push_back(k);
        while (!leaves.empty()) {
            std::size_t node = leaves.back();
            leaves.pop_back();
            if (deg[node] != 1) continue;
            std::size_t k = *std::find_if(adj[node].begin(), adj[node].end(), [&](std::size_t c) { return !done[c]; });
            done[k] = 1;
            std::size_t o = other(node, k);
            double q = node < n ? sa[node] : sb[node - n];
            basis[k].x = q;
            if (o < n) sa[o] -= q;
            else sb[o - n] -= q;
            --deg[node];
            if (--deg[o] == 1) leaves.push_back(o);
        }
    }
    solve_duals();

    TransportPlan plan;
    plan.source = mu;
    plan.target = nu;
    plan.method = PlanMethod::lp;
    plan.iterations = iter;
    for (auto& c : basis)
        if (c.x > 0.0) plan.coupling.push_back({c.i, c.j, c.x});
    std::sort(plan.coupling.begin(), plan.coupling.end(),
              [](const PlanEntry& p, const PlanEntry& q) { return p.i != q.i ? p.i < q.i : p.j < q.j; });
    for (auto& e : plan.coupling) plan.cost += e.mass * C[e.i * m + e.j];
    plan.f = u;
    plan.g = v;
    finish_exact_plan(plan, a, b, C);
    return plan;
}

namespace {

TransportPlan sinkhorn_support(const Measure& mu, const Measure& nu, double epsilon, const SinkhornOptions& opt)
{
    require(std::isfinite(epsilon) && epsilon > 0.0, ErrorKind::invalid_argument, "epsilon must be positive");
    int dim = measure_dim(mu);
    require(dim == measure_dim(nu), ErrorKind::invalid_argument, "measures live on different tori");
    std::vector<Coords> x, y;
    std::vector<double> a, b;
    support(mu, x, a);
    support(nu, y, b);
    const std::size_t n = x.size(), m = y.size();
    require(n * m <= (std::size_t{1} << 22), ErrorKind::resource_limit, "Sinkhorn plan too large");
    auto C = cost_matrix(dim, x, y);
    std::vector<double> CT(n * m);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) CT[j * n + i] = C[i * m + j];
    const double neg_inf = -std::numeric_limits<double>::infinity();
    std::vector<double> la(n), lb(m);
    for (std::size_t i = 0; i < n; ++i) la[i] = a[i] > 0.0 ? std::log(a[i]) : neg_inf;
    for (std::size_t j = 0; j < m; ++j) lb[j] = b[j] > 0.0 ? std::log(b[j]) : neg_inf;

    std::vector<double> f(n, 0.0), g(m, 0.0), tmp(std::max(n, m));
    // -eps log sum_k exp(lw_k + (pot_k - c_k)/eps)
    auto softmin = [&](const double* c, const std::vector<double>& lw, const std::vector<double>& pot, double eps) {
        std::size_t len = lw.size();
        double mx = neg_inf;
        for (std::size_t k = 0; k < len; ++k) {
            tmp[k] = lw[k] + (pot[k] - c[k]) / eps;
            mx = std::max(mx, tmp[k]);
        }
        double s = 0.0;
        for (std::size_t k = 0; k < len; ++k) s += std::exp(tmp[k] - mx);
        return -eps * (mx + std::log(s));
    };

    double cmax = *std::max_element(C.begin(), C.end());
    std::vector<double> schedule;
    if (opt.eps_scaling)
        for (double e = std::max(cmax, epsilon); e > epsilon; e *= 0.5) schedule.push_back(e);
    schedule.push_back(epsilon);

    std::size_t iter = 0;
    double err = std::numeric_limits<double>::infinity();
    std::vector<double> colsum(m);
    for (std::size_t s = 0; s < schedule.size(); ++s) {
        double eps = schedule[s];
        bool last = s + 1 == schedule.size();
        double tol = last ? opt.tol : std::max(opt.tol, 1e-5);
        for (;;) {
            if (iter >= opt.max_iterations)
                throw NumericalFailure("Sinkhorn did not reach the marginal tolerance", iter, err);
            ++iter;
            for (std::size_t j = 0; j < m; ++j) g[j] = softmin(&CT[j * n], la, f, eps);
            for (std::size_t i = 0; i < n; ++i) f[i] = softmin(&C[i * m], lb, g, eps);
            std::fill(colsum.begin(), colsum.end(), 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                if (a[i] <= 0.0) continue;
                for (std::size_t j = 0; j < m; ++j)
                    if (b[j] > 0.0) colsum[j] += std::exp((f[i] + g[j] - C[i * m + j]) / eps + la[i] + lb[j]);
            }
            err = 0.0;
            for (std::size_t j = 0; j < m; ++j) err += std::abs(colsum[j] - b[j]);
            if (!std::isfinite(err)) throw NumericalFailure("Sinkhorn diverged", iter, err);
            if (err <= tol) break;
        }
    }

    TransportPlan plan;
    plan.source = mu;
    plan.target = nu;
    plan.method = PlanMethod::sinkhorn;
    plan.epsilon = epsilon;
    plan.iterations = iter;
    plan.dense.assign(n * m, 0.0);
    std::vector<double> rows(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (a[i] <= 0.0) continue;
        for (std::size_t j = 0; j < m; ++j) {
            if (b[j] <= 0.0) continue;
            double p = std::exp((f[i] + g[j] - C[i * m + j]) / epsilon + la[i] + lb[j]);
            plan.dense[i * m + j] = p;
            plan.cost += p * C[i * m + j];
            rows[i] += p;
        }
    }
    double row_err = 0.0;
    for (std::size_t i = 0; i < n; ++i) row_err += std::abs(rows[i] - a[i]);
    plan.marginal_residual = std::max(err, row_err);
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += a[i] * f[i];
    for (double& v : f) v -= mean;
    for (double& v : g) v += mean;
    double dual = 0.0;
    for (std::size_t i = 0; i < n; ++i) dual += a[i] * f[i];
    for (std::size_t j = 0; j < m; ++j) dual += b[j] * g[j];
    plan.duality_gap = plan.cost - dual;
    plan.f = std::move(f);
    plan.g = std::move(g);
    return plan;
}

} // namespace

TransportPlan sinkhorn(const GridDensity& mu, const GridDensity& nu, double epsilon, const SinkhornOptions& opt)
{
    return sinkhorn_support(mu, nu, epsilon, opt);
}

double w2_distance(const Measure& mu, const Measure& nu)
{
    int dim = measure_dim(mu);
    require(dim == measure_dim(nu), ErrorKind::invalid_argument, "measures live on different tori");
    if (dim == 1) {
        Quantile F = make_quantile(mu), G = make_quantile(nu);
        return std::sqrt(std::max(0.0, cut_cost(F, G, optimal_cut(F, G))));
    }
    auto count = [](const Measure& m) {
        if (auto* d = std::get_if<GridDensity>(&m)) return d->size();
        return std::get<ParticleCloud>(m).size();
    };
    if (count(mu) + count(nu) <= 512) return std::sqrt(std::max(0.0, w2_lp_oracle(mu, nu).cost));
    return std::sqrt(std::max(0.0, sinkhorn_support(mu, nu, 1e-3, {}).cost));
}

namespace {

// Per-source barycentric displacement sum_j pi_ij log(x_i, y_j) / sum_j pi_ij.
std::vector<Coords> barycentric_displacement(const TransportPlan& plan, int dim, const std::vector<Coords>& x,
                                             const std::vector<Coords>& y)
{
    std::vector<Coords> v(x.size(), Coords{0.0, 0.0});
    std::vector<double> w(x.size(), 0.0);
    for (auto& e : plan.entries()) {
        Coords l = log_coords(dim, x[e.i], y[e.j]);
        v[e.i][0] += e.mass * l[0];
        v[e.i][1] += e.mass * l[1];
        w[e.i] += e.mass;
    }
    for (std::size_t i = 0; i < x.size(); ++i)
        if (w[i] > 0.0) {
            v[i][0] /= w[i];
            v[i][1] /= w[i];
        }
    return v;
}

double gauss_sum(int n, double u0, double u1, const std::function<double(double)>& f)
{
    static const double x2[] = {-0.5773502691896257645, 0.5773502691896257645};
    static const double w2[] = {1.0, 1.0};
    static const double x3[] = {-0.7745966692414833770, 0.0, 0.7745966692414833770};
    static const double w3[] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
    static const double x4[] = {-0.8611363115940525752, -0.3399810435848562648, 0.3399810435848562648,
                                0.8611363115940525752};
    static const double w4[] = {0.3478548451374538574, 0.6521451548625461426, 0.6521451548625461426,
                                0.3478548451374538574};
    static const double x5[] = {-0.9061798459386639928, -0.5384693101056830910, 0.0, 0.5384693101056830910,
                                0.9061798459386639928};
    static const double w5[] = {0.2369268850561890875, 0.4786286704993664680, 0.5688888888888888889,
                                0.4786286704993664680, 0.2369268850561890875};
    const double* xs;
    const double* ws;
    switch (n) {
    case 2: xs = x2; ws = w2; break;
    case 3: xs = x3; ws = w3; break;
    case 4: xs = x4; ws = w4; break;
    case 5: xs = x5; ws = w5; break;
    default: raise(ErrorKind::invalid_argument, "gauss_points must be in 2..5");
    }
    double mid = 0.5 * (u0 + u1), half = 0.5 * (u1 - u0), s = 0.0;
    for (int k = 0; k < n; ++k) s += ws[k] * f(mid + half * xs[k]);
    return s * half;
}

} // namespace

MongePotential monge_potential(const TransportPlan& plan)
{
    const auto* src = std::get_if<GridDensity>(&plan.source);
    require(src != nullptr, ErrorKind::invalid_argument, "monge_potential needs a grid density source");
    require(!plan.f.empty() && (!plan.coupling.empty() || !plan.dense.empty()), ErrorKind::invalid_argument,
            "plan without usable duals");
    require_pdiv(*src);
    const Grid& grid = src->grid;
    const int dim = grid.dim;

    MongePotential out;
    out.displacement = VectorGridField(grid);
    if (plan.method == PlanMethod::exact1d) {
        // cell averages of T(x) - x; the histogram map has kinks inside cells
        Quantile F = make_quantile(plan.source), G = make_quantile(plan.target);
        walk(F, G, plan.theta, [&](const Piece& p) {
            double m = F.u[p.kf + 1] - F.u[p.kf];
            out.displacement.comp[0][F.idx[p.kf]] += gauss_sum(2, p.u0, p.u1, [&](double u) {
                return (target_value(G, p, u, plan.theta) - F.at(p.kf, u)) / m;
            });
        });
    } else {
        std::vector<Coords> x, y;
        std::vector<double> a, b;
        support(plan.source, x, a);
        support(plan.target, y, b);
        auto v = barycentric_displacement(plan, dim, x, y);
        for (std::size_t i = 0; i < grid.size(); ++i)
            for (int c = 0; c < dim; ++c) out.displacement.comp[c][i] = v[i][c];
    }
    out.phi = PotentialField(spectral::helmholtz_potential(out.displacement, &out.harmonic_residual));

    spectral::TrigInterpolant interp(out.phi);
    auto pushed = pushforward_by_map(*src, [&](const Coords& p) {
        Coords d = interp.gradient(p);
        return Coords{p[0] + d[0], dim == 2 ? p[1] + d[1] : 0.0};
    });
    const auto* tgt = std::get_if<GridDensity>(&plan.target);
    if (dim == 1) {
        out.pushforward_residual = w2_distance(pushed, plan.target);
    } else if (tgt && tgt->grid == grid) {
        double s = 0.0;
        for (std::size_t i = 0; i < grid.size(); ++i) s += std::abs(pushed.values[i] - tgt->values[i]);
        out.pushforward_residual = s * grid.cell_volume();
    } else {
        out.pushforward_residual = w2_distance(pushed, plan.target);
    }
    return out;
}

Measure geodesic_interpolate(const TransportPlan& plan, double t)
{
    require(std::isfinite(t) && t >= 0.0 && t <= 1.0, ErrorKind::invalid_argument, "t must lie in [0,1]");
    if (t == 0.0) return plan.source;
    if (t == 1.0) return plan.target;
    const int dim = measure_dim(plan.source);
    std::vector<Coords> pts;
    std::vector<double> w;
    if (plan.method == PlanMethod::exact1d) {
        Quantile F = make_quantile(plan.source), G = make_quantile(plan.target);
        walk(F, G, plan.theta, [&](const Piece& p) {
            double um = 0.5 * (p.u0 + p.u1);
            double xs = F.at(p.kf, um), ys = target_value(G, p, um, plan.theta);
            pts.push_back({wrap_unit((1.0 - t) * xs + t * ys), 0.0});
            w.push_back(p.u1 - p.u0);
        });
    } else {
        std::vector<Coords> x, y;
        std::vector<double> a, b;
        support(plan.source, x, a);
        support(plan.target, y, b);
        if (plan.method == PlanMethod::lp) {
            for (auto& e : plan.coupling) {
                Coords l = log_coords(dim, x[e.i], y[e.j]);
                pts.push_back(exp_coords(dim, x[e.i], {t * l[0], t * l[1]}));
                w.push_back(e.mass);
            }
        } else {
            auto v = barycentric_displacement(plan, dim, x, y);
            for (std::size_t i = 0; i < x.size(); ++i) {
                if (a[i] <= 0.0) continue;
                pts.push_back(exp_coords(dim, x[i], {t * v[i][0], t * v[i][1]}));
                w.push_back(a[i]);
            }
        }
    }
    return ParticleCloud(dim, std::move(pts), std::move(w));
}

double quantile_coupling_integral(const TransportPlan& plan, const std::function<double(double, double)>& h,
                                  int gauss_points)
{
    require(plan.method == PlanMethod::exact1d, ErrorKind::invalid_argument, "needs an exact1d plan");
    Quantile F = make_quantile(plan.source), G = make_quantile(plan.target);
    double total = 0.0;
    walk(F, G, plan.theta, [&](const Piece& p) {
        total += gauss_sum(gauss_points, p.u0, p.u1, [&](double u) {
            return h(F.at(p.kf, u), target_value(G, p, u, plan.theta));
        });
    });
    return total;
}

} // namespace ottolab
