#include "degen/solve.hpp"

#include "degen/regularize.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>

namespace degen {

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using VecX = Eigen::VectorXd;

struct Dofs {
    std::vector<int> of_vertex;   // -1 on the boundary
    std::vector<int> vertex;
};

Dofs make_dofs(const Mesh& mesh)
{
    Dofs d;
    d.of_vertex.assign(mesh.n_vertices(), -1);
    for (std::size_t v = 0; v < mesh.n_vertices(); ++v) {
        if (mesh.is_boundary[v]) continue;
        d.of_vertex[v] = int(d.vertex.size());
        d.vertex.push_back(int(v));
    }
    return d;
}

double max_abs(const std::vector<double>& r)
{
    double m = 0.0;
    for (double x : r) m = std::max(m, std::abs(x));
    return m;
}

double half_sq(const std::vector<double>& r)
{
    double s = 0.0;
    for (double x : r) s += x * x;
    return 0.5 * s;
}

// per-vertex sum of per-triangle local values, in incidence order
std::vector<double> gather(const Mesh& mesh, const std::vector<double>& local, Exec exec)
{
    const long nv = long(mesh.n_vertices());
    std::vector<double> out(nv, 0.0);
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
    for (long v = 0; v < nv; ++v) {
        if (mesh.is_boundary[v]) continue;
        double s = 0.0;
        for (int k = mesh.vt_offset[v]; k < mesh.vt_offset[v + 1]; ++k) {
            const auto [t, l] = mesh.vt_entries[k];
            s += local[std::size_t(t) * 3 + l];
        }
        out[v] = s;
    }
    return out;
}

struct Assembly {
    SpMat K;
    double lipschitz = 0.0;   // max operator norm of the cell Jacobians
};

Assembly assemble_jacobian(const Field& field, const Mesh& mesh, const Dofs& dofs, const std::vector<double>& u,
                           bool symmetric, Exec exec)
{
    const long nt = long(mesh.n_triangles());
    std::vector<Eigen::Matrix3d> local(nt);
    std::vector<double> opnorm(nt);
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
    for (long t = 0; t < nt; ++t) {
        const Vec2 xi = mesh.cell_gradient(u, std::size_t(t));
        const double step = std::max(1e-6, 1e-3 * xi.norm());
        const JacobianResult jr = jacobian(field, xi, step);
        const Mat2 J = symmetric ? jr.symmetric : jr.matrix;
        opnorm[t] = J.operatorNorm();
        const auto& g = mesh.grad_hat[t];
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) local[t](a, b) = mesh.area[t] * g[a].dot(J * g[b]);
    }
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(std::size_t(nt) * 9);
    Assembly out;
    for (long t = 0; t < nt; ++t) {
        out.lipschitz = std::max(out.lipschitz, opnorm[t]);
        const auto& tri = mesh.triangles[t];
        for (int a = 0; a < 3; ++a) {
            const int ra = dofs.of_vertex[tri[a]];
            if (ra < 0) continue;
            for (int b = 0; b < 3; ++b) {
                const int cb = dofs.of_vertex[tri[b]];
                if (cb >= 0) trip.emplace_back(ra, cb, local[t](a, b));
            }
        }
    }
    const int n = int(dofs.vertex.size());
    out.K.resize(n, n);
    out.K.setFromTriplets(trip.begin(), trip.end());
    return out;
}

VecX to_dofs(const Dofs& d, const std::vector<double>& full)
{
    VecX r(d.vertex.size());
    for (std::size_t k = 0; k < d.vertex.size(); ++k) r[k] = full[d.vertex[k]];
    return r;
}

bool finite(const VecX& x) { return x.allFinite(); }

// direct sparse solve; LDLT for symmetric systems with LU as the fallback
bool linear_solve(const SpMat& K, const VecX& rhs, bool symmetric, VecX& x)
{
    if (symmetric) {
        Eigen::SimplicialLDLT<SpMat> ldlt(K);
        if (ldlt.info() == Eigen::Success) {
            x = ldlt.solve(rhs);
            if (ldlt.info() == Eigen::Success && finite(x)) return true;
        }
    }
    Eigen::SparseLU<SpMat> lu;
    lu.analyzePattern(K);
    lu.factorize(K);
    if (lu.info() != Eigen::Success) return false;
    x = lu.solve(rhs);
    return lu.info() == Eigen::Success && finite(x);
}

double discrete_energy(const Field& field, const Mesh& mesh, const std::vector<double>& u, Exec exec)
{
    const long nt = long(mesh.n_triangles());
    std::vector<double> e(nt);
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
    for (long t = 0; t < nt; ++t) e[t] = mesh.area[t] * field.potential(mesh.cell_gradient(u, std::size_t(t)));
    double s = 0.0;
    for (double x : e) s += x;
    return s;
}

const Field& laplace_field()
{
    static const Field id = make_identity_scaled(1.0);
    return id;
}

}  // namespace

Json SolveDiagnostics::to_json() const
{
    Json hist = Json::array();
    for (const auto& s : history)
        hist.push_back({{"iteration", s.iteration}, {"t", s.t}, {"residual", s.residual}, {"picard", s.picard}});
    return Json{{"iterations", iterations},
                {"picard_steps", picard_steps},
                {"initial_residual", initial_residual},
                {"final_residual", final_residual},
                {"converged", converged},
                {"stall_reason", stall_reason},
                {"line_search", hist}};
}

double DiscreteSolution::lipschitz_in(double r) const
{
    double m = 0.0;
    for (std::size_t t = 0; t < grad.size(); ++t)
        if (mesh->centroid[t].norm() <= r) m = std::max(m, grad[t].norm());
    return m;
}

std::vector<double> residual_full(const Field& field, const Mesh& mesh, const std::vector<double>& u, Exec exec)
{
    const long nt = long(mesh.n_triangles());
    std::vector<double> local(std::size_t(nt) * 3);
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
    for (long t = 0; t < nt; ++t) {
        const Vec2 flux = mesh.area[t] * field(mesh.cell_gradient(u, std::size_t(t)));
        for (int l = 0; l < 3; ++l) local[std::size_t(t) * 3 + l] = flux.dot(mesh.grad_hat[t][l]);
    }
    return gather(mesh, local, exec);
}

std::vector<double> residual(const Field& field, const Mesh& mesh, const std::vector<double>& u, Exec exec)
{
    const auto full = residual_full(field, mesh, u, exec);
    std::vector<double> r;
    for (std::size_t v = 0; v < mesh.n_vertices(); ++v)
        if (!mesh.is_boundary[v]) r.push_back(full[v]);
    return r;
}

std::vector<double> boundary_vector(const Mesh& mesh, const Dirichlet& g)
{
    std::vector<double> u(mesh.n_vertices(), 0.0);
    for (int v : mesh.boundary_vertices) u[v] = g(mesh.vertices[v]);
    return u;
}

std::vector<double> interpolate(const Mesh& mesh, const Dirichlet& f)
{
    std::vector<double> u(mesh.n_vertices());
    for (std::size_t v = 0; v < mesh.n_vertices(); ++v) u[v] = f(mesh.vertices[v]);
    return u;
}

std::vector<double> harmonic_extension(const Mesh& mesh, const std::vector<double>& u0)
{
    const Dofs dofs = make_dofs(mesh);
    std::vector<double> u = u0;
    for (int v : dofs.vertex) u[v] = 0.0;
    const auto asm_ = assemble_jacobian(laplace_field(), mesh, dofs, u, true, Exec::serial);
    const VecX r = to_dofs(dofs, residual_full(laplace_field(), mesh, u, Exec::serial));
    VecX x;
    if (!linear_solve(asm_.K, -r, true, x)) throw Error("harmonic extension: singular Laplacian");
    for (std::size_t k = 0; k < dofs.vertex.size(); ++k) u[dofs.vertex[k]] = x[k];
    return u;
}

DiscreteSolution make_solution(std::shared_ptr<const Mesh> mesh, std::vector<double> u)
{
    DiscreteSolution s;
    s.mesh = std::move(mesh);
    s.u = std::move(u);
    s.grad = s.mesh->cell_gradients(s.u);
    for (const Vec2& g : s.grad) s.lipschitz = std::max(s.lipschitz, g.norm());
    return s;
}

DiscreteSolution solve(const Field& field, std::shared_ptr<const Mesh> mesh_ptr, const std::vector<double>& initial,
                       const SolveOptions& opts)
{
    const Mesh& mesh = *mesh_ptr;
    if (initial.size() != mesh.n_vertices()) throw Error("initial vector does not match the mesh");
    const Dofs dofs = make_dofs(mesh);
    const bool gradient = field.is_gradient();
    std::vector<double> u = initial;
    SolveDiagnostics diag;

    struct State {
        std::vector<double> u, R;
        double phi = 0.0;      // half squared residual
        double energy = 0.0;   // gradient fields only
    };
    auto evaluate = [&](std::vector<double> v) {
        State st;
        st.R = residual_full(field, mesh, v, opts.exec);
        st.phi = half_sq(st.R);
        if (gradient) st.energy = discrete_energy(field, mesh, v, opts.exec);
        st.u = std::move(v);
        return st;
    };
    // Armijo on the energy for gradient fields (the residual is its gradient), with
    // the residual norm deciding once energy differences reach rounding level;
    // Armijo on half the squared residual otherwise.
    auto acceptable = [&](const State& cur, const State& trial, double t, double slope) {
        if (!std::isfinite(trial.phi)) return false;
        if (gradient) {
            if (!std::isfinite(trial.energy)) return false;
            const double noise = 1e-13 * (1.0 + std::abs(cur.energy));
            if (std::abs(trial.energy - cur.energy) > noise) return trial.energy <= cur.energy + opts.armijo * t * slope;
            return trial.phi < cur.phi;
        }
        return trial.phi <= (1.0 - opts.armijo * t) * cur.phi;
    };
    auto step = [&](const State& cur, const VecX& d, double t) {
        std::vector<double> v = cur.u;
        for (std::size_t k = 0; k < dofs.vertex.size(); ++k) v[dofs.vertex[k]] += t * d[k];
        return evaluate(std::move(v));
    };

    State cur = evaluate(std::move(u));
    diag.initial_residual = max_abs(cur.R);

    std::unique_ptr<Eigen::SimplicialLDLT<SpMat>> laplace;
    int newton = 0;
    while (max_abs(cur.R) > opts.tol) {
        if (newton >= opts.max_iter) {
            diag.stall_reason = "iteration limit";
            break;
        }
        const Assembly A = assemble_jacobian(field, mesh, dofs, cur.u, gradient, opts.exec);
        const VecX r = to_dofs(dofs, cur.R);
        VecX d;
        bool accepted = false;
        if (linear_solve(A.K, -r, gradient, d) && r.dot(d) < 0.0) {
            const double slope = r.dot(d);
            for (double t = 1.0; t >= opts.min_step; t *= 0.5) {
                State trial = step(cur, d, t);
                if (acceptable(cur, trial, t, slope)) {
                    cur = std::move(trial);
                    diag.history.push_back({newton, t, max_abs(cur.R), false});
                    accepted = true;
                    break;
                }
            }
        }
        ++newton;
        if (accepted) continue;

        // Picard step: constant-coefficient problem L K_lap delta = -R
        if (diag.picard_steps >= opts.max_picard) {
            diag.stall_reason = "Picard limit";
            break;
        }
        if (!laplace) {
            const Assembly L = assemble_jacobian(laplace_field(), mesh, dofs, cur.u, true, Exec::serial);
            laplace = std::make_unique<Eigen::SimplicialLDLT<SpMat>>(L.K);
        }
        const VecX dp = laplace->solve(-r) / std::max(A.lipschitz, 1e-12);
        const double slope = r.dot(dp);
        bool moved = false;
        for (double t = 1.0; t >= 1.0 / 1024.0; t *= 0.5) {
            State trial = step(cur, dp, t);
            if (acceptable(cur, trial, t, slope) || (!gradient && trial.phi < cur.phi)) {
                cur = std::move(trial);
                diag.history.push_back({newton - 1, t, max_abs(cur.R), true});
                moved = true;
                break;
            }
        }
        ++diag.picard_steps;
        if (!moved) {
            diag.stall_reason = "line search and Picard step both stalled";
            break;
        }
    }
    diag.iterations = newton;
    diag.final_residual = max_abs(cur.R);
    diag.converged = diag.final_residual <= opts.tol;
    if (diag.converged) diag.stall_reason.clear();
    DiscreteSolution sol = make_solution(std::move(mesh_ptr), std::move(cur.u));
    sol.diagnostics = std::move(diag);
    return sol;
}

DiscreteSolution solve(const Field& field, std::shared_ptr<const Mesh> mesh, const Dirichlet& g,
                       const SolveOptions& opts)
{
    const auto init = harmonic_extension(*mesh, boundary_vector(*mesh, g));
    return solve(field, std::move(mesh), init, opts);
}

Json SequenceReport::to_json() const
{
    Json conv = Json::array();
    for (bool c : converged) conv.push_back(c);
    return Json{{"M", M},
                {"eps", eps},
                {"interior_lipschitz", interior_lipschitz},
                {"w12_differences", w12_differences},
                {"max_differences", max_differences},
                {"converged", conv}};
}

SequenceResult solve_sequence(const Field& field, double M, const std::vector<double>& eps_list,
                              std::shared_ptr<const Mesh> mesh, const Dirichlet& g, const SolveOptions& opts)
{
    for (std::size_t k = 1; k < eps_list.size(); ++k)
        if (!(eps_list[k] < eps_list[k - 1])) throw ConfigError("eps list must be decreasing");
    SequenceResult out;
    out.report.M = M;
    std::vector<double> init = harmonic_extension(*mesh, boundary_vector(*mesh, g));
    for (double eps : eps_list) {
        const Field ge = mollified_field(field, eps);
        DiscreteSolution s = solve(ge, mesh, init, opts);
        init = s.u;
        out.report.eps.push_back(eps);
        out.report.interior_lipschitz.push_back(s.lipschitz_in(0.75 * mesh->domain.R_out));
        out.report.converged.push_back(s.diagnostics.converged);
        out.solutions.push_back(std::move(s));
    }
    for (std::size_t k = 1; k < out.solutions.size(); ++k) {
        std::vector<double> diff(mesh->n_vertices());
        double mx = 0.0;
        for (std::size_t v = 0; v < diff.size(); ++v) {
            diff[v] = out.solutions[k].u[v] - out.solutions[k - 1].u[v];
            mx = std::max(mx, std::abs(diff[v]));
        }
        const double r = 0.75 * mesh->domain.R_out;
        const double l2 = l2_norm_p1(*mesh, diff, r), h1 = h1_seminorm_p1(*mesh, diff, r);
        out.report.w12_differences.push_back(std::sqrt(l2 * l2 + h1 * h1));
        out.report.max_differences.push_back(mx);
    }
    return out;
}

double energy(const std::function<double(const Vec2&)>& F, const DiscreteSolution& sol)
{
    double e = 0.0;
    for (std::size_t t = 0; t < sol.grad.size(); ++t) e += sol.mesh->area[t] * F(sol.grad[t]);
    return e;
}

double energy(const Field& field, const DiscreteSolution& sol)
{
    if (!field.is_gradient()) throw ConfigError("energy needs a field declared as a gradient");
    return energy([&](const Vec2& x) { return field.potential(x); }, sol);
}

RecoveredHessians recover_hessians(const DiscreteSolution& sol, int min_hops, Exec exec)
{
    const Mesh& mesh = *sol.mesh;
    const auto hops = mesh.boundary_hops();
    RecoveredHessians out;
    out.H.assign(mesh.n_vertices(), Mat2::Zero());
    out.valid.assign(mesh.n_vertices(), 0);
    const long nv = long(mesh.n_vertices());
#pragma omp parallel for schedule(dynamic, 64) if (exec == Exec::parallel)
    for (long v = 0; v < nv; ++v) {
        if (hops[v] < min_hops) continue;
        // model q(d) = b.d + d^T H d / 2 around x_v; its P1 gradient on each patch
        // triangle is linear in (b1, b2, H11, H12, H22) and is fitted to the cell gradients
        const int k0 = mesh.vt_offset[v], k1 = mesh.vt_offset[v + 1];
        Eigen::MatrixXd A(2 * (k1 - k0), 5);
        Eigen::VectorXd rhs(2 * (k1 - k0));
        for (int k = k0; k < k1; ++k) {
            const int t = mesh.vt_entries[k].first;
            Eigen::Matrix<double, 2, 5> cols = Eigen::Matrix<double, 2, 5>::Zero();
            for (int l = 0; l < 3; ++l) {
                const Vec2 d = mesh.vertices[mesh.triangles[t][l]] - mesh.vertices[v];
                const Eigen::Matrix<double, 1, 5> basis(d.x(), d.y(), 0.5 * d.x() * d.x(), d.x() * d.y(),
                                                        0.5 * d.y() * d.y());
                cols += mesh.grad_hat[t][l] * basis;
            }
            A.block<2, 5>(2 * (k - k0), 0) = cols;
            rhs.segment<2>(2 * (k - k0)) = sol.grad[t];
        }
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
        qr.setThreshold(1e-10);
        if (qr.rank() < 5) continue;
        const Eigen::VectorXd p = qr.solve(rhs);
        out.H[v] << p[2], p[3], p[3], p[4];
        out.valid[v] = 1;
    }
    return out;
}

HessianCheck hessian_determinant_check(const DiscreteSolution& sol)
{
    const Mesh& mesh = *sol.mesh;
    const auto hops = mesh.boundary_hops();
    const RecoveredHessians rec = recover_hessians(sol, 2);
    HessianCheck out;
    for (std::size_t v = 0; v < mesh.n_vertices(); ++v) {
        if (hops[v] < 2) continue;
        if (!rec.valid[v]) {
            ++out.n_skipped;
            continue;
        }
        const double det = rec.H[v].determinant();
        out.vertices.push_back(int(v));
        out.det.push_back(det);
        ++out.n_vertices;
        if (det > out.max_det) {
            out.max_det = det;
            out.argmax = mesh.vertices[v];
        }
    }
    return out;
}

void save_solution(const DiscreteSolution& sol, const std::filesystem::path& dir)
{
    save_mesh(*sol.mesh, dir, Json{{"lipschitz_estimate", sol.lipschitz}, {"diagnostics", sol.diagnostics.to_json()}});
    std::vector<std::vector<double>> urows, grows;
    for (double x : sol.u) urows.push_back({x});
    for (const Vec2& g : sol.grad) grows.push_back({g.x(), g.y()});
    atomic_write(dir / "u.csv", csv_table({"u"}, urows));
    atomic_write(dir / "grad.csv", csv_table({"gx", "gy"}, grows));
}

}  // namespace degen
