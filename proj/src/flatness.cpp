#include "degen/barrier.hpp"

#include <cmath>

namespace degen {

Json FlatnessVerdict::to_json() const
{
    return Json{{"p0", {p0.x(), p0.y()}},
                {"q", {q.x(), q.y()}},
                {"rho", rho},
                {"amplitude", amplitude},
                {"grid_checked", grid_checked},
                {"lambda", lambda},
                {"Lambda", Lambda},
                {"converged", converged},
                {"n_cells", n_cells},
                {"min_distance", min_distance},
                {"closest_gradient", {closest.x(), closest.y()}},
                {"threshold", 0.5 * rho},
                {"pass", pass()}};
}

FlatnessVerdict flatness_experiment(const Field& field, const Vec2& p0, const Vec2& q, double rho,
                                    const FlatnessOptions& opts, const DegeneracyGrid* grid)
{
    if (!(rho > 0.0)) throw ConfigError("flatness experiment needs rho > 0");
    if ((p0 - q).norm() < rho) throw ConfigError("flatness experiment needs p0 outside B_rho(q)");
    FlatnessVerdict v;
    v.p0 = p0;
    v.q = q;
    v.rho = rho;
    v.amplitude = opts.amplitude;
    if (grid) {
        v.grid_checked = true;
        int worst_o = 0, worst_v = 0;
        bool any = false;
        for (std::size_t k = 0; k < grid->size(); ++k) {
            if ((grid->node(k) - q).norm() > rho) continue;
            any = true;
            if (!grid->elliptic(k))
                throw ConfigError("flatness experiment: B_rho(q) meets a non-elliptic grid node");
            worst_o = std::max(worst_o, grid->o_level[k]);
            worst_v = std::max(worst_v, grid->v_level[k]);
        }
        if (!any) throw ConfigError("flatness experiment: B_rho(q) contains no grid node");
        v.lambda = grid->ladders.lambda[worst_o];
        v.Lambda = grid->ladders.Lambda[worst_v];
    }
    auto mesh = std::make_shared<const Mesh>(build_mesh(Domain::disk(1.0), opts.h));
    const double a = opts.amplitude;
    const Dirichlet g = [p0, a](const Vec2& x) { return p0.dot(x) + a * std::sin(3.0 * std::atan2(x.y(), x.x())); };
    const DiscreteSolution sol = solve(field, mesh, g, opts.solve);
    v.converged = sol.diagnostics.converged;
    for (std::size_t t = 0; t < mesh->n_triangles(); ++t) {
        if (mesh->centroid[t].norm() > 0.5) continue;
        ++v.n_cells;
        const double d = (sol.grad[t] - q).norm();
        if (d < v.min_distance) {
            v.min_distance = d;
            v.closest = sol.grad[t];
        }
    }
    return v;
}

}  // namespace degen
