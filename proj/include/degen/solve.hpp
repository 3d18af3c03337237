#pragma once

#include "degen/field.hpp"
#include "degen/mesh.hpp"

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace degen {

using Dirichlet = std::function<double(const Vec2&)>;

struct SolveOptions {
    double tol = 1e-10;        // max-norm of the assembled residual
    int max_iter = 50;
    double armijo = 1e-4;
    double min_step = 1e-10;   // line search gives up below this and a Picard step is taken
    int max_picard = 200;
    Exec exec = Exec::parallel;
};

struct LineSearchStep {
    int iteration = 0;
    double t = 0.0;
    double residual = 0.0;     // after the step
    bool picard = false;
};

struct SolveDiagnostics {
    int iterations = 0;
    int picard_steps = 0;
    double initial_residual = 0.0;
    double final_residual = 0.0;
    bool converged = false;
    std::string stall_reason;
    std::vector<LineSearchStep> history;
    Json to_json() const;
};

struct DiscreteSolution {
    std::shared_ptr<const Mesh> mesh;
    std::vector<double> u;
    std::vector<Vec2> grad;
    SolveDiagnostics diagnostics;
    double lipschitz = 0.0;    // max |cell gradient|

    /// max |cell gradient| over triangles whose centroid lies in B_r.
    double lipschitz_in(double r) const;
};

/// Weak-form residual over all vertices (boundary entries are zero):
/// R_v = sum_T area <G(grad u|_T), grad phi_v|_T>.
std::vector<double> residual_full(const Field& field, const Mesh& mesh, const std::vector<double>& u,
                                  Exec exec = Exec::parallel);

/// Residual restricted to interior vertices, in vertex order.
std::vector<double> residual(const Field& field, const Mesh& mesh, const std::vector<double>& u,
                             Exec exec = Exec::parallel);

/// Nodal vector with boundary entries from g and interior entries zero.
std::vector<double> boundary_vector(const Mesh& mesh, const Dirichlet& g);

/// Nodal interpolant of a function.
std::vector<double> interpolate(const Mesh& mesh, const Dirichlet& f);

/// Discrete harmonic extension of the boundary entries of u.
std::vector<double> harmonic_extension(const Mesh& mesh, const std::vector<double>& u);

/// Damped Newton on interior values; boundary entries of the initial vector are the data.
DiscreteSolution solve(const Field& field, std::shared_ptr<const Mesh> mesh, const std::vector<double>& initial,
                       const SolveOptions& opts = {});
DiscreteSolution solve(const Field& field, std::shared_ptr<const Mesh> mesh, const Dirichlet& g,
                       const SolveOptions& opts = {});

struct SequenceReport {
    double M = 0.0;
    std::vector<double> eps;
    std::vector<double> interior_lipschitz;     // max over B_{3/4}
    std::vector<double> w12_differences;        // successive, over B_{3/4}
    std::vector<double> max_differences;        // successive, nodal
    std::vector<bool> converged;
    Json to_json() const;
};

struct SequenceResult {
    std::vector<DiscreteSolution> solutions;
    SequenceReport report;
};

/// Solves with G_eps = mollify(field, eps) for each eps in the (decreasing) list.
SequenceResult solve_sequence(const Field& field, double M, const std::vector<double>& eps_list,
                              std::shared_ptr<const Mesh> mesh, const Dirichlet& g, const SolveOptions& opts = {});

/// sum_T area F(grad u|_T).
double energy(const std::function<double(const Vec2&)>& F, const DiscreteSolution& sol);
/// Uses the field's potential; throws when the field is not a gradient.
double energy(const Field& field, const DiscreteSolution& sol);

/// Solution from nodal values (cell gradients and Lipschitz estimate filled in).
DiscreteSolution make_solution(std::shared_ptr<const Mesh> mesh, std::vector<double> u);

struct RecoveredHessians {
    std::vector<Mat2> H;                 // per vertex
    std::vector<std::uint8_t> valid;     // 0 for skipped or rank-deficient patches
};

/// Per-vertex Hessian from a least-squares fit of the cell gradients on the vertex
/// patch by those of a local quadratic (exact for quadratic u). Vertices closer than
/// min_hops edges to the boundary and rank-deficient patches are left invalid.
RecoveredHessians recover_hessians(const DiscreteSolution& sol, int min_hops = 1, Exec exec = Exec::parallel);

struct HessianCheck {
    double max_det = -kInf;
    Vec2 argmax = Vec2::Zero();
    std::size_t n_vertices = 0;
    std::size_t n_skipped = 0;    // degenerate patches
    std::vector<int> vertices;
    std::vector<double> det;
};

/// Determinant of the recovered Hessian at vertices at least two edges from the
/// boundary. Rank-deficient patches are counted as skipped.
HessianCheck hessian_determinant_check(const DiscreteSolution& sol);

/// mesh files plus u.csv and grad.csv.
void save_solution(const DiscreteSolution& sol, const std::filesystem::path& dir);

}  // namespace degen
