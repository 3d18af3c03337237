#pragma once

#include "degen/field.hpp"
#include "degen/grid.hpp"
#include "degen/io.hpp"
#include "degen/solve.hpp"

#include <vector>

namespace degen {

/// A positive quantity carried by its natural logarithm; `value` is exp(log)
/// when representable as a normal double and 0 otherwise.
struct LogValue {
    double log = 0.0;
    double value = 0.0;
    bool representable = true;
    double mantissa = 0.0;   // value = mantissa * 10^exponent10, 1 <= mantissa < 10
    long exponent10 = 0;

    static LogValue from_log(double log);
};

/// Explicit constants of the exponential barrier on the square |x1|, |x2| <= 1/8.
struct BarrierParams {
    double lambda = 1.0;
    double rho = 1.0;
    double M = 1.0;
    double k = 0.0;
    LogValue gamma;
    LogValue c;         // gamma exp(-k/8)
    LogValue eps;       // gamma rho exp(-k/8) / (8M)
    LogValue eps_alt;   // rho^2 exp(-k) exp(-k/8) / (32 M k sqrt(1601))
    double half_width = 0.125;
    bool underflow = false;  // some constant is below the normal double range

    Json to_json() const;
};

/// ((80 + sqrt(6400 + 4000 lambda^2)) / (10 lambda))^2.
double barrier_exponent(double lambda);

BarrierParams barrier_constants(double lambda, double rho, double M);

/// Magnitude of the most negative eigenvalue of a symmetric 2x2 matrix, 0 if none.
double neg_part_norm(const Mat2& a);

/// The matrix [[1600 k x1^2 - 40, -40 k x1], [-40 k x1, k]], i.e. D^2 w / (gamma k e^{kv}).
Mat2 barrier_matrix(double k, double x1);

/// 80k / (tr + sqrt(tr^2 + radicand_factor * k)) with tr the trace of barrier_matrix.
/// radicand_factor 160 is the characteristic-polynomial value; 40 is the displayed one.
double neg_part_closed_form(double k, double x1, double radicand_factor);

struct BarrierEval {
    double w = 0.0;
    Vec2 grad = Vec2::Zero();
    Mat2 hess = Mat2::Zero();
    double log_scale = 0.0;   // log(gamma k e^{kv}); grad = e^{log_scale} (-40 x1, 1)
};

/// w = gamma (e^{kv} - e^{-k/8}) with v = x2 - 20 x1^2, and its derivatives.
BarrierEval barrier_eval(const BarrierParams& p, const Vec2& x);

struct SubsolutionRow {
    double x1, x2, trace_lower_bound, neg_part, margin;
};

struct SubsolutionReport {
    int n = 0;
    double max_grad_norm = 0.0;
    bool grad_precondition = false;         // |grad w| <= rho/2 on the scan
    Vec2 worst_grad_node = Vec2::Zero();
    bool ellipticity_precondition = true;   // B_{rho/2}(0) inside O_lambda and V_{1/lambda} on the grid
    bool grid_checked = false;
    /// min over nodes of Tr(sym J_G(grad w) A); the positive factor gamma k e^{kv} is dropped.
    double min_direct_trace = kInf;
    /// min over nodes of lambda 40k/|A^-| - |A^-|/lambda.
    double min_bound = kInf;
    /// min over nodes of lambda sqrt(40k) - |A^-|.
    double min_margin = kInf;
    double max_neg_part = 0.0;
    double max_det_rel_error = 0.0;           // |det A + 40k| / 40k
    double max_product_rel_error = 0.0;       // | |A+||A-| - 40k | / 40k
    bool w_increasing_in_x2 = true;
    std::vector<SubsolutionRow> rows;

    bool pass() const { return grad_precondition && ellipticity_precondition && min_bound > 0.0 && min_margin > 0.0; }
    Json to_json() const;
};

/// Scans an n x n grid of the square. When a classified grid of the field is
/// supplied, also checks that its nodes in B_{rho/2}(0) lie in O_lambda and V_{1/lambda}.
SubsolutionReport subsolution_check(const Field& field, const BarrierParams& p, int n,
                                    const DegeneracyGrid* grid = nullptr, Exec exec = Exec::parallel);

struct NegPartMargin {
    double max_exact = 0.0;           // max |A^-| over the x1 scan
    double bound = 0.0;               // lambda sqrt(40k)
    double max_displayed_gap = 0.0;   // max | displayed formula - exact |
    double max_displayed_rel_gap = 0.0;
    bool pass() const { return max_exact <= bound; }
};

/// 1D scan of x1 over [-1/8, 1/8] with n points.
NegPartMargin neg_part_margin(const BarrierParams& p, int n);

struct FlatnessOptions {
    double h = 0.05;              // mesh size on B_1
    double amplitude = 0.05;      // eps of the boundary perturbation eps sin(3 theta)
    SolveOptions solve;
};

struct FlatnessVerdict {
    Vec2 p0 = Vec2::Zero(), q = Vec2::Zero();
    double rho = 0.0;
    double amplitude = 0.0;
    bool grid_checked = false;
    double lambda = 0.0, Lambda = 0.0;   // worst ladder levels on B_rho(q) when a grid is given
    bool converged = false;
    std::size_t n_cells = 0;             // triangles with centroid in B_{1/2}
    double min_distance = kInf;          // min |grad u - q| over those cells
    Vec2 closest = Vec2::Zero();
    bool pass() const { return converged && min_distance > 0.5 * rho; }
    Json to_json() const;
};

/// Solves on B_1 with data <p0, x> + amplitude sin(3 theta) and measures how close the
/// cell gradients in B_{1/2} come to q. Requires |p0 - q| >= rho and, when a grid of the
/// field is given, every grid node of B_rho(q) elliptic.
FlatnessVerdict flatness_experiment(const Field& field, const Vec2& p0, const Vec2& q, double rho,
                                    const FlatnessOptions& opts = {}, const DegeneracyGrid* grid = nullptr);

}  // namespace degen
