#include "degen/barrier.hpp"

#include <cfloat>
#include <cmath>

namespace degen {

LogValue LogValue::from_log(double log)
{
    LogValue v;
    v.log = log;
    v.representable = log >= std::log(DBL_MIN) && log <= std::log(DBL_MAX);
    v.value = v.representable ? std::exp(log) : (log > 0 ? kInf : 0.0);
    const double l10 = log / std::log(10.0);
    v.exponent10 = long(std::floor(l10));
    v.mantissa = std::pow(10.0, l10 - double(v.exponent10));
    return v;
}

double barrier_exponent(double lambda)
{
    if (!(lambda > 0.0)) throw ConfigError("barrier needs lambda > 0");
    const double b = (80.0 + std::sqrt(6400.0 + 4000.0 * lambda * lambda)) / (10.0 * lambda);
    return b * b;
}

BarrierParams barrier_constants(double lambda, double rho, double M)
{
    if (!(lambda > 0.0) || !(rho > 0.0) || !(M > 0.0)) throw ConfigError("barrier needs lambda, rho, M > 0");
    BarrierParams p;
    p.lambda = lambda;
    p.rho = rho;
    p.M = M;
    p.k = barrier_exponent(lambda);
    const double k = p.k;
    const double log_s1601 = 0.5 * std::log(1601.0);
    const double log_gamma = std::log(rho / 4.0) - k - log_s1601 - std::log(k);
    p.gamma = LogValue::from_log(log_gamma);
    p.c = LogValue::from_log(log_gamma - k / 8.0);
    p.eps = LogValue::from_log(log_gamma + std::log(rho) - k / 8.0 - std::log(8.0 * M));
    p.eps_alt = LogValue::from_log(2.0 * std::log(rho) - k - k / 8.0 - std::log(32.0 * M * k) - log_s1601);
    p.underflow = !(p.gamma.representable && p.c.representable && p.eps.representable);
    return p;
}

Json BarrierParams::to_json() const
{
    auto lv = [](const LogValue& v) {
        return Json{{"log", v.log}, {"value", v.value}, {"representable", v.representable},
                    {"mantissa", v.mantissa}, {"exponent10", v.exponent10}};
    };
    return Json{{"lambda", lambda},
                {"rho", rho},
                {"M", M},
                {"k", k},
                {"gamma", lv(gamma)},
                {"c", lv(c)},
                {"eps", lv(eps)},
                {"eps_alt", lv(eps_alt)},
                {"eps_rel_agreement", std::expm1(eps.log - eps_alt.log)},
                {"rectangle_half_width", half_width},
                {"underflow", underflow}};
}

double neg_part_norm(const Mat2& a)
{
    const Vec2 ev = sym_eigenvalues(a);
    return ev.x() < 0.0 ? -ev.x() : 0.0;
}

Mat2 barrier_matrix(double k, double x1)
{
    Mat2 a;
    a << 1600.0 * k * x1 * x1 - 40.0, -40.0 * k * x1, -40.0 * k * x1, k;
    return a;
}

double neg_part_closed_form(double k, double x1, double radicand_factor)
{
    const double tr = 1600.0 * k * x1 * x1 - 40.0 + k;
    return 80.0 * k / (tr + std::sqrt(tr * tr + radicand_factor * k));
}

BarrierEval barrier_eval(const BarrierParams& p, const Vec2& x)
{
    BarrierEval e;
    const double k = p.k;
    const double v = x.y() - 20.0 * x.x() * x.x();
    e.log_scale = p.gamma.log + std::log(k) + k * v;
    e.w = std::exp(p.gamma.log + k * v) - std::exp(p.gamma.log - k / 8.0);
    const double s = std::exp(e.log_scale);
    e.grad = s * Vec2(-40.0 * x.x(), 1.0);
    e.hess = s * barrier_matrix(k, x.x());
    return e;
}

Json SubsolutionReport::to_json() const
{
    return Json{{"n", n},
                {"max_grad_norm", max_grad_norm},
                {"grad_precondition", grad_precondition},
                {"worst_grad_node", {worst_grad_node.x(), worst_grad_node.y()}},
                {"grid_checked", grid_checked},
                {"ellipticity_precondition", ellipticity_precondition},
                {"min_direct_trace", min_direct_trace},
                {"min_bound", min_bound},
                {"min_margin", min_margin},
                {"max_neg_part", max_neg_part},
                {"max_det_rel_error", max_det_rel_error},
                {"max_product_rel_error", max_product_rel_error},
                {"w_increasing_in_x2", w_increasing_in_x2},
                {"pass", pass()}};
}

SubsolutionReport subsolution_check(const Field& field, const BarrierParams& p, int n,
                                    const DegeneracyGrid* grid, Exec exec)
{
    if (n < 2) throw Error("subsolution scan needs n >= 2");
    SubsolutionReport rep;
    rep.n = n;
    rep.rows.resize(std::size_t(n) * n);
    const double a = p.half_width;
    const double k = p.k;
    const double lam = p.lambda;
    const double detv = 40.0 * k;
    std::vector<double> grad_norm(rep.rows.size()), direct(rep.rows.size()), det_err(rep.rows.size()),
        prod_err(rep.rows.size());
    std::vector<std::uint8_t> increasing(rep.rows.size());

#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            const std::size_t idx = std::size_t(j) * n + i;
            const Vec2 x(-a + 2.0 * a * i / (n - 1), -a + 2.0 * a * j / (n - 1));
            const BarrierEval e = barrier_eval(p, x);
            const Mat2 A = barrier_matrix(k, x.x());
            const Vec2 ev = sym_eigenvalues(A);
            const double neg = ev.x() < 0.0 ? -ev.x() : 0.0;
            const double pos = ev.y() > 0.0 ? ev.y() : 0.0;
            SubsolutionRow& row = rep.rows[idx];
            row.x1 = x.x();
            row.x2 = x.y();
            row.neg_part = neg;
            row.trace_lower_bound = neg > 0.0 ? lam * detv / neg - neg / lam : kInf;
            row.margin = lam * std::sqrt(detv) - neg;
            grad_norm[idx] = e.grad.norm();
            const Mat2 js = jacobian(field, e.grad, 1e-7).symmetric;
            direct[idx] = (js * A).trace();
            det_err[idx] = std::abs(A.determinant() + detv) / detv;
            prod_err[idx] = neg > 0.0 ? std::abs(pos * neg - detv) / detv : 0.0;
            // w / gamma along e2, finite difference
            const double hx = 1e-6;
            const double v0 = x.y() - 20.0 * x.x() * x.x();
            increasing[idx] = std::exp(k * (v0 + hx)) - std::exp(k * v0) > 0.0;
        }
    }
    rep.grad_precondition = true;
    for (std::size_t idx = 0; idx < rep.rows.size(); ++idx) {
        const auto& row = rep.rows[idx];
        if (grad_norm[idx] > rep.max_grad_norm) {
            rep.max_grad_norm = grad_norm[idx];
            rep.worst_grad_node = Vec2(row.x1, row.x2);
        }
        rep.min_direct_trace = std::min(rep.min_direct_trace, direct[idx]);
        rep.min_bound = std::min(rep.min_bound, row.trace_lower_bound);
        rep.min_margin = std::min(rep.min_margin, row.margin);
        rep.max_neg_part = std::max(rep.max_neg_part, row.neg_part);
        rep.max_det_rel_error = std::max(rep.max_det_rel_error, det_err[idx]);
        rep.max_product_rel_error = std::max(rep.max_product_rel_error, prod_err[idx]);
        rep.w_increasing_in_x2 = rep.w_increasing_in_x2 && increasing[idx];
    }
    rep.grad_precondition = rep.max_grad_norm <= p.rho / 2.0;
    if (grid) {
        rep.grid_checked = true;
        const double floor = lam * (1.0 - 1e-9);
        for (std::size_t idx = 0; idx < grid->size(); ++idx) {
            if (grid->node(idx).norm() > p.rho / 2.0) continue;
            if (!(grid->d_quot[idx] >= floor && grid->s_quot[idx] >= floor)) {
                rep.ellipticity_precondition = false;
                break;
            }
        }
    }
    return rep;
}

NegPartMargin neg_part_margin(const BarrierParams& p, int n)
{
    if (n < 2) throw Error("margin scan needs n >= 2");
    NegPartMargin m;
    m.bound = p.lambda * std::sqrt(40.0 * p.k);
    for (int i = 0; i < n; ++i) {
        const double x1 = -p.half_width + 2.0 * p.half_width * i / (n - 1);
        const double exact = neg_part_norm(barrier_matrix(p.k, x1));
        const double shown = neg_part_closed_form(p.k, x1, 40.0);
        m.max_exact = std::max(m.max_exact, exact);
        m.max_displayed_gap = std::max(m.max_displayed_gap, std::abs(shown - exact));
        m.max_displayed_rel_gap = std::max(m.max_displayed_rel_gap, std::abs(shown - exact) / exact);
    }
    return m;
}

}  // namespace degen
