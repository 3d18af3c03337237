#include "degen/regularize.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace degen {

namespace {

constexpr std::size_t kMaxCounterexamples = 20;

Json point_json(const Vec2& p) { return Json::array({p.x(), p.y()}); }

Vec2 random_in_disk(std::mt19937_64& rng, double r_lo, double r_hi)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double r = std::sqrt(r_lo * r_lo + (r_hi * r_hi - r_lo * r_lo) * u(rng));
    const double a = 2.0 * kPi * u(rng);
    return Vec2(r * std::cos(a), r * std::sin(a));
}

Vec2 random_in_box(std::mt19937_64& rng, const Box& box)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    return Vec2(box.lo.x() + (box.hi.x() - box.lo.x()) * u(rng), box.lo.y() + (box.hi.y() - box.lo.y()) * u(rng));
}

Box union_box(const Box& a, const Box& b)
{
    return Box{a.lo.cwiseMin(b.lo), a.hi.cwiseMax(b.hi)};
}

RegularizationCheck monotone_check(const Field& f, const PairSet& pairs)
{
    RegularizationCheck chk;
    chk.name = "monotone";
    const auto v = worst_monotonicity(f, pairs);
    chk.worst_value = v.value;
    chk.worst_point = v.a;
    chk.n_checked = pairs.size();
    chk.pass = v.value > -1e-12;
    if (!chk.pass) chk.counterexamples = {v.a, v.b};
    return chk;
}

}  // namespace

bool RegularizationReport::pass() const
{
    return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.pass; });
}

const RegularizationCheck& RegularizationReport::check(const std::string& name) const
{
    for (const auto& c : checks)
        if (c.name == name) return c;
    throw Error("no check named '" + name + "' in " + stage + " report");
}

Json RegularizationReport::to_json() const
{
    Json checks_json = Json::array();
    for (const auto& c : checks) {
        Json j{{"name", c.name}, {"pass", c.pass}, {"worst_value", c.worst_value}};
        j["worst_point"] = c.worst_point ? point_json(*c.worst_point) : Json(nullptr);
        j["n_checked"] = c.n_checked;
        if (!c.counterexamples.empty()) {
            Json ce = Json::array();
            for (const auto& p : c.counterexamples) ce.push_back(point_json(p));
            j["counterexamples"] = ce;
        }
        checks_json.push_back(j);
    }
    return Json{{"stage", stage},
                {"params", {{"M", M}, {"eps", eps}, {"c", c}, {"L", L}, {"retries", retries}}},
                {"pass", pass()},
                {"checks", checks_json}};
}

// ---------------------------------------------------------------------------
// Modification at infinity

Field modified_field(const Field& field, double M, double c)
{
    if (!(M > 0.0) || !(c > 0.0)) throw ConfigError("modify_at_infinity needs M > 0 and c > 0");
    Field::Data d;
    d.name = "modified(" + field.name() + ")";
    d.kind = FieldKind::modified;
    d.eval = [field, M, c](const Vec2& x) -> Vec2 {
        const double r = x.norm();
        if (r <= M) return field(x);
        const double chi = smoothstep5((4.0 * M - r) / (3.0 * M));
        if (chi == 0.0) return c * x;
        return chi * field(x) + (1.0 - chi) * c * x;
    };
    if (field.has_jacobian()) {
        d.jacobian = [field, M, c](const Vec2& x) -> Mat2 {
            const double r = x.norm();
            if (r <= M) return field.analytic_jacobian(x);
            const double s = (4.0 * M - r) / (3.0 * M);
            const double chi = smoothstep5(s);
            if (chi == 0.0) return c * Mat2::Identity();
            const Vec2 grad_chi = -smoothstep5_deriv(s) / (3.0 * M) * x / r;
            return chi * field.analytic_jacobian(x) + (1.0 - chi) * c * Mat2::Identity() +
                   (field(x) - c * x) * grad_chi.transpose();
        };
    }
    if (field.is_radial() && field.is_gradient()) {
        // radial blend: integrate chi phi' + (1 - chi) c s along the ray from M
        std::vector<double> breaks{M};
        for (double k : field.kink_radii())
            if (k > M && k < 4.0 * M) breaks.push_back(k);
        breaks.push_back(4.0 * M);
        std::vector<double> gx, gw;
        gauss_legendre(8, gx, gw);
        d.potential = [field, M, c, breaks, gx, gw](const Vec2& x) {
            const double r = x.norm();
            if (r <= M) return field.potential(x);
            const Vec2 e = x / r;
            double s = field.potential(M * e);
            const double top = std::min(r, 4.0 * M);
            for (std::size_t b = 0; b + 1 < breaks.size() && breaks[b] < top; ++b) {
                const double lo = breaks[b], hi = std::min(breaks[b + 1], top);
                constexpr int panels = 4;
                for (int q = 0; q < panels; ++q) {
                    const double a = lo + (hi - lo) * q / panels, w = (hi - lo) / panels;
                    for (std::size_t i = 0; i < gx.size(); ++i) {
                        const double t = a + 0.5 * w * (gx[i] + 1.0);
                        const double chi = smoothstep5((4.0 * M - t) / (3.0 * M));
                        s += 0.5 * w * gw[i] * (chi * field(t * e).dot(e) + (1.0 - chi) * c * t);
                    }
                }
            }
            if (r > 4.0 * M) s += 0.5 * c * (r * r - 16.0 * M * M);
            return s;
        };
        d.radial = true;
    }
    for (double k : field.kink_radii())
        if (k < 4.0 * M) d.kink_radii.push_back(k);
    d.working_box = union_box(field.working_box(), Box::square(5.0 * M));
    d.growth_bound = measure_growth_bound(d.eval, d.working_box, 128);
    return Field(std::move(d));
}

Regularized modify_at_infinity(const Field& field, double M, double c, const ModifyOptions& opts)
{
    const PairSet pairs = sample_pairs(Box::square(5.0 * M), opts.n_pairs, opts.seed);
    int retries = 0;
    for (;;) {
        Regularized out{modified_field(field, M, c), {}};
        RegularizationReport& rep = out.report;
        rep.stage = "modify";
        rep.M = M;
        rep.c = c;
        rep.retries = retries;
        const Field& g = out.field;

        std::mt19937_64 rng(opts.seed ^ 0x9e3779b97f4a7c15ULL);
        {
            RegularizationCheck chk;
            chk.name = "equal_inside_ball";
            for (int k = 0; k < 2000; ++k) {
                Vec2 x = random_in_disk(rng, 0.0, M);
                if (k % 10 == 0) x *= M / x.norm();   // on the sphere itself
                const double diff = (g(x) - field(x)).norm();
                if (diff >= chk.worst_value) {
                    chk.worst_value = diff;
                    chk.worst_point = x;
                }
            }
            chk.n_checked = 2000;
            chk.pass = chk.worst_value == 0.0;
            rep.checks.push_back(chk);
        }
        rep.checks.push_back(monotone_check(g, pairs));

        {
            RegularizationCheck chk;
            chk.name = "outer_jacobian_bounds";
            chk.worst_value = kInf;
            bool ok = true;
            for (int k = 0; k < 400; ++k) {
                const Vec2 x = random_in_disk(rng, 4.0 * M * (1.0 + 1e-9), 6.0 * M);
                const JacobianResult jr = jacobian(g, x, 1e-6 * (1.0 + x.norm()));
                const double lo = jr.sym_eigenvalues.x() / c;
                const double op = jr.matrix.operatorNorm() / c;
                if (lo < chk.worst_value) {
                    chk.worst_value = lo;
                    chk.worst_point = x;
                }
                ok = ok && lo >= 1.0 - 1e-6 && op <= 4.0;
            }
            chk.n_checked = 400;
            chk.pass = ok;
            rep.checks.push_back(chk);
        }
        {
            RegularizationCheck chk;
            chk.name = "linear_growth";
            rep.L = std::max(measure_growth_bound(g, Box::square(4.0 * M), 128), c);
            for (int k = 0; k < 2000; ++k) {
                const Vec2 x = random_in_disk(rng, 0.0, 10.0 * M);
                const double q = g(x).norm() / (1.0 + x.norm()) / rep.L;
                if (q >= chk.worst_value) {
                    chk.worst_value = q;
                    chk.worst_point = x;
                }
            }
            chk.n_checked = 2000;
            chk.pass = chk.worst_value <= 1.01;
            rep.checks.push_back(chk);
        }

        const bool monotone = rep.check("monotone").pass;
        if (monotone || !opts.auto_retry || retries >= opts.max_retries) return out;
        c *= 2.0;
        ++retries;
    }
}

// ---------------------------------------------------------------------------
// Mollification

void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights)
{
    if (n < 1) throw ConfigError("Gauss-Legendre order must be positive");
    // Golub-Welsch: eigen-decomposition of the Jacobi matrix
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
    for (int i = 1; i < n; ++i) {
        const double b = i / std::sqrt(4.0 * i * i - 1.0);
        J(i, i - 1) = J(i - 1, i) = b;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
    nodes.resize(n);
    weights.resize(n);
    for (int i = 0; i < n; ++i) {
        nodes[i] = es.eigenvalues()(i);
        const double v = es.eigenvectors()(0, i);
        weights[i] = 2.0 * v * v;
    }
    // exact symmetry of the rule
    for (int i = 0; i < n / 2; ++i) {
        const double x = 0.5 * (nodes[n - 1 - i] - nodes[i]);
        const double w = 0.5 * (weights[i] + weights[n - 1 - i]);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = weights[n - 1 - i] = w;
    }
    if (n % 2 == 1) nodes[n / 2] = 0.0;
}

MollifierRule mollifier_rule(int order)
{
    std::vector<double> x, w;
    gauss_legendre(order, x, w);
    MollifierRule rule;
    double total = 0.0;
    for (int j = 0; j < order; ++j) {
        for (int i = 0; i < order; ++i) {
            const double r2 = x[i] * x[i] + x[j] * x[j];
            if (r2 >= 1.0) continue;
            const double wt = w[i] * w[j] * std::exp(-1.0 / (1.0 - r2));
            rule.nodes.emplace_back(x[i], x[j]);
            rule.weights.push_back(wt);
            total += wt;
        }
    }
    for (double& wt : rule.weights) wt /= total;
    return rule;
}

Field mollified_field(const Field& field, double eps, int order)
{
    if (!(eps > 0.0 && eps < 1.0)) throw ConfigError("mollify needs eps in (0, 1)");
    auto rule = std::make_shared<const MollifierRule>(mollifier_rule(order));
    Field::Data d;
    d.name = "mollified(" + field.name() + ")";
    d.kind = FieldKind::mollified;
    d.eval = [field, eps, rule](const Vec2& x) -> Vec2 {
        Vec2 s = Vec2::Zero();
        for (std::size_t k = 0; k < rule->nodes.size(); ++k) s += rule->weights[k] * field(x - eps * rule->nodes[k]);
        return s + eps * x;
    };
    if (field.has_jacobian()) {
        // derivative of the quadrature sum itself
        d.jacobian = [field, eps, rule](const Vec2& x) -> Mat2 {
            Mat2 s = Mat2::Zero();
            for (std::size_t k = 0; k < rule->nodes.size(); ++k)
                s += rule->weights[k] * field.analytic_jacobian(x - eps * rule->nodes[k]);
            return s + eps * Mat2::Identity();
        };
    }
    if (field.is_gradient()) {
        d.potential = [field, eps, rule](const Vec2& x) {
            double s = 0.0;
            for (std::size_t k = 0; k < rule->nodes.size(); ++k)
                s += rule->weights[k] * field.potential(x - eps * rule->nodes[k]);
            return s + 0.5 * eps * x.squaredNorm();
        };
    }
    d.working_box = field.working_box();
    d.growth_bound = measure_growth_bound(d.eval, d.working_box, 64);
    return Field(std::move(d));
}

namespace {

RegularizationCheck omega_check(const Field& base, const Field& smooth, const PairSet& pairs,
                                const std::vector<double>& ts)
{
    RegularizationCheck chk;
    chk.name = "omega_dominates";
    chk.worst_value = kInf;
    for (double t : ts) {
        const double wb = monotony_modulus(base, t, pairs);
        const double ws = monotony_modulus(smooth, t, pairs);
        if (!std::isfinite(wb)) continue;
        const double diff = ws - wb;
        if (diff < chk.worst_value) {
            chk.worst_value = diff;
            chk.worst_point = Vec2(t, 0.0);
        }
        ++chk.n_checked;
    }
    chk.pass = chk.worst_value >= -1e-10;
    return chk;
}

// <G_eps(a)-G_eps(b), a-b> >= omega_G(|a-b|-) - 1e-8. The left limit of the sampled
// modulus is the minimum over pairs with separation >= |a-b|, the pair itself included.
RegularizationCheck monotone_vs_omega(const Field& base, const Field& smooth, const PairSet& pairs)
{
    const std::size_t n = pairs.size();
    std::vector<double> sep(n), inner_base(n), inner_smooth(n);
    for (std::size_t k = 0; k < n; ++k) {
        const Vec2 d = pairs.a[k] - pairs.b[k];
        sep[k] = d.norm();
        inner_base[k] = (base(pairs.a[k]) - base(pairs.b[k])).dot(d);
        inner_smooth[k] = (smooth(pairs.a[k]) - smooth(pairs.b[k])).dot(d);
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return sep[i] < sep[j]; });
    // suffix minimum over the sorted order
    std::vector<double> suffix(n + 1, kInf);
    for (std::size_t r = n; r-- > 0;) suffix[r] = std::min(suffix[r + 1], inner_base[order[r]]);
    RegularizationCheck chk;
    chk.name = "monotone_vs_omega";
    chk.worst_value = kInf;
    std::size_t r = 0;
    for (std::size_t q = 0; q < n; ++q) {
        const std::size_t k = order[q];
        while (r < n && sep[order[r]] < sep[k]) ++r;
        const double omega = suffix[r];
        if (!std::isfinite(omega)) continue;
        const double margin = inner_smooth[k] - omega;
        if (margin < chk.worst_value) {
            chk.worst_value = margin;
            chk.worst_point = pairs.a[k];
        }
        if (margin < -1e-8 && chk.counterexamples.size() < kMaxCounterexamples) {
            chk.counterexamples.push_back(pairs.a[k]);
            chk.counterexamples.push_back(pairs.b[k]);
        }
        ++chk.n_checked;
    }
    chk.pass = chk.worst_value >= -1e-8;
    return chk;
}

}  // namespace

Regularized mollify(const Field& field, double eps, const MollifyOptions& opts)
{
    Regularized out{mollified_field(field, eps, opts.order), {}};
    RegularizationReport& rep = out.report;
    rep.stage = "mollify";
    rep.eps = eps;
    rep.L = out.field.growth_bound();
    if (!opts.run_checks) return out;
    const Field& g = out.field;
    const Box& box = field.working_box();
    std::mt19937_64 rng(opts.seed);

    {
        const Field ref = mollified_field(field, eps, opts.check_order);
        RegularizationCheck chk;
        chk.name = "quadrature";
        for (std::size_t k = 0; k < opts.n_quadrature_checks; ++k) {
            const Vec2 x = random_in_box(rng, box);
            const Vec2 gr = ref(x);
            const double err = (g(x) - gr).norm() / (1.0 + gr.norm());
            if (err >= chk.worst_value) {
                chk.worst_value = err;
                chk.worst_point = x;
            }
        }
        chk.n_checked = opts.n_quadrature_checks;
        chk.pass = chk.worst_value <= opts.quadrature_tol;
        rep.checks.push_back(chk);
    }
    const PairSet pairs = sample_pairs(box, opts.n_pairs, opts.seed + 1);
    {
        RegularizationCheck chk;
        chk.name = "strong_monotonicity";
        const auto cst = strong_monotonicity_constant(g, pairs);
        chk.worst_value = cst.value_or(kInf);
        chk.n_checked = pairs.size();
        chk.pass = cst.has_value();
        rep.checks.push_back(chk);
    }
    rep.checks.push_back(omega_check(field, g, pairs, opts.omega_t));
    {
        RegularizationCheck chk;
        chk.name = "linear_growth";
        const double L = field.growth_bound();
        for (int k = 0; k < 2000; ++k) {
            const Vec2 x = random_in_box(rng, box);
            const double q = g(x).norm() / (2.0 * L * (1.0 + x.norm()));
            if (q >= chk.worst_value) {
                chk.worst_value = q;
                chk.worst_point = x;
            }
        }
        chk.n_checked = 2000;
        chk.pass = chk.worst_value <= 1.0;
        rep.checks.push_back(chk);
    }
    {
        // |G_eps - G| <= max_k |G(x - eps y_k) - G(x)| + eps |x| holds for any averaging rule
        const MollifierRule rule = mollifier_rule(opts.order);
        RegularizationCheck chk;
        chk.name = "uniform_distance";
        bool ok = true;
        for (int k = 0; k < 500; ++k) {
            const Vec2 x = random_in_box(rng, box);
            const Vec2 gx = field(x);
            double osc = 0.0;
            for (const Vec2& y : rule.nodes) osc = std::max(osc, (field(x - eps * y) - gx).norm());
            const double dist = (g(x) - gx).norm();
            if (dist >= chk.worst_value) {
                chk.worst_value = dist;
                chk.worst_point = x;
            }
            ok = ok && dist <= (osc + eps * x.norm()) * (1.0 + 1e-12) + 1e-14;
        }
        chk.n_checked = 500;
        chk.pass = ok;
        rep.checks.push_back(chk);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Grid verification

std::vector<RegularizationCheck> transfer_checks(const DegeneracyGrid& base, const DegeneracyGrid& smooth,
                                                 double eps)
{
    if (base.nx != smooth.nx || base.ny != smooth.ny || base.h != smooth.h || base.box.lo != smooth.box.lo ||
        base.ladders.lambda != smooth.ladders.lambda || base.ladders.Lambda != smooth.ladders.Lambda)
        throw Error("transfer check needs both fields classified on the same grid");
    const double h = base.h;
    const int r = int(std::floor(2.0 * eps / h + 1e-9));
    std::vector<std::pair<int, int>> ball;
    for (int dj = -r; dj <= r; ++dj)
        for (int di = -r; di <= r; ++di)
            if ((di * di + dj * dj) * h * h <= 4.0 * eps * eps * (1.0 + 1e-12)) ball.emplace_back(di, dj);

    RegularizationCheck co, cv;
    co.name = "transfer_O";
    cv.name = "transfer_V";
    co.worst_value = cv.worst_value = kInf;
    for (int j = r; j < base.ny - r; ++j) {
        for (int i = r; i < base.nx - r; ++i) {
            int kO = 0, kV = 0;
            bool inO = true, inV = true;
            for (const auto& [di, dj] : ball) {
                const std::size_t q = base.index(i + di, j + dj);
                if (base.o_level[q] < 0) inO = false; else kO = std::max(kO, base.o_level[q]);
                if (base.v_level[q] < 0) inV = false; else kV = std::max(kV, base.v_level[q]);
            }
            const std::size_t idx = base.index(i, j);
            const Vec2 node = base.node(i, j);
            if (inO) {
                const double lam = base.ladders.lambda[kO];
                const double m = smooth.d_quot[idx] / lam - 1.0;
                ++co.n_checked;
                if (m < co.worst_value) {
                    co.worst_value = m;
                    co.worst_point = node;
                }
                if (m < -1e-9 && co.counterexamples.size() < kMaxCounterexamples) co.counterexamples.push_back(node);
            }
            if (inV) {
                const double target = 1.0 / (base.ladders.Lambda[kV] + eps);
                const double m = smooth.s_quot[idx] / target - 1.0;
                ++cv.n_checked;
                if (m < cv.worst_value) {
                    cv.worst_value = m;
                    cv.worst_point = node;
                }
                if (m < -1e-9 && cv.counterexamples.size() < kMaxCounterexamples) cv.counterexamples.push_back(node);
            }
        }
    }
    co.pass = co.worst_value >= -1e-9;
    cv.pass = cv.worst_value >= -1e-9;
    return {co, cv};
}


RegularizationReport verify_regularization(const Field& base, const Field& smooth, double eps,
                                           const DegeneracyGrid& base_grid,
                                           const DegeneracyGrid& smooth_grid, const MollifyOptions& opts)
{
    RegularizationReport rep;
    rep.stage = "verify";
    rep.eps = eps;
    rep.L = smooth.growth_bound();
    for (auto& c : transfer_checks(base_grid, smooth_grid, eps)) rep.checks.push_back(std::move(c));
    const PairSet pairs = sample_pairs(base.working_box(), opts.n_pairs, opts.seed + 2);
    rep.checks.push_back(omega_check(base, smooth, pairs, opts.omega_t));
    rep.checks.push_back(monotone_vs_omega(base, smooth, pairs));
    return rep;
}

RegularizationReport verify_regularization(const Field& base, const Field& smooth, double eps,
                                           const GridSpec& spec, const MollifyOptions& opts, Exec exec)
{
    const DegeneracyGrid gb = classify_grid(base, spec, exec);
    const DegeneracyGrid gs = classify_grid(smooth, spec, exec);
    return verify_regularization(base, smooth, eps, gb, gs, opts);
}

}  // namespace degen
