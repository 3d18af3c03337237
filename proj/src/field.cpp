#include "degen/field.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>
#include <vector>

namespace degen {

std::string to_string(FieldKind kind)
{
    switch (kind) {
    case FieldKind::identity_scaled: return "identity-scaled";
    case FieldKind::p_laplacian: return "p-laplacian";
    case FieldKind::radial_gradient: return "radial-gradient";
    case FieldKind::kink_circle: return "kink-circle";
    case FieldKind::quartic_quartroot: return "quartic-quartroot";
    case FieldKind::custom: return "custom";
    case FieldKind::modified: return "modified";
    case FieldKind::mollified: return "mollified";
    case FieldKind::dual: return "dual";
    }
    return "unknown";
}

Field::Field(Data data) : data_(std::make_shared<const Data>(std::move(data)))
{
    if (!data_->eval) throw Error("field '" + data_->name + "' has no evaluation rule");
}

Vec2 Field::eval(const Vec2& xi) const
{
    const Vec2 g = data_->eval(xi);
    if (!all_finite(g))
        throw Error("field '" + data_->name + "' produced a non-finite value; malformed rule");
    return g;
}

double Field::potential(const Vec2& xi) const
{
    if (!data_->potential) throw Error("field '" + data_->name + "' is not declared a gradient");
    return data_->potential(xi);
}

double measure_growth_bound(const Field::EvalRule& eval, const Box& box, int n)
{
    double worst = 0.0;
    for (int j = 0; j <= n; ++j) {
        for (int i = 0; i <= n; ++i) {
            const Vec2 x((box.lo.x() * (n - i) + box.hi.x() * i) / n,
                         (box.lo.y() * (n - j) + box.hi.y() * j) / n);
            worst = std::max(worst, eval(x).norm() / (1.0 + x.norm()));
        }
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Builtins

Field make_identity_scaled(double c, Box box)
{
    if (!(c > 0.0)) throw ConfigError("identity-scaled field needs c > 0");
    Field::Data d;
    d.name = c == 1.0 ? "identity" : "identity-scaled";
    d.kind = FieldKind::identity_scaled;
    d.eval = [c](const Vec2& x) -> Vec2 { return c * x; };
    d.jacobian = [c](const Vec2&) -> Mat2 { return c * Mat2::Identity(); };
    d.potential = [c](const Vec2& x) { return 0.5 * c * x.squaredNorm(); };
    d.radial = true;
    d.growth_bound = c;
    d.working_box = box;
    return Field(std::move(d));
}

Field make_p_laplacian(double p, Box box)
{
    if (!(p > 1.0)) throw ConfigError("p-laplacian needs p > 1");
    Field::Data d;
    d.name = "p-laplacian";
    d.kind = FieldKind::p_laplacian;
    d.eval = [p](const Vec2& x) -> Vec2 {
        const double r = x.norm();
        if (r == 0.0) return Vec2::Zero();
        return std::pow(r, p - 2.0) * x;
    };
    d.jacobian = [p](const Vec2& x) -> Mat2 {
        const double r = x.norm();
        if (r == 0.0) {
            if (p > 2.0) return Mat2::Zero();
            if (p == 2.0) return Mat2::Identity();
            return Mat2::Constant(kInf);
        }
        const Vec2 e = x / r;
        return std::pow(r, p - 2.0) * (Mat2::Identity() + (p - 2.0) * e * e.transpose());
    };
    d.potential = [p](const Vec2& x) { return std::pow(x.norm(), p) / p; };
    d.radial = true;
    d.working_box = box;
    d.growth_bound = measure_growth_bound(d.eval, box);
    return Field(std::move(d));
}

namespace {

constexpr double kKinkStep = 1e-6;

double radial_second(const RadialProfile& prof, double r)
{
    for (double rk : prof.kinks) {
        if (std::abs(r - rk) < kKinkStep) {
            if (r < rk) return (prof.dphi(r) - prof.dphi(r - kKinkStep)) / kKinkStep;
            return (prof.dphi(r + kKinkStep) - prof.dphi(r)) / kKinkStep;
        }
    }
    if (prof.ddphi) return prof.ddphi(r);
    const double h = std::max(kKinkStep, 1e-6 * r);
    if (r > h) return (prof.dphi(r + h) - prof.dphi(r - h)) / (2.0 * h);
    return (prof.dphi(r + h) - prof.dphi(r)) / h;
}

void check_increasing(const RadialProfile& prof, double r_max)
{
    if (std::abs(prof.dphi(0.0)) > 1e-12) throw ConfigError("radial profile needs phi'(0) = 0");
    constexpr int n = 2000;
    double prev = prof.dphi(0.0);
    for (int i = 1; i <= n; ++i) {
        const double r = r_max * i / n;
        const double v = prof.dphi(r);
        if (!(v > prev)) throw ConfigError("radial profile phi' must be strictly increasing");
        prev = v;
    }
}

}  // namespace

Field make_radial(std::string name, RadialProfile profile, Box box)
{
    const double r_max = box.inflated(box.diameter()).diameter();
    check_increasing(profile, r_max);
    auto prof = std::make_shared<const RadialProfile>(std::move(profile));
    Field::Data d;
    d.name = std::move(name);
    d.kind = FieldKind::radial_gradient;
    d.eval = [prof](const Vec2& x) -> Vec2 {
        const double r = x.norm();
        if (r == 0.0) return Vec2::Zero();
        return (prof->dphi(r) / r) * x;
    };
    d.jacobian = [prof](const Vec2& x) -> Mat2 {
        const double r = x.norm();
        if (r < 1e-12) return radial_second(*prof, 0.0) * Mat2::Identity();
        const Vec2 e = x / r;
        const Mat2 radial = e * e.transpose();
        return radial_second(*prof, r) * radial + (prof->dphi(r) / r) * (Mat2::Identity() - radial);
    };
    if (prof->phi) d.potential = [prof](const Vec2& x) { return prof->phi(x.norm()); };
    d.kink_radii = prof->kinks;
    d.radial = true;
    d.working_box = box;
    d.growth_bound = measure_growth_bound(d.eval, box);
    return Field(std::move(d));
}

Field make_kink_circle(Box box)
{
    RadialProfile prof;
    prof.dphi = [](double r) {
        if (r <= 1.0) {
            const double s = 1.0 - r;
            return 1.0 - s * s * s;
        }
        return 1.0 + std::cbrt(r - 1.0);
    };
    prof.ddphi = [](double r) {
        if (r <= 1.0) return 3.0 * (1.0 - r) * (1.0 - r);
        const double c = std::cbrt(r - 1.0);
        return 1.0 / (3.0 * c * c);
    };
    prof.phi = [](double r) {
        if (r <= 1.0) {
            const double s = 1.0 - r;
            return r - 0.25 * (1.0 - s * s * s * s);
        }
        const double t = r - 1.0;
        return 0.75 + t + 0.75 * t * std::cbrt(t);
    };
    prof.kinks = {1.0};
    Field f = make_radial("kink-circle", std::move(prof), box);
    Field::Data d = f.data();
    d.kind = FieldKind::kink_circle;
    return Field(std::move(d));
}

Field make_piecewise_linear_radial(const std::vector<std::pair<double, double>>& knots, Box box)
{
    if (knots.empty()) throw ConfigError("radial-gradient needs at least one knot");
    std::vector<double> r{0.0}, v{0.0};
    for (const auto& [ri, vi] : knots) {
        if (!(ri > r.back())) throw ConfigError("radial-gradient knot radii must increase from 0");
        if (!(vi > v.back())) throw ConfigError("radial profile phi' must be strictly increasing");
        r.push_back(ri);
        v.push_back(vi);
    }
    // cumulative integral of phi' at each knot
    std::vector<double> cum{0.0};
    for (std::size_t i = 1; i < r.size(); ++i)
        cum.push_back(cum.back() + 0.5 * (v[i] + v[i - 1]) * (r[i] - r[i - 1]));

    auto segment = [r](double x) {
        const auto it = std::upper_bound(r.begin(), r.end(), x);
        const std::size_t i = static_cast<std::size_t>(std::distance(r.begin(), it));
        return std::min(std::max<std::size_t>(i, 1), r.size() - 1) - 1;
    };
    RadialProfile prof;
    prof.dphi = [r, v, segment](double x) {
        const std::size_t i = segment(x);
        const double slope = (v[i + 1] - v[i]) / (r[i + 1] - r[i]);
        return v[i] + slope * (x - r[i]);
    };
    prof.ddphi = [r, v, segment](double x) {
        const std::size_t i = segment(x);
        return (v[i + 1] - v[i]) / (r[i + 1] - r[i]);
    };
    prof.phi = [r, v, cum, segment](double x) {
        const std::size_t i = segment(x);
        const double slope = (v[i + 1] - v[i]) / (r[i + 1] - r[i]);
        const double t = x - r[i];
        return cum[i] + v[i] * t + 0.5 * slope * t * t;
    };
    prof.kinks.assign(r.begin() + 1, r.end());
    return make_radial("radial-gradient", std::move(prof), box);
}

Field make_quartic_quartroot(Box box)
{
    Field::Data d;
    d.name = "quartic-quartroot";
    d.kind = FieldKind::quartic_quartroot;
    d.eval = [](const Vec2& x) -> Vec2 { return Vec2(x.x() * x.x() * x.x(), std::cbrt(x.y())); };
    d.jacobian = [](const Vec2& x) -> Mat2 {
        Mat2 j = Mat2::Zero();
        j(0, 0) = 3.0 * x.x() * x.x();
        const double c = std::cbrt(x.y());
        j(1, 1) = 1.0 / (3.0 * c * c);  // +inf on the axis; callers fall back to differences
        return j;
    };
    d.potential = [](const Vec2& x) {
        const double a = x.x() * x.x();
        return 0.25 * a * a + 0.75 * std::abs(x.y()) * std::cbrt(std::abs(x.y()));
    };
    d.working_box = box;
    d.growth_bound = measure_growth_bound(d.eval, box);
    return Field(std::move(d));
}

Field make_custom(std::string name, Field::EvalRule eval, Box box,
                  std::optional<Field::JacobianRule> jacobian)
{
    Field::Data d;
    d.name = std::move(name);
    d.kind = FieldKind::custom;
    d.eval = std::move(eval);
    if (jacobian) d.jacobian = std::move(*jacobian);
    d.working_box = box;
    d.growth_bound = measure_growth_bound(d.eval, box);
    return Field(std::move(d));
}

Field make_builtin(const BuiltinSpec& spec)
{
    if (spec.name == "identity") return make_identity_scaled(1.0, spec.working_box);
    if (spec.name == "identity-scaled") return make_identity_scaled(spec.c, spec.working_box);
    if (spec.name == "p-laplacian") return make_p_laplacian(spec.p, spec.working_box);
    if (spec.name == "kink-circle") return make_kink_circle(spec.working_box);
    if (spec.name == "quartic-quartroot") return make_quartic_quartroot(spec.working_box);
    if (spec.name == "radial-gradient") return make_piecewise_linear_radial(spec.knots, spec.working_box);
    throw ConfigError("unknown builtin field '" + spec.name + "'");
}

// ---------------------------------------------------------------------------
// Jacobians

Mat2 fd_jacobian(const Field& field, const Vec2& xi, double h)
{
    Mat2 j;
    for (int k = 0; k < 2; ++k) {
        Vec2 e = Vec2::Zero();
        e[k] = h;
        j.col(k) = (field(xi + e) - field(xi - e)) / (2.0 * h);
    }
    return j;
}

JacobianResult jacobian(const Field& field, const Vec2& xi, double h, double kink_ratio)
{
    if (!(h > 0.0)) throw Error("jacobian step must be positive");
    JacobianResult res;
    if (field.has_jacobian()) {
        const Mat2 j = field.analytic_jacobian(xi);
        if (all_finite(j)) {
            res.matrix = j;
            res.analytic = true;
        }
    }
    const Vec2 g0 = field(xi);
    for (int k = 0; k < 2; ++k) {
        Vec2 e = Vec2::Zero();
        e[k] = h;
        const Vec2 fwd = (field(xi + e) - g0) / h;
        const Vec2 bwd = (g0 - field(xi - e)) / h;
        const double nf = fwd.norm();
        const double nb = bwd.norm();
        const double gap = (fwd - bwd).norm();
        if (std::max(nf, nb) > kink_ratio * std::min(nf, nb) && gap > 1e-6 * (1.0 + g0.norm()))
            res.near_kink = true;
        if (!res.analytic) res.matrix.col(k) = 0.5 * (fwd + bwd);
    }
    res.symmetric = sym_part(res.matrix);
    res.sym_eigenvalues = sym_eigenvalues(res.symmetric);
    return res;
}

// ---------------------------------------------------------------------------
// Pair sampling and monotonicity estimates

PairSet sample_pairs(const Box& box, std::size_t n, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double diam = box.diameter();
    PairSet out;
    out.a.reserve(n);
    out.b.reserve(n);
    while (out.size() < n) {
        const Vec2 a(box.lo.x() + unit(rng) * (box.hi.x() - box.lo.x()),
                     box.lo.y() + unit(rng) * (box.hi.y() - box.lo.y()));
        const double r = diam * std::pow(10.0, -3.0 * unit(rng));
        const double th = 2.0 * kPi * unit(rng);
        const Vec2 b = a + r * Vec2(std::cos(th), std::sin(th));
        if (!box.contains(b)) continue;
        out.a.push_back(a);
        out.b.push_back(b);
    }
    return out;
}

PairSet lattice_pairs(const Box& box, int n_lattice, double min_sep, int n_scales, int n_dirs)
{
    PairSet out;
    const double max_sep = 0.25 * box.diameter();
    const int m = n_lattice - 1;
    for (int j = 0; j <= m; ++j) {
        for (int i = 0; i <= m; ++i) {
            const Vec2 a((box.lo.x() * (m - i) + box.hi.x() * i) / m,
                         (box.lo.y() * (m - j) + box.hi.y() * j) / m);
            for (int s = 0; s < n_scales; ++s) {
                const double r = max_sep * std::pow(min_sep / max_sep, double(s) / (n_scales - 1));
                for (int k = 0; k < n_dirs; ++k) {
                    const double th = 2.0 * kPi * k / n_dirs;
                    const Vec2 b = a + r * Vec2(std::cos(th), std::sin(th));
                    if (!box.contains(b)) continue;
                    out.a.push_back(a);
                    out.b.push_back(b);
                }
            }
        }
    }
    return out;
}

MonotonicityViolation worst_monotonicity(const Field& field, const PairSet& pairs)
{
    MonotonicityViolation worst{Vec2::Zero(), Vec2::Zero(), kInf};
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        const Vec2 dx = pairs.a[k] - pairs.b[k];
        const double v = (field(pairs.a[k]) - field(pairs.b[k])).dot(dx);
        if (v < worst.value) worst = {pairs.a[k], pairs.b[k], v};
    }
    return worst;
}

double monotony_modulus(const Field& field, double t, const PairSet& pairs)
{
    if (!(t > 0.0)) throw Error("monotony modulus needs t > 0");
    double best = kInf;
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        const Vec2 dx = pairs.a[k] - pairs.b[k];
        if (!(dx.norm() > t)) continue;
        best = std::min(best, (field(pairs.a[k]) - field(pairs.b[k])).dot(dx));
    }
    return best;
}

double monotony_modulus(const Field& field, double t, const Box& box, std::size_t n_samples,
                        std::uint64_t seed)
{
    return monotony_modulus(field, t, sample_pairs(box, n_samples, seed));
}

std::optional<double> strong_monotonicity_constant(const Field& field, const PairSet& pairs, double cap)
{
    double worst = 0.0;
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        const Vec2 dx = pairs.a[k] - pairs.b[k];
        const Vec2 dg = field(pairs.a[k]) - field(pairs.b[k]);
        const double inner = dg.dot(dx);
        const double num = dx.squaredNorm() + dg.squaredNorm();
        if (num == 0.0) continue;
        if (!(inner > 0.0)) return std::nullopt;
        worst = std::max(worst, num / inner);
        if (worst > cap) return std::nullopt;
    }
    return worst;
}

std::optional<double> strong_monotonicity_constant(const Field& field, const Box& box,
                                                   std::size_t n_samples, std::uint64_t seed,
                                                   double cap)
{
    PairSet pairs = sample_pairs(box, n_samples, seed);
    const PairSet probe = lattice_pairs(box, 21, 1e-6, 12, 8);
    pairs.a.insert(pairs.a.end(), probe.a.begin(), probe.a.end());
    pairs.b.insert(pairs.b.end(), probe.b.begin(), probe.b.end());
    return strong_monotonicity_constant(field, pairs, cap);
}

MonotonicityReport monotonicity_report(const Field& field, const Box& box,
                                       const std::vector<double>& gaps, std::size_t n_samples,
                                       std::uint64_t seed)
{
    MonotonicityReport rep;
    const PairSet pairs = sample_pairs(box, n_samples, seed);
    std::vector<double> ts = gaps;
    std::sort(ts.begin(), ts.end());
    for (double t : ts) rep.omega_samples.emplace_back(t, monotony_modulus(field, t, pairs));
    rep.strong_constant = strong_monotonicity_constant(field, box, n_samples, seed);
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        const Vec2 dx = pairs.a[k] - pairs.b[k];
        rep.lipschitz_estimate = std::max(
            rep.lipschitz_estimate, (field(pairs.a[k]) - field(pairs.b[k])).norm() / dx.norm());
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Ellipticity quotients

QuotientOptions QuotientOptions::defaults()
{
    QuotientOptions o;
    for (int k = 0; k < 8; ++k) o.radii.push_back(1e-3 * std::pow(2.0, 7 - k));
    return o;
}

std::vector<Vec2> quotient_offsets(const QuotientOptions& opts)
{
    if (opts.n_directions < 1 || opts.radii.empty()) throw Error("quotient sampling is empty");
    std::vector<Vec2> out;
    out.reserve(opts.radii.size() * opts.n_directions);
    for (double rho : opts.radii) {
        if (!(rho > 0.0)) throw Error("quotient radii must be positive");
        for (int k = 0; k < opts.n_directions; ++k) {
            const double th = 2.0 * kPi * k / opts.n_directions;
            out.push_back(rho * Vec2(std::cos(th), std::sin(th)));
        }
    }
    return out;
}

Quotients ellipticity_quotients(const Field& field, const Vec2& xi, const std::vector<Vec2>& offsets,
                                double s_guard)
{
    Quotients q;
    const Vec2 g0 = field(xi);
    const double guard2 = s_guard * s_guard;
    for (const Vec2& z : offsets) {
        const Vec2 dg = field(xi + z) - g0;
        const double inner = dg.dot(z);
        q.d_quot = std::min(q.d_quot, inner / z.squaredNorm());
        const double n2 = dg.squaredNorm();
        if (n2 >= guard2) q.s_quot = std::min(q.s_quot, inner / n2);
    }
    return q;
}

Quotients ellipticity_quotients(const Field& field, const Vec2& xi, const QuotientOptions& opts)
{
    return ellipticity_quotients(field, xi, quotient_offsets(opts), opts.s_guard);
}

// ---------------------------------------------------------------------------
// Inversion and duality

Inversion invert(const Field& field, const Vec2& target, const Vec2& guess, const NewtonOptions& opts)
{
    Inversion out;
    Vec2 x = guess;
    Vec2 r = field(x) - target;
    double f = 0.5 * r.squaredNorm();
    double last_step = kInf;
    const double rtol = opts.residual_tol * (1.0 + target.norm());
    for (int it = 0; it < opts.max_iter; ++it) {
        out.iterations = it;
        if (f == 0.0 || (r.lpNorm<Eigen::Infinity>() <= rtol && last_step <= opts.step_tol * (1.0 + x.norm()))) {
            out.converged = true;
            break;
        }
        auto newton_dir = [&](const Mat2& j, Vec2& d) {
            const double det = j.determinant();
            if (!std::isfinite(det) || std::abs(det) <= 1e-300) return false;
            d = -j.inverse() * r;
            return all_finite(d);
        };
        auto search = [&](const Vec2& dir) {
            for (double t = 1.0; t > 1e-14; t *= 0.5) {
                const Vec2 xn = x + t * dir;
                const Vec2 rn = field(xn) - target;
                const double fn = 0.5 * rn.squaredNorm();
                if (fn <= (1.0 - 1e-4 * t) * f) {
                    last_step = (xn - x).norm();
                    x = xn;
                    r = rn;
                    f = fn;
                    return true;
                }
            }
            return false;
        };
        // analytic Newton, then finite-difference Newton, then the residual direction
        Vec2 dir;
        bool accepted = field.has_jacobian() && newton_dir(field.analytic_jacobian(x), dir) && search(dir);
        if (!accepted && newton_dir(fd_jacobian(field, x, opts.fd_step * (1.0 + x.norm())), dir))
            accepted = search(dir);
        if (!accepted) accepted = search(-r);
        if (!accepted) {
            out.iterations = it + 1;
            // stagnation at round-off: accept when the residual is already small
            out.converged = r.lpNorm<Eigen::Infinity>() <= rtol;
            break;
        }
        out.iterations = it + 1;
    }
    if (!out.converged && f == 0.0) out.converged = true;
    out.x = x;
    out.residual = r.lpNorm<Eigen::Infinity>();
    return out;
}

/// Read-mostly lattice of cell-centre inverses in target space. Each slot is
/// claimed once and published with release semantics; entries depend only on
/// the cell, so results do not depend on evaluation order.
class WarmStartCache {
public:
    /// Warm guess from the cell-centre lattice, or the target itself when that is closer.
    Vec2 best_guess(const Field& base, const Vec2& target, const NewtonOptions& opts)
    {
        const Vec2 warm = guess(base, target, opts);
        if ((base(target) - target).squaredNorm() < (base(warm) - target).squaredNorm()) return target;
        return warm;
    }

    explicit WarmStartCache(double cell) : cell_(cell), slots_(new Slot[kSlots]) {}

    Vec2 guess(const Field& base, const Vec2& target, const NewtonOptions& opts)
    {
        const std::int64_t kx = std::llround(target.x() / cell_);
        const std::int64_t ky = std::llround(target.y() / cell_);
        const Vec2 centre(double(kx) * cell_, double(ky) * cell_);
        const std::uint64_t h = (std::uint64_t(kx) * 0x9E3779B97F4A7C15ull) ^ (std::uint64_t(ky) * 0xC2B2AE3D27D4EB4Full);
        for (int probe = 0; probe < kProbes; ++probe) {
            Slot& s = slots_[(h + probe) & (kSlots - 1)];
            const int st = s.state.load(std::memory_order_acquire);
            if (st == 2 && s.kx == kx && s.ky == ky) return Vec2(s.x0, s.x1);
            if (st == 0) {
                const Vec2 x = invert(base, centre, centre, opts).x;
                int expected = 0;
                if (s.state.compare_exchange_strong(expected, 1, std::memory_order_acq_rel)) {
                    s.kx = kx;
                    s.ky = ky;
                    s.x0 = x.x();
                    s.x1 = x.y();
                    s.state.store(2, std::memory_order_release);
                }
                return x;
            }
        }
        return invert(base, centre, centre, opts).x;
    }

private:
    static constexpr std::size_t kSlots = 1u << 16;
    static constexpr int kProbes = 8;
    struct Slot {
        std::atomic<int> state{0};
        std::int64_t kx = 0, ky = 0;
        double x0 = 0.0, x1 = 0.0;
    };
    double cell_;
    std::unique_ptr<Slot[]> slots_;
};

DualField::DualField(Field base, NewtonOptions opts)
    : base_(std::move(base)), opts_(opts), cache_(std::make_shared<WarmStartCache>(opts.warm_cell))
{
    Field::Data d;
    d.name = "dual(" + base_.name() + ")";
    d.kind = FieldKind::dual;
    const Field b = base_;
    const NewtonOptions o = opts_;
    const std::shared_ptr<WarmStartCache> cache = cache_;
    d.eval = [b, o, cache](const Vec2& eta) -> Vec2 {
        const Vec2 target = rot90_inv(eta);
        return rot90(invert(b, target, cache->best_guess(b, target, o), o).x);
    };
    if (base_.has_jacobian()) {
        d.jacobian = [b, o, cache](const Vec2& eta) -> Mat2 {
            const Vec2 target = rot90_inv(eta);
            const Vec2 x = invert(b, target, cache->best_guess(b, target, o), o).x;
            const Mat2 j = b.analytic_jacobian(x);
            Mat2 rot;
            rot << 0.0, -1.0, 1.0, 0.0;
            return rot * j.inverse() * rot.transpose();
        };
    }
    // working box: bounding box of i G over the base box
    const Box& bb = base_.working_box();
    Box img{Vec2(kInf, kInf), Vec2(-kInf, -kInf)};
    constexpr int n = 32;
    for (int j = 0; j <= n; ++j)
        for (int i = 0; i <= n; ++i) {
            const Vec2 x((bb.lo.x() * (n - i) + bb.hi.x() * i) / n, (bb.lo.y() * (n - j) + bb.hi.y() * j) / n);
            const Vec2 y = rot90(base_(x));
            img.lo = img.lo.cwiseMin(y);
            img.hi = img.hi.cwiseMax(y);
        }
    d.working_box = img;
    d.growth_bound = 0.0;
    Field provisional(d);
    d.growth_bound = measure_growth_bound(d.eval, img, 16);
    dual_ = Field(std::move(d));
}

Inversion DualField::eval_checked(const Vec2& eta) const
{
    const Vec2 target = rot90_inv(eta);
    Inversion inv = invert(base_, target, cache_->best_guess(base_, target, opts_), opts_);
    inv.x = rot90(inv.x);
    return inv;
}

DualField dual_field(const Field& field, const NewtonOptions& opts) { return DualField(field, opts); }

}  // namespace degen
