#include "degen/analysis.hpp"

#include "degen/regularize.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <random>

namespace degen {

namespace {

constexpr int kLattice = 512;
constexpr int kSub = 4;   // 4 x 4 = 16 sub-triangles per cut triangle

// centroids of the uniform level-4 subdivision, in (s, t) with x = v0 + s (v1 - v0) + t (v2 - v0)
const std::vector<Vec2>& sub_centroids()
{
    static const std::vector<Vec2> c = [] {
        std::vector<Vec2> out;
        for (int j = 0; j < kSub; ++j)
            for (int i = 0; i + j < kSub; ++i) {
                out.emplace_back((i + 1.0 / 3.0) / kSub, (j + 1.0 / 3.0) / kSub);
                if (i + j <= kSub - 2) out.emplace_back((i + 2.0 / 3.0) / kSub, (j + 2.0 / 3.0) / kSub);
            }
        return out;
    }();
    return c;
}

void require_decreasing(const std::vector<double>& d, const char* what)
{
    if (d.empty()) throw ConfigError(std::string(what) + " is empty");
    for (std::size_t k = 0; k < d.size(); ++k) {
        if (!(d[k] > 0.0)) throw ConfigError(std::string(what) + " must be positive");
        if (k > 0 && !(d[k] < d[k - 1])) throw ConfigError(std::string(what) + " must be strictly decreasing");
    }
}

double total_weight(const std::vector<GradientField::Sample>& s)
{
    double w = 0.0;
    for (const auto& x : s) w += x.weight;
    return w;
}

// samples[k] ordered by a prefix sum of per-item counts
template <class Count, class Fill>
std::vector<GradientField::Sample> gather_samples(long n, Exec exec, Count count, Fill fill)
{
    std::vector<std::size_t> offset(std::size_t(n) + 1, 0);
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
    for (long k = 0; k < n; ++k) offset[std::size_t(k) + 1] = count(k);
    std::partial_sum(offset.begin(), offset.end(), offset.begin());
    std::vector<GradientField::Sample> out(offset.back());
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
    for (long k = 0; k < n; ++k) fill(k, out.data() + offset[std::size_t(k)]);
    return out;
}

std::vector<double> distance_to_complement(const std::vector<std::uint8_t>& in_set, const DegeneracyGrid& grid)
{
    std::vector<std::uint8_t> comp(in_set.size());
    for (std::size_t k = 0; k < comp.size(); ++k) comp[k] = !in_set[k];
    return distance_transform(comp, grid.nx, grid.ny, grid.h);
}

}  // namespace

// ---------------------------------------------------------------- GradientField

GradientField GradientField::from_solution(std::shared_ptr<const DiscreteSolution> sol)
{
    if (!sol || !sol->mesh) throw Error("gradient field needs a solution");
    GradientField g;
    g.radius_ = sol->mesh->domain.R_out;
    g.bound_ = sol->lipschitz;
    g.sol_ = std::move(sol);
    return g;
}

GradientField GradientField::synthetic(Rule rule, Vec2 center, double radius, double bound)
{
    if (!(radius > 0.0)) throw ConfigError("gradient field radius must be positive");
    GradientField g;
    g.rule_ = std::move(rule);
    g.center_ = center;
    g.radius_ = radius;
    if (bound <= 0.0) {
        for (const auto& s : g.ball_samples(center, radius)) bound = std::max(bound, s.value.norm());
    }
    g.bound_ = bound;
    return g;
}

Vec2 GradientField::raw(const Vec2& sx, int tri) const
{
    Vec2 v;
    if (sol_) {
        if (tri < 0) tri = sol_->mesh->locate(sx);
        if (tri < 0) throw Error("gradient sample outside the mesh");
        v = sol_->grad[std::size_t(tri)];
    } else {
        v = rule_(sx);
    }
    return post_ ? post_(v) : v;
}

Vec2 GradientField::operator()(const Vec2& x) const { return raw(offset_ + scale_ * x, -1); }

bool GradientField::contains_ball(const Vec2& c, double r) const
{
    return (c - center_).norm() + r <= radius_ * (1.0 + 1e-12);
}

std::vector<GradientField::Sample> GradientField::ball_samples(const Vec2& c, double r, Exec exec) const
{
    if (!(r > 0.0)) throw ConfigError("ball radius must be positive");
    if (!contains_ball(c, r)) throw Error("ball leaves the region of the gradient field");
    const Vec2 sc = offset_ + scale_ * c;
    const double sr = scale_ * r;
    const double inv_area = 1.0 / (scale_ * scale_);
    auto to_local = [&](const Vec2& sx) -> Vec2 { return (sx - offset_) / scale_; };

    if (sol_) {
        const Mesh& mesh = *sol_->mesh;
        const auto& sub = sub_centroids();
        // 0 outside, 1 inside, 2 cut by the circle
        std::vector<std::uint8_t> status(mesh.n_triangles());
        auto count = [&](long t) -> std::size_t {
            const auto& tri = mesh.triangles[t];
            double dmin = kInf, dmax = 0.0;
            for (int v : tri) {
                const double d = (mesh.vertices[v] - sc).norm();
                dmin = std::min(dmin, d);
                dmax = std::max(dmax, d);
            }
            if (dmax <= sr) {
                status[t] = 1;
                return 1;
            }
            if (dmin > sr + mesh.h) {
                status[t] = 0;
                return 0;
            }
            status[t] = 2;
            const Vec2 a = mesh.vertices[tri[0]], e1 = mesh.vertices[tri[1]] - a, e2 = mesh.vertices[tri[2]] - a;
            std::size_t n = 0;
            for (const Vec2& st : sub) n += (a + st.x() * e1 + st.y() * e2 - sc).norm() < sr;
            return n;
        };
        auto fill = [&](long t, Sample* out) {
            if (status[t] == 0) return;
            const Vec2 value = raw(Vec2::Zero(), int(t));
            if (status[t] == 1) {
                *out = Sample{to_local(mesh.centroid[t]), value, mesh.area[t] * inv_area};
                return;
            }
            const auto& tri = mesh.triangles[t];
            const Vec2 a = mesh.vertices[tri[0]], e1 = mesh.vertices[tri[1]] - a, e2 = mesh.vertices[tri[2]] - a;
            const double w = mesh.area[t] / double(kSub * kSub) * inv_area;
            for (const Vec2& st : sub) {
                const Vec2 x = a + st.x() * e1 + st.y() * e2;
                if ((x - sc).norm() < sr) *out++ = Sample{to_local(x), value, w};
            }
        };
        return gather_samples(long(mesh.n_triangles()), exec, count, fill);
    }

    const double cell = 2.0 * r / kLattice;
    auto point = [&](long j, int i) { return Vec2(c.x() - r + (i + 0.5) * cell, c.y() - r + (j + 0.5) * cell); };
    auto count = [&](long j) -> std::size_t {
        std::size_t n = 0;
        for (int i = 0; i < kLattice; ++i) n += (point(j, i) - c).norm() < r;
        return n;
    };
    auto fill = [&](long j, Sample* out) {
        for (int i = 0; i < kLattice; ++i) {
            const Vec2 x = point(j, i);
            if ((x - c).norm() < r) *out++ = Sample{x, raw(offset_ + scale_ * x, -1), cell * cell};
        }
    };
    return gather_samples(kLattice, exec, count, fill);
}

GradientField GradientField::rescaled(const Vec2& x0, double delta) const
{
    if (!(delta > 0.0)) throw ConfigError("rescaling needs delta > 0");
    if (!contains_ball(x0, delta)) throw Error("rescaling ball leaves the region of the gradient field");
    GradientField g = *this;
    g.offset_ = offset_ + scale_ * x0;
    g.scale_ = scale_ * delta;
    g.center_ = Vec2::Zero();
    g.radius_ = 1.0;
    return g;
}

GradientField GradientField::mapped(const Rule& post, double bound) const
{
    GradientField g = *this;
    if (post_) {
        Rule inner = post_;
        g.post_ = [inner, post](const Vec2& v) { return post(inner(v)); };
    } else {
        g.post_ = post;
    }
    if (bound <= 0.0) {
        bound = 0.0;
        for (const auto& s : g.ball_samples(center_, radius_)) bound = std::max(bound, s.value.norm());
    }
    g.bound_ = bound;
    return g;
}

GradientField rescale(const GradientField& g, const Vec2& x0, double delta) { return g.rescaled(x0, delta); }

GradientField conjugate_gradient(const GradientField& g, const Field& field)
{
    return g.mapped([field](const Vec2& v) { return rot90(field(v)); }, 0.0);
}

Vec2 ball_mean(const GradientField& g, const Vec2& c, double r)
{
    const auto s = g.ball_samples(c, r);
    Vec2 m = Vec2::Zero();
    double w = 0.0;
    for (const auto& x : s) {
        m += x.weight * x.value;
        w += x.weight;
    }
    return w > 0.0 ? Vec2(m / w) : Vec2::Zero();
}

// ---------------------------------------------------------------- profiles

Json LebesgueProfile::to_json() const
{
    return Json{{"p", {p.x(), p.y()}},
                {"delta", delta},
                {"value", value},
                {"threshold", threshold},
                {"lebesgue_like", lebesgue_like}};
}

std::string LebesgueProfile::to_csv() const
{
    std::vector<std::vector<double>> rows;
    for (std::size_t k = 0; k < delta.size(); ++k) rows.push_back({delta[k], value[k]});
    return csv_table({"delta", "mean_abs_deviation"}, rows);
}

LebesgueProfile lebesgue_profile(const GradientField& g, const Vec2& x0, const std::vector<double>& deltas,
                                 double theta)
{
    require_decreasing(deltas, "delta list");
    LebesgueProfile out;
    out.delta = deltas;
    out.threshold = theta > 0.0 ? theta : 0.05 * g.bound();
    out.p = ball_mean(g, x0, deltas.back());
    for (double d : deltas) {
        const auto s = g.ball_samples(x0, d);
        double acc = 0.0;
        for (const auto& x : s) acc += x.weight * (x.value - out.p).norm();
        out.value.push_back(acc / total_weight(s));
    }
    out.lebesgue_like = out.value.back() <= out.threshold && out.value.back() <= out.value.front() + 1e-12;
    return out;
}

std::string DistanceProfile::to_csv() const
{
    std::vector<std::vector<double>> rows;
    for (std::size_t k = 0; k < delta.size(); ++k) rows.push_back({delta[k], value[k]});
    return csv_table({"delta", "mean_distance_" + to_string(cls)}, rows);
}

DistanceProfile distance_profile(const GradientField& g, const DegeneracyGrid& grid, const Vec2& x0,
                                 const std::vector<double>& deltas, SetClass cls)
{
    require_decreasing(deltas, "delta list");
    DistanceProfile out;
    out.cls = cls;
    out.delta = deltas;
    const bool empty = grid.empty(cls);
    for (double d : deltas) {
        if (empty) {
            out.value.push_back(kInf);
            continue;
        }
        const auto s = g.ball_samples(x0, d);
        double acc = 0.0;
        for (const auto& x : s) acc += x.weight * dist_to_class(grid, x.value, cls);
        out.value.push_back(acc / total_weight(s));
    }
    return out;
}

// ---------------------------------------------------------------- histograms

int GradientHistogram::bin_of(const Vec2& v) const
{
    if (!box.contains(v)) return -1;
    const Vec2 w = box.hi - box.lo;
    const int i = std::min(int((v.x() - box.lo.x()) / w.x() * n), n - 1);
    const int j = std::min(int((v.y() - box.lo.y()) / w.y() * n), n - 1);
    return j * n + i;
}

Vec2 GradientHistogram::bin_center(int b) const
{
    const Vec2 w = box.hi - box.lo;
    return box.lo + Vec2((b % n + 0.5) * w.x() / n, (b / n + 0.5) * w.y() / n);
}

double GradientHistogram::binned_mass() const { return std::accumulate(mass.begin(), mass.end(), 0.0); }

double GradientHistogram::mass_near(const std::vector<Vec2>& points, double d) const
{
    double m = 0.0;
    for (int b = 0; b < n * n; ++b) {
        if (mass[b] == 0.0) continue;
        const Vec2 c = bin_center(b);
        for (const Vec2& p : points)
            if ((p - c).norm() <= d) {
                m += mass[b];
                break;
            }
    }
    return m;
}

std::string GradientHistogram::to_csv() const { return csv_matrix(mass, n, n); }

namespace {

GradientHistogram make_histogram(const Box& box, int n_bins)
{
    if (n_bins < 1) throw ConfigError("histogram needs at least one bin");
    if (!(box.hi.x() > box.lo.x() && box.hi.y() > box.lo.y())) throw ConfigError("histogram box is empty");
    GradientHistogram h;
    h.box = box;
    h.n = n_bins;
    h.mass.assign(std::size_t(n_bins) * n_bins, 0.0);
    return h;
}

void deposit(GradientHistogram& h, const GradientField::Sample& s)
{
    const int b = h.bin_of(s.value);
    if (b < 0)
        h.overflow += s.weight;
    else
        h.mass[b] += s.weight;
    h.total_mass += s.weight;
}

void finish(GradientHistogram& h) { h.overflow_warning = h.overflow > 0.01 * h.total_mass; }

}  // namespace

GradientHistogram gradient_histogram(const GradientField& g, const Vec2& c, double r, const Box& box, int n_bins)
{
    GradientHistogram h = make_histogram(box, n_bins);
    for (const auto& s : g.ball_samples(c, r)) deposit(h, s);
    finish(h);
    return h;
}

std::vector<GradientHistogram> windowed_histograms(const GradientField& g, const Box& box, int n_bins, int parts)
{
    if (parts < 1) throw ConfigError("window partition needs parts >= 1");
    std::vector<GradientHistogram> out(std::size_t(parts) * parts, make_histogram(box, n_bins));
    for (const auto& s : g.ball_samples(Vec2::Zero(), 1.0)) {
        const int i = std::clamp(int((s.x.x() + 1.0) * 0.5 * parts), 0, parts - 1);
        const int j = std::clamp(int((s.x.y() + 1.0) * 0.5 * parts), 0, parts - 1);
        deposit(out[std::size_t(j) * parts + i], s);
    }
    for (auto& h : out) finish(h);
    return out;
}

// ---------------------------------------------------------------- bump H

double BumpH::operator()(const Vec2& xi) const
{
    const double r = (xi - center).norm();
    return 1.0 - smoothstep5((r - 0.5 * eta) / (0.5 * eta));
}

Vec2 BumpH::gradient(const Vec2& xi) const
{
    const Vec2 d = xi - center;
    const double r = d.norm();
    if (r <= 0.5 * eta || r >= eta) return Vec2::Zero();
    return -smoothstep5_deriv((r - 0.5 * eta) / (0.5 * eta)) / (0.5 * eta) * d / r;
}

double BumpH::level_radius(double level) const
{
    if (!(level > 0.0 && level < 1.0)) throw ConfigError("level must lie in (0, 1)");
    double lo = 0.5 * eta, hi = eta;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * eta; ++it) {
        const double mid = 0.5 * (lo + hi);
        ((*this)(center + Vec2(mid, 0.0)) > level ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

BumpH make_bump(const Vec2& center, double eta)
{
    if (!(eta > 0.0)) throw ConfigError("bump radius must be positive");
    BumpH H;
    H.center = center;
    H.eta = eta;
    H.grad_bound = 15.0 / (4.0 * eta);
    for (int k = 0; k < 1000; ++k) {
        const double r = 1.25 * eta * k / 999.0;
        const double v = H(center + r * Vec2(std::cos(0.7 * k), std::sin(0.7 * k)));
        bool ok = v >= 0.0 && v <= 1.0;
        if (r <= 0.5 * eta) ok = ok && v == 1.0;
        if (r >= eta) ok = ok && v == 0.0;
        if (v >= 5.0 / 8.0) ok = ok && r < 0.75 * eta;
        if (r < 2.0 * eta / 3.0) ok = ok && v > 0.75;
        if (!ok) throw Error("bump profile violates its containment properties at radius " + fmt(r));
    }
    return H;
}

double superlevel_fraction(const GradientField& g, const BumpH& H, double delta, const Vec2& x0)
{
    const auto s = g.ball_samples(x0, delta);
    double in = 0.0;
    for (const auto& x : s)
        if (H(x.value) >= 0.75) in += x.weight;
    return in / total_weight(s);
}

CompositeEnergy composite_energy(const DiscreteSolution& sol, const BumpH& H, double r_in, double r_out)
{
    if (!(r_in >= 0.0 && r_out > r_in)) throw ConfigError("annulus needs 0 <= r_in < r_out");
    const Mesh& mesh = *sol.mesh;
    const RecoveredHessians rec = recover_hessians(sol, 0);
    CompositeEnergy out;
    for (std::size_t t = 0; t < mesh.n_triangles(); ++t) {
        const double rc = mesh.centroid[t].norm();
        if (rc < r_in || rc > r_out) continue;
        ++out.n_triangles;
        Mat2 D = Mat2::Zero();
        int nvalid = 0;
        for (int v : mesh.triangles[t])
            if (rec.valid[v]) {
                D += rec.H[v];
                ++nvalid;
            }
        if (nvalid < 3) ++out.n_degenerate;
        if (nvalid == 0) continue;
        D /= nvalid;
        out.value += mesh.area[t] * (D.transpose() * H.gradient(sol.grad[t])).squaredNorm();
    }
    out.warning = out.n_degenerate > 0.05 * double(out.n_triangles);
    return out;
}

// ---------------------------------------------------------------- annulus-energy alternative

Vec2 ScalarField::grad(const Vec2& x) const
{
    if (gradient) return gradient(x);
    const double h = 1e-6;
    return Vec2(value(x + Vec2(h, 0)) - value(x - Vec2(h, 0)), value(x + Vec2(0, h)) - value(x - Vec2(0, h))) /
           (2.0 * h);
}

std::string to_string(SvOutcome o)
{
    switch (o) {
        case SvOutcome::hypothesis_unmet: return "hypothesis-unmet";
        case SvOutcome::circle_branch: return "circle";
        case SvOutcome::energy_branch: return "energy";
        case SvOutcome::both: return "both";
        case SvOutcome::violation: return "violation";
    }
    return "?";
}

Json SvReport::to_json() const
{
    return Json{{"M", M},
                {"nu", nu},
                {"mass_fraction", mass_fraction},
                {"in_range", in_range},
                {"hypothesis", hypothesis},
                {"s_min", s_min},
                {"circle_branch", circle_branch},
                {"best_circle_s", best_circle_s},
                {"best_circle_min", best_circle_min},
                {"energy", energy},
                {"energy_threshold", energy_threshold},
                {"energy_branch", energy_branch},
                {"outcome", to_string(outcome)}};
}

double superlevel_mass_fraction(const ScalarField& v, double level, int n, Exec exec)
{
    long hits = 0, total = 0;
#pragma omp parallel for schedule(static) reduction(+ : hits, total) if (exec == Exec::parallel)
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            const Vec2 x(-1.0 + (i + 0.5) * 2.0 / n, -1.0 + (j + 0.5) * 2.0 / n);
            if (x.norm() >= 1.0) continue;
            ++total;
            hits += v.value(x) >= level;
        }
    return total ? double(hits) / double(total) : 0.0;
}

SvReport sv_dichotomy(const ScalarField& v, double nu, double M, const SvOptions& opts)
{
    if (!(M > 0.0)) throw ConfigError("sv check needs M > 0");
    if (!(nu > 0.0 && nu <= 1.0)) throw ConfigError("sv check needs nu in (0, 1]");
    SvReport rep;
    rep.M = M;
    rep.nu = nu;
    rep.s_min = std::sqrt(nu / 2.0);
    rep.energy_threshold = M * M * nu / (512.0 * kPi * kPi);

    const int n = opts.mass_lattice;
    long hits = 0, total = 0, out_of_range = 0;
#pragma omp parallel for schedule(static) reduction(+ : hits, total, out_of_range) if (opts.exec == Exec::parallel)
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            const Vec2 x(-1.0 + (i + 0.5) * 2.0 / n, -1.0 + (j + 0.5) * 2.0 / n);
            if (x.norm() >= 1.0) continue;
            const double val = v.value(x);
            ++total;
            hits += val >= 0.75 * M;
            out_of_range += val < -1e-12 * M || val > M * (1.0 + 1e-12);
        }
    rep.mass_fraction = total ? double(hits) / double(total) : 0.0;
    rep.in_range = out_of_range == 0;
    rep.hypothesis = rep.in_range && rep.mass_fraction >= nu;
    if (!rep.hypothesis) return rep;

    // circles s in (s_min, 1), cell-centred
    const int nr = opts.n_radii, na = opts.n_angles;
    std::vector<double> circle_min(nr);
#pragma omp parallel for schedule(static) if (opts.exec == Exec::parallel)
    for (int k = 0; k < nr; ++k) {
        const double s = rep.s_min + (1.0 - rep.s_min) * (k + 0.5) / nr;
        double m = kInf;
        for (int a = 0; a < na; ++a) {
            const double th = 2.0 * kPi * a / na;
            m = std::min(m, v.value(s * Vec2(std::cos(th), std::sin(th))));
        }
        circle_min[k] = m;
    }
    for (int k = 0; k < nr; ++k)
        if (k == 0 || circle_min[k] > rep.best_circle_min) {
            rep.best_circle_min = circle_min[k];
            rep.best_circle_s = rep.s_min + (1.0 - rep.s_min) * (k + 0.5) / nr;
        }
    rep.circle_branch = rep.best_circle_min >= 0.625 * M;

    // energy on the annulus: Gauss-Legendre in r, periodic trapezoid in theta
    std::vector<double> gx, gw;
    gauss_legendre(8, gx, gw);
    const int np = opts.n_radial_panels;
    const double dr = (1.0 - rep.s_min) / np;
    std::vector<double> ring(std::size_t(np) * gx.size());
#pragma omp parallel for schedule(static) if (opts.exec == Exec::parallel)
    for (long q = 0; q < long(ring.size()); ++q) {
        const int panel = int(q / long(gx.size())), l = int(q % long(gx.size()));
        const double r = rep.s_min + dr * (panel + 0.5 * (gx[l] + 1.0));
        double acc = 0.0;
        for (int a = 0; a < na; ++a) {
            const double th = 2.0 * kPi * a / na;
            acc += v.grad(r * Vec2(std::cos(th), std::sin(th))).squaredNorm();
        }
        ring[q] = 0.5 * dr * gw[l] * r * acc * 2.0 * kPi / na;
    }
    rep.energy = std::accumulate(ring.begin(), ring.end(), 0.0);
    rep.energy_branch = rep.energy >= (1.0 - opts.slack) * rep.energy_threshold;

    if (rep.circle_branch && rep.energy_branch)
        rep.outcome = SvOutcome::both;
    else if (rep.circle_branch)
        rep.outcome = SvOutcome::circle_branch;
    else if (rep.energy_branch)
        rep.outcome = SvOutcome::energy_branch;
    else
        rep.outcome = SvOutcome::violation;
    return rep;
}

ScalarField random_smooth_field(std::uint64_t seed, double M)
{
    struct Bump {
        Vec2 c;
        double a, s;
    };
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    const int nb = 2 + int(rng() % 5);
    auto bumps = std::make_shared<std::vector<Bump>>();
    for (int k = 0; k < nb; ++k) {
        const double r = std::sqrt(U(rng)), th = 2.0 * kPi * U(rng);
        bumps->push_back({r * Vec2(std::cos(th), std::sin(th)), 0.5 + 1.5 * U(rng), 0.1 + 0.4 * U(rng)});
    }
    const double steep = 2.0 + 10.0 * U(rng);
    const double shift = 0.2 + 0.8 * U(rng);
    auto inner = [bumps](const Vec2& x, Vec2* grad) {
        double s = 0.0;
        Vec2 g = Vec2::Zero();
        for (const auto& b : *bumps) {
            const Vec2 d = x - b.c;
            const double e = b.a * std::exp(-d.squaredNorm() / (2.0 * b.s * b.s));
            s += e;
            g -= e * d / (b.s * b.s);
        }
        if (grad) *grad = g;
        return s;
    };
    ScalarField f;
    f.value = [=](const Vec2& x) { return M / (1.0 + std::exp(-steep * (inner(x, nullptr) - shift))); };
    f.gradient = [=](const Vec2& x) {
        Vec2 g;
        const double sig = 1.0 / (1.0 + std::exp(-steep * (inner(x, &g) - shift)));
        return Vec2(M * steep * sig * (1.0 - sig) * g);
    };
    return f;
}

// ---------------------------------------------------------------- covering utilities

Json ComponentLabels::to_json() const
{
    return Json{{"r", r}, {"M", M}, {"K", K}, {"bound", bound}, {"bound_holds", bound_holds()}};
}

namespace {

void require_covers(const DegeneracyGrid& grid, double M)
{
    const double tol = 1e-12 * (1.0 + grid.box.diameter());
    if (!grid.box.inflated(tol).contains_ball(Vec2::Zero(), 2.0 * M))
        throw ConfigError("grid box does not cover the ball of radius 2M");
}

}  // namespace

ComponentLabels connected_components(const DegeneracyGrid& grid, double r, double M)
{
    if (!(r > 0.0) || !(M > 0.0)) throw ConfigError("components need r > 0 and M > 0");
    require_covers(grid, M);
    ComponentLabels out;
    out.r = r;
    out.M = M;
    out.bound = 4.0 * (2.0 * M + r / 2.0) * (2.0 * M + r / 2.0) / (r * r);
    const double R = 2.0 * M * (1.0 + 1e-12);
    std::vector<std::uint8_t> free(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) free[k] = grid.node(k).norm() <= R && grid.dist_DS[k] > r;
    out.label.assign(grid.size(), -1);
    std::deque<std::size_t> queue;
    for (std::size_t seed = 0; seed < grid.size(); ++seed) {
        if (!free[seed] || out.label[seed] >= 0) continue;
        out.label[seed] = out.K;
        queue.push_back(seed);
        while (!queue.empty()) {
            const std::size_t k = queue.front();
            queue.pop_front();
            const int i = int(k % grid.nx), j = int(k / grid.nx);
            const int di[4] = {1, -1, 0, 0}, dj[4] = {0, 0, 1, -1};
            for (int e = 0; e < 4; ++e) {
                const int a = i + di[e], b = j + dj[e];
                if (a < 0 || b < 0 || a >= grid.nx || b >= grid.ny) continue;
                const std::size_t n = grid.index(a, b);
                if (free[n] && out.label[n] < 0) {
                    out.label[n] = out.K;
                    queue.push_back(n);
                }
            }
        }
        ++out.K;
    }
    return out;
}

std::string to_string(Localization s)
{
    switch (s) {
        case Localization::contained: return "contained";
        case Localization::disjoint: return "disjoint";
        case Localization::neither: return "neither";
    }
    return "?";
}

Json LocalizationReport::to_json() const
{
    Json rows = Json::array();
    for (std::size_t k = 0; k < delta.size(); ++k)
        rows.push_back({{"delta", delta[k]},
                        {"state", to_string(state[k])},
                        {"p", {p[k].x(), p[k].y()}},
                        {"spread", spread[k]}});
    return Json{{"component", component}, {"r", r}, {"rows", rows}};
}

LocalizationReport localization_check(const GradientField& g, const Vec2& x0, const std::vector<double>& deltas,
                                      const DegeneracyGrid& grid, const ComponentLabels& labels, int component)
{
    require_decreasing(deltas, "delta list");
    if (component < 0 || component >= labels.K) throw ConfigError("component index out of range");
    LocalizationReport out;
    out.component = component;
    out.r = labels.r;
    const double tol = 1e-12 * (1.0 + grid.box.diameter());
    auto member = [&](const Vec2& v) {
        if (!grid.box.inflated(tol).contains(v)) return false;
        return labels.label[grid.nearest(v)] == component;
    };
    for (double d : deltas) {
        const auto s = g.ball_samples(x0, d);
        Vec2 p = Vec2::Zero();
        for (const auto& x : s) p += x.weight * x.value;
        p /= total_weight(s);
        double spread = 0.0;
        bool any_member = false;
        for (const auto& x : s) {
            spread = std::max(spread, (x.value - p).norm());
            any_member = any_member || member(x.value);
        }
        out.delta.push_back(d);
        out.p.push_back(p);
        out.spread.push_back(spread);
        if (spread <= labels.r && member(p))
            out.state.push_back(Localization::contained);
        else if (!any_member)
            out.state.push_back(Localization::disjoint);
        else
            out.state.push_back(Localization::neither);
    }
    return out;
}

Json LebesgueNumber::to_json() const
{
    return Json{{"eta", eta},
                {"exact", exact},
                {"cap", cap},
                {"covered", covered},
                {"uncovered", {uncovered.x(), uncovered.y()}}};
}

LebesgueNumber lebesgue_number(const DegeneracyGrid& grid, double lambda, double Lambda, double r, double M,
                               double cap)
{
    if (!(lambda > 0.0) || !(Lambda > 0.0) || !(r > 0.0) || !(M > 0.0))
        throw ConfigError("Lebesgue number needs positive lambda, Lambda, r, M");
    require_covers(grid, M);
    LebesgueNumber out;
    out.cap = cap > 0.0 ? cap : M;
    const std::size_t n = grid.size();
    std::vector<std::uint8_t> O(n), V(n), N(n);
    const double slack = 1.0 - 1e-9;
    for (std::size_t k = 0; k < n; ++k) {
        O[k] = grid.d_quot[k] >= lambda * slack;
        V[k] = grid.s_quot[k] >= slack / Lambda;
        N[k] = grid.dist_DS[k] < r;
    }
    const double R = 2.0 * M * (1.0 + 1e-12);
    for (std::size_t k = 0; k < n; ++k)
        if (grid.node(k).norm() <= R && !(O[k] || V[k] || N[k])) {
            out.covered = false;
            out.uncovered = grid.node(k);
            return out;
        }
    const auto dO = distance_to_complement(O, grid), dV = distance_to_complement(V, grid),
               dN = distance_to_complement(N, grid);
    out.exact = kInf;
    for (std::size_t k = 0; k < n; ++k)
        if (grid.node(k).norm() <= R) out.exact = std::min(out.exact, std::max({dO[k], dV[k], dN[k]}));
    // B_eta(xi) lies in a set iff every grid node at distance <= eta is in it
    out.eta = out.cap;
    for (int it = 0; it < 200 && !(out.eta < out.exact); ++it) out.eta *= 0.5;
    return out;
}

Json EllipticBall::to_json() const
{
    return Json{{"q", {q.x(), q.y()}}, {"rho", rho}, {"lambda", lambda}, {"Lambda", Lambda}};
}

EllipticBall find_elliptic_ball(const DegeneracyGrid& grid, const ComponentLabels& labels, int component,
                                const std::optional<Vec2>& p0)
{
    if (component < 0 || component >= labels.K) throw ConfigError("component index out of range");
    const std::size_t n = grid.size();
    std::vector<std::uint8_t> elliptic(n), in_c(n);
    for (std::size_t k = 0; k < n; ++k) {
        elliptic[k] = grid.elliptic(k);
        in_c[k] = labels.label[k] == component;
    }
    const auto d_ell = distance_to_complement(elliptic, grid), d_c = distance_to_complement(in_c, grid);
    double best = -1.0;
    std::size_t arg = 0;
    for (std::size_t k = 0; k < n; ++k) {
        if (!in_c[k] || !elliptic[k]) continue;
        const int i = int(k % grid.nx), j = int(k / grid.nx);
        const double edge = grid.h * std::min({i, grid.nx - 1 - i, j, grid.ny - 1 - j});
        const double d = std::min({d_ell[k], d_c[k], edge});
        if (p0 && (grid.node(k) - *p0).norm() < d) continue;
        if (d > best) {
            best = d;
            arg = k;
        }
    }
    if (best <= 0.0) throw Error("component has no eligible elliptic node; grid resolution too coarse");
    EllipticBall out;
    out.q = grid.node(arg);
    out.rho = 0.5 * best;
    int worst_o = 0, worst_v = 0;
    for (std::size_t k = 0; k < n; ++k)
        if ((grid.node(k) - out.q).norm() <= out.rho) {
            worst_o = std::max(worst_o, grid.o_level[k]);
            worst_v = std::max(worst_v, grid.v_level[k]);
        }
    out.lambda = grid.ladders.lambda[worst_o];
    out.Lambda = grid.ladders.Lambda[worst_v];
    return out;
}

Subsequence select_subsequence(const std::vector<double>& delta_grid, const std::function<double(double)>& f)
{
    require_decreasing(delta_grid, "delta grid");
    Subsequence out;
    std::size_t j = 0;
    while (j < delta_grid.size() && delta_grid[j] > 0.5) ++j;
    if (j == delta_grid.size()) {
        out.exhausted = true;
        return out;
    }
    while (true) {
        const double fj = f(delta_grid[j]);
        out.index.push_back(int(j));
        out.delta.push_back(delta_grid[j]);
        out.f.push_back(fj);
        if (fj <= 0.0) return out;
        const double next = delta_grid[j] * std::sqrt(fj / 4.0);
        std::size_t k = j + 1;
        while (k < delta_grid.size() && !(delta_grid[k] < next)) ++k;
        if (k == delta_grid.size()) {
            out.exhausted = true;
            return out;
        }
        j = k;
    }
}

Json TrendTest::to_json() const
{
    return Json{{"S", S},
                {"variance", variance},
                {"z", z},
                {"p_value", p_value},
                {"increasing", increasing},
                {"decreasing", decreasing}};
}

TrendTest mann_kendall(const std::vector<double>& x, double alpha)
{
    TrendTest t;
    const std::size_t n = x.size();
    if (n < 2) return t;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) t.S += (x[j] > x[i]) - (x[j] < x[i]);
    std::vector<double> sorted = x;
    std::sort(sorted.begin(), sorted.end());
    double ties = 0.0;
    for (std::size_t i = 0; i < n;) {
        std::size_t k = i;
        while (k < n && sorted[k] == sorted[i]) ++k;
        const double m = double(k - i);
        ties += m * (m - 1.0) * (2.0 * m + 5.0);
        i = k;
    }
    const double dn = double(n);
    t.variance = (dn * (dn - 1.0) * (2.0 * dn + 5.0) - ties) / 18.0;
    if (t.variance > 0.0) {
        if (t.S > 0) t.z = (double(t.S) - 1.0) / std::sqrt(t.variance);
        if (t.S < 0) t.z = (double(t.S) + 1.0) / std::sqrt(t.variance);
    }
    t.p_value = std::erfc(std::abs(t.z) / std::sqrt(2.0));
    t.increasing = t.S > 0 && t.p_value < alpha;
    t.decreasing = t.S < 0 && t.p_value < alpha;
    return t;
}

}  // namespace degen
