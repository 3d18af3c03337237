#include "degen/field.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace degen;

namespace {

void expect_vec(const Vec2& got, const Vec2& want, double tol)
{
    EXPECT_NEAR(got.x(), want.x(), tol);
    EXPECT_NEAR(got.y(), want.y(), tol);
}

std::vector<Field> all_builtins()
{
    return {make_identity_scaled(1.0), make_identity_scaled(2.0), make_p_laplacian(4.0),
            make_p_laplacian(1.5), make_kink_circle(), make_quartic_quartroot(),
            make_piecewise_linear_radial({{0.5, 0.5}, {1.0, 0.6}, {2.0, 2.0}})};
}

}  // namespace

TEST(Builtins, EvaluateAtDocumentedPoints)
{
    expect_vec(make_identity_scaled(1.0).eval(Vec2(1, 2)), Vec2(1, 2), 0.0);
    expect_vec(make_identity_scaled(1.0).eval(Vec2(3, -4)), Vec2(3, -4), 0.0);
    const Field p4 = make_p_laplacian(4.0);
    expect_vec(p4.eval(Vec2(1, 0)), Vec2(1, 0), 0.0);
    expect_vec(p4.eval(Vec2(2, 0)), Vec2(8, 0), 1e-14);
    expect_vec(p4.eval(Vec2(0, 0)), Vec2(0, 0), 0.0);
    expect_vec(make_kink_circle().eval(Vec2(0.5, 0)), Vec2(0.875, 0), 1e-15);
    expect_vec(make_quartic_quartroot().eval(Vec2(2, 8)), Vec2(8, 2), 1e-15);
}

TEST(Builtins, RejectsBadParameters)
{
    EXPECT_THROW(make_p_laplacian(1.0), ConfigError);
    EXPECT_THROW(make_p_laplacian(0.5), ConfigError);
    EXPECT_THROW(make_piecewise_linear_radial({{0.5, 0.5}, {1.0, 0.4}}), ConfigError);
    RadialProfile flat;
    flat.dphi = [](double r) { return std::min(r, 1.0); };
    EXPECT_THROW(make_radial("flat", flat), ConfigError);
    BuiltinSpec spec;
    spec.name = "nope";
    EXPECT_THROW(make_builtin(spec), ConfigError);
}

TEST(Builtins, CustomRuleWithNonFiniteOutputThrows)
{
    const Field f = make_custom("bad", [](const Vec2& x) { return Vec2(std::log(x.x()), x.y()); },
                                Box::square(1.0));
    EXPECT_THROW(f.eval(Vec2(-1.0, 0.0)), Error);
}

TEST(Builtins, StrictMonotonicityOnRandomPairs)
{
    for (const Field& f : all_builtins()) {
        const PairSet pairs = sample_pairs(f.working_box(), 10000, 7);
        const auto worst = worst_monotonicity(f, pairs);
        EXPECT_GT(worst.value, 0.0) << f.name();
    }
}

TEST(Builtins, EvaluationIsDeterministic)
{
    for (const Field& f : all_builtins()) {
        const Vec2 x(0.3141, -1.2718);
        const Vec2 a = f(x);
        const Vec2 b = f(x);
        EXPECT_EQ(a.x(), b.x());
        EXPECT_EQ(a.y(), b.y());
    }
}

TEST(Builtins, PotentialGradientMatchesField)
{
    for (const Field& f : all_builtins()) {
        ASSERT_TRUE(f.is_gradient()) << f.name();
        std::mt19937_64 rng(3);
        std::uniform_real_distribution<double> u(-1.9, 1.9);
        for (int k = 0; k < 50; ++k) {
            const Vec2 x(u(rng), u(rng));
            const double h = 1e-6;
            const Vec2 g((f.potential(x + Vec2(h, 0)) - f.potential(x - Vec2(h, 0))) / (2 * h),
                         (f.potential(x + Vec2(0, h)) - f.potential(x - Vec2(0, h))) / (2 * h));
            expect_vec(g, f(x), 1e-5 * (1.0 + f(x).norm()));
        }
    }
}

TEST(Jacobian, DocumentedValues)
{
    const auto id = jacobian(make_identity_scaled(1.0), Vec2(0.4, -1.0), 1e-5);
    EXPECT_TRUE(id.analytic);
    expect_vec(id.sym_eigenvalues, Vec2(1, 1), 0.0);

    const auto p4 = jacobian(make_p_laplacian(4.0), Vec2(1, 0), 1e-5);
    expect_vec(p4.sym_eigenvalues, Vec2(1, 3), 1e-14);

    const auto q = jacobian(make_quartic_quartroot(), Vec2(1, 1), 1e-5);
    EXPECT_NEAR(q.matrix(0, 0), 3.0, 1e-14);
    EXPECT_NEAR(q.matrix(1, 1), 1.0 / 3.0, 1e-14);
    EXPECT_EQ(q.matrix(0, 1), 0.0);
}

TEST(Jacobian, AnalyticAgreesWithDifferencesToSecondOrder)
{
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1.8, 1.8);
    for (const Field& f : all_builtins()) {
        for (int k = 0; k < 40; ++k) {
            const Vec2 x(u(rng), u(rng));
            bool near_kink = std::abs(x.y()) < 0.05;
            for (double rk : f.kink_radii()) near_kink |= std::abs(x.norm() - rk) < 0.1;
            if (near_kink || x.norm() < 0.05) continue;
            const Mat2 a = f.analytic_jacobian(x);
            const Mat2 e1 = fd_jacobian(f, x, 1e-3);
            const Mat2 e2 = fd_jacobian(f, x, 5e-4);
            // halving h should cut the error by about four
            const double err1 = (a - e1).norm();
            const double err2 = (a - e2).norm();
            EXPECT_LT(err2, 1e-5 * (1.0 + a.norm())) << f.name();
            if (err1 > 1e-9) EXPECT_LT(err2, 0.35 * err1) << f.name();
        }
    }
}

TEST(Jacobian, FlagsKinkCircle)
{
    const Field k = make_kink_circle();
    EXPECT_TRUE(jacobian(k, Vec2(1.0, 0.0), 1e-6).near_kink);
    EXPECT_FALSE(jacobian(k, Vec2(0.5, 0.0), 1e-6).near_kink);
    // the cube-root axis of the quartic field is a kink of the same kind
    const auto q = jacobian(make_quartic_quartroot(), Vec2(0.5, 0.0), 1e-6);
    EXPECT_FALSE(q.analytic);
    EXPECT_TRUE(all_finite(q.matrix));
}

TEST(Monotony, IdentityAndScaled)
{
    const Box box = Box::square(2.0);
    const double w1 = monotony_modulus(make_identity_scaled(1.0), 1.0, box, 100000);
    EXPECT_GE(w1, 1.0);
    EXPECT_LT(w1, 1.0 / 0.95);
    const double w2 = monotony_modulus(make_identity_scaled(2.0), 1.0, box, 100000);
    EXPECT_GE(w2, 2.0);
    EXPECT_LT(w2, 2.0 / 0.95);
}

TEST(Monotony, ScaledIdentityWithinSamplingSlack)
{
    const Box box = Box::square(2.0);
    for (double c : {0.5, 1.0, 3.0}) {
        const Field f = make_identity_scaled(c);
        for (double t : {0.1, 0.5, 1.0, 2.0}) {
            const double w = monotony_modulus(f, t, box, 100000);
            const double ratio = c * t * t / w;
            EXPECT_GE(ratio, 0.95) << c << ' ' << t;
            EXPECT_LE(ratio, 1.0) << c << ' ' << t;
        }
    }
}

TEST(Monotony, NondecreasingInGap)
{
    for (const Field& f : all_builtins()) {
        const auto rep = monotonicity_report(f, f.working_box(), {0.05, 0.1, 0.2, 0.5, 1.0, 2.0}, 20000);
        for (std::size_t k = 1; k < rep.omega_samples.size(); ++k)
            EXPECT_GE(rep.omega_samples[k].second, rep.omega_samples[k - 1].second) << f.name();
    }
}

TEST(Monotony, QuarticMatchesLatticeOracle)
{
    // brute force over all pairs of a 200x200 lattice of [-2,2]^2, shifted
    // offsets only (the field is evaluated once per node)
    const Field f = make_quartic_quartroot();
    constexpr int n = 200;
    const double h = 4.0 / (n - 1);
    std::vector<Vec2> g(n * n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) g[j * n + i] = f(Vec2(-2.0 + i * h, -2.0 + j * h));
    double oracle = kInf;
    const int reach = int(std::ceil(1.1 / h));
    for (int dj = 0; dj <= reach; ++dj) {
        for (int di = -reach; di <= reach; ++di) {
            const double d = h * std::hypot(di, dj);
            if (!(d > 1.0) || d > 1.1) continue;
            if (dj == 0 && di < 0) continue;
            for (int j = 0; j + dj < n; ++j)
                for (int i = std::max(0, -di); i < n && i + di < n; ++i) {
                    const Vec2 dg = g[(j + dj) * n + i + di] - g[j * n + i];
                    oracle = std::min(oracle, dg.x() * di * h + dg.y() * dj * h);
                }
        }
    }
    // frozen brute-force value
    EXPECT_NEAR(oracle, 0.1862734820493771, 1e-12);
    const double w = monotony_modulus(f, 1.0, Box::square(2.0), 200000);
    EXPECT_GE(w, oracle * 0.98);
    EXPECT_LE(w, oracle * 1.25);
}

TEST(StrongMonotonicity, Constants)
{
    const Box box = Box::square(2.0);
    const auto c1 = strong_monotonicity_constant(make_identity_scaled(1.0), box, 10000);
    ASSERT_TRUE(c1);
    EXPECT_DOUBLE_EQ(*c1, 2.0);
    const auto c2 = strong_monotonicity_constant(make_identity_scaled(2.0), box, 10000);
    ASSERT_TRUE(c2);
    EXPECT_DOUBLE_EQ(*c2, 2.5);
    EXPECT_FALSE(strong_monotonicity_constant(make_p_laplacian(4.0), box, 10000));
    EXPECT_FALSE(strong_monotonicity_constant(make_quartic_quartroot(), box, 10000));
}

TEST(StrongMonotonicity, ConstantHoldsOnSamples)
{
    const Field f = make_piecewise_linear_radial({{0.5, 0.5}, {1.0, 0.6}, {2.0, 2.0}});
    const PairSet pairs = sample_pairs(f.working_box(), 5000, 4);
    const auto c = strong_monotonicity_constant(f, pairs);
    ASSERT_TRUE(c);
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        const Vec2 dx = pairs.a[k] - pairs.b[k];
        const Vec2 dg = f(pairs.a[k]) - f(pairs.b[k]);
        EXPECT_GE(*c * dg.dot(dx) * (1 + 1e-12), dx.squaredNorm() + dg.squaredNorm());
    }
}

TEST(Quotients, Identity)
{
    const auto q = ellipticity_quotients(make_identity_scaled(1.0), Vec2(0.3, 0.7), QuotientOptions::defaults());
    EXPECT_NEAR(q.d_quot, 1.0, 1e-9);
    EXPECT_NEAR(q.s_quot, 1.0, 1e-9);
}

TEST(Quotients, QuarticAtOrigin)
{
    const auto q = ellipticity_quotients(make_quartic_quartroot(), Vec2::Zero(), QuotientOptions::defaults());
    EXPECT_LE(q.d_quot, 1e-6 * (1 + 1e-9));
    EXPECT_LE(q.s_quot, 1e-2 * (1 + 1e-9));
}

TEST(Quotients, KinkCircleInwardDirection)
{
    const Field f = make_kink_circle();
    auto opts = QuotientOptions::defaults();
    const auto q = ellipticity_quotients(f, Vec2(1.0, 0.0), opts);
    // inward quotient (1 - phi'(1-r))/r = r^2 at the smallest radius
    EXPECT_LE(q.d_quot, 1e-6 * (1 + 1e-6));
    EXPECT_GE(q.d_quot, 0.0);
}

TEST(Quotients, UnderflowGuardGivesInfinity)
{
    const Field flat = make_custom("tiny", [](const Vec2& x) { return 1e-20 * x; }, Box::square(1.0));
    const auto q = ellipticity_quotients(flat, Vec2(0.1, 0.1), QuotientOptions::defaults());
    EXPECT_EQ(q.s_quot, kInf);
}

TEST(Dual, IdentityAndScaled)
{
    const DualField d1 = dual_field(make_identity_scaled(1.0));
    expect_vec(d1.field()(Vec2(0.7, -1.3)), Vec2(0.7, -1.3), 1e-13);
    const DualField d2 = dual_field(make_identity_scaled(2.0));
    expect_vec(d2.field()(Vec2(0.7, -1.3)), Vec2(0.35, -0.65), 1e-13);
}

TEST(Dual, QuarticIsSelfDual)
{
    const DualField d = dual_field(make_quartic_quartroot());
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int k = 0; k < 100; ++k) {
        const Vec2 x(u(rng), u(rng));
        expect_vec(d.field()(x), make_quartic_quartroot()(x), 1e-9 * (1 + x.norm()));
    }
}

TEST(Dual, IdentityOnRandomPoints)
{
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (const Field& f : all_builtins()) {
        const DualField d = dual_field(f);
        for (int k = 0; k < 100; ++k) {
            const Vec2 x(u(rng), u(rng));
            const Inversion inv = d.eval_checked(rot90(f(x)));
            ASSERT_TRUE(inv.converged) << f.name();
            expect_vec(inv.x, rot90(x), 1e-8);
        }
    }
}

TEST(Dual, DoubleDualIsReflectedField)
{
    for (const Field& f : {make_p_laplacian(4.0), make_kink_circle(), make_identity_scaled(3.0)}) {
        const DualField d = dual_field(f);
        const DualField dd = dual_field(d.field());
        std::mt19937_64 rng(13);
        std::uniform_real_distribution<double> u(-1.5, 1.5);
        for (int k = 0; k < 30; ++k) {
            const Vec2 x(u(rng), u(rng));
            expect_vec(dd.field()(x), -f(-x), 1e-6 * (1 + f(x).norm()));
        }
    }
}

TEST(Dual, ResultDoesNotDependOnEvaluationOrder)
{
    const Field f = make_p_laplacian(4.0);
    std::vector<Vec2> pts;
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int k = 0; k < 200; ++k) pts.emplace_back(u(rng), u(rng));
    const DualField a = dual_field(f);
    const DualField b = dual_field(f);
    std::vector<Vec2> fa, fb(pts.size());
    for (const auto& p : pts) fa.push_back(a.field()(p));
    for (std::size_t k = pts.size(); k-- > 0;) fb[k] = b.field()(pts[k]);
    for (std::size_t k = 0; k < pts.size(); ++k) {
        EXPECT_EQ(fa[k].x(), fb[k].x());
        EXPECT_EQ(fa[k].y(), fb[k].y());
    }
}
