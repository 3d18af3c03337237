#include "degen/grid.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

using namespace degen;

namespace {

DegeneracyGrid classify(const Field& f, double half = 2.0, double h = 0.02, Exec exec = Exec::parallel)
{
    GridSpec spec;
    spec.box = Box::square(half);
    spec.h = h;
    spec.ladders = Ladders::for_field(f);
    return classify_grid(f, spec, exec);
}

std::vector<Vec2> unit_circle(int n)
{
    std::vector<Vec2> c;
    for (int k = 0; k < n; ++k) c.emplace_back(std::cos(2 * kPi * k / n), std::sin(2 * kPi * k / n));
    return c;
}

std::vector<Field> all_builtins()
{
    return {make_identity_scaled(1.0), make_identity_scaled(2.0), make_p_laplacian(4.0),
            make_p_laplacian(1.5), make_kink_circle(), make_quartic_quartroot(),
            make_piecewise_linear_radial({{0.5, 0.5}, {1.0, 0.6}, {2.0, 2.0}})};
}

}  // namespace

TEST(DistanceTransform, MatchesBruteForce)
{
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 20; ++trial) {
        const int nx = 5 + int(rng() % 30), ny = 5 + int(rng() % 30);
        std::vector<std::uint8_t> mask(std::size_t(nx) * ny, 0);
        const int nset = 1 + int(rng() % 6);
        for (int k = 0; k < nset; ++k) mask[rng() % mask.size()] = 1;
        const auto d = distance_transform(mask, nx, ny, 0.5, Exec::serial);
        const auto dp = distance_transform(mask, nx, ny, 0.5, Exec::parallel);
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i) {
                double best = kInf;
                for (int b = 0; b < ny; ++b)
                    for (int a = 0; a < nx; ++a)
                        if (mask[std::size_t(b) * nx + a]) best = std::min(best, std::hypot(a - i, b - j));
                const std::size_t k = std::size_t(j) * nx + i;
                EXPECT_NEAR(d[k], 0.5 * best, 1e-12);
                EXPECT_EQ(d[k], dp[k]);
            }
    }
}

TEST(DistanceTransform, EmptySetIsInfinite)
{
    const auto d = distance_transform(std::vector<std::uint8_t>(12, 0), 3, 4, 1.0);
    for (double v : d) EXPECT_EQ(v, kInf);
}

TEST(Closing, ContainsInputAndFillsOneCellGaps)
{
    const int nx = 9, ny = 9;
    std::vector<std::uint8_t> m(nx * ny, 0);
    for (int i = 0; i < nx; ++i)
        if (i != 4) m[4 * nx + i] = 1;
    const auto c = morphological_closing(m, nx, ny);
    for (std::size_t k = 0; k < m.size(); ++k)
        if (m[k]) EXPECT_TRUE(c[k]);
    EXPECT_TRUE(c[4 * nx + 4]);
    // the line does not thicken
    EXPECT_FALSE(c[3 * nx + 2]);
    EXPECT_FALSE(c[5 * nx + 2]);
}

TEST(Classify, IdentityIsEverywhereElliptic)
{
    GridSpec spec;
    spec.ladders.lambda = {0.5};
    spec.ladders.Lambda = {2.0};
    const auto g = classify_grid(make_identity_scaled(1.0), spec);
    EXPECT_TRUE(g.empty(SetClass::D));
    EXPECT_TRUE(g.empty(SetClass::S));
    EXPECT_TRUE(g.empty(SetClass::DS));
    for (std::size_t k = 0; k < g.size(); ++k) EXPECT_TRUE(g.elliptic(k));
    EXPECT_EQ(dist_to_class(g, Vec2(0.3, -0.2), SetClass::D), kInf);
    EXPECT_EQ(dist_to_class(g, Vec2(1.0, 1.0), SetClass::DS), kInf);
}

TEST(Classify, LadderInvariants)
{
    for (const Field& f : all_builtins()) {
        const auto g = classify(f, 2.0, 0.05);
        for (std::size_t idx = 0; idx < g.size(); ++idx) {
            EXPECT_EQ(bool(g.raw_D[idx]), g.o_level[idx] < 0);
            EXPECT_EQ(bool(g.raw_S[idx]), g.v_level[idx] < 0);
            for (int k = 0; k + 1 < int(g.ladders.lambda.size()); ++k)
                if (g.in_O(idx, k)) EXPECT_TRUE(g.in_O(idx, k + 1));
            for (int k = 0; k + 1 < int(g.ladders.Lambda.size()); ++k)
                if (g.in_V(idx, k)) EXPECT_TRUE(g.in_V(idx, k + 1));
            if (g.raw_D[idx]) EXPECT_TRUE(g.in_D[idx]);
            if (g.raw_S[idx]) EXPECT_TRUE(g.in_S[idx]);
        }
    }
}

TEST(Classify, DistanceIsOneLipschitz)
{
    for (const Field& f : {make_kink_circle(), make_quartic_quartroot()}) {
        const auto g = classify(f, 2.0, 0.04);
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i + 1 < g.nx; ++i) {
                EXPECT_LE(std::abs(g.dist_DS[g.index(i, j)] - g.dist_DS[g.index(i + 1, j)]), g.h * (1 + 1e-12));
                if (j + 1 < g.ny)
                    EXPECT_LE(std::abs(g.dist_DS[g.index(i, j)] - g.dist_DS[g.index(i, j + 1)]), g.h * (1 + 1e-12));
            }
    }
}

TEST(Classify, SerialAndParallelAgreeBitwise)
{
    const Field f = make_kink_circle();
    const auto a = classify(f, 1.5, 0.05, Exec::serial);
    const auto b = classify(f, 1.5, 0.05, Exec::parallel);
    EXPECT_EQ(a.d_quot, b.d_quot);
    EXPECT_EQ(a.s_quot, b.s_quot);
    EXPECT_EQ(a.in_DS, b.in_DS);
    EXPECT_EQ(a.dist_DS, b.dist_DS);
}

TEST(Classify, QuarticDegeneracyAtOrigin)
{
    const auto g = classify(make_quartic_quartroot());
    ASSERT_FALSE(g.empty(SetClass::DS));
    for (const Vec2& p : g.nodes_of(SetClass::DS)) EXPECT_LE(p.norm(), 2 * g.h + 1e-12);
    EXPECT_LE(hausdorff(g.nodes_of(SetClass::DS), {Vec2::Zero()}), 2 * g.h);
    EXPECT_NEAR(dist_to_class(g, Vec2(1, 0), SetClass::DS), 1.0, 2 * g.h);
}

TEST(Classify, KinkCircleDegeneracyOnUnitCircle)
{
    const auto g = classify(make_kink_circle());
    ASSERT_FALSE(g.empty(SetClass::DS));
    EXPECT_LE(hausdorff(g.nodes_of(SetClass::DS), unit_circle(4000)), 2 * g.h);
    EXPECT_NEAR(dist_to_class(g, Vec2(0, 0), SetClass::DS), 1.0, 2 * g.h);
}

TEST(Classify, EmptyInteriorOfOneSidedSets)
{
    for (const Field& f : all_builtins()) {
        const auto g = classify(f);
        std::vector<std::uint8_t> d_only(g.size()), s_only(g.size());
        for (std::size_t k = 0; k < g.size(); ++k) {
            d_only[k] = g.in_D[k] && !g.in_S[k];
            s_only[k] = g.in_S[k] && !g.in_D[k];
        }
        EXPECT_LE(largest_inscribed_radius(d_only, g.nx, g.ny, g.h), 5 * g.h) << f.name();
        EXPECT_LE(largest_inscribed_radius(s_only, g.nx, g.ny, g.h), 5 * g.h) << f.name();
    }
}

TEST(Classify, InscribedRadiusOfFullDisk)
{
    const int n = 41;
    std::vector<std::uint8_t> m(n * n, 0);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) m[j * n + i] = std::hypot(i - 20, j - 20) <= 10.0;
    // nearest node outside the disk is (30, 21)
    EXPECT_NEAR(largest_inscribed_radius(m, n, n, 1.0), std::sqrt(101.0), 1e-12);
}

TEST(Classify, QuarticDualityOfClasses)
{
    const Field f = make_quartic_quartroot();
    const auto g = classify(f);
    const DualField dual = dual_field(f);
    GridSpec spec;
    spec.box = Box::square(2.0);
    spec.h = 0.02;
    spec.ladders = Ladders::for_field(f);
    const auto gd = classify_grid(dual.field(), spec);
    const auto check = duality_image_check(f, g, gd);
    EXPECT_GT(check.n_image, 0u);
    EXPECT_GT(check.n_target, 0u);
    EXPECT_LE(check.hausdorff, 3 * g.h);
}

TEST(Classify, DistToClassRejectsOutsidePoint)
{
    const auto g = classify(make_quartic_quartroot(), 1.0, 0.1);
    EXPECT_THROW(dist_to_class(g, Vec2(3, 0), SetClass::DS), Error);
}

TEST(Classify, RejectsBadSpec)
{
    GridSpec spec;
    spec.h = -1;
    EXPECT_THROW(classify_grid(make_identity_scaled(1.0), spec), ConfigError);
    spec.h = 0.1;
    spec.ladders.lambda = {0.5, 1.0};
    EXPECT_THROW(classify_grid(make_identity_scaled(1.0), spec), ConfigError);
}

TEST(Persistence, WritesHeaderAndChannels)
{
    const auto g = classify(make_quartic_quartroot(), 1.0, 0.1);
    const auto dir = std::filesystem::temp_directory_path() / "degen_grid_test";
    std::filesystem::remove_all(dir);
    save_grid(g, dir);
    for (const char* f : {"grid.json", "in_D.csv", "in_S.csv", "in_DS.csv", "dist_DS.csv", "o_level.csv"})
        EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
    std::ifstream in(dir / "in_DS.csv");
    std::string line;
    int rows = 0;
    while (std::getline(in, line)) {
        ++rows;
        EXPECT_EQ(std::count(line.begin(), line.end(), ','), g.nx - 1);
    }
    EXPECT_EQ(rows, g.ny);
    const auto header = Json::parse(std::ifstream(dir / "grid.json"));
    EXPECT_EQ(header["nx"], g.nx);
    EXPECT_EQ(header["h_grid"], g.h);
    std::filesystem::remove_all(dir);
}
