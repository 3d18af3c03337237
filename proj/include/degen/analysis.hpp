#pragma once

#include "degen/grid.hpp"
#include "degen/solve.hpp"

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace degen {

/// A gradient map x -> grad u(x) on a disk, backed by a discrete solution
/// (piecewise constant over triangles) or by a closed-form rule. Rescaling and
/// pointwise transforms are carried as an affine map into the source plus a
/// post-map on values, so every view samples the same underlying cells.
class GradientField {
public:
    using Rule = std::function<Vec2(const Vec2&)>;

    static GradientField from_solution(std::shared_ptr<const DiscreteSolution> sol);
    /// Rule defined on B_radius(center); `bound` is max |grad u| (estimated on a lattice when <= 0).
    static GradientField synthetic(Rule rule, Vec2 center = Vec2::Zero(), double radius = 1.0, double bound = 0.0);

    bool solution_backed() const { return static_cast<bool>(sol_); }
    const DiscreteSolution* solution() const { return sol_.get(); }
    Vec2 center() const { return center_; }
    double radius() const { return radius_; }
    /// M-hat: max sampled |grad u| of the source (after the post-map).
    double bound() const { return bound_; }

    /// x -> grad u(offset + scale x) followed by the post-map. Solutions return the
    /// value of the containing triangle and throw outside the mesh.
    Vec2 operator()(const Vec2& x) const;

    bool contains_ball(const Vec2& c, double r) const;

    struct Sample {
        Vec2 x;        // local coordinates
        Vec2 value;
        double weight; // area in local coordinates
    };

    /// Weighted samples covering B_r(c). Solutions: triangles inside the ball count
    /// whole; triangles cut by the circle are split into 16 sub-triangles kept by
    /// centroid. Synthetic rules: a 512 x 512 lattice on the bounding square.
    std::vector<Sample> ball_samples(const Vec2& c, double r, Exec exec = Exec::parallel) const;

    // composition hooks, used by the free functions below
    GradientField rescaled(const Vec2& x0, double delta) const;
    GradientField mapped(const Rule& post, double bound) const;

private:
    std::shared_ptr<const DiscreteSolution> sol_;
    Rule rule_;
    Rule post_;
    Vec2 offset_ = Vec2::Zero();
    double scale_ = 1.0;
    Vec2 center_ = Vec2::Zero();
    double radius_ = 1.0;
    double bound_ = 0.0;

    Vec2 raw(const Vec2& source_x, int tri) const;
};

/// x -> grad u(x0 + delta x) on B_1. Throws when B_delta(x0) leaves the region.
GradientField rescale(const GradientField& g, const Vec2& x0, double delta);

/// x -> i G(grad u(x)), the gradient of the conjugate solution.
GradientField conjugate_gradient(const GradientField& g, const Field& field);

/// Weighted mean of the samples over B_r(c).
Vec2 ball_mean(const GradientField& g, const Vec2& c, double r);

struct LebesgueProfile {
    Vec2 p = Vec2::Zero();         // mean over the smallest ball
    std::vector<double> delta;
    std::vector<double> value;     // mean |grad u - p| over B_delta(x0)
    double threshold = 0.0;
    bool lebesgue_like = false;    // last value <= threshold and not above the first
    Json to_json() const;
    std::string to_csv() const;
};

/// theta <= 0 selects 0.05 M-hat.
LebesgueProfile lebesgue_profile(const GradientField& g, const Vec2& x0, const std::vector<double>& deltas,
                                 double theta = 0.0);

struct DistanceProfile {
    SetClass cls = SetClass::DS;
    std::vector<double> delta;
    std::vector<double> value;     // mean dist(grad u, class); +inf when the class is empty
    std::string to_csv() const;
};

DistanceProfile distance_profile(const GradientField& g, const DegeneracyGrid& grid, const Vec2& x0,
                                 const std::vector<double>& deltas, SetClass cls = SetClass::DS);

struct GradientHistogram {
    Box box;
    int n = 0;
    std::vector<double> mass;      // n x n, row-major with the second gradient component as row
    double overflow = 0.0;         // mass outside the box
    double total_mass = 0.0;       // includes overflow
    bool overflow_warning = false; // overflow above 1% of the total

    double binned_mass() const;
    /// Mass of bins whose centre lies within distance d of a point set.
    double mass_near(const std::vector<Vec2>& points, double d) const;
    int bin_of(const Vec2& v) const;   // -1 when outside the box
    Vec2 bin_center(int b) const;
    std::string to_csv() const;
};

/// Histogram of grad u over B_r(c) (local coordinates).
GradientHistogram gradient_histogram(const GradientField& g, const Vec2& c, double r, const Box& box, int n_bins);

/// Histograms of grad u over B_1 restricted to each window of a parts x parts
/// partition of [-1, 1]^2; windows listed row-major.
std::vector<GradientHistogram> windowed_histograms(const GradientField& g, const Box& box, int n_bins, int parts = 8);

/// Radial bump, 1 on B_{eta/2}(center), 0 outside B_eta(center), quintic smoothstep between.
struct BumpH {
    Vec2 center = Vec2::Zero();
    double eta = 1.0;
    double grad_bound = 0.0;       // max |grad H| = 15 / (4 eta)

    double operator()(const Vec2& xi) const;
    Vec2 gradient(const Vec2& xi) const;
    /// Radius at which H equals level in (0, 1), by bisection.
    double level_radius(double level) const;
};

/// Builds H and verifies on 1000 radial samples that H = 1 on B_{eta/2}, H = 0 outside
/// B_eta, {H >= 5/8} lies in B_{3eta/4} and {H <= 3/4} misses B_{2eta/3}. Throws on failure.
BumpH make_bump(const Vec2& center, double eta);

/// |{H(grad u) >= 3/4} cap B_delta(x0)| / |B_delta(x0)|.
double superlevel_fraction(const GradientField& g, const BumpH& H, double delta, const Vec2& x0 = Vec2::Zero());

struct CompositeEnergy {
    double value = 0.0;
    std::size_t n_triangles = 0;
    std::size_t n_degenerate = 0;  // triangles with a vertex lacking a recovered Hessian
    bool warning = false;          // degenerate share above 5%
};

/// sum over triangles with centroid in the annulus r_in <= |x| <= r_out of
/// area |D^2 u^T grad H(grad u)|^2, D^2 u the mean recovered vertex Hessian.
CompositeEnergy composite_energy(const DiscreteSolution& sol, const BumpH& H, double r_in, double r_out);

/// Scalar function on B_1 with optional analytic gradient (central differences otherwise).
struct ScalarField {
    std::function<double(const Vec2&)> value;
    std::function<Vec2(const Vec2&)> gradient;
    Vec2 grad(const Vec2& x) const;
};

struct SvOptions {
    int n_radii = 256;
    int n_angles = 512;
    int mass_lattice = 512;
    int n_radial_panels = 64;      // 8-point Gauss-Legendre per panel for the energy
    double slack = 0.05;           // relative slack on the energy threshold
    Exec exec = Exec::parallel;
};

enum class SvOutcome { hypothesis_unmet, circle_branch, energy_branch, both, violation };
std::string to_string(SvOutcome o);

struct SvReport {
    double M = 0.0;
    double nu = 0.0;
    double mass_fraction = 0.0;    // |{v >= 3M/4}| / |B_1| on the lattice
    bool in_range = true;          // 0 <= v <= M on the lattice
    bool hypothesis = false;
    double s_min = 0.0;            // sqrt(nu / 2)
    bool circle_branch = false;    // some scanned s has min v >= 5M/8 on the circle
    double best_circle_s = 0.0;
    double best_circle_min = 0.0;  // largest circle minimum found
    double energy = 0.0;           // of |grad v|^2 over B_1 minus B_{s_min}
    double energy_threshold = 0.0; // M^2 nu / (512 pi^2)
    bool energy_branch = false;    // energy >= (1 - slack) threshold
    SvOutcome outcome = SvOutcome::hypothesis_unmet;
    Json to_json() const;
};

/// Fraction of the lattice points of B_1 (n x n cell centres of [-1, 1]^2) where v >= level.
double superlevel_mass_fraction(const ScalarField& v, double level, int n = 512, Exec exec = Exec::parallel);

/// Checks the circle / annulus-energy alternative for 0 <= v <= M on B_1 whose
/// superlevel set {v >= 3M/4} has at least the fraction nu of the disk.
SvReport sv_dichotomy(const ScalarField& v, double nu, double M, const SvOptions& opts = {});

/// Smooth random field on B_1 with values in [0, M]: a logistic function of a sum
/// of Gaussian bumps, deterministic in the seed.
ScalarField random_smooth_field(std::uint64_t seed, double M);

struct ComponentLabels {
    double r = 0.0;
    double M = 0.0;
    int K = 0;
    double bound = 0.0;            // 4 (2M + r/2)^2 / r^2
    std::vector<int> label;        // per grid node; -1 outside B_2M or within r of DS
    bool bound_holds() const { return K <= bound; }
    Json to_json() const;
};

/// 4-connected components of {|xi| <= 2M, dist(xi, DS) > r} on the grid.
ComponentLabels connected_components(const DegeneracyGrid& grid, double r, double M);

enum class Localization { contained, disjoint, neither };
std::string to_string(Localization s);

struct LocalizationReport {
    int component = -1;
    double r = 0.0;
    std::vector<double> delta;
    std::vector<Localization> state;
    std::vector<Vec2> p;           // mean gradient over each ball
    std::vector<double> spread;    // max |grad u - p|
    Json to_json() const;
};

/// For each delta, classifies grad u(B_delta(x0)) as contained in B_r(p) with p in the
/// component, disjoint from the component, or neither. Membership of a gradient in the
/// component is read from its nearest grid node.
LocalizationReport localization_check(const GradientField& g, const Vec2& x0, const std::vector<double>& deltas,
                                      const DegeneracyGrid& grid, const ComponentLabels& labels, int component);

struct LebesgueNumber {
    double eta = 0.0;              // from the halving search
    double exact = 0.0;            // min over nodes of the best containment radius
    double cap = 0.0;
    bool covered = true;
    Vec2 uncovered = Vec2::Zero();
    Json to_json() const;
};

/// Lebesgue number of the covering of the grid nodes in B_2M by O_lambda, V_Lambda
/// and the open r-neighbourhood of DS. Nodes outside the grid count as members of
/// every set. A search cap <= 0 selects M.
LebesgueNumber lebesgue_number(const DegeneracyGrid& grid, double lambda, double Lambda, double r, double M,
                               double cap = 0.0);

struct EllipticBall {
    Vec2 q = Vec2::Zero();
    double rho = 0.0;
    double lambda = 0.0;           // worst ladder levels over the grid nodes of B_rho(q)
    double Lambda = 0.0;
    Json to_json() const;
};

/// Node q of the component maximizing the distance d to non-elliptic nodes, to
/// nodes outside the component and to the box edge, with rho = d / 2. When p0 is
/// given, only nodes with |q - p0| >= d are eligible, so B_rho(q) stays well away
/// from p0. Throws when the component has no eligible elliptic node.
EllipticBall find_elliptic_ball(const DegeneracyGrid& grid, const ComponentLabels& labels, int component,
                                const std::optional<Vec2>& p0 = std::nullopt);

struct Subsequence {
    std::vector<int> index;        // into the supplied delta grid
    std::vector<double> delta;
    std::vector<double> f;
    bool exhausted = false;        // the grid ran out before f reached 0
};

/// delta_{j_{i+1}} is the first grid value below delta_{j_i} sqrt(f(delta_{j_i}) / 4).
Subsequence select_subsequence(const std::vector<double>& delta_grid, const std::function<double(double)>& f);

struct TrendTest {
    long S = 0;
    double variance = 0.0;         // tie-corrected
    double z = 0.0;                // continuity-corrected normal score
    double p_value = 1.0;          // two-sided
    bool increasing = false;       // S > 0 and p < alpha
    bool decreasing = false;
    Json to_json() const;
};

/// Mann-Kendall trend test with the normal approximation.
TrendTest mann_kendall(const std::vector<double>& series, double alpha = 0.05);

}  // namespace degen
