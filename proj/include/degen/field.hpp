#pragma once

#include "degen/core.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace degen {

enum class FieldKind {
    identity_scaled,
    p_laplacian,
    radial_gradient,
    kink_circle,
    quartic_quartroot,
    custom,
    modified,
    mollified,
    dual,
};

std::string to_string(FieldKind kind);

/// A continuous planar vector field G together with the metadata the
/// analysis needs. Immutable after construction; copies share state.
class Field {
public:
    using EvalRule = std::function<Vec2(const Vec2&)>;
    using JacobianRule = std::function<Mat2(const Vec2&)>;
    using PotentialRule = std::function<double(const Vec2&)>;

    struct Data {
        std::string name;
        FieldKind kind = FieldKind::custom;
        EvalRule eval;
        JacobianRule jacobian;        // empty when absent
        PotentialRule potential;      // F with G = grad F; empty for non-gradient fields
        double growth_bound = 0.0;    // L with |G(x)| <= L (1 + |x|) on working_box
        Box working_box;
        std::vector<double> kink_radii;  // declared radii where G is only C^0
        bool radial = false;             // G(x) = g(|x|) x / |x|
    };

    Field() = default;
    explicit Field(Data data);

    const std::string& name() const { return data_->name; }
    FieldKind kind() const { return data_->kind; }
    const Box& working_box() const { return data_->working_box; }
    double growth_bound() const { return data_->growth_bound; }
    const std::vector<double>& kink_radii() const { return data_->kink_radii; }
    bool has_jacobian() const { return static_cast<bool>(data_->jacobian); }
    bool is_gradient() const { return static_cast<bool>(data_->potential); }
    bool is_radial() const { return data_->radial; }
    bool valid() const { return static_cast<bool>(data_); }

    /// G(xi) without finiteness checks; the hot path for kernels.
    Vec2 operator()(const Vec2& xi) const { return data_->eval(xi); }

    /// G(xi); throws Error when the rule produces a non-finite component.
    Vec2 eval(const Vec2& xi) const;

    /// Analytic Jacobian; only meaningful when has_jacobian().
    Mat2 analytic_jacobian(const Vec2& xi) const { return data_->jacobian(xi); }

    double potential(const Vec2& xi) const;

    const Data& data() const { return *data_; }

private:
    std::shared_ptr<const Data> data_;
};

/// Builtin field request, as read from a scenario config.
struct BuiltinSpec {
    std::string name;            // identity, identity-scaled, p-laplacian, radial-gradient, kink-circle, quartic-quartroot
    double c = 1.0;              // identity-scaled factor
    double p = 2.0;              // p-laplacian exponent
    /// radial-gradient: knots (r_i, phi'(r_i)) of a piecewise-linear phi', r_0 > 0; phi'(0) = 0.
    std::vector<std::pair<double, double>> knots;
    Box working_box = Box::square(2.0);
};

/// Radial profile for G = grad phi(|x|): phi' and phi'' plus declared kink radii.
struct RadialProfile {
    std::function<double(double)> dphi;
    std::function<double(double)> ddphi;   // may be empty; one-sided differences are used then
    std::function<double(double)> phi;     // may be empty; energy is unavailable then
    std::vector<double> kinks;
};

Field make_builtin(const BuiltinSpec& spec);
Field make_identity_scaled(double c, Box box = Box::square(2.0));
Field make_p_laplacian(double p, Box box = Box::square(2.0));
Field make_kink_circle(Box box = Box::square(2.0));
Field make_quartic_quartroot(Box box = Box::square(2.0));
Field make_radial(std::string name, RadialProfile profile, Box box = Box::square(2.0));
Field make_piecewise_linear_radial(const std::vector<std::pair<double, double>>& knots,
                                   Box box = Box::square(2.0));
Field make_custom(std::string name, Field::EvalRule eval, Box box,
                  std::optional<Field::JacobianRule> jacobian = std::nullopt);

/// Estimates max |G(x)| / (1 + |x|) on a deterministic lattice of the box.
double measure_growth_bound(const Field::EvalRule& eval, const Box& box, int n = 64);

struct JacobianResult {
    Mat2 matrix = Mat2::Zero();
    Mat2 symmetric = Mat2::Zero();
    Vec2 sym_eigenvalues = Vec2::Zero();  // ascending
    bool analytic = false;
    bool near_kink = false;
};

/// Analytic Jacobian when available and finite, otherwise central differences
/// with step h. Flags a kink when the forward and backward quotients along an
/// axis differ by more than kink_ratio.
JacobianResult jacobian(const Field& field, const Vec2& xi, double h, double kink_ratio = 4.0);

/// Central-difference Jacobian, used directly by the Newton assembly.
Mat2 fd_jacobian(const Field& field, const Vec2& xi, double h);

// ---------------------------------------------------------------------------
// Monotonicity estimates on sampled pairs.

struct PairSet {
    std::vector<Vec2> a;
    std::vector<Vec2> b;
    std::size_t size() const { return a.size(); }
};

/// Deterministic pair sample in a box: base point uniform, separation
/// log-uniform between 1e-3 diam and diam, direction uniform.
PairSet sample_pairs(const Box& box, std::size_t n, std::uint64_t seed);

/// Pairs centred on a lattice of the box with separations down to min_sep;
/// probes degenerate points that random sampling misses.
PairSet lattice_pairs(const Box& box, int n_lattice, double min_sep, int n_scales, int n_dirs);

struct MonotonicityViolation {
    Vec2 a, b;
    double value;
};

/// Smallest <G(a)-G(b), a-b> over the pairs, with the offending pair.
MonotonicityViolation worst_monotonicity(const Field& field, const PairSet& pairs);

/// Modulus of monotony estimate: min over pairs with |a-b| > t of <G(a)-G(b), a-b>.
/// Returns +inf when no pair is farther apart than t. Nondecreasing in t for a fixed set.
double monotony_modulus(const Field& field, double t, const PairSet& pairs);
double monotony_modulus(const Field& field, double t, const Box& box, std::size_t n_samples,
                        std::uint64_t seed = 1);

/// Smallest C with C <dG, dx> >= |dx|^2 + |dG|^2 on the sampled pairs;
/// nullopt when the quotient exceeds cap (degenerate field).
std::optional<double> strong_monotonicity_constant(const Field& field, const PairSet& pairs,
                                                   double cap = 1e8);
std::optional<double> strong_monotonicity_constant(const Field& field, const Box& box,
                                                   std::size_t n_samples, std::uint64_t seed = 1,
                                                   double cap = 1e8);

struct MonotonicityReport {
    std::vector<std::pair<double, double>> omega_samples;
    std::optional<double> strong_constant;
    double lipschitz_estimate = 0.0;
};

MonotonicityReport monotonicity_report(const Field& field, const Box& box,
                                       const std::vector<double>& gaps, std::size_t n_samples,
                                       std::uint64_t seed = 1);

// ---------------------------------------------------------------------------
// Ellipticity quotients.

struct QuotientOptions {
    std::vector<double> radii;      // decreasing
    int n_directions = 64;
    double s_guard = 1e-14;         // |dG| below this gives +inf for the s-sample

    /// 8 radii, ratio 1/2, smallest 1e-3.
    static QuotientOptions defaults();
};

struct Quotients {
    double d_quot = kInf;
    double s_quot = kInf;
};

/// d_quot = min <G(xi+z)-G(xi), z>/|z|^2, s_quot = min <G(xi+z)-G(xi), z>/|G(xi+z)-G(xi)|^2
/// over |z| in radii and n_directions uniform directions.
Quotients ellipticity_quotients(const Field& field, const Vec2& xi, const QuotientOptions& opts);

/// The sample offsets z of ellipticity_quotients, radius-major.
std::vector<Vec2> quotient_offsets(const QuotientOptions& opts);

/// Same quotients from precomputed offsets; bit-identical to the overload above.
Quotients ellipticity_quotients(const Field& field, const Vec2& xi, const std::vector<Vec2>& offsets,
                                double s_guard);

// ---------------------------------------------------------------------------
// Duality transform G*(eta) = i G^{-1}(-i eta).

struct NewtonOptions {
    int max_iter = 300;
    double residual_tol = 1e-13;
    double step_tol = 1e-13;
    double fd_step = 1e-7;
    double warm_cell = 0.02;   // cell size of the warm-start lattice in target space
};

struct Inversion {
    Vec2 x = Vec2::Zero();
    double residual = kInf;
    int iterations = 0;
    bool converged = false;
};

/// Solves G(x) = target with damped Newton (Armijo halving on |G(x)-target|^2).
Inversion invert(const Field& field, const Vec2& target, const Vec2& guess, const NewtonOptions& opts);

class WarmStartCache;

/// Dual field together with per-point inversion diagnostics.
class DualField {
public:
    DualField(Field base, NewtonOptions opts = {});

    const Field& field() const { return dual_; }
    const Field& base() const { return base_; }

    /// G*(eta) with the diagnostics of the underlying inversion.
    Inversion eval_checked(const Vec2& eta) const;

private:
    Field base_;
    NewtonOptions opts_;
    std::shared_ptr<WarmStartCache> cache_;
    Field dual_;
};

DualField dual_field(const Field& field, const NewtonOptions& opts = {});

}  // namespace degen
