#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace degen {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kPi = 3.14159265358979323846;

/// Selects between the serial reference path of a kernel and its OpenMP path.
/// Both paths produce bit-identical results; the serial one is kept for tests.
enum class Exec { serial, parallel };

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// Axis-aligned rectangle of gradient space or of the physical plane.
struct Box {
    Vec2 lo{-1.0, -1.0};
    Vec2 hi{1.0, 1.0};

    static Box square(double half) { return Box{Vec2(-half, -half), Vec2(half, half)}; }

    bool contains(const Vec2& p) const
    {
        return p.x() >= lo.x() && p.x() <= hi.x() && p.y() >= lo.y() && p.y() <= hi.y();
    }
    double diameter() const { return (hi - lo).norm(); }
    Box inflated(double d) const { return Box{lo - Vec2(d, d), hi + Vec2(d, d)}; }
    bool contains_ball(const Vec2& c, double r) const
    {
        return c.x() - r >= lo.x() && c.x() + r <= hi.x() && c.y() - r >= lo.y() && c.y() + r <= hi.y();
    }
};

/// Counter-clockwise rotation by pi/2.
inline Vec2 rot90(const Vec2& v) { return Vec2(-v.y(), v.x()); }
/// Clockwise rotation by pi/2, the inverse of rot90.
inline Vec2 rot90_inv(const Vec2& v) { return Vec2(v.y(), -v.x()); }

/// Quintic smoothstep 6x^5 - 15x^4 + 10x^3 clamped to [0, 1]; C^2 at both ends.
inline double smoothstep5(double x)
{
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    return x * x * x * (x * (6.0 * x - 15.0) + 10.0);
}

inline double smoothstep5_deriv(double x)
{
    if (x <= 0.0 || x >= 1.0) return 0.0;
    return 30.0 * x * x * (x - 1.0) * (x - 1.0);
}

/// Eigenvalues (ascending) of a symmetric 2x2 matrix from trace and determinant.
/// The smaller-magnitude root is recovered as det / (larger root) to avoid cancellation.
inline Vec2 sym_eigenvalues(const Mat2& a)
{
    const double tr = a(0, 0) + a(1, 1);
    const double diff = a(0, 0) - a(1, 1);
    const double off = 0.5 * (a(0, 1) + a(1, 0));
    const double det = a(0, 0) * a(1, 1) - off * off;
    const double disc = std::sqrt(diff * diff + 4.0 * off * off);
    if (tr >= 0.0) {
        const double hi = 0.5 * (tr + disc);
        return Vec2(hi != 0.0 ? det / hi : 0.5 * (tr - disc), hi);
    }
    const double lo = 0.5 * (tr - disc);
    return Vec2(lo, det / lo);
}

inline Mat2 sym_part(const Mat2& a) { return 0.5 * (a + a.transpose()); }

inline bool all_finite(const Vec2& v) { return std::isfinite(v.x()) && std::isfinite(v.y()); }
inline bool all_finite(const Mat2& m) { return m.allFinite(); }

}  // namespace degen
