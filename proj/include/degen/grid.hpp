#pragma once

#include "degen/field.hpp"
#include "degen/io.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace degen {

/// The three node sets distances are measured to.
enum class SetClass { D, S, DS };

std::string to_string(SetClass c);
SetClass parse_set_class(const std::string& s);

/// Finite ellipticity ladders: lambda decreasing, Lambda increasing.
struct Ladders {
    std::vector<double> lambda;
    std::vector<double> Lambda;

    /// lambda = 1, 1/2, ..., 2^-lambda_depth and Lambda = 1, 2, ..., 2^Lambda_depth.
    static Ladders geometric(int lambda_depth, int Lambda_depth);
    static Ladders defaults() { return geometric(10, 10); }

    /// Depths suited to a builtin field. The singular set of a cube-root type
    /// field is only resolved when 1/Lambda_max falls below the s-quotient at
    /// one grid cell, and Lambda_max must still exceed the largest Jacobian
    /// eigenvalue on the box so that regular nodes stay in some V_Lambda.
    static Ladders for_field(const Field& field);

    void validate() const;
};

struct GridSpec {
    Box box = Box::square(2.0);
    double h = 0.02;
    Ladders ladders = Ladders::defaults();
    QuotientOptions quotients = QuotientOptions::defaults();
};

/// Node (i, j) sits at box.lo + (i h, j h); storage is row-major with j the row.
struct DegeneracyGrid {
    Box box;
    double h = 0.0;
    int nx = 0, ny = 0;
    Ladders ladders;

    std::vector<double> d_quot, s_quot;
    /// Smallest ladder index k with the node in O_{lambda_k} (V_{Lambda_k}); -1 when in none.
    std::vector<int> o_level, v_level;
    /// Ladder exhaustion before closing: raw_D <=> o_level == -1.
    std::vector<std::uint8_t> raw_D, raw_S;
    /// Closed sets used for all geometry.
    std::vector<std::uint8_t> in_D, in_S, in_DS;
    std::vector<double> dist_D, dist_S, dist_DS;

    std::size_t size() const { return std::size_t(nx) * ny; }
    std::size_t index(int i, int j) const { return std::size_t(j) * nx + i; }
    Vec2 node(int i, int j) const { return box.lo + h * Vec2(i, j); }
    Vec2 node(std::size_t idx) const { return node(int(idx % nx), int(idx / nx)); }

    /// Membership in O_{lambda_k} / V_{Lambda_k}.
    bool in_O(std::size_t idx, int k) const { return o_level[idx] >= 0 && o_level[idx] <= k; }
    bool in_V(std::size_t idx, int k) const { return v_level[idx] >= 0 && v_level[idx] <= k; }
    bool elliptic(std::size_t idx) const { return o_level[idx] >= 0 && v_level[idx] >= 0; }

    const std::vector<std::uint8_t>& flags(SetClass c) const;
    const std::vector<double>& distance(SetClass c) const;
    std::size_t count(SetClass c) const;
    bool empty(SetClass c) const { return count(c) == 0; }
    std::vector<Vec2> nodes_of(SetClass c) const;
    std::vector<Vec2> nodes_where(const std::vector<std::uint8_t>& mask) const;

    /// Nearest node index to a point inside the box.
    std::size_t nearest(const Vec2& p) const;
};

DegeneracyGrid classify_grid(const Field& field, const GridSpec& spec, Exec exec = Exec::parallel);

/// 3x3 dilation followed by 3x3 erosion; cells outside the grid count as set
/// during erosion, so the result contains the input.
std::vector<std::uint8_t> morphological_closing(const std::vector<std::uint8_t>& mask, int nx, int ny);

/// Exact Euclidean distance (in units of h) from every node to the nearest
/// set node; +inf everywhere when the set is empty.
std::vector<double> distance_transform(const std::vector<std::uint8_t>& mask, int nx, int ny, double h,
                                       Exec exec = Exec::parallel);

/// Bilinear interpolation of the class distance; +inf when the class is empty.
double dist_to_class(const DegeneracyGrid& grid, const Vec2& point, SetClass c);

/// Largest r such that some node has every node within distance r in the mask
/// (nodes outside the grid count as outside the mask).
double largest_inscribed_radius(const std::vector<std::uint8_t>& mask, int nx, int ny, double h);

/// Symmetric Hausdorff distance between finite point sets (+inf if exactly one is empty).
double hausdorff(const std::vector<Vec2>& a, const std::vector<Vec2>& b);

/// Image of the singular nodes of G under xi -> i G(xi), compared with the
/// degenerate nodes of the dual grid. Edges between adjacent singular nodes are
/// subdivided so consecutive image points are at most h/2 apart; image points
/// outside the dual grid box are dropped.
struct DualityImageCheck {
    double hausdorff = kInf;
    std::size_t n_image = 0;
    std::size_t n_target = 0;
};

DualityImageCheck duality_image_check(const Field& field, const DegeneracyGrid& grid,
                                      const DegeneracyGrid& dual_grid);

Json grid_header(const DegeneracyGrid& grid);

/// Header JSON plus one CSV matrix per channel.
void save_grid(const DegeneracyGrid& grid, const std::filesystem::path& dir);

}  // namespace degen
