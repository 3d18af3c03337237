#pragma once

#include "degen/core.hpp"
#include "degen/io.hpp"

#include <array>
#include <filesystem>
#include <vector>

namespace degen {

/// A disk of radius R_out (R_in == 0) or an annulus R_in < |x| < R_out.
struct Domain {
    double R_in = 0.0;
    double R_out = 1.0;

    static Domain disk(double R) { return Domain{0.0, R}; }
    static Domain annulus(double a, double b) { return Domain{a, b}; }
    bool is_disk() const { return R_in == 0.0; }
    double width() const { return is_disk() ? 2.0 * R_out : R_out - R_in; }
    Json to_json() const;
};

/// P1 triangulation built from concentric rings.
struct Mesh {
    Domain domain;
    std::vector<Vec2> vertices;
    std::vector<std::array<int, 3>> triangles;   // counter-clockwise
    std::vector<int> boundary_vertices;
    std::vector<std::uint8_t> is_boundary;
    double h = 0.0;                              // longest edge
    double inscribed_radius = 0.0;               // of the outer polygon

    // per-triangle geometry
    std::vector<double> area;
    std::vector<std::array<Vec2, 3>> grad_hat;
    std::vector<Vec2> centroid;

    // vertex -> incident (triangle, local index), CSR
    std::vector<int> vt_offset;
    std::vector<std::pair<int, int>> vt_entries;

    std::size_t n_vertices() const { return vertices.size(); }
    std::size_t n_triangles() const { return triangles.size(); }

    /// Exact gradient of the P1 interpolant on triangle t.
    Vec2 cell_gradient(const std::vector<double>& u, std::size_t t) const
    {
        const auto& tri = triangles[t];
        const auto& g = grad_hat[t];
        return u[tri[0]] * g[0] + u[tri[1]] * g[1] + u[tri[2]] * g[2];
    }

    std::vector<Vec2> cell_gradients(const std::vector<double>& u, Exec exec = Exec::parallel) const;

    /// Triangle containing p (closed, with 1e-12 barycentric slack), -1 if none.
    int locate(const Vec2& p) const;

    /// Graph distance (in edges) from every vertex to the boundary.
    std::vector<int> boundary_hops() const;

    // bucket index for locate
    double bucket_size = 0.0;
    int n_buckets = 0;
    std::vector<int> bucket_offset;
    std::vector<int> bucket_entries;
};

/// Deterministic ring mesh with longest edge <= h_target.
Mesh build_mesh(const Domain& domain, double h_target);

/// Recomputes areas, hat gradients, incidence and the locator from vertices and triangles.
void finalize_mesh(Mesh& mesh);

/// L2 norm of a P1 function over the triangles whose centroid lies in B_r (exact P1 mass).
double l2_norm_p1(const Mesh& mesh, const std::vector<double>& u, double r = kInf);

/// L2 norm of the piecewise-constant gradient over triangles with centroid in B_r.
double h1_seminorm_p1(const Mesh& mesh, const std::vector<double>& u, double r = kInf);

/// mesh.json plus vertices.csv and triangles.csv.
void save_mesh(const Mesh& mesh, const std::filesystem::path& dir, const Json& extra = Json::object());

}  // namespace degen
