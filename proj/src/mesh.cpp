#include "degen/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

namespace degen {

Json Domain::to_json() const
{
    if (is_disk()) return Json{{"kind", "disk"}, {"R", R_out}};
    return Json{{"kind", "annulus"}, {"R_in", R_in}, {"R_out", R_out}};
}

namespace {

// ring k at radius r with m equally spaced vertices starting at angle 0
void push_ring(Mesh& mesh, double r, int m)
{
    for (int j = 0; j < m; ++j) {
        const double a = 2.0 * kPi * j / m;
        mesh.vertices.emplace_back(r * std::cos(a), r * std::sin(a));
    }
}

// triangulates the band between ring A (inner, p vertices from a0) and ring B (outer, q from b0)
void zip_rings(Mesh& mesh, int a0, int p, int b0, int q)
{
    if (p == 1) {
        for (int j = 0; j < q; ++j) mesh.triangles.push_back({a0, b0 + j, b0 + (j + 1) % q});
        return;
    }
    int i = 0, j = 0;
    while (i < p || j < q) {
        const double ta = double(i + 1) / p;
        const double tb = double(j + 1) / q;
        if (j < q && (i == p || tb <= ta)) {
            mesh.triangles.push_back({a0 + i % p, b0 + j, b0 + (j + 1) % q});
            ++j;
        } else {
            mesh.triangles.push_back({a0 + i, b0 + j % q, a0 + (i + 1) % p});
            ++i;
        }
    }
}

Mesh rings(const Domain& d, int n)
{
    Mesh mesh;
    mesh.domain = d;
    std::vector<int> start, count;
    if (d.is_disk()) {
        mesh.vertices.emplace_back(0.0, 0.0);
        start.push_back(0);
        count.push_back(1);
        for (int k = 1; k <= n; ++k) {
            start.push_back(int(mesh.vertices.size()));
            count.push_back(6 * k);
            push_ring(mesh, d.R_out * k / n, 6 * k);
        }
    } else {
        const double dr = (d.R_out - d.R_in) / n;
        for (int k = 0; k <= n; ++k) {
            const double r = k == n ? d.R_out : d.R_in + k * dr;
            const int m = std::max(8, int(std::lround(2.0 * kPi * r / dr)));
            start.push_back(int(mesh.vertices.size()));
            count.push_back(m);
            push_ring(mesh, r, m);
        }
    }
    for (std::size_t k = 0; k + 1 < start.size(); ++k) zip_rings(mesh, start[k], count[k], start[k + 1], count[k + 1]);
    mesh.is_boundary.assign(mesh.vertices.size(), 0);
    auto mark = [&](std::size_t k) {
        for (int v = start[k]; v < start[k] + count[k]; ++v) mesh.is_boundary[v] = 1;
    };
    mark(start.size() - 1);
    if (!d.is_disk()) mark(0);
    for (int v = 0; v < int(mesh.vertices.size()); ++v)
        if (mesh.is_boundary[v]) mesh.boundary_vertices.push_back(v);
    finalize_mesh(mesh);
    return mesh;
}

}  // namespace

void finalize_mesh(Mesh& mesh)
{
    const std::size_t nt = mesh.triangles.size();
    mesh.area.resize(nt);
    mesh.grad_hat.resize(nt);
    mesh.centroid.resize(nt);
    mesh.h = 0.0;
    for (std::size_t t = 0; t < nt; ++t) {
        const auto& tri = mesh.triangles[t];
        const Vec2 &p0 = mesh.vertices[tri[0]], &p1 = mesh.vertices[tri[1]], &p2 = mesh.vertices[tri[2]];
        const Vec2 e1 = p1 - p0, e2 = p2 - p0;
        const double a2 = e1.x() * e2.y() - e1.y() * e2.x();
        if (!(a2 > 0.0)) throw Error("mesh triangle with non-positive area");
        mesh.area[t] = 0.5 * a2;
        mesh.grad_hat[t] = {rot90(p2 - p1) / a2, rot90(p0 - p2) / a2, rot90(p1 - p0) / a2};
        mesh.centroid[t] = (p0 + p1 + p2) / 3.0;
        mesh.h = std::max({mesh.h, e1.norm(), e2.norm(), (p2 - p1).norm()});
    }
    const std::size_t nv = mesh.vertices.size();
    mesh.vt_offset.assign(nv + 1, 0);
    for (const auto& tri : mesh.triangles)
        for (int v : tri) ++mesh.vt_offset[v + 1];
    for (std::size_t v = 0; v < nv; ++v) mesh.vt_offset[v + 1] += mesh.vt_offset[v];
    mesh.vt_entries.resize(mesh.vt_offset[nv]);
    std::vector<int> fill(mesh.vt_offset.begin(), mesh.vt_offset.end() - 1);
    for (std::size_t t = 0; t < nt; ++t)
        for (int l = 0; l < 3; ++l) mesh.vt_entries[fill[mesh.triangles[t][l]]++] = {int(t), l};

    // outer polygon: the outer ring is regular, so its inradius is R cos(pi/m)
    int m_outer = 0;
    for (int v : mesh.boundary_vertices)
        if (std::abs(mesh.vertices[v].norm() - mesh.domain.R_out) < 1e-9 * mesh.domain.R_out) ++m_outer;
    mesh.inscribed_radius = m_outer ? mesh.domain.R_out * std::cos(kPi / m_outer) : 0.0;

    const double R = mesh.domain.R_out;
    mesh.bucket_size = std::max(mesh.h, 1e-12);
    mesh.n_buckets = int(std::ceil(2.0 * R / mesh.bucket_size)) + 1;
    const int nb = mesh.n_buckets;
    auto cell = [&](double x) { return std::clamp(int(std::floor((x + R) / mesh.bucket_size)), 0, nb - 1); };
    std::vector<std::vector<int>> lists(std::size_t(nb) * nb);
    for (std::size_t t = 0; t < nt; ++t) {
        Vec2 lo = mesh.vertices[mesh.triangles[t][0]], hi = lo;
        for (int l = 1; l < 3; ++l) {
            lo = lo.cwiseMin(mesh.vertices[mesh.triangles[t][l]]);
            hi = hi.cwiseMax(mesh.vertices[mesh.triangles[t][l]]);
        }
        for (int j = cell(lo.y()); j <= cell(hi.y()); ++j)
            for (int i = cell(lo.x()); i <= cell(hi.x()); ++i) lists[std::size_t(j) * nb + i].push_back(int(t));
    }
    mesh.bucket_offset.assign(lists.size() + 1, 0);
    mesh.bucket_entries.clear();
    for (std::size_t b = 0; b < lists.size(); ++b) {
        mesh.bucket_entries.insert(mesh.bucket_entries.end(), lists[b].begin(), lists[b].end());
        mesh.bucket_offset[b + 1] = int(mesh.bucket_entries.size());
    }
}

Mesh build_mesh(const Domain& d, double h_target)
{
    if (!(d.R_out > 0.0) || d.R_in < 0.0 || !(d.R_in < d.R_out))
        throw ConfigError("domain needs 0 <= R_in < R_out");
    if (!(h_target > 0.0)) throw ConfigError("mesh size must be positive");
    if (h_target > d.width()) throw ConfigError("mesh size larger than the domain width");
    const double extent = d.is_disk() ? d.R_out : d.R_out - d.R_in;
    int n = std::max(d.is_disk() ? 2 : 1, int(std::ceil(extent / h_target)));
    for (;;) {
        Mesh mesh = rings(d, n);
        if (mesh.h <= h_target) return mesh;
        n = std::max(n + 1, int(std::ceil(n * mesh.h / h_target)));
    }
}

std::vector<Vec2> Mesh::cell_gradients(const std::vector<double>& u, Exec exec) const
{
    std::vector<Vec2> g(triangles.size());
    const long nt = long(triangles.size());
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
    for (long t = 0; t < nt; ++t) g[t] = cell_gradient(u, std::size_t(t));
    return g;
}

int Mesh::locate(const Vec2& p) const
{
    const double R = domain.R_out;
    const int i = int(std::floor((p.x() + R) / bucket_size));
    const int j = int(std::floor((p.y() + R) / bucket_size));
    if (i < 0 || j < 0 || i >= n_buckets || j >= n_buckets) return -1;
    const std::size_t b = std::size_t(j) * n_buckets + i;
    for (int k = bucket_offset[b]; k < bucket_offset[b + 1]; ++k) {
        const int t = bucket_entries[k];
        const auto& tri = triangles[t];
        const Vec2& p0 = vertices[tri[0]];
        const double b1 = grad_hat[t][1].dot(p - p0);
        const double b2 = grad_hat[t][2].dot(p - p0);
        const double b0 = 1.0 - b1 - b2;
        if (b0 >= -1e-12 && b1 >= -1e-12 && b2 >= -1e-12) return t;
    }
    return -1;
}

std::vector<int> Mesh::boundary_hops() const
{
    std::vector<int> hops(vertices.size(), -1);
    std::deque<int> queue;
    for (int v : boundary_vertices) {
        hops[v] = 0;
        queue.push_back(v);
    }
    while (!queue.empty()) {
        const int v = queue.front();
        queue.pop_front();
        for (int k = vt_offset[v]; k < vt_offset[v + 1]; ++k)
            for (int w : triangles[vt_entries[k].first])
                if (hops[w] < 0) {
                    hops[w] = hops[v] + 1;
                    queue.push_back(w);
                }
    }
    return hops;
}

double l2_norm_p1(const Mesh& mesh, const std::vector<double>& u, double r)
{
    double s = 0.0;
    for (std::size_t t = 0; t < mesh.n_triangles(); ++t) {
        if (mesh.centroid[t].norm() > r) continue;
        const auto& tri = mesh.triangles[t];
        const double a = u[tri[0]], b = u[tri[1]], c = u[tri[2]];
        s += mesh.area[t] / 6.0 * (a * a + b * b + c * c + a * b + b * c + a * c);
    }
    return std::sqrt(s);
}

double h1_seminorm_p1(const Mesh& mesh, const std::vector<double>& u, double r)
{
    double s = 0.0;
    for (std::size_t t = 0; t < mesh.n_triangles(); ++t)
        if (mesh.centroid[t].norm() <= r) s += mesh.area[t] * mesh.cell_gradient(u, t).squaredNorm();
    return std::sqrt(s);
}

void save_mesh(const Mesh& mesh, const std::filesystem::path& dir, const Json& extra)
{
    Json j{{"domain", mesh.domain.to_json()},
           {"h", mesh.h},
           {"n_vertices", mesh.n_vertices()},
           {"n_triangles", mesh.n_triangles()},
           {"n_boundary", mesh.boundary_vertices.size()}};
    for (const auto& [k, v] : extra.items()) j[k] = v;
    write_json(dir / "mesh.json", j);
    std::vector<std::vector<double>> vrows, trows;
    for (std::size_t v = 0; v < mesh.n_vertices(); ++v)
        vrows.push_back({mesh.vertices[v].x(), mesh.vertices[v].y(), double(mesh.is_boundary[v])});
    for (const auto& t : mesh.triangles) trows.push_back({double(t[0]), double(t[1]), double(t[2])});
    atomic_write(dir / "vertices.csv", csv_table({"x", "y", "boundary"}, vrows));
    atomic_write(dir / "triangles.csv", csv_table({"v0", "v1", "v2"}, trows));
}

}  // namespace degen
