#include "degen/grid.hpp"

#include <algorithm>
#include <cmath>

namespace degen {

std::string to_string(SetClass c)
{
    switch (c) {
    case SetClass::D: return "D";
    case SetClass::S: return "S";
    case SetClass::DS: return "DS";
    }
    return "?";
}

SetClass parse_set_class(const std::string& s)
{
    if (s == "D") return SetClass::D;
    if (s == "S") return SetClass::S;
    if (s == "DS" || s == "D&S" || s == "D∩S") return SetClass::DS;
    throw ConfigError("unknown set class '" + s + "' (expected D, S or DS)");
}

Ladders Ladders::geometric(int lambda_depth, int Lambda_depth)
{
    Ladders l;
    for (int k = 0; k <= lambda_depth; ++k) l.lambda.push_back(std::ldexp(1.0, -k));
    for (int k = 0; k <= Lambda_depth; ++k) l.Lambda.push_back(std::ldexp(1.0, k));
    return l;
}

Ladders Ladders::for_field(const Field& field)
{
    switch (field.kind()) {
    case FieldKind::quartic_quartroot: return geometric(10, 6);
    case FieldKind::kink_circle: return geometric(9, 2);
    default: return defaults();
    }
}

void Ladders::validate() const
{
    if (lambda.empty() || Lambda.empty()) throw ConfigError("ladders must be nonempty");
    for (std::size_t k = 0; k < lambda.size(); ++k) {
        if (!(lambda[k] > 0.0)) throw ConfigError("lambda ladder entries must be positive");
        if (k && !(lambda[k] < lambda[k - 1])) throw ConfigError("lambda ladder must decrease");
    }
    for (std::size_t k = 0; k < Lambda.size(); ++k) {
        if (!(Lambda[k] > 0.0)) throw ConfigError("Lambda ladder entries must be positive");
        if (k && !(Lambda[k] > Lambda[k - 1])) throw ConfigError("Lambda ladder must increase");
    }
}

const std::vector<std::uint8_t>& DegeneracyGrid::flags(SetClass c) const
{
    return c == SetClass::D ? in_D : c == SetClass::S ? in_S : in_DS;
}

const std::vector<double>& DegeneracyGrid::distance(SetClass c) const
{
    return c == SetClass::D ? dist_D : c == SetClass::S ? dist_S : dist_DS;
}

std::size_t DegeneracyGrid::count(SetClass c) const
{
    const auto& f = flags(c);
    return std::size_t(std::count(f.begin(), f.end(), std::uint8_t(1)));
}

std::vector<Vec2> DegeneracyGrid::nodes_where(const std::vector<std::uint8_t>& mask) const
{
    std::vector<Vec2> out;
    for (std::size_t k = 0; k < mask.size(); ++k)
        if (mask[k]) out.push_back(node(k));
    return out;
}

std::vector<Vec2> DegeneracyGrid::nodes_of(SetClass c) const { return nodes_where(flags(c)); }

std::size_t DegeneracyGrid::nearest(const Vec2& p) const
{
    const int i = std::clamp(int(std::lround((p.x() - box.lo.x()) / h)), 0, nx - 1);
    const int j = std::clamp(int(std::lround((p.y() - box.lo.y()) / h)), 0, ny - 1);
    return index(i, j);
}

std::vector<std::uint8_t> morphological_closing(const std::vector<std::uint8_t>& mask, int nx, int ny)
{
    std::vector<std::uint8_t> dil(mask.size(), 0), out(mask.size(), 0);
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            std::uint8_t v = 0;
            for (int dj = -1; dj <= 1 && !v; ++dj)
                for (int di = -1; di <= 1 && !v; ++di) {
                    const int a = i + di, b = j + dj;
                    if (a >= 0 && a < nx && b >= 0 && b < ny) v = mask[std::size_t(b) * nx + a];
                }
            dil[std::size_t(j) * nx + i] = v;
        }
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            std::uint8_t v = 1;
            for (int dj = -1; dj <= 1 && v; ++dj)
                for (int di = -1; di <= 1 && v; ++di) {
                    const int a = i + di, b = j + dj;
                    if (a >= 0 && a < nx && b >= 0 && b < ny) v = dil[std::size_t(b) * nx + a];
                }
            out[std::size_t(j) * nx + i] = v;
        }
    return out;
}

namespace {

// quotients of exactly elliptic fields come out a few ulps below the ladder value
constexpr double kLadderSlack = 1.0 - 1e-9;

constexpr double kFar = 1e20;

// Lower envelope of parabolas (Felzenszwalb-Huttenlocher) over one line.
void edt_1d(const double* f, double* d, int n, int* v, double* z)
{
    int k = 0;
    v[0] = 0;
    z[0] = -kInf;
    z[1] = kInf;
    for (int q = 1; q < n; ++q) {
        double s;
        while (true) {
            const int p = v[k];
            s = ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * (q - p));
            if (s <= z[k] && k > 0) {
                --k;
                continue;
            }
            break;
        }
        if (s <= z[k]) {
            v[0] = q;
            z[0] = -kInf;
            z[1] = kInf;
            k = 0;
            continue;
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = kInf;
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[k + 1] < q) ++k;
        const double dq = q - v[k];
        d[q] = dq * dq + f[v[k]];
    }
}

}  // namespace

std::vector<double> distance_transform(const std::vector<std::uint8_t>& mask, int nx, int ny, double h,
                                       Exec exec)
{
    const std::size_t n = std::size_t(nx) * ny;
    if (std::find(mask.begin(), mask.end(), std::uint8_t(1)) == mask.end())
        return std::vector<double>(n, kInf);
    std::vector<double> g(n);
    const bool par = exec == Exec::parallel;

    // columns
#pragma omp parallel if (par)
    {
        std::vector<double> f(ny), d(ny), z(ny + 1);
        std::vector<int> v(ny);
#pragma omp for schedule(static)
        for (int i = 0; i < nx; ++i) {
            for (int j = 0; j < ny; ++j) f[j] = mask[std::size_t(j) * nx + i] ? 0.0 : kFar;
            edt_1d(f.data(), d.data(), ny, v.data(), z.data());
            for (int j = 0; j < ny; ++j) g[std::size_t(j) * nx + i] = d[j];
        }
    }
    std::vector<double> out(n);
    // rows
#pragma omp parallel if (par)
    {
        std::vector<double> d(nx), z(nx + 1);
        std::vector<int> v(nx);
#pragma omp for schedule(static)
        for (int j = 0; j < ny; ++j) {
            const double* f = g.data() + std::size_t(j) * nx;
            edt_1d(f, d.data(), nx, v.data(), z.data());
            for (int i = 0; i < nx; ++i) out[std::size_t(j) * nx + i] = h * std::sqrt(d[i]);
        }
    }
    return out;
}

DegeneracyGrid classify_grid(const Field& field, const GridSpec& spec, Exec exec)
{
    if (!(spec.h > 0.0)) throw ConfigError("grid spacing must be positive");
    if (!(spec.box.hi.x() > spec.box.lo.x() && spec.box.hi.y() > spec.box.lo.y()))
        throw ConfigError("grid box is empty");
    spec.ladders.validate();

    DegeneracyGrid g;
    g.box = spec.box;
    g.h = spec.h;
    g.nx = int(std::floor((spec.box.hi.x() - spec.box.lo.x()) / spec.h + 1e-9)) + 1;
    g.ny = int(std::floor((spec.box.hi.y() - spec.box.lo.y()) / spec.h + 1e-9)) + 1;
    g.ladders = spec.ladders;
    const std::size_t n = g.size();
    g.d_quot.resize(n);
    g.s_quot.resize(n);
    g.o_level.resize(n);
    g.v_level.resize(n);
    g.raw_D.resize(n);
    g.raw_S.resize(n);

    const std::vector<Vec2> offsets = quotient_offsets(spec.quotients);
    const double guard = spec.quotients.s_guard;
    const auto& lam = g.ladders.lambda;
    const auto& Lam = g.ladders.Lambda;

#pragma omp parallel for schedule(dynamic, 64) if (exec == Exec::parallel)
    for (std::ptrdiff_t idx = 0; idx < std::ptrdiff_t(n); ++idx) {
        const Quotients q = ellipticity_quotients(field, g.node(std::size_t(idx)), offsets, guard);
        g.d_quot[idx] = q.d_quot;
        g.s_quot[idx] = q.s_quot;
        int o = -1, v = -1;
        for (std::size_t k = 0; k < lam.size(); ++k)
            if (q.d_quot >= lam[k] * kLadderSlack) {
                o = int(k);
                break;
            }
        for (std::size_t k = 0; k < Lam.size(); ++k)
            if (q.s_quot >= kLadderSlack / Lam[k]) {
                v = int(k);
                break;
            }
        g.o_level[idx] = o;
        g.v_level[idx] = v;
        g.raw_D[idx] = o < 0;
        g.raw_S[idx] = v < 0;
    }

    g.in_D = morphological_closing(g.raw_D, g.nx, g.ny);
    g.in_S = morphological_closing(g.raw_S, g.nx, g.ny);
    g.in_DS.resize(n);
    for (std::size_t k = 0; k < n; ++k) g.in_DS[k] = g.in_D[k] && g.in_S[k];
    g.dist_D = distance_transform(g.in_D, g.nx, g.ny, g.h, exec);
    g.dist_S = distance_transform(g.in_S, g.nx, g.ny, g.h, exec);
    g.dist_DS = distance_transform(g.in_DS, g.nx, g.ny, g.h, exec);
    return g;
}

double dist_to_class(const DegeneracyGrid& grid, const Vec2& p, SetClass c)
{
    const double tol = 1e-12 * (1.0 + grid.box.diameter());
    if (!grid.box.inflated(tol).contains(p)) throw Error("point outside the grid box");
    const auto& d = grid.distance(c);
    if (d.empty() || d[0] == kInf) return kInf;   // an empty class is infinitely far from every node
    const double u = std::clamp((p.x() - grid.box.lo.x()) / grid.h, 0.0, double(grid.nx - 1));
    const double w = std::clamp((p.y() - grid.box.lo.y()) / grid.h, 0.0, double(grid.ny - 1));
    const int i = std::min(int(u), grid.nx - 2 < 0 ? 0 : grid.nx - 2);
    const int j = std::min(int(w), grid.ny - 2 < 0 ? 0 : grid.ny - 2);
    const int i1 = std::min(i + 1, grid.nx - 1), j1 = std::min(j + 1, grid.ny - 1);
    const double a = u - i, b = w - j;
    return (1 - a) * (1 - b) * d[grid.index(i, j)] + a * (1 - b) * d[grid.index(i1, j)] +
           (1 - a) * b * d[grid.index(i, j1)] + a * b * d[grid.index(i1, j1)];
}

double largest_inscribed_radius(const std::vector<std::uint8_t>& mask, int nx, int ny, double h)
{
    // distance to the complement, with a one-node frame of complement around the grid
    const int mx = nx + 2, my = ny + 2;
    std::vector<std::uint8_t> comp(std::size_t(mx) * my, 1);
    bool any = false;
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            const bool in = mask[std::size_t(j) * nx + i];
            comp[std::size_t(j + 1) * mx + i + 1] = !in;
            any |= in;
        }
    if (!any) return 0.0;
    const auto d = distance_transform(comp, mx, my, h, Exec::serial);
    double best = 0.0;
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i)
            if (mask[std::size_t(j) * nx + i]) best = std::max(best, d[std::size_t(j + 1) * mx + i + 1]);
    // every node strictly closer than the nearest complement node is in the mask
    return best;
}

double hausdorff(const std::vector<Vec2>& a, const std::vector<Vec2>& b)
{
    if (a.empty() && b.empty()) return 0.0;
    if (a.empty() || b.empty()) return kInf;
    auto directed = [](const std::vector<Vec2>& from, const std::vector<Vec2>& to) {
        double worst = 0.0;
#pragma omp parallel for reduction(max : worst) schedule(static)
        for (std::ptrdiff_t k = 0; k < std::ptrdiff_t(from.size()); ++k) {
            double best = kInf;
            for (const Vec2& q : to) best = std::min(best, (from[k] - q).squaredNorm());
            worst = std::max(worst, best);
        }
        return std::sqrt(worst);
    };
    return std::max(directed(a, b), directed(b, a));
}

DualityImageCheck duality_image_check(const Field& field, const DegeneracyGrid& grid,
                                      const DegeneracyGrid& dual_grid)
{
    DualityImageCheck out;
    std::vector<Vec2> image;
    auto keep = [&](const Vec2& xi) {
        const Vec2 y = rot90(field(xi));
        if (dual_grid.box.contains(y)) image.push_back(y);
    };
    const double step = 0.5 * dual_grid.h;
    for (int j = 0; j < grid.ny; ++j)
        for (int i = 0; i < grid.nx; ++i) {
            if (!grid.in_S[grid.index(i, j)]) continue;
            const Vec2 a = grid.node(i, j);
            keep(a);
            const int nbr[2][2] = {{i + 1, j}, {i, j + 1}};
            for (const auto& nb : nbr) {
                if (nb[0] >= grid.nx || nb[1] >= grid.ny || !grid.in_S[grid.index(nb[0], nb[1])]) continue;
                const Vec2 b = grid.node(nb[0], nb[1]);
                const double span = (rot90(field(b)) - rot90(field(a))).norm();
                const int pieces = std::min(4096, std::max(1, int(std::ceil(span / step))));
                for (int k = 1; k < pieces; ++k) keep(a + (b - a) * (double(k) / pieces));
            }
        }
    const std::vector<Vec2> target = dual_grid.nodes_of(SetClass::D);
    out.n_image = image.size();
    out.n_target = target.size();
    out.hausdorff = hausdorff(image, target);
    return out;
}

Json grid_header(const DegeneracyGrid& g)
{
    Json j;
    j["box"] = {{"min", {g.box.lo.x(), g.box.lo.y()}}, {"max", {g.box.hi.x(), g.box.hi.y()}}};
    j["h_grid"] = g.h;
    j["nx"] = g.nx;
    j["ny"] = g.ny;
    j["lambda_ladder"] = g.ladders.lambda;
    j["Lambda_ladder"] = g.ladders.Lambda;
    j["layout"] = "row j, column i; node (i,j) at box.min + (i*h_grid, j*h_grid)";
    j["counts"] = {{"D", g.count(SetClass::D)}, {"S", g.count(SetClass::S)}, {"DS", g.count(SetClass::DS)}};
    j["DS_empty"] = g.empty(SetClass::DS);
    return j;
}

void save_grid(const DegeneracyGrid& g, const std::filesystem::path& dir)
{
    auto as_double = [](const auto& v) { return std::vector<double>(v.begin(), v.end()); };
    atomic_write(dir / "o_level.csv", csv_matrix(as_double(g.o_level), g.nx, g.ny));
    atomic_write(dir / "v_level.csv", csv_matrix(as_double(g.v_level), g.nx, g.ny));
    atomic_write(dir / "in_D.csv", csv_matrix(as_double(g.in_D), g.nx, g.ny));
    atomic_write(dir / "in_S.csv", csv_matrix(as_double(g.in_S), g.nx, g.ny));
    atomic_write(dir / "in_DS.csv", csv_matrix(as_double(g.in_DS), g.nx, g.ny));
    atomic_write(dir / "d_quot.csv", csv_matrix(g.d_quot, g.nx, g.ny));
    atomic_write(dir / "s_quot.csv", csv_matrix(g.s_quot, g.nx, g.ny));
    atomic_write(dir / "dist_DS.csv", csv_matrix(g.dist_DS, g.nx, g.ny));
    write_json(dir / "grid.json", grid_header(g));
}

}  // namespace degen
