// Acceptance run: one PASS/FAIL line per criterion, exit status 0 only when all pass.

#include "degen/analysis.hpp"
#include "degen/barrier.hpp"
#include "degen/grid.hpp"
#include "degen/mesh.hpp"
#include "degen/regularize.hpp"
#include "degen/scenario.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>

using namespace degen;
namespace fs = std::filesystem;

namespace {

const fs::path kScenarios = fs::path(DEGEN_SOURCE_DIR) / "scenarios";

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string num(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

fs::path work_dir()
{
    const char* env = std::getenv("DEGEN_ACCEPTANCE_DIR");
    const fs::path p = env && *env ? fs::path(env) : fs::temp_directory_path() / "degen_acceptance";
    return p;
}

std::vector<Field> builtins()
{
    return {make_builtin({"identity"}),
            make_builtin({"identity-scaled", 2.5}),
            make_builtin({"p-laplacian", 1.0, 4.0}),
            make_builtin({"p-laplacian", 1.0, 1.5}),
            make_builtin({"radial-gradient", 1.0, 2.0, {{0.5, 0.5}, {1.0, 0.6}, {2.0, 2.0}}}),
            make_builtin({"kink-circle"}),
            make_builtin({"quartic-quartroot"})};
}

const DegeneracyGrid& grid_of(const Field& f)
{
    static std::map<std::string, DegeneracyGrid> cache;
    const std::string key = f.name();
    auto it = cache.find(key);
    if (it == cache.end()) {
        GridSpec spec;
        spec.box = Box::square(2.0);
        spec.h = 0.02;
        spec.ladders = Ladders::for_field(f);
        it = cache.emplace(key, classify_grid(f, spec)).first;
    }
    return it->second;
}

double k_closed_form(double lambda)
{
    const double q = (80.0 + std::sqrt(6400.0 + 4000.0 * lambda * lambda)) / (10.0 * lambda);
    return q * q;
}

const std::vector<double> kLambdas = {0.5, 1.0, 2.0, 10.0};

Outcome barrier_constants_check()
{
    const auto t0 = std::chrono::steady_clock::now();
    double worst_k = 0.0, worst_eps = 0.0, min_bound = kInf;
    bool ok = true;
    for (double lam : kLambdas) {
        const BarrierParams p = barrier_constants(lam, 1.0, 1.0);
        worst_k = std::max(worst_k, std::abs(p.k - k_closed_form(lam)) / k_closed_form(lam));
        worst_eps = std::max(worst_eps, std::abs(std::expm1(p.eps.log - p.eps_alt.log)));
        const SubsolutionReport sub = subsolution_check(make_identity_scaled(1.0), p, 64);
        ok = ok && sub.n == 64 && sub.min_bound > 0.0;
        min_bound = std::min(min_bound, sub.min_bound);
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    ok = ok && worst_k <= 1e-12 && worst_eps <= 1e-12 && secs < 1.0;
    return {ok, "k rel err " + num(worst_k) + ", eps forms rel " + num(worst_eps) + ", min subsolution bound " +
                    num(min_bound) + ", " + num(secs) + " s"};
}

Outcome neg_part_check()
{
    const auto t0 = std::chrono::steady_clock::now();
    bool ok = true;
    std::string gaps;
    for (double lam : kLambdas) {
        const NegPartMargin m = neg_part_margin(barrier_constants(lam, 1.0, 1.0), 10000);
        ok = ok && m.max_exact <= m.bound;
        gaps += (gaps.empty() ? "" : " ") + num(m.max_displayed_gap);
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    ok = ok && secs < 1.0;
    return {ok, "|A-| <= lambda sqrt(40k) for all lambda; displayed-formula gaps [" + gaps + "], " + num(secs) + " s"};
}

double nodal_error(const Mesh& m, const std::vector<double>& u, const Dirichlet& exact)
{
    double e = 0.0;
    for (std::size_t v = 0; v < m.n_vertices(); ++v) e = std::max(e, std::abs(u[v] - exact(m.vertices[v])));
    return e;
}

Outcome convergence_check()
{
    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<double> hs = {0.1, 0.05, 0.025};
    const Dirichlet saddle = [](const Vec2& x) { return x.x() * x.x() - x.y() * x.y(); };
    const Dirichlet radial = [](const Vec2& x) { return std::pow(x.norm(), 2.0 / 3.0); };
    std::vector<double> e1, e2;
    bool ok = true;
    for (double h : hs) {
        const auto disk = std::make_shared<const Mesh>(build_mesh(Domain::disk(1.0), h));
        const auto s1 = solve(make_identity_scaled(1.0), disk, saddle);
        e1.push_back(nodal_error(*disk, s1.u, saddle));
        const auto ann = std::make_shared<const Mesh>(build_mesh(Domain::annulus(0.5, 1.0), h));
        const auto s2 = solve(make_p_laplacian(4.0), ann, radial);
        e2.push_back(nodal_error(*ann, s2.u, radial));
        ok = ok && s1.diagnostics.converged && s2.diagnostics.converged;
    }
    std::string r1, r2;
    for (std::size_t k = 1; k < hs.size(); ++k) {
        const double a = std::log(e1[k - 1] / e1[k]) / std::log(hs[k - 1] / hs[k]);
        const double b = std::log(e2[k - 1] / e2[k]) / std::log(hs[k - 1] / hs[k]);
        ok = ok && a >= 1.7 && a <= 2.3 && b >= 1.5;
        r1 += (r1.empty() ? "" : " ") + num(a);
        r2 += (r2.empty() ? "" : " ") + num(b);
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    ok = ok && secs < 60.0;
    return {ok, "harmonic rates [" + r1 + "], p=4 annulus rates [" + r2 + "], " + num(secs) + " s"};
}

Outcome linear_exactness_check()
{
    const auto mesh = std::make_shared<const Mesh>(build_mesh(Domain::disk(1.0), 0.1));
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    std::vector<Vec2> ps;
    while (ps.size() < 10) {
        const Vec2 p(u(rng), u(rng));
        if (p.norm() <= 2.0) ps.push_back(p);
    }
    bool ok = true;
    double worst_res = 0.0, worst_err = 0.0;
    int worst_it = 0, n = 0;
    for (const Field& f : builtins())
        for (const Vec2& p : ps) {
            const Dirichlet g = [p](const Vec2& x) { return p.dot(x); };
            const auto s = solve(f, mesh, g);
            worst_res = std::max(worst_res, s.diagnostics.final_residual);
            worst_err = std::max(worst_err, nodal_error(*mesh, s.u, g));
            worst_it = std::max(worst_it, s.diagnostics.iterations);
            ok = ok && s.diagnostics.converged && s.diagnostics.final_residual <= 1e-10 && s.diagnostics.iterations <= 2;
            ++n;
        }
    ok = ok && worst_err <= 1e-10;
    return {ok, std::to_string(n) + " solves, max residual " + num(worst_res) + ", max |u_h - p.x| " +
                    num(worst_err) + ", max iterations " + std::to_string(worst_it)};
}

Outcome duality_check()
{
    bool ok = true;
    std::string parts;
    struct Case {
        Field f;
        double exclude;
    };
    for (const Case& c : {Case{make_identity_scaled(2.5), 0.0}, Case{make_p_laplacian(4.0), 0.1},
                          Case{make_quartic_quartroot(), 0.0}}) {
        const DualityResidual d = duality_residuals(c.f, 100, 77, 1.5, c.exclude);
        ok = ok && d.n == 100 && d.max_residual <= 1e-8 && d.n_unconverged == 0;
        parts += c.f.name() + " " + num(d.max_residual) + "; ";
    }
    const Field q = make_quartic_quartroot();
    const DegeneracyGrid& g = grid_of(q);
    GridSpec spec;
    spec.box = g.box;
    spec.h = g.h;
    spec.ladders = g.ladders;
    const DegeneracyGrid gd = classify_grid(dual_field(q).field(), spec);
    const DualityImageCheck ic = duality_image_check(q, g, gd);
    ok = ok && ic.n_image > 0 && ic.n_target > 0 && ic.hausdorff <= 3.0 * g.h;
    return {ok, parts + "grid image Hausdorff " + num(ic.hausdorff) + " (limit " + num(3.0 * g.h) + ")"};
}

Outcome geometry_check()
{
    const DegeneracyGrid& gq = grid_of(make_quartic_quartroot());
    const DegeneracyGrid& gk = grid_of(make_kink_circle());
    const auto dq = gq.nodes_of(SetClass::DS);
    const auto dk = gk.nodes_of(SetClass::DS);
    // one-sided distances computed directly: set to target, then target to set
    double hq = dq.empty() ? kInf : 0.0;
    for (const Vec2& x : dq) hq = std::max(hq, x.norm());
    if (!dq.empty()) {
        double to_origin = kInf;
        for (const Vec2& x : dq) to_origin = std::min(to_origin, x.norm());
        hq = std::max(hq, to_origin);
    }
    double hk = dk.empty() ? kInf : 0.0;
    for (const Vec2& x : dk) hk = std::max(hk, std::abs(x.norm() - 1.0));
    for (int a = 0; a < 4000 && !dk.empty(); ++a) {
        const double th = 2.0 * kPi * a / 4000;
        const Vec2 c(std::cos(th), std::sin(th));
        double best = kInf;
        for (const Vec2& x : dk) best = std::min(best, (x - c).norm());
        hk = std::max(hk, best);
    }
    bool ok = hq <= 2.0 * gq.h && hk <= 2.0 * gk.h;
    double worst_ratio = 0.0;
    for (const Field& f : builtins()) {
        const DegeneracyGrid& g = grid_of(f);
        std::vector<std::uint8_t> d_only(g.size()), s_only(g.size());
        for (std::size_t k = 0; k < g.size(); ++k) {
            d_only[k] = g.in_D[k] && !g.in_S[k];
            s_only[k] = g.in_S[k] && !g.in_D[k];
        }
        const double r = std::max(largest_inscribed_radius(d_only, g.nx, g.ny, g.h),
                                  largest_inscribed_radius(s_only, g.nx, g.ny, g.h));
        worst_ratio = std::max(worst_ratio, r / g.h);
        ok = ok && r <= 5.0 * g.h;
    }
    return {ok, "quartic DS to {0} " + num(hq) + ", kink DS to circle " + num(hk) + " (limit " + num(2 * gk.h) +
                    "), largest one-sided inscribed radius " + num(worst_ratio) + " h"};
}

Outcome sv_check()
{
    int tested = 0, violations = 0, unmet = 0, circle = 0, energy = 0;
    for (std::uint64_t seed = 1; tested < 100 && seed < 5000; ++seed) {
        const ScalarField v = random_smooth_field(seed, 1.0);
        const double nu = superlevel_mass_fraction(v, 0.75);
        if (nu < 0.01) continue;
        ++tested;
        const SvReport r = sv_dichotomy(v, nu, 1.0);
        if (!r.hypothesis) ++unmet;
        if (r.outcome == SvOutcome::violation) ++violations;
        circle += r.circle_branch;
        energy += r.energy_branch;
    }
    const bool ok = tested == 100 && violations == 0 && unmet == 0;
    return {ok, std::to_string(tested) + " fields, " + std::to_string(violations) + " violations, circle branch " +
                    std::to_string(circle) + ", energy branch " + std::to_string(energy)};
}

Outcome component_check()
{
    bool ok = true;
    int kink_K = -1, worst_K = 0;
    for (const Field& f : builtins())
        for (double r : {0.05, 0.1, 0.2}) {
            const ComponentLabels c = connected_components(grid_of(f), r, 1.0);
            const double bound = 4.0 * std::pow(2.0 + r / 2.0, 2) / (r * r);
            ok = ok && c.K <= bound;
            worst_K = std::max(worst_K, c.K);
            if (f.kind() == FieldKind::kink_circle && r == 0.1) kink_K = c.K;
        }
    ok = ok && kink_K == 2;
    return {ok, "max K " + std::to_string(worst_K) + " over builtins and r, kink-circle K(0.1) = " +
                    std::to_string(kink_K)};
}

Outcome regularization_check()
{
    const Field g = make_kink_circle();
    const std::vector<double> eps_list = {0.2, 0.1, 0.05};
    GridSpec spec;
    spec.box = Box::square(2.0);
    spec.h = 0.04;
    spec.ladders = Ladders::for_field(g);
    const DegeneracyGrid gb = classify_grid(g, spec);
    const PairSet pairs = sample_pairs(g.working_box(), 10000, 4242);
    MollifyOptions opts;
    opts.run_checks = false;
    bool ok = true;
    double worst_omega = kInf;
    std::vector<double> sup;
    std::size_t transfer_nodes = 0;
    for (double eps : eps_list) {
        const Field ge = mollify(g, eps, opts).field;
        for (double t : {0.1, 0.5, 1.0})
            worst_omega = std::min(worst_omega, monotony_modulus(ge, t, pairs) - monotony_modulus(g, t, pairs));
        const DegeneracyGrid gs = classify_grid(ge, spec);
        for (const auto& c : transfer_checks(gb, gs, eps)) {
            ok = ok && c.pass;
            transfer_nodes += c.n_checked;
        }
        double s = 0.0;
        const int n = 201;
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                const Vec2 x(-1.0 + 2.0 * i / (n - 1), -1.0 + 2.0 * j / (n - 1));
                if (x.norm() <= 1.0) s = std::max(s, (ge(x) - g(x)).norm());
            }
        sup.push_back(s);
    }
    ok = ok && worst_omega >= -1e-8 && sup[1] < sup[0] && sup[2] < sup[1];
    return {ok, "min omega_eps - omega " + num(worst_omega) + ", transfer nodes checked " +
                    std::to_string(transfer_nodes) + ", sup |G_eps - G| on B_1 [" + num(sup[0]) + " " + num(sup[1]) +
                    " " + num(sup[2]) + "]"};
}

RunReport run_bundled(const std::string& name, const fs::path& out)
{
    ScenarioConfig c = load_scenario(kScenarios / (name + ".yaml"));
    c.output = out.string();
    fs::remove_all(out);
    return run_scenario(c);
}

std::map<std::string, std::string> csv_files(const fs::path& dir)
{
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".csv") {
            std::ifstream in(e.path(), std::ios::binary);
            std::stringstream ss;
            ss << in.rdbuf();
            out[fs::relative(e.path(), dir).string()] = ss.str();
        }
    return out;
}

Outcome consistency_check()
{
    const auto t0 = std::chrono::steady_clock::now();
    const RunReport r = run_bundled("kink_circle", work_dir() / "run1" / "kink_circle");
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    bool ok = !r.stages.empty();
    for (const auto& s : r.stages) ok = ok && s.status == "ok";
    int flagged = 0;
    double worst = 0.0;
    const Json& centers = r.results["profiles"]["centers"];
    for (const auto& c : centers) {
        if (!c["lebesgue"]["lebesgue_like"].get<bool>()) continue;
        ++flagged;
        const auto& d = c["distance"];
        const std::size_t n = d.size();
        const double osc = std::abs(d[n - 1].get<double>() - d[n - 2].get<double>());
        worst = std::max(worst, osc);
    }
    const std::vector<double> lip = r.results["solve"]["sequence"]["interior_lipschitz"].get<std::vector<double>>();
    const TrendTest t = mann_kendall(lip);
    ok = ok && centers.size() == 9 && worst <= 0.1 && !t.increasing && secs < 600.0;
    return {ok, std::to_string(flagged) + "/9 centers Lebesgue-like, max oscillation " + num(worst) +
                    ", Mann-Kendall S " + std::to_string(t.S) + " p " + num(t.p_value) + ", " + num(secs) + " s"};
}

Outcome reproducibility_check()
{
    bool ok = true;
    std::size_t files = 0;
    for (const std::string name : {"laplace_sanity", "plaplace_annulus", "kink_circle"}) {
        const fs::path a = work_dir() / "run1" / name, b = work_dir() / "run2" / name;
        if (!fs::exists(a / "report.json")) run_bundled(name, a);
        run_bundled(name, b);
        const auto fa = csv_files(a), fb = csv_files(b);
        ok = ok && !fa.empty() && fa == fb;
        files += fa.size();
    }
    return {ok, std::to_string(files) + " CSV artifacts compared byte for byte across two runs"};
}

}  // namespace

int main()
{
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"barrier constants", barrier_constants_check},
        {"negative part margin", neg_part_check},
        {"solver convergence", convergence_check},
        {"linear exactness", linear_exactness_check},
        {"duality", duality_check},
        {"degeneracy geometry", geometry_check},
        {"sv dichotomy", sv_check},
        {"component bound", component_check},
        {"regularization", regularization_check},
        {"blow-up consistency", consistency_check},
        {"reproducibility", reproducibility_check},
    };
    fs::remove_all(work_dir());
    int failed = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        Outcome o;
        try {
            o = criteria[k].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::printf("%s %2zu %-22s %s\n", o.pass ? "PASS" : "FAIL", k + 1, criteria[k].first.c_str(), o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
