#include "degen/scenario.hpp"

#include "degen/analysis.hpp"
#include "degen/barrier.hpp"
#include "degen/grid.hpp"
#include "degen/mesh.hpp"
#include "degen/regularize.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

namespace degen {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Boundary data

Dirichlet BoundarySpec::function() const
{
    if (family == "linear") {
        const Vec2 q = p;
        return [q](const Vec2& x) { return q.dot(x); };
    }
    if (family == "polynomial") {
        const std::vector<double> c = coefficients;
        return [c](const Vec2& x) {
            return c[0] + c[1] * x.x() + c[2] * x.y() + c[3] * x.x() * x.x() + c[4] * x.x() * x.y() +
                   c[5] * x.y() * x.y();
        };
    }
    if (family == "radial-power") {
        const double a = alpha;
        return [a](const Vec2& x) { return std::pow(x.norm(), a); };
    }
    if (family == "perturbed-linear") {
        const Vec2 q = p;
        const double amp = amplitude;
        const int m = mode;
        return [q, amp, m](const Vec2& x) { return q.dot(x) + amp * std::sin(m * std::atan2(x.y(), x.x())); };
    }
    throw ConfigError("unknown boundary family '" + family + "'");
}

Json BoundarySpec::to_json() const
{
    Json j{{"family", family}};
    if (family == "linear" || family == "perturbed-linear") j["p"] = {p.x(), p.y()};
    if (family == "polynomial") j["coefficients"] = coefficients;
    if (family == "radial-power") j["alpha"] = alpha;
    if (family == "perturbed-linear") {
        j["amplitude"] = amplitude;
        j["mode"] = mode;
    }
    return j;
}

// ---------------------------------------------------------------------------
// Config

bool ScenarioConfig::runs(const std::string& stage) const
{
    return std::find(stages.begin(), stages.end(), stage) != stages.end();
}

namespace {

void require(bool ok, const std::string& what)
{
    if (!ok) throw ConfigError(what);
}

void require_decreasing(const std::vector<double>& v, const std::string& what)
{
    for (std::size_t k = 0; k < v.size(); ++k) {
        require(std::isfinite(v[k]) && v[k] > 0.0, what + " entries must be positive");
        if (k) require(v[k] < v[k - 1], what + " must be strictly decreasing");
    }
}

const std::vector<std::string> kStageOrder = {"classify", "regularize", "solve", "analysis"};

}  // namespace

void ScenarioConfig::validate() const
{
    require(version == 1, "unsupported config version " + std::to_string(version));
    require(!name.empty(), "name is required");
    for (char ch : name)
        require(std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-' || ch == '.',
                "name may only contain letters, digits, '_', '-' and '.'");
    require(seed.has_value(), "seed must be given explicitly");
    require(M > 0.0 && std::isfinite(M), "M must be positive");

    require(!field.name.empty(), "field.name is required");
    if (field.name == "identity-scaled") require(field.c > 0.0, "field.c must be positive");
    if (field.name == "p-laplacian") require(field.p > 1.0, "field.p must exceed 1");
    require(field.working_box.hi.x() > field.working_box.lo.x() && field.working_box.hi.y() > field.working_box.lo.y(),
            "field.box must be positive");
    make_builtin(field);   // unknown names and bad knots throw ConfigError

    require(grid_box > 0.0, "grid.box must be positive");
    require(grid_h > 0.0, "grid.h must be positive");
    require(grid_h < grid_box, "grid.h must be smaller than grid.box");
    if (lambda_depth) require(*lambda_depth >= 1 && *lambda_depth <= 40, "grid.lambda_depth must lie in [1, 40]");
    if (Lambda_depth) require(*Lambda_depth >= 1 && *Lambda_depth <= 40, "grid.Lambda_depth must lie in [1, 40]");

    require(domain == "disk" || domain == "annulus", "mesh.domain must be disk or annulus");
    require(R_out > 0.0, "mesh radius must be positive");
    if (domain == "annulus") require(R_in > 0.0 && R_in < R_out, "annulus needs 0 < R_in < R_out");
    else require(R_in == 0.0, "disk has no inner radius");
    require(mesh_h > 0.0 && mesh_h < R_out - R_in, "mesh.h must be positive and below the domain width");

    const std::set<std::string> families = {"linear", "polynomial", "radial-power", "perturbed-linear"};
    require(families.count(boundary.family) > 0, "unknown boundary family '" + boundary.family + "'");
    if (boundary.family == "polynomial") require(boundary.coefficients.size() == 6, "polynomial needs 6 coefficients");
    if (boundary.family == "radial-power") require(boundary.alpha > 0.0, "boundary.alpha must be positive");
    if (boundary.family == "perturbed-linear") require(boundary.mode >= 1, "boundary.mode must be at least 1");

    require_decreasing(eps, "eps");
    require_decreasing(delta, "delta");
    require(!modify || modify_c > 0.0, "modify.c must be positive");

    require(!stages.empty(), "stages must not be empty");
    for (const auto& s : stages)
        require(std::find(kStageOrder.begin(), kStageOrder.end(), s) != kStageOrder.end(), "unknown stage '" + s + "'");

    if (!convergence_h.empty()) {
        require(convergence_h.size() >= 2, "convergence needs at least two mesh sizes");
        require_decreasing(convergence_h, "convergence.h");
        require(convergence_h.front() < R_out - R_in, "convergence.h must be below the domain width");
        require(rate_min <= rate_max, "convergence rate range is empty");
    }
    require(regularization_grid_h > 0.0, "regularization.grid_h must be positive");
    require(regularization_box <= 0.0 || regularization_grid_h < regularization_box,
            "regularization.grid_h must be smaller than regularization.box");
    if (regularization_checks) require(!eps.empty(), "regularization checks need an eps list");

    require(centers >= 0, "profiles.centers must be non-negative");
    if (centers > 0 || histogram_bins > 0) {
        require(!delta.empty(), "profiles and histograms need a delta list");
        require(center_radius >= 0.0, "profiles.center_radius must be non-negative");
        require(center_radius + delta.front() <= R_out, "balls B_delta(center) must stay inside the domain");
        if (domain == "annulus")
            require(false, "profiles and histograms are defined on disk domains only");
    }
    require(oscillation_tol > 0.0, "profiles.oscillation_tol must be positive");
    require(histogram_bins >= 0 && histogram_bins <= 1024, "histograms.bins must lie in [0, 1024]");
    require(young_distance > 0.0, "histograms.young_distance must be positive");
    for (double r : component_r) require(r > 0.0, "components.r entries must be positive");
    require(hessian_tol >= 0.0, "hessian.tol must be non-negative");
    if (trend) require(eps.size() >= 3, "trend test needs at least three eps values");
    require(sv_fields >= 0, "svcheck.fields must be non-negative");
    for (double l : barrier_lambda) require(l > 0.0, "barrier.lambda entries must be positive");
    require(barrier_rho > 0.0 && barrier_M > 0.0, "barrier.rho and barrier.M must be positive");
    require(duality_samples >= 0, "duality.samples must be non-negative");
    require(duality_half > 0.0 && duality_exclude >= 0.0 && duality_exclude < duality_half,
            "duality needs half > exclude >= 0");
}

Json ScenarioConfig::to_json() const
{
    Json f{{"name", field.name}};
    if (field.name == "identity-scaled") f["c"] = field.c;
    if (field.name == "p-laplacian") f["p"] = field.p;
    if (!field.knots.empty()) {
        Json k = Json::array();
        for (const auto& [r, v] : field.knots) k.push_back({r, v});
        f["knots"] = k;
    }
    f["box"] = field.working_box.hi.x();

    Json grid{{"box", grid_box}, {"h", grid_h}};
    if (lambda_depth) grid["lambda_depth"] = *lambda_depth;
    if (Lambda_depth) grid["Lambda_depth"] = *Lambda_depth;
    Json mesh{{"domain", domain}};
    if (domain == "disk") mesh["R"] = R_out;
    else {
        mesh["R_in"] = R_in;
        mesh["R_out"] = R_out;
    }
    mesh["h"] = mesh_h;

    Json analysis = Json::object();
    if (!convergence_h.empty()) analysis["convergence"] = {{"h", convergence_h}, {"rate_min", rate_min}, {"rate_max", rate_max}};
    if (regularization_checks)
        analysis["regularization"] = {{"grid_h", regularization_grid_h}, {"box", regularization_box}};
    if (centers > 0)
        analysis["profiles"] = {{"centers", centers}, {"center_radius", center_radius}, {"theta", theta},
                                {"oscillation_tol", oscillation_tol}};
    if (histogram_bins > 0) analysis["histograms"] = {{"bins", histogram_bins}, {"young_distance", young_distance}};
    if (!component_r.empty()) analysis["components"] = {{"r", component_r}};
    if (hessian) analysis["hessian"] = {{"tol", hessian_tol}};
    if (trend) analysis["trend"] = true;
    if (sv_fields > 0) analysis["svcheck"] = {{"fields", sv_fields}};
    if (!barrier_lambda.empty()) analysis["barrier"] = {{"lambda", barrier_lambda}, {"rho", barrier_rho}, {"M", barrier_M}};
    if (duality_samples > 0)
        analysis["duality"] = {{"samples", duality_samples}, {"half", duality_half}, {"exclude", duality_exclude},
                               {"grid_image", duality_grid_image}};

    Json j{{"version", version}, {"name", name}};
    j["seed"] = seed ? Json(*seed) : Json(nullptr);
    if (!output.empty()) j["output"] = output;
    j["stages"] = stages;
    j["field"] = f;
    j["M"] = M;
    j["grid"] = grid;
    j["mesh"] = mesh;
    j["boundary"] = boundary.to_json();
    j["eps"] = eps;
    j["delta"] = delta;
    j["modify"] = {{"enabled", modify}, {"c", modify_c}};
    j["analysis"] = analysis;
    return j;
}

fs::path ScenarioConfig::output_dir() const
{
    if (!output.empty()) return output;
    if (const char* env = std::getenv("DEGEN_OUTPUT_DIR"); env && *env) return fs::path(env) / name;
    return fs::path("degen_out") / name;
}

// ---------------------------------------------------------------------------
// YAML reading with a closed key set per mapping

namespace {

class Section {
public:
    Section(YAML::Node node, std::string path) : node_(std::move(node)), path_(std::move(path))
    {
        if (!node_.IsMap()) throw ConfigError(label() + " must be a mapping");
    }

    bool has(const std::string& key)
    {
        seen_.insert(key);
        return static_cast<bool>(node_[key]);
    }

    template <class T>
    T get(const std::string& key) const
    {
        try {
            return node_[key].template as<T>();
        } catch (const YAML::Exception&) {
            throw ConfigError(where(key) + " has the wrong type");
        }
    }

    template <class T>
    void read(const std::string& key, T& out)
    {
        if (has(key)) out = get<T>(key);
    }

    template <class T>
    T required(const std::string& key)
    {
        if (!has(key)) throw ConfigError(where(key) + " is required");
        return get<T>(key);
    }

    Section sub(const std::string& key)
    {
        seen_.insert(key);
        return Section(node_[key], where(key));
    }

    /// A flag section may be written as `key: true` or as a mapping of options.
    std::optional<Section> flag_or_section(const std::string& key, bool& enabled)
    {
        if (!has(key)) return std::nullopt;
        const YAML::Node n = node_[key];
        if (n.IsScalar()) {
            enabled = get<bool>(key);
            return std::nullopt;
        }
        enabled = true;
        return Section(n, where(key));
    }

    void close() const
    {
        for (const auto& kv : node_) {
            const std::string key = kv.first.as<std::string>();
            if (!seen_.count(key)) throw ConfigError("unknown key " + where(key));
        }
    }

private:
    std::string label() const { return path_.empty() ? "config" : path_; }
    std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    YAML::Node node_;
    std::string path_;
    std::set<std::string> seen_;
};

Vec2 as_vec2(const std::vector<double>& v, const std::string& what)
{
    if (v.size() != 2) throw ConfigError(what + " must have two entries");
    return Vec2(v[0], v[1]);
}

ScenarioConfig parse_root(const YAML::Node& root)
{
    if (!root || root.IsNull()) throw ConfigError("empty config");
    Section top(root, "");
    ScenarioConfig c;
    c.version = top.required<int>("version");
    if (c.version != 1) throw ConfigError("unsupported config version " + std::to_string(c.version));
    c.name = top.required<std::string>("name");
    c.seed = top.required<std::uint64_t>("seed");
    top.read("output", c.output);
    top.read("M", c.M);
    top.read("stages", c.stages);
    if (top.has("eps")) c.eps = top.get<std::vector<double>>("eps");
    if (top.has("delta")) c.delta = top.get<std::vector<double>>("delta");

    {
        Section f = top.sub("field");
        c.field.name = f.required<std::string>("name");
        f.read("c", c.field.c);
        f.read("p", c.field.p);
        if (f.has("knots"))
            for (const auto& k : f.get<std::vector<std::vector<double>>>("knots")) {
                const Vec2 rv = as_vec2(k, "field.knots entry");
                c.field.knots.emplace_back(rv.x(), rv.y());
            }
        if (f.has("box")) c.field.working_box = Box::square(f.get<double>("box"));
        f.close();
    }
    if (top.has("grid")) {
        Section g = top.sub("grid");
        g.read("box", c.grid_box);
        g.read("h", c.grid_h);
        if (g.has("lambda_depth")) c.lambda_depth = g.get<int>("lambda_depth");
        if (g.has("Lambda_depth")) c.Lambda_depth = g.get<int>("Lambda_depth");
        g.close();
    }
    if (top.has("mesh")) {
        Section m = top.sub("mesh");
        m.read("domain", c.domain);
        if (c.domain == "annulus") {
            c.R_in = m.required<double>("R_in");
            c.R_out = m.required<double>("R_out");
        } else {
            m.read("R", c.R_out);
        }
        m.read("h", c.mesh_h);
        m.close();
    }
    if (top.has("boundary")) {
        Section b = top.sub("boundary");
        c.boundary.family = b.required<std::string>("family");
        if (b.has("p")) c.boundary.p = as_vec2(b.get<std::vector<double>>("p"), "boundary.p");
        b.read("coefficients", c.boundary.coefficients);
        b.read("alpha", c.boundary.alpha);
        b.read("amplitude", c.boundary.amplitude);
        b.read("mode", c.boundary.mode);
        b.close();
    }
    if (top.has("modify")) {
        Section m = top.sub("modify");
        m.read("enabled", c.modify);
        m.read("c", c.modify_c);
        m.close();
    }
    if (top.has("analysis")) {
        Section a = top.sub("analysis");
        if (a.has("convergence")) {
            Section s = a.sub("convergence");
            c.convergence_h = s.required<std::vector<double>>("h");
            s.read("rate_min", c.rate_min);
            s.read("rate_max", c.rate_max);
            s.close();
        }
        if (auto s = a.flag_or_section("regularization", c.regularization_checks)) {
            s->read("grid_h", c.regularization_grid_h);
            s->read("box", c.regularization_box);
            s->close();
        }
        if (a.has("profiles")) {
            Section s = a.sub("profiles");
            c.centers = s.required<int>("centers");
            s.read("center_radius", c.center_radius);
            s.read("theta", c.theta);
            s.read("oscillation_tol", c.oscillation_tol);
            s.close();
        }
        if (a.has("histograms")) {
            Section s = a.sub("histograms");
            c.histogram_bins = s.required<int>("bins");
            s.read("young_distance", c.young_distance);
            s.close();
        }
        if (a.has("components")) {
            Section s = a.sub("components");
            c.component_r = s.required<std::vector<double>>("r");
            s.close();
        }
        if (auto s = a.flag_or_section("hessian", c.hessian)) {
            s->read("tol", c.hessian_tol);
            s->close();
        }
        a.read("trend", c.trend);
        if (a.has("svcheck")) {
            Section s = a.sub("svcheck");
            c.sv_fields = s.required<int>("fields");
            s.close();
        }
        if (a.has("barrier")) {
            Section s = a.sub("barrier");
            c.barrier_lambda = s.required<std::vector<double>>("lambda");
            s.read("rho", c.barrier_rho);
            s.read("M", c.barrier_M);
            s.close();
        }
        if (a.has("duality")) {
            Section s = a.sub("duality");
            c.duality_samples = s.required<int>("samples");
            s.read("half", c.duality_half);
            s.read("exclude", c.duality_exclude);
            s.read("grid_image", c.duality_grid_image);
            s.close();
        }
        a.close();
    }
    top.close();
    c.validate();
    return c;
}

}  // namespace

ScenarioConfig parse_scenario(const std::string& yaml_text)
{
    YAML::Node root;
    try {
        root = YAML::Load(yaml_text);
    } catch (const YAML::Exception& e) {
        throw ConfigError(std::string("malformed YAML: ") + e.what());
    }
    return parse_root(root);
}

ScenarioConfig load_scenario(const fs::path& file)
{
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot read config " + file.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_scenario(ss.str());
}

// ---------------------------------------------------------------------------
// Small numerical helpers

double convergence_rate(const std::vector<double>& h, const std::vector<double>& err)
{
    if (h.size() != err.size() || h.size() < 2) throw Error("convergence rate needs matching lists of length >= 2");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = double(h.size());
    for (std::size_t k = 0; k < h.size(); ++k) {
        const double x = std::log(h[k]), y = std::log(err[k]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

Json DualityResidual::to_json() const
{
    return Json{{"n", n}, {"max_residual", max_residual}, {"n_unconverged", n_unconverged}};
}

std::string DualityResidual::to_csv() const
{
    std::vector<std::vector<double>> rows;
    for (std::size_t k = 0; k < points.size(); ++k) rows.push_back({points[k].x(), points[k].y(), residual[k]});
    return csv_table({"xi1", "xi2", "residual"}, rows);
}

DualityResidual duality_residuals(const Field& field, std::size_t n, std::uint64_t seed, double half, double exclude)
{
    const DualField dual = dual_field(field);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-half, half);
    DualityResidual out;
    while (out.n < n) {
        const Vec2 xi(u(rng), u(rng));
        if (xi.norm() <= exclude) continue;
        const Inversion inv = dual.eval_checked(rot90(field(xi)));
        const double r = (inv.x - rot90(xi)).norm();
        out.points.push_back(xi);
        out.residual.push_back(r);
        out.max_residual = std::max(out.max_residual, r);
        if (!inv.converged) ++out.n_unconverged;
        ++out.n;
    }
    return out;
}

namespace {

/// max |G_eps - G| over the lattice nodes of the closed disk of radius M.
double sup_distance_on_ball(const Field& a, const Field& b, double M, int n = 201)
{
    double worst = 0.0;
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            const Vec2 x = M * Vec2(-1.0 + 2.0 * i / (n - 1), -1.0 + 2.0 * j / (n - 1));
            if (x.norm() > M) continue;
            worst = std::max(worst, (a(x) - b(x)).norm());
        }
    return worst;
}

std::vector<Vec2> sample_centers(std::uint64_t seed, int n, double radius)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<Vec2> out;
    while (int(out.size()) < n) {
        const Vec2 x(u(rng), u(rng));
        if (x.norm() <= 1.0) out.push_back(radius * x);
    }
    return out;
}

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Json vec_json(const Vec2& v) { return Json::array({v.x(), v.y()}); }

class Runner {
public:
    Runner(const ScenarioConfig& cfg, Exec exec) : cfg_(cfg), exec_(exec), out_(cfg.output_dir())
    {
        rep_.config = cfg.to_json();
        field_ = make_builtin(cfg.field);
        spec_.box = Box::square(cfg.grid_box);
        spec_.h = cfg.grid_h;
        const Ladders def = Ladders::for_field(field_);
        if (cfg.lambda_depth || cfg.Lambda_depth)
            spec_.ladders = Ladders::geometric(cfg.lambda_depth.value_or(int(def.lambda.size())),
                                               cfg.Lambda_depth.value_or(int(def.Lambda.size())));
        else
            spec_.ladders = def;
    }

    RunReport run()
    {
        fs::create_directories(out_);
        bool aborted = false;
        for (const auto& name : kStageOrder) {
            if (!cfg_.runs(name)) continue;
            StageRecord st;
            st.name = name;
            if (aborted) {
                st.status = "skipped";
                rep_.stages.push_back(st);
                continue;
            }
            const auto t0 = std::chrono::steady_clock::now();
            try {
                if (name == "classify") classify();
                else if (name == "regularize") regularize();
                else if (name == "solve") solve_stage();
                else analysis();
            } catch (const std::exception& e) {
                st.status = "error";
                st.error = e.what();
                aborted = true;
                rep_.checks.push_back({"stage_" + name, false, Json{{"error", e.what()}}});
            }
            st.seconds = seconds_since(t0);
            rep_.stages.push_back(st);
            flush();
        }
        flush();
        return rep_;
    }

private:
    const ScenarioConfig& cfg_;
    Exec exec_;
    fs::path out_;
    RunReport rep_;
    Field field_;
    GridSpec spec_;

    std::optional<DegeneracyGrid> grid_;
    Field base_;                         // G or its modification at infinity
    std::vector<Field> smooth_;          // G_eps per eps
    std::shared_ptr<const Mesh> mesh_;
    std::vector<std::shared_ptr<const DiscreteSolution>> sols_;
    std::optional<SequenceReport> seq_;

    void flush()
    {
        Json j = rep_.to_json();
        j["output"] = out_.string();
        write_json(out_ / "report.json", j);
    }

    void emit(const std::string& rel, const std::string& content)
    {
        atomic_write(out_ / rel, content);
        rep_.artifacts.push_back(rel);
    }

    void emit_json(const std::string& rel, const Json& j) { emit(rel, j.dump(2) + "\n"); }

    void record_dir(const std::string& rel)
    {
        std::vector<std::string> names;
        for (const auto& e : fs::directory_iterator(out_ / rel))
            if (e.is_regular_file() && e.path().filename().string().find(".tmp.") == std::string::npos)
                names.push_back(e.path().filename().string());
        std::sort(names.begin(), names.end());
        for (const auto& n : names) rep_.artifacts.push_back(rel + "/" + n);
    }

    void check(std::string name, bool pass, Json detail = Json::object())
    {
        rep_.checks.push_back({std::move(name), pass, std::move(detail)});
    }

    /// G, or its modification at infinity when requested; built here when the
    /// regularize stage did not run.
    const Field& base()
    {
        if (!base_.valid()) base_ = cfg_.modify ? modified_field(field_, cfg_.M, cfg_.modify_c) : field_;
        return base_;
    }

    // ----- stages

    void classify()
    {
        grid_ = classify_grid(field_, spec_, exec_);
        const auto& g = *grid_;
        save_grid(g, out_ / "grid");
        record_dir("grid");
        auto diff = [&](SetClass a, SetClass b) {
            std::vector<std::uint8_t> m(g.size());
            for (std::size_t k = 0; k < m.size(); ++k) m[k] = g.flags(a)[k] && !g.flags(b)[k];
            return largest_inscribed_radius(m, g.nx, g.ny, g.h);
        };
        const double r_ds = diff(SetClass::D, SetClass::S), r_sd = diff(SetClass::S, SetClass::D);
        Json res{{"nodes", g.size()},
                 {"h", g.h},
                 {"counts", {{"D", g.count(SetClass::D)}, {"S", g.count(SetClass::S)}, {"DS", g.count(SetClass::DS)}}},
                 {"empty", {{"D", g.empty(SetClass::D)}, {"S", g.empty(SetClass::S)}, {"DS", g.empty(SetClass::DS)}}},
                 {"inscribed_radius", {{"D_minus_S", r_ds}, {"S_minus_D", r_sd}}},
                 {"artifact", "grid"}};
        rep_.results["classify"] = res;
        check("empty_interior", r_ds <= 5.0 * g.h && r_sd <= 5.0 * g.h,
              {{"D_minus_S", r_ds}, {"S_minus_D", r_sd}, {"limit", 5.0 * g.h}});
    }

    void regularize()
    {
        Json res = Json::object();
        if (cfg_.modify) {
            ModifyOptions mo;
            mo.seed = *cfg_.seed;
            Regularized r = modify_at_infinity(field_, cfg_.M, cfg_.modify_c, mo);
            emit_json("regularize/modify.json", r.report.to_json());
            check("modify", r.report.pass(), {{"c", r.report.c}, {"retries", r.report.retries}});
            if (!r.report.pass()) throw Error("modification at infinity failed its checks");
            base_ = r.field;
            res["modify"] = {{"c", r.report.c}, {"L", r.report.L}, {"artifact", "regularize/modify.json"}};
        } else {
            base_ = field_;
        }
        MollifyOptions opts;
        opts.seed = *cfg_.seed + 1;
        std::vector<std::vector<double>> rows;
        Json per_eps = Json::array();
        for (std::size_t k = 0; k < cfg_.eps.size(); ++k) {
            const double eps = cfg_.eps[k];
            Regularized r = mollify(base_, eps, opts);
            const std::string rel = "regularize/eps_" + std::to_string(k) + ".json";
            emit_json(rel, r.report.to_json());
            check("mollify_eps_" + std::to_string(k), r.report.pass(), {{"eps", eps}});
            const double sup = sup_distance_on_ball(r.field, field_, cfg_.M);
            rows.push_back({eps, sup});
            per_eps.push_back({{"eps", eps}, {"sup_distance", sup}, {"pass", r.report.pass()}, {"artifact", rel}});
            smooth_.push_back(r.field);
        }
        if (!rows.empty()) {
            emit("regularize/sup_distance.csv", csv_table({"eps", "sup_distance_on_ball_M"}, rows));
            bool decreasing = true;
            for (std::size_t k = 1; k < rows.size(); ++k) decreasing = decreasing && rows[k][1] < rows[k - 1][1];
            check("sup_distance_decreasing", decreasing);
        }
        res["eps"] = per_eps;

        if (cfg_.regularization_checks) {
            GridSpec vs = spec_;
            vs.h = cfg_.regularization_grid_h;
            if (cfg_.regularization_box > 0.0) vs.box = Box::square(cfg_.regularization_box);
            const DegeneracyGrid gb = classify_grid(base_, vs, exec_);
            Json ver = Json::array();
            for (std::size_t k = 0; k < smooth_.size(); ++k) {
                const DegeneracyGrid gs = classify_grid(smooth_[k], vs, exec_);
                const RegularizationReport r = verify_regularization(base_, smooth_[k], cfg_.eps[k], gb, gs, opts);
                const std::string rel = "regularize/verify_eps_" + std::to_string(k) + ".json";
                emit_json(rel, r.to_json());
                for (const auto& c : r.checks)
                    check("verify_eps_" + std::to_string(k) + "_" + c.name, c.pass,
                          {{"worst_value", c.worst_value}, {"n_checked", c.n_checked}});
                ver.push_back({{"eps", cfg_.eps[k]}, {"pass", r.pass()}, {"artifact", rel}});
            }
            res["verify"] = ver;
        }
        rep_.results["regularize"] = res;
    }

    void solve_stage()
    {
        const Domain dom = cfg_.domain == "disk" ? Domain::disk(cfg_.R_out) : Domain::annulus(cfg_.R_in, cfg_.R_out);
        mesh_ = std::make_shared<const Mesh>(build_mesh(dom, cfg_.mesh_h));
        const Dirichlet g = cfg_.boundary.function();
        SolveOptions so;
        so.exec = exec_;
        std::vector<DiscreteSolution> sols;
        if (cfg_.eps.empty()) {
            sols.push_back(degen::solve(base(), mesh_, g, so));
        } else {
            SequenceResult sr = solve_sequence(base(), cfg_.M, cfg_.eps, mesh_, g, so);
            seq_ = sr.report;
            sols = std::move(sr.solutions);
        }
        std::vector<std::vector<double>> rows;
        bool all_converged = true;
        Json per = Json::array();
        for (std::size_t k = 0; k < sols.size(); ++k) {
            const auto& s = sols[k];
            const std::string rel = "solve/solution_" + std::to_string(k);
            save_solution(s, out_ / rel);
            record_dir(rel);
            const double eps = cfg_.eps.empty() ? 0.0 : cfg_.eps[k];
            rows.push_back({eps, s.lipschitz, s.lipschitz_in(0.75 * cfg_.R_out), double(s.diagnostics.iterations),
                            double(s.diagnostics.converged)});
            all_converged = all_converged && s.diagnostics.converged;
            per.push_back({{"eps", eps}, {"diagnostics", s.diagnostics.to_json()}, {"artifact", rel}});
            sols_.push_back(std::make_shared<const DiscreteSolution>(s));
        }
        emit("solve/sequence.csv",
             csv_table({"eps", "lipschitz", "interior_lipschitz", "iterations", "converged"}, rows));
        Json res{{"vertices", mesh_->n_vertices()}, {"triangles", mesh_->n_triangles()}, {"mesh_h", mesh_->h},
                 {"solutions", per}};
        if (seq_) {
            std::vector<std::vector<double>> d;
            for (std::size_t k = 0; k < seq_->w12_differences.size(); ++k)
                d.push_back({cfg_.eps[k], cfg_.eps[k + 1], seq_->w12_differences[k], seq_->max_differences[k]});
            if (!d.empty())
                emit("solve/differences.csv", csv_table({"eps_a", "eps_b", "w12_difference", "max_difference"}, d));
            res["sequence"] = seq_->to_json();
        }
        rep_.results["solve"] = res;
        check("solve_converged", all_converged);
    }

    // ----- analysis requests; each yields an artifact or an error entry

    template <class F>
    void request(const std::string& name, F&& body)
    {
        try {
            body();
        } catch (const std::exception& e) {
            rep_.results[name] = {{"error", e.what()}};
            check(name, false, {{"error", e.what()}});
        }
    }

    const DegeneracyGrid& need_grid() const
    {
        if (!grid_) throw Error("requires the classify stage");
        return *grid_;
    }

    std::shared_ptr<const DiscreteSolution> need_solution() const
    {
        if (sols_.empty()) throw Error("requires the solve stage");
        return sols_.back();
    }

    void analysis()
    {
        if (!cfg_.convergence_h.empty()) request("convergence", [&] { convergence(); });
        if (cfg_.centers > 0) request("profiles", [&] { profiles(); });
        if (cfg_.histogram_bins > 0) request("histograms", [&] { histograms(); });
        if (!cfg_.component_r.empty()) request("components", [&] { components(); });
        if (cfg_.hessian) request("hessian", [&] { hessian(); });
        if (cfg_.trend) request("trend", [&] { trend(); });
        if (cfg_.sv_fields > 0) request("svcheck", [&] { svcheck(); });
        if (!cfg_.barrier_lambda.empty()) request("barrier", [&] { barrier(); });
        if (cfg_.duality_samples > 0) request("duality", [&] { duality(); });
    }

    void convergence()
    {
        const Dirichlet g = cfg_.boundary.function();
        SolveOptions so;
        so.exec = exec_;
        std::vector<double> errs;
        std::vector<std::vector<double>> rows;
        bool converged = true;
        for (double h : cfg_.convergence_h) {
            const Domain dom =
                cfg_.domain == "disk" ? Domain::disk(cfg_.R_out) : Domain::annulus(cfg_.R_in, cfg_.R_out);
            const auto mesh = std::make_shared<const Mesh>(build_mesh(dom, h));
            const DiscreteSolution s = degen::solve(base(), mesh, g, so);
            double err = 0.0;
            for (std::size_t v = 0; v < mesh->n_vertices(); ++v)
                err = std::max(err, std::abs(s.u[v] - g(mesh->vertices[v])));
            errs.push_back(err);
            converged = converged && s.diagnostics.converged;
            rows.push_back({h, mesh->h, err, double(s.diagnostics.iterations), s.diagnostics.final_residual});
        }
        emit("analysis/convergence.csv",
             csv_table({"h_target", "h_mesh", "max_error", "iterations", "final_residual"}, rows));
        std::vector<double> rates;
        bool in_range = converged;
        for (std::size_t k = 1; k < errs.size(); ++k) {
            const double r = std::log(errs[k - 1] / errs[k]) / std::log(cfg_.convergence_h[k - 1] / cfg_.convergence_h[k]);
            rates.push_back(r);
            in_range = in_range && r >= cfg_.rate_min && r <= cfg_.rate_max;
        }
        const double fit = convergence_rate(cfg_.convergence_h, errs);
        rep_.results["convergence"] = {{"errors", errs},        {"rates", rates},
                                       {"fitted_rate", fit},    {"rate_min", cfg_.rate_min},
                                       {"rate_max", cfg_.rate_max}, {"artifact", "analysis/convergence.csv"}};
        check("convergence_rate", in_range, {{"rates", rates}});
    }

    std::vector<Vec2> centers() const { return sample_centers(*cfg_.seed, cfg_.centers, cfg_.center_radius); }

    void profiles()
    {
        const auto& grid = need_grid();
        const GradientField g = GradientField::from_solution(need_solution());
        const std::vector<Vec2> xs = centers();
        std::vector<std::vector<double>> summary;
        Json per = Json::array();
        bool ok = true;
        int n_lebesgue = 0;
        for (std::size_t k = 0; k < xs.size(); ++k) {
            const LebesgueProfile lp = lebesgue_profile(g, xs[k], cfg_.delta, cfg_.theta);
            const DistanceProfile dp = distance_profile(g, grid, xs[k], cfg_.delta, SetClass::DS);
            const std::string base = "profiles/center_" + std::to_string(k);
            emit(base + "_lebesgue.csv", lp.to_csv());
            emit(base + "_distance.csv", dp.to_csv());
            const std::size_t n = dp.value.size();
            double osc = 0.0;
            if (n >= 2) {
                const double a = dp.value[n - 1], b = dp.value[n - 2];
                osc = (std::isinf(a) && std::isinf(b)) ? 0.0 : std::abs(a - b);
            }
            if (lp.lebesgue_like) {
                ++n_lebesgue;
                ok = ok && osc <= cfg_.oscillation_tol;
            }
            summary.push_back({double(k), xs[k].x(), xs[k].y(), double(lp.lebesgue_like), lp.value.back(),
                               dp.value.back(), osc});
            per.push_back({{"center", vec_json(xs[k])},
                           {"lebesgue", lp.to_json()},
                           {"distance", dp.value},
                           {"oscillation", osc}});
        }
        emit("profiles/summary.csv",
             csv_table({"center", "x", "y", "lebesgue_like", "lebesgue_last", "distance_last", "oscillation"},
                       summary));
        rep_.results["profiles"] = {{"delta", cfg_.delta},
                                    {"n_lebesgue_like", n_lebesgue},
                                    {"oscillation_tol", cfg_.oscillation_tol},
                                    {"centers", per},
                                    {"artifact", "profiles/summary.csv"}};
        check("profile_oscillation", ok, {{"n_lebesgue_like", n_lebesgue}});
    }

    void histograms()
    {
        const auto& grid = need_grid();
        const GradientField g = GradientField::from_solution(need_solution());
        const Box box = Box::square(cfg_.grid_box);
        const std::vector<Vec2> ds = grid.nodes_of(SetClass::DS);
        const double dmin = cfg_.delta.back();
        std::vector<std::vector<double>> summary;
        bool warned = false;
        for (std::size_t k = 0; k < std::size_t(std::max(cfg_.centers, 1)); ++k) {
            const Vec2 x0 = cfg_.centers > 0 ? centers()[k] : Vec2::Zero();
            const GradientHistogram hist =
                gradient_histogram(rescale(g, x0, dmin), Vec2::Zero(), 1.0, box, cfg_.histogram_bins);
            emit("histograms/center_" + std::to_string(k) + ".csv", hist.to_csv());
            const double near = ds.empty() ? 0.0 : hist.mass_near(ds, cfg_.young_distance) / hist.total_mass;
            warned = warned || hist.overflow_warning;
            summary.push_back({double(k), x0.x(), x0.y(), hist.total_mass, hist.overflow, near});
        }
        emit("histograms/summary.csv",
             csv_table({"center", "x", "y", "total_mass", "overflow", "mass_near_DS"}, summary));
        rep_.results["histograms"] = {{"delta", dmin},
                                      {"bins", cfg_.histogram_bins},
                                      {"box", cfg_.grid_box},
                                      {"overflow_warning", warned},
                                      {"artifact", "histograms/summary.csv"}};
    }

    void components()
    {
        const auto& grid = need_grid();
        std::vector<std::vector<double>> rows;
        bool ok = true;
        Json per = Json::array();
        for (double r : cfg_.component_r) {
            const ComponentLabels c = connected_components(grid, r, cfg_.M);
            rows.push_back({r, double(c.K), c.bound});
            ok = ok && c.bound_holds();
            per.push_back(c.to_json());
        }
        emit("analysis/components.csv", csv_table({"r", "K", "bound"}, rows));
        rep_.results["components"] = {{"per_r", per}, {"artifact", "analysis/components.csv"}};
        check("component_bound", ok);
    }

    void hessian()
    {
        const HessianCheck h = hessian_determinant_check(*need_solution());
        std::vector<std::vector<double>> rows;
        const Mesh& m = *need_solution()->mesh;
        for (std::size_t k = 0; k < h.vertices.size(); ++k) {
            const Vec2& x = m.vertices[h.vertices[k]];
            rows.push_back({double(h.vertices[k]), x.x(), x.y(), h.det[k]});
        }
        emit("analysis/hessian_det.csv", csv_table({"vertex", "x", "y", "det"}, rows));
        rep_.results["hessian"] = {{"max_det", h.max_det},
                                   {"argmax", vec_json(h.argmax)},
                                   {"n_vertices", h.n_vertices},
                                   {"n_skipped", h.n_skipped},
                                   {"tol", cfg_.hessian_tol},
                                   {"artifact", "analysis/hessian_det.csv"}};
        check("hessian_det_nonpositive", h.max_det <= cfg_.hessian_tol, {{"max_det", h.max_det}});
    }

    void trend()
    {
        if (!seq_) throw Error("requires the solve stage with an eps list");
        const TrendTest t = mann_kendall(seq_->interior_lipschitz);
        std::vector<std::vector<double>> rows;
        for (std::size_t k = 0; k < seq_->eps.size(); ++k) rows.push_back({seq_->eps[k], seq_->interior_lipschitz[k]});
        emit("analysis/trend.csv", csv_table({"eps", "interior_lipschitz"}, rows));
        Json j = t.to_json();
        j["artifact"] = "analysis/trend.csv";
        rep_.results["trend"] = j;
        check("no_increasing_trend", !t.increasing, t.to_json());
    }

    void svcheck()
    {
        std::vector<std::vector<double>> rows;
        int violations = 0, tested = 0, unmet = 0;
        std::map<std::string, int> outcomes;
        for (std::uint64_t s = *cfg_.seed; tested < cfg_.sv_fields; ++s) {
            if (s - *cfg_.seed > std::uint64_t(50) * cfg_.sv_fields) throw Error("too few fields meet the mass hypothesis");
            const ScalarField v = random_smooth_field(s, 1.0);
            SvOptions o;
            o.exec = exec_;
            const double nu = superlevel_mass_fraction(v, 0.75, o.mass_lattice, exec_);
            if (nu < 0.01) continue;
            ++tested;
            const SvReport r = sv_dichotomy(v, nu, 1.0, o);
            if (r.outcome == SvOutcome::violation) ++violations;
            if (!r.hypothesis) ++unmet;
            ++outcomes[to_string(r.outcome)];
            rows.push_back({double(s), nu, r.mass_fraction, double(r.circle_branch), r.best_circle_s,
                            r.best_circle_min, double(r.energy_branch), r.energy, r.energy_threshold,
                            double(static_cast<int>(r.outcome))});
        }
        emit("analysis/svcheck.csv",
             csv_table({"seed", "nu", "mass_fraction", "circle_branch", "best_circle_s", "best_circle_min",
                        "energy_branch", "energy", "energy_threshold", "outcome"},
                       rows));
        Json oc = Json::object();
        for (const auto& [k, v] : outcomes) oc[k] = v;
        rep_.results["svcheck"] = {{"fields", tested},
                                   {"violations", violations},
                                   {"hypothesis_unmet", unmet},
                                   {"outcomes", oc},
                                   {"artifact", "analysis/svcheck.csv"}};
        check("sv_dichotomy", violations == 0 && unmet == 0, {{"violations", violations}, {"hypothesis_unmet", unmet}});
    }

    void barrier()
    {
        Json per = Json::array();
        bool ok = true;
        for (std::size_t k = 0; k < cfg_.barrier_lambda.size(); ++k) {
            const double lam = cfg_.barrier_lambda[k];
            const BarrierParams p = barrier_constants(lam, cfg_.barrier_rho, cfg_.barrier_M);
            const SubsolutionReport sub = subsolution_check(field_, p, 64, nullptr, exec_);
            const NegPartMargin np = neg_part_margin(p, 10000);
            std::vector<std::vector<double>> rows;
            for (const auto& r : sub.rows) rows.push_back({r.x1, r.x2, r.trace_lower_bound, r.neg_part, r.margin});
            const std::string rel = "barrier/scan_" + std::to_string(k) + ".csv";
            emit(rel, csv_table({"x1", "x2", "trace_lower_bound", "neg_part", "margin"}, rows));
            const bool pass = sub.min_bound > 0.0 && sub.min_margin > 0.0 && np.pass();
            ok = ok && pass;
            per.push_back({{"params", p.to_json()},
                           {"log_gamma", p.gamma.log},
                           {"log_eps", p.eps.log},
                           {"subsolution", sub.to_json()},
                           {"neg_part", {{"max_exact", np.max_exact}, {"bound", np.bound},
                                         {"max_displayed_gap", np.max_displayed_gap},
                                         {"max_displayed_rel_gap", np.max_displayed_rel_gap}}},
                           {"artifact", rel}});
        }
        rep_.results["barrier"] = per;
        check("barrier_subsolution", ok);
    }

    void duality()
    {
        const DualityResidual d = duality_residuals(field_, std::size_t(cfg_.duality_samples), *cfg_.seed,
                                                    cfg_.duality_half, cfg_.duality_exclude);
        emit("analysis/duality.csv", d.to_csv());
        Json j = d.to_json();
        j["artifact"] = "analysis/duality.csv";
        check("duality_identity", d.max_residual <= 1e-8 && d.n_unconverged == 0, d.to_json());
        if (cfg_.duality_grid_image) {
            const auto& grid = need_grid();
            const DualField dual = dual_field(field_);
            const DegeneracyGrid gd = classify_grid(dual.field(), spec_, exec_);
            const DualityImageCheck ic = duality_image_check(field_, grid, gd);
            j["grid_image"] = {{"hausdorff", ic.hausdorff}, {"n_image", ic.n_image}, {"n_target", ic.n_target},
                               {"limit", 3.0 * grid.h}};
            check("duality_grid_image", ic.hausdorff <= 3.0 * grid.h, j["grid_image"]);
        }
        rep_.results["duality"] = j;
    }
};

}  // namespace

bool RunReport::pass() const
{
    for (const auto& c : checks)
        if (!c.pass) return false;
    for (const auto& s : stages)
        if (s.status == "error") return false;
    return true;
}

const CheckResult* RunReport::check(const std::string& name) const
{
    for (const auto& c : checks)
        if (c.name == name) return &c;
    return nullptr;
}

Json RunReport::to_json() const
{
    Json st = Json::array();
    for (const auto& s : stages) {
        Json j{{"name", s.name}, {"status", s.status}, {"seconds", s.seconds}};
        if (!s.error.empty()) j["error"] = s.error;
        st.push_back(j);
    }
    Json ch = Json::array();
    for (const auto& c : checks) ch.push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
    return Json{{"config", config}, {"pass", pass()},  {"stages", st},
                {"checks", ch},     {"results", results}, {"artifacts", artifacts}};
}

RunReport run_scenario(const ScenarioConfig& config, Exec exec)
{
    config.validate();
    Runner r(config, exec);
    return r.run();
}

}  // namespace degen
