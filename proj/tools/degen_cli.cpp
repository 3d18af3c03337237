// Command line front end: every subcommand builds a scenario config (from --config
// or defaults), applies flag overrides, and runs the matching stages.

#include "degen/scenario.hpp"

#include <CLI11.hpp>
#include <omp.h>

#include <functional>
#include <iostream>
#include <memory>

using namespace degen;

namespace {

constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;

using Apply = std::function<void(ScenarioConfig&)>;

struct Command {
    CLI::App* app = nullptr;
    std::string config_file;
    std::vector<Apply> overrides;
    Apply mode;   // stage selection and request filtering for the subcommand
    std::string default_field = "identity";

    template <class T>
    void option(const std::string& flag, const std::string& help, std::function<void(ScenarioConfig&, const T&)> fn)
    {
        auto value = std::make_shared<T>();
        CLI::Option* opt = app->add_option(flag, *value, help);
        overrides.push_back([opt, value, fn](ScenarioConfig& c) {
            if (opt->count()) fn(c, *value);
        });
    }

    void flag(const std::string& name, const std::string& help, std::function<void(ScenarioConfig&)> fn)
    {
        CLI::Option* opt = app->add_flag(name, help);
        overrides.push_back([opt, fn](ScenarioConfig& c) {
            if (opt->count()) fn(c);
        });
    }
};

void keep_requests(ScenarioConfig& c, const std::set<std::string>& keep)
{
    if (!keep.count("convergence")) c.convergence_h.clear();
    if (!keep.count("regularization")) c.regularization_checks = false;
    if (!keep.count("profiles")) c.centers = 0;
    if (!keep.count("histograms")) c.histogram_bins = 0;
    if (!keep.count("components")) c.component_r.clear();
    if (!keep.count("hessian")) c.hessian = false;
    if (!keep.count("trend")) c.trend = false;
    if (!keep.count("svcheck")) c.sv_fields = 0;
    if (!keep.count("barrier")) c.barrier_lambda.clear();
    if (!keep.count("duality")) c.duality_samples = 0;
}

void field_options(Command& cmd)
{
    cmd.option<std::string>("--field", "builtin field name", [](auto& c, const auto& v) { c.field.name = v; });
    cmd.option<double>("--c", "identity-scaled factor", [](auto& c, const auto& v) { c.field.c = v; });
    cmd.option<double>("--p", "p-laplacian exponent", [](auto& c, const auto& v) { c.field.p = v; });
    cmd.option<double>("--M", "Lipschitz / working scale", [](auto& c, const auto& v) { c.M = v; });
}

void grid_options(Command& cmd)
{
    cmd.option<double>("--box", "half width of the classification square", [](auto& c, const auto& v) { c.grid_box = v; });
    cmd.option<double>("--grid-h", "grid spacing", [](auto& c, const auto& v) { c.grid_h = v; });
    cmd.option<int>("--lambda-depth", "lambda ladder depth", [](auto& c, const auto& v) { c.lambda_depth = v; });
    cmd.option<int>("--Lambda-depth", "Lambda ladder depth", [](auto& c, const auto& v) { c.Lambda_depth = v; });
}

void solve_options(Command& cmd)
{
    cmd.option<std::string>("--domain", "disk or annulus", [](auto& c, const auto& v) { c.domain = v; });
    cmd.option<double>("--R", "disk radius", [](auto& c, const auto& v) { c.R_out = v; });
    cmd.option<double>("--R-in", "annulus inner radius", [](auto& c, const auto& v) { c.R_in = v; });
    cmd.option<double>("--R-out", "annulus outer radius", [](auto& c, const auto& v) { c.R_out = v; });
    cmd.option<double>("--mesh-h", "mesh size", [](auto& c, const auto& v) { c.mesh_h = v; });
    cmd.option<std::string>("--boundary", "boundary family", [](auto& c, const auto& v) { c.boundary.family = v; });
    cmd.option<std::vector<double>>("--boundary-p", "slope p of linear data", [](auto& c, const auto& v) {
        if (v.size() != 2) throw ConfigError("--boundary-p takes two values");
        c.boundary.p = Vec2(v[0], v[1]);
    });
    cmd.option<std::vector<double>>("--coefficients", "polynomial coefficients",
                                    [](auto& c, const auto& v) { c.boundary.coefficients = v; });
    cmd.option<double>("--alpha", "radial power", [](auto& c, const auto& v) { c.boundary.alpha = v; });
    cmd.option<std::vector<double>>("--eps", "decreasing eps list", [](auto& c, const auto& v) { c.eps = v; });
    cmd.flag("--modify", "modify the field at infinity", [](auto& c) { c.modify = true; });
}

int run(ScenarioConfig cfg, Exec exec)
{
    const RunReport rep = run_scenario(cfg, exec);
    Json failed = Json::array();
    for (const auto& c : rep.checks)
        if (!c.pass) failed.push_back({{"name", c.name}, {"detail", c.detail}});
    Json stages = Json::array();
    for (const auto& s : rep.stages) {
        Json j{{"name", s.name}, {"status", s.status}};
        if (!s.error.empty()) j["error"] = s.error;
        stages.push_back(j);
    }
    const Json out{{"output", cfg.output_dir().string()}, {"pass", rep.pass()}, {"stages", stages},
                   {"failed_checks", failed},             {"results", rep.results}};
    std::cout << out.dump(2) << "\n";
    return rep.pass() ? 0 : kExitCheckFailed;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Degenerate monotone field toolkit: classification, regularization, solves and analyses"};
    app.require_subcommand(1);

    std::string out_dir;
    int threads = 0;
    bool serial = false;
    std::uint64_t seed = 0;
    CLI::Option* seed_opt = nullptr;
    app.add_option("--out", out_dir, "output directory (default $DEGEN_OUTPUT_DIR/<name>)");
    app.add_option("--threads", threads, "cap on OpenMP worker threads")->check(CLI::PositiveNumber);
    app.add_flag("--serial", serial, "use the serial reference kernels");
    seed_opt = app.add_option("--seed", seed, "random seed");

    std::vector<std::unique_ptr<Command>> commands;
    auto make = [&](const std::string& name, const std::string& help) -> Command& {
        commands.push_back(std::make_unique<Command>());
        Command& cmd = *commands.back();
        cmd.app = app.add_subcommand(name, help);
        cmd.app->add_option("--config", cmd.config_file, "scenario YAML file")->check(CLI::ExistingFile);
        return cmd;
    };

    {
        Command& cmd = make("classify", "classify a field on a gradient grid and write the degeneracy grid");
        field_options(cmd);
        grid_options(cmd);
        cmd.mode = [](ScenarioConfig& c) {
            c.stages = {"classify"};
            keep_requests(c, {});
        };
    }
    {
        Command& cmd = make("solve", "solve the Dirichlet problem along the eps sequence");
        field_options(cmd);
        solve_options(cmd);
        cmd.mode = [](ScenarioConfig& c) {
            c.stages = {"solve"};
            keep_requests(c, {});
        };
    }
    {
        Command& cmd = make("blowup", "blow-up profiles and gradient histograms at sampled centers");
        field_options(cmd);
        grid_options(cmd);
        solve_options(cmd);
        cmd.option<std::vector<double>>("--delta", "decreasing blow-up radii", [](auto& c, const auto& v) { c.delta = v; });
        cmd.option<int>("--centers", "number of sampled centers", [](auto& c, const auto& v) { c.centers = v; });
        cmd.option<double>("--center-radius", "centers are drawn from this disk",
                           [](auto& c, const auto& v) { c.center_radius = v; });
        cmd.option<int>("--bins", "histogram bins per axis", [](auto& c, const auto& v) { c.histogram_bins = v; });
        cmd.mode = [](ScenarioConfig& c) {
            c.stages = {"classify", "solve", "analysis"};
            keep_requests(c, {"profiles", "histograms"});
            if (c.centers == 0 && c.histogram_bins == 0) c.centers = 9;
            if (c.delta.empty()) c.delta = {0.4, 0.2, 0.1, 0.05};
        };
    }
    {
        Command& cmd = make("duality", "identity residuals of the duality transform");
        field_options(cmd);
        grid_options(cmd);
        cmd.option<int>("--samples", "number of random points", [](auto& c, const auto& v) { c.duality_samples = v; });
        cmd.option<double>("--exclude", "skip points this close to the origin",
                           [](auto& c, const auto& v) { c.duality_exclude = v; });
        cmd.flag("--grid-image", "also compare i G(S-hat) with the dual D-hat", [](auto& c) { c.duality_grid_image = true; });
        cmd.mode = [](ScenarioConfig& c) {
            keep_requests(c, {"duality"});
            if (c.duality_samples == 0) c.duality_samples = 100;
            c.stages = c.duality_grid_image ? std::vector<std::string>{"classify", "analysis"}
                                            : std::vector<std::string>{"analysis"};
        };
    }
    {
        Command& cmd = make("barrier", "barrier constants and subsolution scan");
        cmd.option<std::string>("--field", "builtin field name", [](auto& c, const auto& v) { c.field.name = v; });
        cmd.option<std::vector<double>>("--lambda", "ellipticity levels", [](auto& c, const auto& v) { c.barrier_lambda = v; });
        cmd.option<double>("--rho", "ball radius", [](auto& c, const auto& v) { c.barrier_rho = v; });
        cmd.option<double>("--M", "gradient scale", [](auto& c, const auto& v) { c.barrier_M = v; });
        cmd.mode = [](ScenarioConfig& c) {
            c.stages = {"analysis"};
            keep_requests(c, {"barrier"});
            if (c.barrier_lambda.empty()) c.barrier_lambda = {1.0};
        };
    }
    {
        Command& cmd = make("svcheck", "circle / annulus-energy dichotomy on random smooth fields");
        cmd.option<int>("--fields", "number of random fields", [](auto& c, const auto& v) { c.sv_fields = v; });
        cmd.mode = [](ScenarioConfig& c) {
            c.stages = {"analysis"};
            keep_requests(c, {"svcheck"});
            if (c.sv_fields == 0) c.sv_fields = 100;
        };
    }

    CLI::App* scenario = app.add_subcommand("scenario", "run bundled or user scenarios");
    scenario->require_subcommand(1);
    std::string scenario_file;
    CLI::App* scenario_run = scenario->add_subcommand("run", "run every stage of a scenario file");
    scenario_run->add_option("file", scenario_file, "scenario YAML file")->required()->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        std::cerr << e.what() << "\n\n" << app.help();
        return kExitUsage;
    }

    if (threads > 0) omp_set_num_threads(threads);
    const Exec exec = serial ? Exec::serial : Exec::parallel;

    try {
        ScenarioConfig cfg;
        if (scenario_run->parsed()) {
            cfg = load_scenario(scenario_file);
        } else {
            Command* cmd = nullptr;
            for (auto& c : commands)
                if (c->app->parsed()) cmd = c.get();
            if (!cmd) {
                std::cerr << app.help();
                return kExitUsage;
            }
            if (!cmd->config_file.empty()) {
                cfg = load_scenario(cmd->config_file);
            } else {
                cfg.name = cmd->app->get_name();
                cfg.seed = 1;
                cfg.field.name = cmd->default_field;
            }
            for (const auto& o : cmd->overrides) o(cfg);
            cmd->mode(cfg);
        }
        if (seed_opt->count()) cfg.seed = seed;
        if (!out_dir.empty()) cfg.output = out_dir;
        cfg.validate();
        return run(cfg, exec);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitCheckFailed;
    }
}
