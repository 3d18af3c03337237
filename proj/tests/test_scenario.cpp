#include "degen/scenario.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

using namespace degen;
namespace fs = std::filesystem;

namespace {

const fs::path kScenarios = fs::path(DEGEN_SOURCE_DIR) / "scenarios";

fs::path scratch(const std::string& name)
{
    const fs::path p = fs::temp_directory_path() / ("degen_test_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const char* kMinimal = R"(
version: 1
name: tiny
seed: 3
field:
  name: identity
grid:
  h: 0.1
mesh:
  h: 0.2
)";

void expect_config_error(const std::string& yaml, const std::string& fragment)
{
    try {
        parse_scenario(yaml);
        ADD_FAILURE() << "accepted: " << yaml;
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
    }
}

std::map<std::string, std::string> csv_files(const fs::path& dir)
{
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".csv")
            out[fs::relative(e.path(), dir).string()] = slurp(e.path());
    return out;
}

int run_cli(const std::string& args, const fs::path& stdout_file = "/dev/null")
{
    const std::string cmd = std::string(DEGEN_CLI) + " " + args + " > " + stdout_file.string() + " 2>/dev/null";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Config, BundledScenariosParse)
{
    for (const char* name : {"laplace_sanity", "kink_circle", "plaplace_annulus"}) {
        const ScenarioConfig c = load_scenario(kScenarios / (std::string(name) + ".yaml"));
        EXPECT_EQ(c.name, name);
        EXPECT_TRUE(c.seed.has_value());
    }
    const ScenarioConfig k = load_scenario(kScenarios / "kink_circle.yaml");
    EXPECT_EQ(k.eps, (std::vector<double>{0.2, 0.1, 0.05}));
    EXPECT_EQ(k.centers, 9);
    EXPECT_EQ(k.boundary.family, "linear");
    EXPECT_EQ(k.boundary.p, Vec2(1.3, 0.0));
    EXPECT_TRUE(std::isinf(load_scenario(kScenarios / "plaplace_annulus.yaml").rate_max));
}

TEST(Config, MinimalDefaults)
{
    const ScenarioConfig c = parse_scenario(kMinimal);
    EXPECT_EQ(*c.seed, 3u);
    EXPECT_EQ(c.domain, "disk");
    EXPECT_EQ(c.stages.size(), 4u);
    EXPECT_EQ(c.to_json()["grid"]["h"], 0.1);
}

TEST(Config, UnknownKeysAreErrors)
{
    expect_config_error(std::string(kMinimal) + "colour: red\n", "unknown key colour");
    expect_config_error(std::string(kMinimal) + "analysis:\n  profiles:\n    centres: 9\n", "profiles.centers");
    expect_config_error(std::string(kMinimal) + "analysis:\n  profiles:\n    centers: 9\n    radius: 1\n",
                        "unknown key analysis.profiles.radius");
    expect_config_error("version: 1\nname: a\nseed: 1\nfield:\n  name: identity\n  q: 2\n", "unknown key field.q");
}

TEST(Config, VersionAndSeedRequired)
{
    expect_config_error("name: a\nseed: 1\nfield: {name: identity}\n", "version");
    expect_config_error("version: 2\nname: a\nseed: 1\nfield: {name: identity}\n", "unsupported config version");
    expect_config_error("version: 1\nname: a\nfield: {name: identity}\n", "seed");
    expect_config_error("", "empty config");
    expect_config_error("version: [1\n", "malformed YAML");
}

TEST(Config, InvalidValues)
{
    const std::string head = "version: 1\nname: a\nseed: 1\nfield: {name: identity}\n";
    expect_config_error(head + "grid: {h: -0.1}\n", "grid.h must be positive");
    expect_config_error(head + "eps: [0.1, 0.2]\n", "eps must be strictly decreasing");
    expect_config_error(head + "delta: [0.2, 0]\n", "delta entries must be positive");
    expect_config_error(head + "boundary: {family: polynomial, coefficients: [1, 2]}\n", "6 coefficients");
    expect_config_error(head + "boundary: {family: cubic}\n", "unknown boundary family");
    expect_config_error(head + "mesh: {domain: annulus, R_in: 1, R_out: 0.5}\n", "annulus");
    expect_config_error(head + "grid: {h: fast}\n", "grid.h has the wrong type");
    expect_config_error(head + "stages: [classify, plot]\n", "unknown stage");
    expect_config_error(head + "analysis: {trend: true}\neps: [0.2, 0.1]\n", "three eps");
    expect_config_error(head + "analysis: {profiles: {centers: 3}}\n", "delta list");
    expect_config_error(head + "delta: [0.8]\nanalysis: {profiles: {centers: 3}}\n", "inside the domain");
    expect_config_error("version: 1\nname: a\nseed: 1\nfield: {name: spiral}\n", "unknown builtin field");
    expect_config_error("version: 1\nname: a b\nseed: 1\nfield: {name: identity}\n", "name may only contain");
}

TEST(Config, OutputDirectoryResolution)
{
    ScenarioConfig c = parse_scenario(kMinimal);
    ::setenv("DEGEN_OUTPUT_DIR", "/tmp/envroot", 1);
    EXPECT_EQ(c.output_dir(), fs::path("/tmp/envroot/tiny"));
    ::unsetenv("DEGEN_OUTPUT_DIR");
    EXPECT_EQ(c.output_dir(), fs::path("degen_out/tiny"));
    c.output = "/tmp/explicit";
    EXPECT_EQ(c.output_dir(), fs::path("/tmp/explicit"));
}

TEST(Config, BoundaryFamilies)
{
    BoundarySpec b;
    b.family = "polynomial";
    b.coefficients = {1, 2, 3, 4, 5, 6};
    EXPECT_DOUBLE_EQ(b.function()(Vec2(1.0, -1.0)), 1 + 2 - 3 + 4 - 5 + 6);
    b.family = "radial-power";
    b.alpha = 0.5;
    EXPECT_DOUBLE_EQ(b.function()(Vec2(3.0, 4.0)), std::sqrt(5.0));
    b.family = "perturbed-linear";
    b.p = Vec2(1.0, 2.0);
    b.amplitude = 0.1;
    b.mode = 3;
    EXPECT_NEAR(b.function()(Vec2(0.0, 1.0)), 2.0 + 0.1 * std::sin(1.5 * 3.14159265358979323846), 1e-15);
}

TEST(Helpers, ConvergenceRateOfPowerLaw)
{
    const std::vector<double> h = {0.1, 0.05, 0.025, 0.0125};
    std::vector<double> e;
    for (double x : h) e.push_back(7.0 * std::pow(x, 1.75));
    EXPECT_NEAR(convergence_rate(h, e), 1.75, 1e-12);
    EXPECT_THROW(convergence_rate({0.1}, {1.0}), Error);
}

TEST(Helpers, DualityResidualsSmall)
{
    const auto d = duality_residuals(make_identity_scaled(2.5), 50, 9);
    EXPECT_EQ(d.n, 50u);
    EXPECT_LT(d.max_residual, 1e-12);
    const auto p = duality_residuals(make_p_laplacian(4.0), 50, 9, 1.5, 0.1);
    for (const Vec2& x : p.points) EXPECT_GT(x.norm(), 0.1);
    EXPECT_LE(p.max_residual, 1e-8);
    EXPECT_EQ(p.n_unconverged, 0u);
}

TEST(Scenario, LaplaceSanityPasses)
{
    ScenarioConfig c = load_scenario(kScenarios / "laplace_sanity.yaml");
    c.output = scratch("laplace").string();
    const RunReport r = run_scenario(c);
    EXPECT_TRUE(r.pass());
    for (const auto& rate : r.results["convergence"]["rates"]) {
        EXPECT_GE(rate.get<double>(), 1.7);
        EXPECT_LE(rate.get<double>(), 2.3);
    }
    ASSERT_NE(r.check("convergence_rate"), nullptr);
    EXPECT_TRUE(r.results["classify"]["empty"]["DS"].get<bool>());
    for (const auto& a : r.artifacts) EXPECT_TRUE(fs::exists(fs::path(c.output) / a)) << a;
    for (const auto& e : fs::recursive_directory_iterator(c.output))
        EXPECT_EQ(e.path().string().find(".tmp."), std::string::npos) << e.path();
    const Json rep = Json::parse(slurp(fs::path(c.output) / "report.json"));
    EXPECT_TRUE(rep["pass"].get<bool>());
    EXPECT_EQ(rep["config"]["name"], "laplace_sanity");
    for (const auto& s : rep["stages"]) EXPECT_GE(s["seconds"].get<double>(), 0.0);
}

TEST(Scenario, CsvArtifactsAreReproducible)
{
    ScenarioConfig c = load_scenario(kScenarios / "laplace_sanity.yaml");
    c.output = scratch("repro_a").string();
    run_scenario(c, Exec::parallel);
    const auto a = csv_files(c.output);
    c.output = scratch("repro_b").string();
    run_scenario(c, Exec::serial);
    const auto b = csv_files(c.output);
    ASSERT_GT(a.size(), 10u);
    EXPECT_EQ(a, b);
}

TEST(Scenario, StageFailureFlushesPartialReport)
{
    ScenarioConfig c = parse_scenario(kMinimal);
    c.output = scratch("partial").string();
    c.hessian = true;
    fs::create_directories(c.output);
    std::ofstream(fs::path(c.output) / "solve") << "in the way";
    const RunReport r = run_scenario(c);
    EXPECT_FALSE(r.pass());
    ASSERT_EQ(r.stages.size(), 4u);
    EXPECT_EQ(r.stages[0].status, "ok");
    EXPECT_EQ(r.stages[2].status, "error");
    EXPECT_EQ(r.stages[3].status, "skipped");
    const Json rep = Json::parse(slurp(fs::path(c.output) / "report.json"));
    EXPECT_FALSE(rep["pass"].get<bool>());
    EXPECT_EQ(rep["stages"][3]["status"], "skipped");
    EXPECT_TRUE(fs::exists(fs::path(c.output) / "grid" / "in_DS.csv"));
}

TEST(Scenario, MissingPrerequisiteGivesErrorEntry)
{
    ScenarioConfig c = parse_scenario(kMinimal);
    c.output = scratch("prereq").string();
    c.stages = {"analysis"};
    c.delta = {0.2, 0.1};
    c.centers = 2;
    const RunReport r = run_scenario(c);
    EXPECT_FALSE(r.pass());
    EXPECT_TRUE(r.results["profiles"].contains("error"));
    ASSERT_NE(r.check("profiles"), nullptr);
    EXPECT_FALSE(r.check("profiles")->pass);
}

TEST(Scenario, InvalidConfigWritesNothing)
{
    ScenarioConfig c = parse_scenario(kMinimal);
    c.output = scratch("invalid").string();
    c.mesh_h = -0.1;
    EXPECT_THROW(run_scenario(c), ConfigError);
    EXPECT_FALSE(fs::exists(c.output));
}

TEST(Cli, ExitCodes)
{
    const fs::path out = scratch("cli");
    EXPECT_EQ(run_cli("--out " + (out / "ok").string() + " classify --field identity --grid-h 0.1"), 0);
    EXPECT_EQ(run_cli("--out " + (out / "bad").string() + " classify --grid-h -0.1"), 2);
    EXPECT_FALSE(fs::exists(out / "bad"));
    EXPECT_EQ(run_cli("frobnicate"), 2);
    EXPECT_EQ(run_cli(""), 2);
    EXPECT_EQ(run_cli("classify --field nonsense"), 2);

    const fs::path strict = out / "strict.yaml";
    fs::create_directories(out);
    std::ofstream(strict) << kMinimal << "typo: 1\n";
    EXPECT_EQ(run_cli("scenario run " + strict.string()), 2);

    const fs::path fails = out / "fails.yaml";
    std::ofstream(fails) << slurp(kScenarios / "laplace_sanity.yaml") << "output: " << (out / "fails").string() << "\n";
    {
        // impossible rate window
        std::string text = slurp(fails);
        text.replace(text.find("rate_min: 1.7"), 13, "rate_min: 3.0");
        text.replace(text.find("rate_max: 2.3"), 13, "rate_max: 4.0");
        std::ofstream(fails) << text;
    }
    EXPECT_EQ(run_cli("scenario run " + fails.string()), 1);
    EXPECT_TRUE(fs::exists(out / "fails" / "report.json"));
}

TEST(Cli, BarrierPrintsConstants)
{
    const fs::path out = scratch("cli_barrier");
    fs::create_directories(out);
    ASSERT_EQ(run_cli("--out " + (out / "run").string() + " barrier --lambda 1 --rho 1 --M 1", out / "stdout.json"), 0);
    const Json j = Json::parse(slurp(out / "stdout.json"));
    const Json& b = j["results"]["barrier"][0];
    const double k = std::pow((80.0 + std::sqrt(6400.0 + 4000.0)) / 10.0, 2);
    EXPECT_NEAR(b["params"]["k"].get<double>(), k, 1e-12 * k);
    EXPECT_TRUE(b.contains("log_gamma"));
    EXPECT_TRUE(b.contains("log_eps"));
    EXPECT_LT(b["log_eps"].get<double>(), b["log_gamma"].get<double>());
}

TEST(Cli, DualityQuarticResidual)
{
    const fs::path out = scratch("cli_duality");
    fs::create_directories(out);
    ASSERT_EQ(run_cli("--out " + (out / "run").string() + " duality --field quartic-quartroot --samples 100",
                      out / "stdout.json"),
              0);
    const Json j = Json::parse(slurp(out / "stdout.json"));
    EXPECT_EQ(j["results"]["duality"]["n"], 100);
    EXPECT_LE(j["results"]["duality"]["max_residual"].get<double>(), 1e-8);
}
