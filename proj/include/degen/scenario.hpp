#pragma once

#include "degen/field.hpp"
#include "degen/io.hpp"
#include "degen/solve.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace degen {

/// Closed-form boundary data families.
///   linear:           p . x
///   polynomial:       c0 + c1 x1 + c2 x2 + c3 x1^2 + c4 x1 x2 + c5 x2^2
///   radial-power:     |x|^alpha
///   perturbed-linear: p . x + amplitude sin(mode theta)
struct BoundarySpec {
    std::string family = "linear";
    Vec2 p = Vec2(1.0, 0.0);
    std::vector<double> coefficients;
    double alpha = 1.0;
    double amplitude = 0.0;
    int mode = 3;

    Dirichlet function() const;
    Json to_json() const;
};

struct ScenarioConfig {
    int version = 1;
    std::string name;
    std::optional<std::uint64_t> seed;
    std::string output;              // empty: $DEGEN_OUTPUT_DIR/<name>, else ./degen_out/<name>

    BuiltinSpec field;
    double M = 1.0;

    double grid_box = 2.0;           // half width of the classification square
    double grid_h = 0.02;
    std::optional<int> lambda_depth, Lambda_depth;   // default: Ladders::for_field

    std::string domain = "disk";     // disk | annulus
    double R_in = 0.0, R_out = 1.0;
    double mesh_h = 0.05;

    BoundarySpec boundary;
    std::vector<double> eps;         // strictly decreasing; empty solves with G itself
    std::vector<double> delta;       // strictly decreasing blow-up radii

    bool modify = false;
    double modify_c = 1.0;

    // analysis requests
    std::vector<double> convergence_h;        // boundary data taken as the exact solution
    double rate_min = 1.7, rate_max = 2.3;
    bool regularization_checks = false;
    double regularization_grid_h = 0.04;
    double regularization_box = 0.0;          // <= 0: the classification box
    int centers = 0;
    double center_radius = 0.5;
    double theta = 0.0;                       // Lebesgue threshold; <= 0 selects 0.05 M-hat
    double oscillation_tol = 0.1;
    int histogram_bins = 0;                   // 0 disables histograms
    double young_distance = 0.1;
    std::vector<double> component_r;
    bool hessian = false;
    double hessian_tol = 0.05;                // allowed positive part of the recovered det D^2 u
    bool trend = false;
    int sv_fields = 0;
    std::vector<double> barrier_lambda;
    double barrier_rho = 1.0, barrier_M = 1.0;
    int duality_samples = 0;
    double duality_half = 1.5;                // points drawn from [-half, half]^2
    double duality_exclude = 0.0;             // skip points this close to the origin
    bool duality_grid_image = false;          // also compare i G(S-hat) with D-hat of the dual

    /// Subset of classify, regularize, solve, analysis; run in that order.
    std::vector<std::string> stages = {"classify", "regularize", "solve", "analysis"};
    bool runs(const std::string& stage) const;

    /// Throws ConfigError on the first invalid value.
    void validate() const;
    Json to_json() const;
    std::filesystem::path output_dir() const;
};

/// Reads a YAML scenario; unknown keys, a missing or unsupported version and
/// invalid values throw ConfigError.
ScenarioConfig load_scenario(const std::filesystem::path& file);
ScenarioConfig parse_scenario(const std::string& yaml_text);

struct CheckResult {
    std::string name;
    bool pass = true;
    Json detail = Json::object();
};

struct StageRecord {
    std::string name;
    double seconds = 0.0;
    std::string status = "ok";       // ok | error | skipped
    std::string error;
};

struct RunReport {
    Json config;
    std::vector<StageRecord> stages;
    std::vector<std::string> artifacts;   // relative to the output directory
    std::vector<CheckResult> checks;
    Json results = Json::object();

    bool pass() const;
    const CheckResult* check(const std::string& name) const;
    Json to_json() const;
};

/// classification -> regularization -> eps-sequence solve -> requested analyses.
/// Artifacts are written atomically under the output directory, report.json last.
/// A stage that throws aborts the remaining stages; the partial report is still written.
RunReport run_scenario(const ScenarioConfig& config, Exec exec = Exec::parallel);

/// Least-squares slope of log(error) against log(h).
double convergence_rate(const std::vector<double>& h, const std::vector<double>& err);

struct DualityResidual {
    std::size_t n = 0;
    double max_residual = 0.0;     // max |G*(i G(xi)) - i xi|
    std::size_t n_unconverged = 0;
    std::vector<Vec2> points;
    std::vector<double> residual;
    Json to_json() const;
    std::string to_csv() const;
};

/// Identity residuals of the duality transform at seeded points of the box,
/// skipping points within `exclude` of the origin.
DualityResidual duality_residuals(const Field& field, std::size_t n, std::uint64_t seed, double half = 1.5,
                                  double exclude = 0.0);

}  // namespace degen
