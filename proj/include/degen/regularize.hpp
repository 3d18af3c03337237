#pragma once

#include "degen/field.hpp"
#include "degen/grid.hpp"
#include "degen/io.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace degen {

struct RegularizationCheck {
    std::string name;
    bool pass = true;
    double worst_value = 0.0;
    std::optional<Vec2> worst_point;
    std::vector<Vec2> counterexamples;   // failing pair or failing nodes, capped
    std::size_t n_checked = 0;
};

struct RegularizationReport {
    std::string stage;   // modify | mollify | verify
    double M = 0.0;
    double eps = 0.0;
    double c = 0.0;
    double L = 0.0;
    int retries = 0;
    std::vector<RegularizationCheck> checks;

    bool pass() const;
    const RegularizationCheck& check(const std::string& name) const;
    Json to_json() const;
};

struct Regularized {
    Field field;
    RegularizationReport report;
};

struct ModifyOptions {
    std::size_t n_pairs = 10000;
    bool auto_retry = true;
    int max_retries = 8;
    std::uint64_t seed = 7;
};

/// chi(r) G(xi) + (1 - chi(r)) c xi with chi(r) = smoothstep5((4M - r) / 3M).
Field modified_field(const Field& field, double M, double c);

/// Builds the modified field and checks it. On a monotonicity failure c is
/// doubled, up to max_retries times; the report carries the final c.
Regularized modify_at_infinity(const Field& field, double M, double c, const ModifyOptions& opts = {});

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].
void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights);

/// Tensor Gauss-Legendre nodes on [-1,1]^2 with the bump exp(-1/(1-|x|^2))
/// folded into the weights; weights sum to one, nodes outside the disk are dropped.
struct MollifierRule {
    std::vector<Vec2> nodes;
    std::vector<double> weights;
};

MollifierRule mollifier_rule(int order);

struct MollifyOptions {
    int order = 8;
    int check_order = 12;
    std::size_t n_quadrature_checks = 64;
    double quadrature_tol = 1e-2;   // relative to 1 + |G_eps|
    std::size_t n_pairs = 10000;
    std::vector<double> omega_t = {0.1, 0.5, 1.0};
    std::uint64_t seed = 11;
    bool run_checks = true;
};

/// (rho_eps * G) + eps xi evaluated with the order-n mollifier rule.
Field mollified_field(const Field& field, double eps, int order = 8);

Regularized mollify(const Field& field, double eps, const MollifyOptions& opts = {});

/// Grid transfer properties: nodes whose 2 eps ball lies in O_lambda(G)
/// (V_Lambda(G)) must lie in O_lambda(G_eps) (V_{Lambda+eps}(G_eps)).
/// Grids must share box and spacing.
std::vector<RegularizationCheck> transfer_checks(const DegeneracyGrid& base, const DegeneracyGrid& smooth,
                                                 double eps);

/// Classifies both fields on the common grid and checks transfer, the modulus
/// comparison at sampled t and sampled monotonicity of G_eps against omega_G.
RegularizationReport verify_regularization(const Field& base, const Field& smooth, double eps,
                                           const GridSpec& spec, const MollifyOptions& opts = {},
                                           Exec exec = Exec::parallel);
RegularizationReport verify_regularization(const Field& base, const Field& smooth, double eps,
                                           const DegeneracyGrid& base_grid,
                                           const DegeneracyGrid& smooth_grid,
                                           const MollifyOptions& opts = {});

}  // namespace degen
