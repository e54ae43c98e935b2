#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include <rieszflow/energy.hpp>
#include <rieszflow/grid.hpp>
#include <rieszflow/params.hpp>
#include <rieszflow/riesz.hpp>
#include <rieszflow/rng.hpp>
#include <rieszflow/steady.hpp>

using namespace rieszflow;

namespace {

RadialDensity random_profile(std::shared_ptr<const RadialGrid> g,
                             std::uint64_t stream, double mass) {
    RadialDensity rho(g);
    for (std::size_t i = 0; i < g->n; ++i) {
        const double r = g->nodes[i] / g->R_dom;
        rho.v[i] = (0.1 + SplitMix64::at(stream, i)) * std::exp(-3.0 * r * r);
    }
    const double c = mass / rho.mass();
    for (double& x : rho.v) x *= c;
    return rho;
}

} // namespace

TEST_CASE("diffusion-dominated stationary state") {
    const ModelParams P = ModelParams::create(1, 0.4, 2.0, 3.0, 1.0, 1.0);
    const auto g = RadialGrid::uniform(1, 256, 2.0);
    const auto op = build_operator(g, 0.2);
    SolverConfig cfg;
    const SteadyReport rep = solve_el(P, cfg, op);

    REQUIRE(rep.converged);
    REQUIRE(rep.el_residual < cfg.fp_tol);
    REQUIRE(rep.rho.mass() == Catch::Approx(1.0).epsilon(1e-9));
    REQUIRE(rep.multiplier > 0.0);
    REQUIRE(rep.monotone);
    REQUIRE(rep.support_radius < 0.95 * g->R_dom); // compactly supported
    REQUIRE_FALSE(rep.wall_contact);
    REQUIRE(rep.identity_defect < 5e-3);
    // a constrained minimizer sits at its own optimal dilation
    REQUIRE(rep.energy.lambda_star == Catch::Approx(1.0).margin(5e-3));
}

TEST_CASE("stationary state is independent of the initial profile") {
    const ModelParams P = ModelParams::create(1, 0.4, 2.0, 3.0, 1.0, 1.0);
    const auto g = RadialGrid::uniform(1, 256, 2.0);
    const auto op = build_operator(g, 0.2);
    SolverConfig cfg;
    const SteadyReport a = solve_el(P, cfg, op);
    cfg.init = ProfileKind::gaussian;
    const SteadyReport b = solve_el(P, cfg, op);
    REQUIRE(a.converged);
    REQUIRE(b.converged);
    REQUIRE(l1_distance(a.rho, b.rho) < 1e-4);
}

TEST_CASE("unreachable mass is a configuration problem, not a hang") {
    // with nearly no aggregation the profile G has almost no mass at D = 0
    const ModelParams P = ModelParams::create(1, 0.4, 2.0, 3.0, 1e-8, 1.0);
    const auto g = RadialGrid::uniform(1, 128, 2.0);
    const auto op = build_operator(g, 0.2);
    REQUIRE_THROWS_AS(solve_el(P, SolverConfig{}, op), configuration_error);
}

TEST_CASE("aggregation-dominated critical point is a dilation saddle") {
    // (p*)' = 10/9 < m = 1.15 < m_c = 1.2
    const ModelParams P = ModelParams::create(1, 0.4, 2.0, 1.15, 6.0, 1.0);
    const auto g = RadialGrid::uniform(1, 256, 4.0);
    const auto op = build_operator(g, 0.2);
    SolverConfig cfg;
    cfg.max_iters = 20000;
    const SteadyReport rep = solve_el(P, cfg, op);
    REQUIRE(rep.converged);
    REQUIRE(rep.saddle_wrt_dilations);
}

TEST_CASE("two-parameter normalization hits both unit norms") {
    const ModelParams P = ModelParams::create(1, 0.4, 2.0, 3.0, 1.0, 1.0);
    const auto g = RadialGrid::uniform(1, 512, 2.0);
    const RadialDensity h = make_profile(g, ProfileKind::gaussian, 0.3, 2.7);
    const RadialDensity hn = normalize_two_param(P, h);
    REQUIRE(hn.mass() == Catch::Approx(1.0).epsilon(1e-12));
    REQUIRE(std::pow(lp_pow(hn, P.m), 1.0 / P.m) ==
            Catch::Approx(1.0).epsilon(1e-11));
}

TEST_CASE("interaction-quotient extremal") {
    const ModelParams P = ModelParams::create(1, 0.4, 2.0, 3.0, 1.0, 1.0);
    const auto g = RadialGrid::uniform(1, 256, 2.0);
    const auto op = build_operator(g, 0.2);
    SolverConfig cfg;
    cfg.fp_tol = 1e-6;
    const SteadyReport rep = hls_extremal(P, cfg, op);

    REQUIRE(rep.converged);
    REQUIRE(rep.rho.mass() == Catch::Approx(1.0).epsilon(1e-8));
    REQUIRE(std::pow(lp_pow(rep.rho, P.m), 1.0 / P.m) ==
            Catch::Approx(1.0).epsilon(1e-8));
    REQUIRE(rep.monotone);

    // the extremal beats normalized random competitors
    const double Q_star = rep.energy.conv_pp;
    for (std::uint64_t k = 0; k < 10; ++k) {
        const RadialDensity f =
            normalize_two_param(P, rearrange(random_profile(g, 100 + k, 1.0)));
        const double Q = free_energy(P, op, f).conv_pp;
        REQUIRE(Q <= Q_star * (1.0 + 1e-9));
    }

    // and stays below the closed-form upper bound for the sharp constant
    const double bound = std::pow(hls_upper_bound(P), P.p_conj);
    REQUIRE(Q_star <= bound * 1.01);
}

TEST_CASE("sharp-constant estimate is reproducible across inits") {
    const ModelParams P = ModelParams::create(1, 0.4, 2.0, 3.0, 1.0, 1.0);
    const auto g = RadialGrid::uniform(1, 256, 2.0);
    const auto op = build_operator(g, 0.2);
    SolverConfig cfg;
    cfg.fp_tol = 1e-6;
    const RadialDensity i1 = random_profile(g, 7, 1.0);
    const RadialDensity i2 = random_profile(g, 8, 1.0);
    const double H1 = estimate_Hstar(P, cfg, op, &i1);
    const double H2 = estimate_Hstar(P, cfg, op, &i2);
    REQUIRE(H1 == Catch::Approx(H2).epsilon(1e-4));
}

TEST_CASE("regime guard: no compact state below the conjugate exponent") {
    // m <= (p*)' = 10/9
    const ModelParams P = ModelParams::create(1, 0.4, 2.0, 1.05, 1.0, 1.0);
    const auto g = RadialGrid::uniform(1, 64, 2.0);
    const auto op = build_operator(g, 0.2);
    REQUIRE_THROWS_AS(solve_el(P, SolverConfig{}, op), regime_error);
    REQUIRE_THROWS_AS(hls_extremal(P, SolverConfig{}, op), regime_error);
}
