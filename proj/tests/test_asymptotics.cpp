#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include <rieszflow/asymptotics.hpp>
#include <rieszflow/grid.hpp>
#include <rieszflow/params.hpp>

using namespace rieszflow;

TEST_CASE("flat limit profile has the closed-form height and radius") {
    // chi = 2p/(stuff): height (chi/p)^{1/(m-p')} with p' = 2, m = 3
    const ModelParams P = ModelParams::create(1, 0.4, 2.0, 3.0, 8.0, 2.0);
    const auto g = RadialGrid::uniform(1, 256, 2.0);
    const LimitProfile lim = limit_profile(P, g);
    REQUIRE(lim.height == Catch::Approx(4.0)); // (8/2)^{1/(3-2)}
    REQUIRE(lim.radius == Catch::Approx(2.0 / (2.0 * 4.0))); // M/(omega_N h)
    REQUIRE(lim.rho.mass() == Catch::Approx(2.0).epsilon(1e-13));

    // a radius outside the computational domain is a hard error
    const ModelParams tiny = ModelParams::create(1, 0.4, 2.0, 3.0, 1e-4, 2.0);
    REQUIRE_THROWS_AS(limit_profile(tiny, g), truncation_error);
    const ModelParams low = ModelParams::create(1, 0.4, 2.0, 1.8, 1.0, 1.0);
    REQUIRE_THROWS_AS(limit_profile(low, g), regime_error); // m < p'
}

TEST_CASE("limit auxiliary functional peaks exactly at the flat profile") {
    const ModelParams P = ModelParams::create(1, 0.4, 2.0, 3.0, 2.0, 2.0);
    const auto g = RadialGrid::uniform(1, 512, 2.0);
    const LimitProfile lim = limit_profile(P, g);
    REQUIRE(lambda0(P, lim.rho) == Catch::Approx(P.M).epsilon(1e-12));
    const RadialDensity gs = make_profile(g, ProfileKind::gaussian, 0.5, 2.0);
    REQUIRE(lambda0(P, gs) < P.M);
}

TEST_CASE("recovery sequence closes the energy gap as s -> 0") {
    const ModelParams P = ModelParams::create(1, 0.4, 2.0, 3.0, 2.0, 2.0);
    const auto g = RadialGrid::uniform(1, 256, 2.0);
    const LimitProfile lim = limit_profile(P, g);
    const auto rows = gamma_probe(P, lim.rho, {0.4, 0.2, 0.1});
    REQUIRE(rows.size() == 3);
    REQUIRE(rows[1].gap < rows[0].gap);
    REQUIRE(rows[2].gap < rows[1].gap);
    for (const auto& r : rows) REQUIRE(r.F_0 == Catch::Approx(-1.0));
}

TEST_CASE("minimizers approach the flat profile along the sweep") {
    const ModelParams P = ModelParams::create(1, 0.4, 2.0, 3.0, 2.0, 2.0);
    const auto g = RadialGrid::uniform(1, 256, 2.0);
    SolverConfig cfg;
    const SweepReport rep = sweep_s(P, {0.4, 0.2}, cfg, g);
    REQUIRE(rep.rows.size() == 2);
    REQUIRE(rep.rows[0].converged);
    REQUIRE(rep.rows[1].converged);
    REQUIRE(rep.rows[1].L1_err < rep.rows[0].L1_err);
    REQUIRE(rep.trend_down);
    REQUIRE(rep.trend_violations == 0);
}

TEST_CASE("s lists are validated up front") {
    const ModelParams P = ModelParams::create(1, 0.4, 2.0, 3.0, 2.0, 2.0);
    const auto g = RadialGrid::uniform(1, 64, 2.0);
    SolverConfig cfg;
    REQUIRE_THROWS_AS(sweep_s(P, {}, cfg, g), parameter_error);
    REQUIRE_THROWS_AS(sweep_s(P, {0.2, 0.4}, cfg, g), parameter_error);
    REQUIRE_THROWS_AS(sweep_s(P, {0.6}, cfg, g), parameter_error); // s*p >= N
}

TEST_CASE("the m = p' study rejects other exponents") {
    const ModelParams P = ModelParams::create(1, 0.4, 2.0, 3.0, 2.0, 2.0);
    const auto g = RadialGrid::uniform(1, 64, 2.0);
    REQUIRE_THROWS_AS(fair_limit_study(P, {0.4}, SolverConfig{}, g), regime_error);
}

TEST_CASE("neutral m = p', chi = p case decays toward zero") {
    // p' = 2 = m, chi = p: both |F| and D_s shrink as s -> 0
    const ModelParams P = ModelParams::create(1, 0.4, 2.0, 2.0, 2.0, 1.0);
    const auto g = RadialGrid::uniform(1, 256, 4.0);
    SolverConfig cfg;
    cfg.max_iters = 20000;
    const SweepReport rep = fair_limit_study(P, {0.4, 0.2}, cfg, g);
    REQUIRE(rep.rows[0].converged);
    REQUIRE(rep.rows[1].converged);
    REQUIRE(std::abs(rep.rows[1].energy) < std::abs(rep.rows[0].energy));
    REQUIRE(rep.rows[1].D_s < rep.rows[0].D_s);
}

TEST_CASE("sweep csv header") {
    SweepReport rep;
    rep.rows.push_back(SweepRow{});
    std::ostringstream os;
    write_sweep_csv(rep, os);
    REQUIRE(os.str().rfind("s,L1_err,L2_err,energy,D_s,", 0) == 0);
}
