// Acceptance suite: one line per criterion, PASS or FAIL, with the measured
// quantity and its pinned tolerance. Exit code is the number of failures.

#include <cmath>
#include <cstdio>
#include <numbers>
#include <string>
#include <vector>

#include <rieszflow/rieszflow.hpp>

using namespace rieszflow;

namespace {

int failures = 0;

void check(int id, const std::string& label, bool pass,
           const std::string& detail) {
    std::printf("criterion %02d %s  %s  (%s)\n", id, pass ? "PASS" : "FAIL",
                label.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
}

std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3e", x);
    return buf;
}

RadialDensity random_profile(std::shared_ptr<const RadialGrid> g,
                             std::uint64_t stream, double mass) {
    RadialDensity rho(g);
    for (std::size_t i = 0; i < g->n; ++i) {
        const double r = g->nodes[i] / g->R_dom;
        rho.v[i] = (0.05 + SplitMix64::at(stream, i)) * std::exp(-4.0 * r * r);
    }
    const double c = mass / rho.mass();
    for (double& x : rho.v) x *= c;
    return rho;
}

// --- 1: kernel constants ---------------------------------------------------
void criterion_1() {
    const double c31 = riesz_constant(3, 1.0);
    const double want = 1.0 / (4.0 * std::numbers::pi);
    double worst = std::abs(c31 - want) / want;
    bool ok = worst < 1e-12;
    for (int N = 1; N <= 3; ++N) {
        const double s = 1e-4;
        const double lim = 2.0 / (N * unit_ball_volume(N));
        const double got = riesz_constant(N, s) / s;
        const double rel = std::abs(got - lim) / lim;
        worst = std::max(worst, rel);
        ok = ok && rel < 1e-3;
    }
    check(1, "kernel constants (tol 1e-12 / 1e-3)", ok, "worst rel " + fmt(worst));
}

// --- 2: semigroup reduction at p = 2 ---------------------------------------
double semigroup_defect(std::size_t n) {
    const ModelParams P = ModelParams::create(1, 0.4, 2.0, 3.0, 1.0, 1.0);
    const auto g = RadialGrid::uniform(1, n, 2.0);
    const auto oph = build_operator(g, 0.2);
    const auto opf = build_operator(g, 0.4);
    const RadialDensity rho = make_profile(g, ProfileKind::bump, 1.0, 1.0);
    const RadialDensity two = nonlinear_potential(P, oph, rho);
    const RadialDensity one = apply(opf, rho);
    double d = 0.0, ref = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        d = std::max(d, std::abs(two.v[i] - one.v[i]));
        ref = std::max(ref, one.v[i]);
    }
    return d / ref;
}

void criterion_2() {
    const double d512 = semigroup_defect(512);
    const double d2048 = semigroup_defect(2048);
    const bool ok = d2048 < 1e-5 && d512 >= 4.0 * d2048;
    check(2, "semigroup defect (tol 1e-5, refinement >= 4x)", ok,
          "n=512: " + fmt(d512) + ", n=2048: " + fmt(d2048));
}

// --- 3: bilinear symmetry --------------------------------------------------
void criterion_3() {
    const auto g = RadialGrid::uniform(1, 256, 2.0);
    const auto op = build_operator(g, 0.2);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        RadialDensity f(g), h(g);
        for (std::size_t i = 0; i < g->n; ++i) {
            f.v[i] = SplitMix64::at(31, 2 * (trial * g->n + i));
            h.v[i] = SplitMix64::at(31, 2 * (trial * g->n + i) + 1);
        }
        const RadialDensity Kh = apply(op, h), Kf = apply(op, f);
        double fg = 0.0, gf = 0.0;
        for (std::size_t i = 0; i < g->n; ++i) {
            fg += f.v[i] * Kh.v[i] * g->vols[i];
            gf += h.v[i] * Kf.v[i] * g->vols[i];
        }
        worst = std::max(worst, std::abs(fg - gf) / std::max(1.0, std::abs(fg)));
    }
    check(3, "bilinear symmetry, 100 pairs (tol 1e-8)", worst < 1e-8,
          "worst " + fmt(worst));
}

// --- 4: free-energy homogeneity --------------------------------------------
void criterion_4() {
    struct Fix {
        int N;
        double p, s, m;
    };
    const std::vector<Fix> fixtures = {{1, 2.0, 0.4, 3.0}, {1, 3.0, 0.2, 2.5}};
    double worst = 0.0;
    bool ok = true;
    for (const auto& fx : fixtures) {
        const ModelParams P = ModelParams::create(fx.N, fx.s, fx.p, fx.m, 1.0, 1.0);
        const auto g = RadialGrid::uniform(fx.N, 4096, 2.0);
        const auto op = build_operator(g, 0.5 * fx.s);
        // the mass-preserving dilation of a bump is the bump with scaled
        // radius, so the dilated profiles are analytic, never resampled;
        // smoothness keeps the quadrature error O(h^2) (an indicator's
        // C^{0,2a} potential edge degrades this to ~h^{1.4})
        const RadialDensity rho = make_profile(g, ProfileKind::bump, 0.8, 1.0);
        const EnergyBreakdown E0 = free_energy(P, op, rho);
        for (double lam : {0.5, 2.0}) {
            const RadialDensity rl =
                make_profile(g, ProfileKind::bump, 0.8 / lam, 1.0);
            const double got = free_energy(P, op, rl).free_energy;
            const double want = dilation_energy(P, E0.norm_m_m, E0.conv_pp, lam);
            const double rel = std::abs(got - want) / std::abs(want);
            worst = std::max(worst, rel);
            ok = ok && rel < 1e-6;
        }
    }
    check(4, "dilation scaling law (tol 1e-6)", ok, "worst rel " + fmt(worst));
}

// --- 5: optimal dilation ---------------------------------------------------
void criterion_5() {
    const auto g = RadialGrid::uniform(1, 512, 2.0);
    double worst_d = 0.0, worst_v = 0.0;
    bool ok = true;
    int fix = 0;
    for (double m : {3.0, 2.0, 1.5}) {
        const ModelParams P = ModelParams::create(1, 0.4, 2.0, m, 1.0, 1.0);
        const auto op = build_operator(g, 0.2);
        const RadialDensity rho = random_profile(g, 500 + fix++, 1.0);
        const EnergyBreakdown E = free_energy(P, op, rho);
        const double A = E.norm_m_m, B = E.conv_pp;
        const double ls = E.lambda_star;
        const double h = 1e-6 * ls;
        const double d =
            (dilation_energy(P, A, B, ls + h) - dilation_energy(P, A, B, ls - h)) /
            (2.0 * h);
        const double dn = std::abs(d) * ls /
                          std::max(1.0, std::abs(dilation_energy(P, A, B, ls)));
        const double val = dilation_energy(P, A, B, ls);
        const double rel =
            std::abs(val - E.kappa * E.lambda_value) / std::max(1.0, std::abs(val));
        worst_d = std::max(worst_d, dn);
        worst_v = std::max(worst_v, rel);
        ok = ok && dn < 1e-5 && rel < 1e-8;
    }
    check(5, "optimal dilation (f' tol 1e-5, value tol 1e-8)", ok,
          "worst f' " + fmt(worst_d) + ", worst value " + fmt(worst_v));
}

// --- 6: diffusion-dominated steady solve -----------------------------------
void criterion_6() {
    const ModelParams P = ModelParams::create(1, 0.4, 2.0, 3.0, 1.0, 1.0);
    const auto g = RadialGrid::uniform(1, 1024, 2.0);
    const auto op = build_operator(g, 0.2);
    SolverConfig cfg;
    const SteadyReport rep = solve_el(P, cfg, op);
    const double lam_err = std::abs(rep.energy.lambda_star - 1.0);
    const bool ok = rep.converged && rep.el_residual < 1e-6 &&
                    rep.identity_defect < 1e-3 && lam_err < 1e-3 &&
                    rep.monotone && rep.support_radius < 0.95 * g->R_dom;
    check(6, "steady solve (residual 1e-6, identity 1e-3, lambda* 1e-3)", ok,
          "residual " + fmt(rep.el_residual) + ", identity " +
              fmt(rep.identity_defect) + ", |lambda*-1| " + fmt(lam_err));
}

// --- 7: interaction-quotient extremal --------------------------------------
void criterion_7() {
    const ModelParams P = ModelParams::create(1, 0.4, 2.0, 3.0, 1.0, 1.0);
    const auto g = RadialGrid::uniform(1, 512, 2.0);
    const auto op = build_operator(g, 0.2);
    SolverConfig cfg;
    cfg.fp_tol = 1e-6;
    const SteadyReport rep = hls_extremal(P, cfg, op);
    const double n1_err = std::abs(rep.rho.mass() - 1.0);
    const double nm_err = std::abs(std::pow(lp_pow(rep.rho, P.m), 1.0 / P.m) - 1.0);
    bool beats_all = true;
    const double Q_star = rep.energy.conv_pp;
    for (std::uint64_t k = 0; k < 50; ++k) {
        const RadialDensity f =
            normalize_two_param(P, rearrange(random_profile(g, 700 + k, 1.0)));
        if (free_energy(P, op, f).conv_pp > Q_star * (1.0 + 1e-9))
            beats_all = false;
    }
    const double bound = std::pow(hls_upper_bound(P), P.p_conj);
    const RadialDensity i2 = random_profile(g, 999, 1.0);
    const double H2 = estimate_Hstar(P, cfg, op, &i2);
    const double init_gap = std::abs(H2 - Q_star) / Q_star;
    const bool ok = rep.converged && n1_err < 1e-8 && nm_err < 1e-8 &&
                    rep.el_residual < 1e-5 && beats_all &&
                    Q_star <= bound * (1.0 + 1e-2) && init_gap < 1e-3;
    check(7, "extremal (norms 1e-8, residual 1e-5, 50 fixtures, bound 1e-2)", ok,
          "H* " + fmt(Q_star) + ", residual " + fmt(rep.el_residual) +
              ", init gap " + fmt(init_gap));
}

// --- 8: critical mass ------------------------------------------------------
void criterion_8() {
    const ModelParams P = ModelParams::create(1, 0.4, 2.0, 1.2, 1.0, 1.0);
    const auto g = RadialGrid::uniform(1, 512, 2.0);
    const auto op = build_operator(g, 0.2);
    SolverConfig cfg;
    cfg.fp_tol = 1e-6;
    const SteadyReport rep = hls_extremal(P, cfg, op);
    const double Hstar = rep.energy.conv_pp;
    const double Mc = critical_mass(P, Hstar);

    // the normalized extremal lives on its own (dilated) grid
    const auto op2 = build_operator(rep.rho.grid, 0.2);
    RadialDensity hc = rep.rho;
    for (double& x : hc.v) x *= Mc;
    const EnergyBreakdown Ec = free_energy(P, op2, hc);
    const double scale = (P.chi / P.p_conj) * Ec.conv_pp;
    const bool near_zero = std::abs(Ec.free_energy) < 1e-3 * scale;

    // supercritical mass: a dilation sweep reaches negative energy
    RadialDensity hs = rep.rho;
    for (double& x : hs.v) x *= 1.5 * Mc;
    const EnergyBreakdown Es = free_energy(P, op2, hs);
    double fmin = 0.0;
    for (double lam = 0.5; lam <= 2.05; lam += 0.1)
        fmin = std::min(fmin,
                        dilation_energy(P, Es.norm_m_m, Es.conv_pp, lam));
    const bool ok = rep.converged && near_zero && fmin < 0.0;
    check(8, "critical mass (|F(M_c h)| < 1e-3 scale, F < 0 at 1.5 M_c)", ok,
          "M_c " + fmt(Mc) + ", |F| " + fmt(std::abs(Ec.free_energy)) +
              ", scale " + fmt(scale) + ", min F " + fmt(fmin));
}

// --- 9: evolution consistency ----------------------------------------------
void criterion_9() {
    const ModelParams P = ModelParams::create(1, 0.4, 2.0, 3.0, 1.0, 1.0);
    const auto g = RadialGrid::uniform(1, 256, 2.0);
    const auto op = build_operator(g, 0.2);
    const SteadyReport sr = solve_el(P, SolverConfig{}, op);

    RadialDensity rho0 = sr.rho;
    for (std::size_t i = 0; i < rho0.size(); ++i)
        rho0.v[i] *= 1.0 + 0.05 * (2.0 * SplitMix64::at(9, i) - 1.0);
    const double c = 1.0 / rho0.mass();
    for (double& x : rho0.v) x *= c;

    EvolveConfig cfg;
    cfg.t_end = 3.0;
    cfg.record_every = 200;
    cfg.steady_tol = 1e-3;
    const TrajectoryRecord rec = run(P, op, rho0, cfg, &sr.rho);

    double drift = 0.0;
    for (double m : rec.masses) drift = std::max(drift, std::abs(m - 1.0));
    bool energy_ok = true;
    double worst_up = 0.0;
    const double per_rec = 1e-10 * cfg.record_every;
    for (std::size_t i = 1; i < rec.energies.size(); ++i) {
        const double up = rec.energies[i] - rec.energies[i - 1];
        worst_up = std::max(worst_up, up);
        if (up > per_rec) energy_ok = false;
    }
    const bool ok = sr.converged && rec.dist_ref.back() < 1e-3 &&
                    drift < 1e-10 && energy_ok;
    check(9, "relaxation (L1 1e-3, mass drift 1e-10, energy 1e-10/step)", ok,
          "final L1 " + fmt(rec.dist_ref.back()) + ", drift " + fmt(drift) +
              ", worst energy rise " + fmt(worst_up));
}

// --- 10: s -> 0 limit of minimizers ----------------------------------------
void criterion_10() {
    const ModelParams P = ModelParams::create(1, 0.4, 2.0, 3.0, 2.0, 2.0);
    const auto g = RadialGrid::uniform(1, 2048, 2.0);
    SolverConfig cfg;
    cfg.max_iters = 20000;
    const SweepReport rep = sweep_s(P, {0.4, 0.2, 0.1, 0.05}, cfg, g);
    bool all_conv = true;
    for (const auto& r : rep.rows) all_conv = all_conv && r.converged;
    const double final_err = rep.rows.back().L1_err;
    const double final_energy = rep.rows.back().energy;
    const bool ok = all_conv && final_err < 0.05 * P.M && rep.trend_down &&
                    rep.trend_violations == 0 &&
                    std::abs(final_energy - (-1.0)) < 0.05;
    // baseline for the energy clause: even the limit profile itself sits at
    // F_s(rho_0) = 1 - c_{1,s} 2^{2s+2}/(2s(2s+1)), about -1.074 at s=0.05,
    // i.e. outside the 5% band; the interaction error is O(s) in the
    // continuum, so the band would need s <~ 0.033. Reported for context.
    const double flat_exact =
        1.0 - riesz_constant(1, 0.05) * std::pow(2.0, 2.1) / (0.1 * 1.1);
    std::string errs;
    for (const auto& r : rep.rows) errs += fmt(r.L1_err) + " ";
    check(10, "s->0 minimizer limit (L1 < 0.1, energy -> -1 within 5%)", ok,
          "L1 path " + errs + ", final energy " + fmt(final_energy) +
              ", exact flat-profile energy at s=0.05: " + fmt(flat_exact));
}

// --- 11: m = p' trichotomy -------------------------------------------------
bool trend_decreasing(const std::vector<double>& v, int allowance) {
    int bad = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (!(v[i] < v[i - 1])) ++bad;
    return bad <= allowance && v.back() < v.front();
}

void criterion_11() {
    const std::vector<double> s_list = {0.4, 0.3, 0.2, 0.15};
    SolverConfig cfg;
    cfg.max_iters = 20000;
    std::string detail;
    bool ok = true;

    { // chi = p/2: vanishing, sup norms decrease
        const ModelParams P = ModelParams::create(1, 0.4, 2.0, 2.0, 1.0, 1.0);
        const auto g = RadialGrid::uniform(1, 1024, 16.0);
        const SweepReport rep = fair_limit_study(P, s_list, cfg, g);
        std::vector<double> sups;
        bool conv = true;
        for (const auto& r : rep.rows) {
            sups.push_back(r.sup_norm);
            conv = conv && r.converged;
        }
        const bool pass = conv && trend_decreasing(sups, 1);
        ok = ok && pass;
        detail += "sup " + fmt(sups.front()) + "->" + fmt(sups.back()) + "; ";
    }
    { // chi = 2p: concentration, support radii decrease
        const ModelParams P = ModelParams::create(1, 0.4, 2.0, 2.0, 4.0, 1.0);
        const auto g = RadialGrid::uniform(1, 1024, 4.0);
        const SweepReport rep = fair_limit_study(P, s_list, cfg, g);
        std::vector<double> supp;
        bool conv = true;
        for (const auto& r : rep.rows) {
            supp.push_back(r.support_radius);
            conv = conv && r.converged;
        }
        const bool pass = conv && trend_decreasing(supp, 1);
        ok = ok && pass;
        detail += "support " + fmt(supp.front()) + "->" + fmt(supp.back()) + "; ";
    }
    { // chi = p: neutral, |F| and D_s decay toward 0
        const ModelParams P = ModelParams::create(1, 0.4, 2.0, 2.0, 2.0, 1.0);
        const auto g = RadialGrid::uniform(1, 1024, 4.0);
        const SweepReport rep = fair_limit_study(P, s_list, cfg, g);
        std::vector<double> Fs, Ds;
        bool conv = true;
        for (const auto& r : rep.rows) {
            Fs.push_back(std::abs(r.energy));
            Ds.push_back(r.D_s);
            conv = conv && r.converged;
        }
        const bool pass =
            conv && trend_decreasing(Fs, 1) && trend_decreasing(Ds, 1);
        ok = ok && pass;
        detail += "|F| " + fmt(Fs.front()) + "->" + fmt(Fs.back()) + ", D_s " +
                  fmt(Ds.front()) + "->" + fmt(Ds.back());
    }
    check(11, "m = p' trichotomy (one-violation trend checks)", ok, detail);
}

// --- 12: approximate identity ----------------------------------------------
void criterion_12() {
    const auto g = RadialGrid::uniform(1, 2048, 2.0);
    const RadialDensity h = make_profile(g, ProfileKind::indicator, 1.0, 2.0);
    const double norm_h = lp_norm(h, 2.0);
    std::vector<double> errs;
    for (double s : {0.4, 0.2, 0.1, 0.05})
        errs.push_back(kurokawa_error(h, s, 2.0));
    bool decreasing = true;
    for (std::size_t i = 1; i < errs.size(); ++i)
        if (!(errs[i] < errs[i - 1])) decreasing = false;
    const bool ok = decreasing && errs.back() < 0.1 * norm_h;
    std::string path;
    for (double e : errs) path += fmt(e) + " ";
    check(12, "approximate identity (strictly decreasing, final < 0.1 norm)", ok,
          "errors " + path + "vs bound " + fmt(0.1 * norm_h));
}

} // namespace

int main() {
    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4();
    criterion_5();
    criterion_6();
    criterion_7();
    criterion_8();
    criterion_9();
    criterion_10();
    criterion_11();
    criterion_12();
    std::printf("%d of 12 criteria passed\n", 12 - failures);
    return failures;
}
