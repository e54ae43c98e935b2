#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "energy.hpp"
#include "errors.hpp"
#include "grid.hpp"
#include "params.hpp"
#include "riesz.hpp"

namespace rieszflow {

struct SolverConfig {
    double tau = 0.5;        // relaxation of the damped fixed point
    int max_iters = 5000;
    double fp_tol = 1e-7;    // sup-norm tolerance on the EL residual
    double bisect_tol = 1e-12; // relative mass tolerance of the multiplier
    ProfileKind init = ProfileKind::indicator;
    double init_radius_factor = 0.8; // times (M/omega_N)^{1/N}

    void validate() const {
        if (!(tau > 0.0) || !(tau <= 1.0))
            throw parameter_error("SolverConfig: tau must lie in (0,1]");
        if (max_iters < 1) throw parameter_error("SolverConfig: max_iters < 1");
        if (!(fp_tol > 0.0) || !(bisect_tol > 0.0))
            throw parameter_error("SolverConfig: tolerances must be positive");
    }
};

struct SteadyReport {
    RadialDensity rho;
    double el_residual = 0.0;
    double multiplier = 0.0;   // D for solve_el, C_s for hls_extremal
    double A_s = 0.0;          // populated by hls_extremal
    int iterations = 0;
    EnergyBreakdown energy;
    double identity_defect = 0.0;
    double support_radius = 0.0;
    bool monotone = false;
    bool converged = false;
    bool saddle_wrt_dilations = false;
    bool wall_contact = false; // support within 5% of the domain edge
    std::string message;
};

namespace detail {

inline void clamp_small(RadialDensity& rho) {
    const double floor_v = 1e-14 * std::max(1.0, rho.sup());
    for (double& x : rho.v)
        if (x < floor_v) x = 0.0;
}

/// mass of G(K, D) = ((m-1)/m (chi K - D)_+)^{1/(m-1)} without materializing it
inline double g_mass(const ModelParams& P, const RadialDensity& K, double D) {
    const double coef = (P.m - 1.0) / P.m;
    const double e = 1.0 / (P.m - 1.0);
    double acc = 0.0;
    for (std::size_t i = 0; i < K.size(); ++i) {
        const double t = P.chi * K.v[i] - D;
        if (t > 0.0) acc += std::pow(coef * t, e) * K.grid->vols[i];
    }
    return acc;
}

inline RadialDensity g_profile(const ModelParams& P, const RadialDensity& K,
                               double D) {
    const double coef = (P.m - 1.0) / P.m;
    const double e = 1.0 / (P.m - 1.0);
    RadialDensity out(K.grid);
    for (std::size_t i = 0; i < K.size(); ++i) {
        const double t = P.chi * K.v[i] - D;
        out.v[i] = (t > 0.0) ? std::pow(coef * t, e) : 0.0;
    }
    return out;
}

/// Multiplier D with mass(G(K, D)) = M. mass is strictly decreasing in D on
/// [0, chi max K]; an unreachable M at D = 0 is a configuration problem.
inline double bisect_multiplier(const ModelParams& P, const RadialDensity& K,
                                double tol_rel) {
    double lo = 0.0, hi = P.chi * K.sup();
    const double m_lo = g_mass(P, K, lo);
    if (m_lo < P.M * (1.0 - 1e-9))
        throw configuration_error(
            "multiplier search: even D = 0 yields mass " + std::to_string(m_lo) +
            " < M = " + std::to_string(P.M) +
            " (domain too small or aggregation too weak on this grid)");
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double mm = g_mass(P, K, mid);
        if (mm > P.M)
            lo = mid;
        else
            hi = mid;
        if (hi - lo < 1e-17 * std::max(1.0, hi)) break;
        if (std::abs(mm - P.M) < 0.01 * tol_rel * P.M && it > 40) break;
    }
    return 0.5 * (lo + hi);
}

} // namespace detail

inline RadialDensity default_init(const ModelParams& P,
                                  std::shared_ptr<const RadialGrid> grid,
                                  const SolverConfig& cfg) {
    const double R0 =
        std::pow(P.M / P.omega_N, 1.0 / P.N) * cfg.init_radius_factor;
    const double radius = std::min(R0, 0.5 * grid->R_dom);
    return make_profile(grid, cfg.init, radius, P.M);
}

inline SteadyReport hls_extremal(const ModelParams& P, const SolverConfig& cfg,
                                 const RieszOperator& op_half,
                                 const RadialDensity* init);

/// Damped fixed point for the Euler-Lagrange equation
///   (m/(m-1)) rho^{m-1} = (chi K_{s,p}(rho) - D)_+ , mass(rho) = M,
/// with D re-solved by bisection every step. Convergence is declared on the
/// sup-norm EL residual, not on iterate distance.
///
/// Below the critical exponent the critical point is a dilation saddle and
/// the damped mass-constrained iteration slides down the unstable dilation
/// mode into a grid-scale spike. That regime goes through the
/// dilation-invariant interaction quotient instead: its extremal solves the
/// same EL equation, and an exact scalar-plus-grid rescaling matches the
/// multiplier structure and the mass. The rescaled state then satisfies the
/// dilation identity ||rho||_m^m = (chi/p*) conv_pp identically.
inline SteadyReport solve_el(const ModelParams& P, const SolverConfig& cfg,
                             const RieszOperator& op_half,
                             const RadialDensity* init = nullptr) {
    cfg.validate();
    if (!(P.m > P.p_star_conj))
        throw regime_error("solve_el: need m > (p*)' for compactly supported states");

    if (P.m < P.m_c) {
        SteadyReport ex = hls_extremal(P, cfg, op_half, init);
        if (!ex.converged) return ex;
        const double Q = ex.energy.conv_pp; // quotient at unit norms
        const double A_s = ex.A_s;          // = (m'/p*) Q
        const double lam = std::pow(
            std::pow(P.M, P.m - P.p_conj) * P.m_conj() / (P.chi * A_s),
            1.0 / (P.N * (P.m - P.m_c)));
        const double mu = P.M * std::pow(lam, -P.N);
        // both sides of the EL equation pick up the same factor
        const double sig = P.m_conj() * std::pow(mu, P.m - 1.0) / A_s;

        SteadyReport rep;
        const auto grid2 = RadialGrid::uniform(
            P.N, ex.rho.grid->n, lam * ex.rho.grid->R_dom);
        rep.rho = RadialDensity(grid2);
        for (std::size_t i = 0; i < rep.rho.size(); ++i)
            rep.rho.v[i] = mu * ex.rho.v[i];
        rep.converged = true;
        rep.iterations = ex.iterations;
        rep.el_residual = sig * ex.el_residual;
        rep.multiplier = sig * ex.multiplier; // D = sig * C_s >= 0
        rep.energy.norm_m_m = std::pow(mu, P.m) * std::pow(lam, P.N);
        rep.energy.conv_pp = std::pow(mu, P.p_conj) *
                             std::pow(lam, P.s * P.p_conj + P.N) * Q;
        rep.energy.interaction = rep.energy.conv_pp / P.p_conj;
        rep.energy.free_energy = rep.energy.norm_m_m / (P.m - 1.0) -
                                 P.chi * rep.energy.interaction;
        const double nm = std::pow(rep.energy.norm_m_m, 1.0 / P.m);
        rep.energy.hls_quotient =
            rep.energy.conv_pp / (std::pow(P.M, P.p_conj * P.theta0) *
                                  std::pow(nm, P.p_conj * (1.0 - P.theta0)));
        rep.energy.lambda_value =
            std::pow(std::pow(rep.energy.conv_pp, P.m - 1.0) /
                         std::pow(rep.energy.norm_m_m, P.m_c - 1.0),
                     1.0 / (P.m - P.m_c));
        rep.energy.lambda_star =
            optimal_dilation(P, rep.energy.norm_m_m, rep.energy.conv_pp);
        rep.energy.has_lambda_star = true;
        rep.energy.kappa = kappa_constant(P);
        rep.identity_defect =
            std::abs(P.chi * rep.energy.conv_pp / P.p_star -
                     rep.energy.norm_m_m) /
            rep.energy.norm_m_m;
        rep.support_radius = rep.rho.support_radius();
        rep.monotone = rep.rho.is_nonincreasing(1e-12 * rep.rho.sup());
        rep.wall_contact = rep.support_radius > 0.95 * grid2->R_dom;
        const double A = rep.energy.norm_m_m, B = rep.energy.conv_pp;
        const double f0 = dilation_energy(P, A, B, 1.0);
        rep.saddle_wrt_dilations = f0 >= dilation_energy(P, A, B, 0.95) &&
                                   f0 >= dilation_energy(P, A, B, 1.05);
        return rep;
    }
    RadialDensity rho = init ? *init : default_init(P, op_half.grid, cfg);
    if (!op_half.grid->same_as(*rho.grid))
        throw grid_mismatch("solve_el: init and operator grids differ");

    double tau = cfg.tau;
    double prev_F = std::numeric_limits<double>::infinity();
    int clean = 0;
    SteadyReport rep;

    for (int iter = 1; iter <= cfg.max_iters; ++iter) {
        const PotentialEval ev = eval_potential(P, op_half, rho);
        const RadialDensity& K = ev.K;

        const double D = detail::bisect_multiplier(P, K, cfg.bisect_tol);

        // residual of the current iterate
        double res = 0.0;
        const double mp = P.m_conj();
        for (std::size_t i = 0; i < rho.size(); ++i) {
            if (rho.v[i] <= 0.0) continue;
            const double lhs = mp * std::pow(rho.v[i], P.m - 1.0);
            const double rhs = std::max(P.chi * K.v[i] - D, 0.0);
            res = std::max(res, std::abs(lhs - rhs));
        }
        rep.el_residual = res;
        rep.multiplier = D;
        rep.iterations = iter;
        if (res < cfg.fp_tol) {
            rep.converged = true;
            break;
        }

        const double F =
            lp_pow(rho, P.m) / (P.m - 1.0) - (P.chi / P.p_conj) * ev.conv_pp;
        if (F > prev_F + 1e-13 * std::abs(prev_F)) {
            tau = std::max(1e-3, 0.5 * tau);
            clean = 0;
        } else if (++clean >= 10) {
            tau = std::min(cfg.tau, 1.2 * tau);
            clean = 0;
        }
        prev_F = F;

        const RadialDensity G = detail::g_profile(P, K, D);
        for (std::size_t i = 0; i < rho.size(); ++i)
            rho.v[i] = (1.0 - tau) * rho.v[i] + tau * G.v[i];
        detail::clamp_small(rho);
    }
    if (!rep.converged)
        rep.message = "solve_el: no convergence within max_iters (residual " +
                      std::to_string(rep.el_residual) + ")";

    rep.rho = rho;
    rep.energy = free_energy(P, op_half, rho);
    rep.identity_defect =
        std::abs(P.chi * rep.energy.conv_pp / P.p_star - rep.energy.norm_m_m) /
        rep.energy.norm_m_m;
    rep.support_radius = rho.support_radius();
    rep.monotone = rho.is_nonincreasing(1e-12 * rho.sup());
    rep.wall_contact = rep.support_radius > 0.95 * rho.grid->R_dom;
    if (P.m < P.m_c) {
        // critical point, not a minimizer: dilations see a local maximum at 1
        const double A = rep.energy.norm_m_m, B = rep.energy.conv_pp;
        const double f0 = dilation_energy(P, A, B, 1.0);
        rep.saddle_wrt_dilations = f0 >= dilation_energy(P, A, B, 0.95) &&
                                   f0 >= dilation_energy(P, A, B, 1.05);
    }
    return rep;
}

/// Exact two-parameter normalization h -> amp * h(mu x) with both resulting
/// norms ||.||_1 = ||.||_m = 1 to near machine precision; mu is found by a
/// secant iteration on the resampled norms so interpolation error does not
/// leak into the normalization.
inline RadialDensity normalize_two_param(const ModelParams& P,
                                         const RadialDensity& h) {
    const double n1 = h.mass();
    const double nm_m = lp_pow(h, P.m);
    if (!(n1 > 0.0) || !(nm_m > 0.0))
        throw domain_error("normalize_two_param: zero density");

    auto resample = [&](double mu) {
        RadialDensity out(h.grid);
        for (std::size_t i = 0; i < out.size(); ++i)
            out.v[i] = h.interpolate(mu * h.grid->nodes[i]);
        return out;
    };
    auto phi = [&](double mu) {
        const RadialDensity g = resample(mu);
        const double g1 = g.mass();
        const double gm = lp_pow(g, P.m);
        if (!(g1 > 0.0) || !(gm > 0.0))
            throw truncation_error("normalize_two_param: resampled profile vanished");
        return std::log(gm) - P.m * std::log(g1);
    };

    // analytic continuum solution as the starting point
    double mu0 = std::pow(std::pow(n1, P.m) / nm_m, 1.0 / (P.N * (P.m - 1.0)));
    double mu1 = mu0 * 1.001;
    double f0 = phi(mu0), f1 = phi(mu1);
    for (int it = 0; it < 60 && std::abs(f1) > 1e-13; ++it) {
        if (f1 == f0) break;
        const double mu2 = mu1 - f1 * (mu1 - mu0) / (f1 - f0);
        mu0 = mu1;
        f0 = f1;
        mu1 = std::max(1e-8, mu2);
        f1 = phi(mu1);
    }
    RadialDensity out = resample(mu1);
    const double amp = 1.0 / out.mass();
    for (double& x : out.v) x *= amp;
    return out;
}

/// Iterative search for the normalized HLS extremal. The damped EL map
///   h -> ((K_{s,p}(h) - C)_+ / A)^{1/(m-1)},  A, C from the Euler identity,
/// commutes exactly with scalar multiplication, so the iteration only pins
/// the mass (an exact scalar operation) and never resamples: interpolation
/// error from in-loop renormalization otherwise puts a grid-level floor
/// (~1e-4 at n = 256) under the residual. The dilation degree of freedom is
/// restored after convergence by rescaling the *grid*, which is exact for a
/// homogeneous kernel: mu h(x/lambda) on the grid with edges lambda e_i
/// satisfies the discrete EL system with A, C, residual and energies
/// multiplied by known powers of mu and lambda. Both unit norms therefore
/// hold to machine precision without touching the converged residual.
inline SteadyReport hls_extremal(const ModelParams& P, const SolverConfig& cfg,
                                 const RieszOperator& op_half,
                                 const RadialDensity* init = nullptr) {
    cfg.validate();
    if (!(P.m > P.p_star_conj))
        throw regime_error("hls_extremal: need m > (p*)'");
    RadialDensity h = init ? *init : default_init(P, op_half.grid, cfg);
    if (!op_half.grid->same_as(*h.grid))
        throw grid_mismatch("hls_extremal: init and operator grids differ");
    h = rearrange(h);
    {
        const double c = 1.0 / h.mass();
        for (double& x : h.v) x *= c;
    }

    double tau = cfg.tau;
    double Q_prev = -std::numeric_limits<double>::infinity();
    RadialDensity h_prev = h;
    int reverts = 0, clean = 0;
    SteadyReport rep;
    const double frac = P.m_conj() / P.p_star;
    double conv_fp = 0.0; // conv_pp of the final (pre-rescaling) iterate

    for (int iter = 1; iter <= cfg.max_iters; ++iter) {
        const PotentialEval ev = eval_potential(P, op_half, h);
        const double nm_m = lp_pow(h, P.m);
        const double nm = std::pow(nm_m, 1.0 / P.m);
        const double n1 = h.mass();
        // scale- and dilation-invariant quotient, monitored for increase
        const double Q = ev.conv_pp / (std::pow(n1, P.p_conj * P.theta0) *
                                       std::pow(nm, P.p_conj * (1.0 - P.theta0)));
        if (Q < Q_prev - 1e-10 * std::max(1.0, std::abs(Q_prev))) {
            h = h_prev;
            tau = std::max(1e-3, 0.5 * tau);
            clean = 0;
            if (++reverts > 25) {
                rep.message =
                    "hls_extremal: quotient kept decreasing after 25 reverts";
                rep.iterations = iter;
                break;
            }
            continue;
        }
        reverts = 0;
        if (++clean >= 10) {
            tau = std::min(cfg.tau, 1.2 * tau);
            clean = 0;
        }
        h_prev = h;
        Q_prev = std::max(Q_prev, Q);
        conv_fp = ev.conv_pp;

        const RadialDensity& K = ev.K;
        const double A = frac * ev.conv_pp / nm_m;
        const double C = (1.0 - frac) * ev.conv_pp / n1;

        double res = 0.0;
        for (std::size_t i = 0; i < h.size(); ++i) {
            const double lhs = A * std::pow(h.v[i], P.m - 1.0);
            const double rhs = std::max(K.v[i] - C, 0.0);
            res = std::max(res, std::abs(lhs - rhs));
        }
        rep.el_residual = res;
        rep.multiplier = C;
        rep.A_s = A;
        rep.iterations = iter;
        if (res < cfg.fp_tol) {
            rep.converged = true;
            break;
        }

        RadialDensity g(h.grid);
        const double e = 1.0 / (P.m - 1.0);
        for (std::size_t i = 0; i < h.size(); ++i) {
            const double t = K.v[i] - C;
            g.v[i] = (t > 0.0) ? std::pow(t / A, e) : 0.0;
        }
        for (std::size_t i = 0; i < h.size(); ++i)
            g.v[i] = (1.0 - tau) * h.v[i] + tau * g.v[i];
        detail::clamp_small(g);
        h = rearrange(g);
        const double c = 1.0 / h.mass();
        for (double& x : h.v) x *= c;
    }
    if (!rep.converged && rep.message.empty())
        rep.message = "hls_extremal: no convergence within max_iters (residual " +
                      std::to_string(rep.el_residual) + ")";

    // exact two-parameter normalization: mu h(x/lambda) with
    //   mu lambda^N n1 = 1  and  mu^m lambda^N nm_m = 1.
    const double n1 = h.mass();
    const double nm_m = lp_pow(h, P.m);
    if (!(n1 > 0.0) || !(nm_m > 0.0))
        throw domain_error("hls_extremal: iteration collapsed to zero");
    const double mu = std::pow(n1 / nm_m, 1.0 / (P.m - 1.0));
    const double lam = std::pow(1.0 / (mu * n1), 1.0 / P.N);

    const auto grid2 =
        RadialGrid::uniform(P.N, h.grid->n, lam * h.grid->R_dom);
    RadialDensity out(grid2);
    for (std::size_t i = 0; i < out.size(); ++i) out.v[i] = mu * h.v[i];

    // covariance factors: the potential K scales by mu^{p'-1} lambda^{s p'},
    // conv_pp by mu^{p'} lambda^{s p' + N}
    const double sig = std::pow(mu, P.p_conj - 1.0) *
                       std::pow(lam, P.s * P.p_conj);
    const double conv_pp = conv_fp * sig * mu * std::pow(lam, P.N);
    rep.el_residual *= sig;
    rep.multiplier = (1.0 - frac) * conv_pp;
    rep.A_s = frac * conv_pp;

    rep.rho = out;
    rep.energy.norm_m_m = 1.0;
    rep.energy.conv_pp = conv_pp;
    rep.energy.interaction = conv_pp / P.p_conj;
    rep.energy.free_energy = 1.0 / (P.m - 1.0) - P.chi * rep.energy.interaction;
    rep.energy.hls_quotient = conv_pp; // unit norms
    if (P.m != P.m_c) {
        rep.energy.lambda_value =
            std::pow(conv_pp, (P.m - 1.0) / (P.m - P.m_c));
        rep.energy.lambda_star = optimal_dilation(P, 1.0, conv_pp);
        rep.energy.has_lambda_star = true;
        rep.energy.kappa = kappa_constant(P);
    }
    rep.support_radius = out.support_radius();
    rep.monotone = out.is_nonincreasing(1e-12 * out.sup());
    rep.wall_contact = rep.support_radius > 0.95 * grid2->R_dom;
    return rep;
}

/// Sharp-constant estimate H*_{m,s} = ||K_{s/2} * h||_{p'}^{p'} at the
/// normalized extremal.
inline double estimate_Hstar(const ModelParams& P, const SolverConfig& cfg,
                             const RieszOperator& op_half,
                             const RadialDensity* init = nullptr) {
    const SteadyReport rep = hls_extremal(P, cfg, op_half, init);
    if (!rep.converged) throw configuration_error(rep.message);
    return rep.energy.conv_pp;
}

/// Critical-mass estimate at m = m_c from an H* estimate.
inline double estimate_Mc(const ModelParams& P, double Hstar) {
    if (P.m != P.m_c) throw regime_error("estimate_Mc: only defined at m = m_c");
    return critical_mass(P, Hstar);
}

} // namespace rieszflow
