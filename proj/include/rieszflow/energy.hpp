#pragma once

#include <cmath>
#include <limits>
#include <string>

#include "errors.hpp"
#include "grid.hpp"
#include "params.hpp"
#include "riesz.hpp"

namespace rieszflow {

/// All scalar functionals of one density in one place.
///
/// interaction   (1/p') ||K_{s/2} * rho||_{p'}^{p'}
/// free_energy   ||rho||_m^m / (m-1) - chi * interaction
/// hls_quotient  ||K_{s/2}*rho||_{p'}^{p'} / (||rho||_1^{p' th0} ||rho||_m^{p'(1-th0)})
/// lambda_value  Lambda(rho), the dilation-invariant combination whose kappa
///               multiple is the energy at the optimal dilation
/// lambda_star   optimal dilation factor (absent when m = m_c)
struct EnergyBreakdown {
    double norm_m_m = 0.0;
    double interaction = 0.0;
    double free_energy = 0.0;
    double hls_quotient = 0.0;
    double lambda_value = 0.0;
    double lambda_star = 0.0;
    bool has_lambda_star = false;
    double kappa = 0.0;
    double conv_pp = 0.0; // ||K_{s/2} * rho||_{p'}^{p'}, reused by callers
};

/// kappa = (chi/p')^{(m-1)/(m-m_c)} (p'/p*)^{(m_c-1)/(m-m_c)} (m_c-m)/(m-1);
/// negative for m > m_c.
inline double kappa_constant(const ModelParams& P) {
    if (P.m == P.m_c) throw regime_error("kappa_constant: undefined at m = m_c");
    const double e1 = (P.m - 1.0) / (P.m - P.m_c);
    const double e2 = (P.m_c - 1.0) / (P.m - P.m_c);
    return std::pow(P.chi / P.p_conj, e1) * std::pow(P.p_conj / P.p_star, e2) *
           (P.m_c - P.m) / (P.m - 1.0);
}

/// Energy of the dilation rho^lambda from the two scalar inputs
/// A = ||rho||_m^m and B = ||K_{s/2}*rho||_{p'}^{p'}: the exact scaling law
/// f(lambda) = lambda^{N(m-1)} A/(m-1) - lambda^{N(m_c-1)} (chi/p') B.
inline double dilation_energy(const ModelParams& P, double A, double B,
                              double lambda) {
    return std::pow(lambda, P.N * (P.m - 1.0)) * A / (P.m - 1.0) -
           std::pow(lambda, P.N * (P.m_c - 1.0)) * (P.chi / P.p_conj) * B;
}

/// Optimal dilation factor lambda_* = (chi/p* B/A)^{1/(N(m-m_c))}.
inline double optimal_dilation(const ModelParams& P, double A, double B) {
    if (P.m == P.m_c)
        throw regime_error("optimal_dilation: every dilation is neutral at m = m_c");
    if (!(A > 0.0) || !(B > 0.0))
        throw domain_error("optimal_dilation: zero density");
    return std::pow(P.chi / P.p_star * B / A, 1.0 / (P.N * (P.m - P.m_c)));
}

inline EnergyBreakdown free_energy(const ModelParams& P,
                                   const RieszOperator& op_half,
                                   const RadialDensity& rho) {
    EnergyBreakdown E;
    E.norm_m_m = lp_pow(rho, P.m);
    E.conv_pp = conv_lp_pow(op_half, rho, P.p_conj);
    E.interaction = E.conv_pp / P.p_conj;
    E.free_energy = E.norm_m_m / (P.m - 1.0) - P.chi * E.interaction;
    const double n1 = rho.mass();
    const double nm = std::pow(E.norm_m_m, 1.0 / P.m);
    if (n1 > 0.0 && nm > 0.0) {
        E.hls_quotient = E.conv_pp / (std::pow(n1, P.p_conj * P.theta0) *
                                      std::pow(nm, P.p_conj * (1.0 - P.theta0)));
        if (P.m != P.m_c) {
            E.lambda_value = std::pow(
                std::pow(E.conv_pp, P.m - 1.0) /
                    std::pow(E.norm_m_m, P.m_c - 1.0),
                1.0 / (P.m - P.m_c));
            E.lambda_star = optimal_dilation(P, E.norm_m_m, E.conv_pp);
            E.has_lambda_star = true;
            E.kappa = kappa_constant(P);
        }
    }
    return E;
}

/// Limit functional F_0(rho) = ||rho||_m^m/(m-1) - (chi/p')||rho||_{p'}^{p'}.
inline double free_energy_limit(const ModelParams& P, const RadialDensity& rho) {
    return lp_pow(rho, P.m) / (P.m - 1.0) -
           (P.chi / P.p_conj) * lp_pow(rho, P.p_conj);
}

/// Optimal dilation for the limit functional, m != p'.
inline double optimal_dilation_limit(const ModelParams& P,
                                     const RadialDensity& rho) {
    if (P.m == P.p_conj)
        throw regime_error("optimal_dilation_limit: undefined at m = p'");
    const double A = lp_pow(rho, P.m);
    const double B = lp_pow(rho, P.p_conj);
    if (!(A > 0.0) || !(B > 0.0))
        throw domain_error("optimal_dilation_limit: zero density");
    return std::pow(P.chi / P.p * B / A, 1.0 / (P.N * (P.m - P.p_conj)));
}

/// Explicit upper bound for the sharp constant of
/// ||K_{s/2} * h||_{p'} <= H_s ||h||_{(p*)'}; limsup_{s->0} H_s <= 1.
inline double hls_upper_bound(const ModelParams& P) {
    const double N = P.N, s = P.s;
    const double c = riesz_constant(P.N, 0.5 * s);
    const double e = (N - s) / N;
    const double q1 = 1.0 - 1.0 / P.p;          // 1 - 1/p
    const double q2 = 1.0 - 1.0 / P.p_star_conj; // 1 - 1/(p*)'
    return c * (N / s) * std::pow(P.omega_N, e) / (P.p * P.p_star_conj) *
           (std::pow(e / q1, e) + std::pow(e / q2, e));
}

/// Constants of ||K_{s/2} * h||_inf <= alpha_s ||h||_q + beta_s ||h||_r,
/// valid for 1 <= q < r <= inf with s q < N < s r.
struct LinfBoundConstants {
    double alpha_s = 0.0;
    double beta_s = 0.0;
};

inline LinfBoundConstants linf_bound_constants(const ModelParams& P, double q,
                                               double r) {
    const double N = P.N, s = P.s;
    if (!(q >= 1.0) || !(q < r))
        throw domain_error("linf_bound_constants: need 1 <= q < r");
    if (!(s * q < N))
        throw domain_error("linf_bound_constants: need s*q < N");
    if (std::isfinite(r) && !(s * r > N))
        throw domain_error("linf_bound_constants: need s*r > N");
    const double c = riesz_constant(P.N, 0.5 * s);
    LinfBoundConstants out;
    if (q == 1.0) {
        out.alpha_s = c;
    } else {
        const double qc = q / (q - 1.0);
        out.alpha_s = c * std::pow(N * P.omega_N / ((N - s) * qc - N), 1.0 / qc);
    }
    const double rc = std::isfinite(r) ? r / (r - 1.0) : 1.0;
    out.beta_s = c * std::pow(N * P.omega_N / (N - (N - s) * rc), 1.0 / rc);
    return out;
}

/// Euler-Lagrange constants of the normalized HLS extremal h:
/// A_s h^{m-1} = (K_{s,p}(h) - C_s)_+ with
/// A_s = (m'/p*) P / ||h||_m^m, C_s = (1 - m'/p*) P / ||h||_1,
/// P = ||K_{s/2} * h||_{p'}^{p'}.
struct ELConstants {
    double A_s = 0.0;
    double C_s = 0.0;
    double D_s = 0.0;
};

inline ELConstants el_constants_extremal(const ModelParams& P,
                                         const RadialDensity& h,
                                         const RieszOperator& op_half) {
    if (!(P.m > P.p_star_conj))
        throw regime_error("el_constants_extremal: need m > (p*)'");
    const double conv_pp = conv_lp_pow(op_half, h, P.p_conj);
    const double frac = P.m_conj() / P.p_star;
    const double nm = lp_pow(h, P.m);
    const double n1 = h.mass();
    if (!(nm > 0.0) || !(n1 > 0.0))
        throw domain_error("el_constants_extremal: zero density");
    ELConstants out;
    out.A_s = frac * conv_pp / nm;
    out.C_s = (1.0 - frac) * conv_pp / n1;
    return out;
}

/// Lagrange multiplier of the constrained minimizer, evaluated both ways:
/// D_s = ((p* - m')/M) ||rho||_m^m and, via the critical-point identity,
/// ((p* - m')/M)(chi/p*) ||K_{s/2}*rho||_{p'}^{p'}. The first is returned;
/// disagreement beyond 1e-3 relative sets the warning flag.
struct MultiplierReport {
    double D_s = 0.0;
    double D_s_alt = 0.0;
    bool identity_warning = false;
};

inline MultiplierReport el_constant_minimizer(const ModelParams& P,
                                              const RadialDensity& rho,
                                              const RieszOperator& op_half) {
    if (!(P.M > 0.0)) throw parameter_error("el_constant_minimizer: M = 0");
    const double coeff = (P.p_star - P.m_conj()) / P.M;
    MultiplierReport out;
    out.D_s = coeff * lp_pow(rho, P.m);
    out.D_s_alt =
        coeff * (P.chi / P.p_star) * conv_lp_pow(op_half, rho, P.p_conj);
    const double scale = std::max(std::abs(out.D_s), std::abs(out.D_s_alt));
    out.identity_warning =
        scale > 0.0 && std::abs(out.D_s - out.D_s_alt) > 1e-3 * scale;
    return out;
}

/// Critical mass M_c = (p* / (chi H*))^{N/(s p')}.
inline double critical_mass(const ModelParams& P, double Hstar) {
    if (!(Hstar > 0.0)) throw parameter_error("critical_mass: H* must be positive");
    return std::pow(P.p_star / (P.chi * Hstar), P.N / (P.s * P.p_conj));
}

/// Fair-competition sandwich at m = m_c:
/// (chi/p') H* (M_c^{p's/N} - M^{p's/N}) ||rho||_{m_c}^{m_c} <= F(rho) <= the
/// same with + in place of -.
struct FairBounds {
    double lower = 0.0;
    double upper = 0.0;
};

inline FairBounds fair_competition_bounds(const ModelParams& P,
                                          const RadialDensity& rho,
                                          double Hstar) {
    if (P.m != P.m_c)
        throw regime_error("fair_competition_bounds: only defined at m = m_c");
    const double Mc = critical_mass(P, Hstar);
    const double e = P.p_conj * P.s / P.N;
    const double nm = lp_pow(rho, P.m_c);
    const double base = (P.chi / P.p_conj) * Hstar * nm;
    FairBounds out;
    out.lower = base * (std::pow(Mc, e) - std::pow(P.M, e));
    out.upper = base * (std::pow(Mc, e) + std::pow(P.M, e));
    return out;
}

enum class Regime { aggregation, fair, diffusion };

/// Trichotomy of inf F over mass-M densities: -inf below m_c; at m_c either 0
/// (M <= M_c) or -inf; a finite negative value above m_c (computed by the
/// solver, only its sign is contracted here).
struct RegimeReport {
    Regime regime = Regime::diffusion;
    double infimum = 0.0;       // meaningful only when finite
    bool infimum_is_minus_inf = false;
    bool infimum_known = false; // false when m > m_c (solver's job)
    double critical_mass = 0.0; // populated in the fair regime
};

inline RegimeReport classify_regime(const ModelParams& P, double Hstar = 0.0) {
    RegimeReport rep;
    if (P.m < P.m_c) {
        rep.regime = Regime::aggregation;
        rep.infimum_is_minus_inf = true;
        rep.infimum_known = true;
    } else if (P.m == P.m_c) {
        rep.regime = Regime::fair;
        if (!(Hstar > 0.0))
            throw parameter_error("classify_regime: H* required at m = m_c");
        rep.critical_mass = critical_mass(P, Hstar);
        if (P.M <= rep.critical_mass) {
            rep.infimum = 0.0;
        } else {
            rep.infimum_is_minus_inf = true;
        }
        rep.infimum_known = true;
    } else {
        rep.regime = Regime::diffusion;
        rep.infimum_known = false; // finite and < 0, realized by the solver
    }
    return rep;
}

inline std::string regime_name(Regime r) {
    switch (r) {
    case Regime::aggregation: return "aggregation";
    case Regime::fair: return "fair";
    default: return "diffusion";
    }
}

} // namespace rieszflow
