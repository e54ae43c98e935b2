#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "errors.hpp"

namespace rieszflow {

/// Volume of the unit ball in R^N.
inline double unit_ball_volume(int N) {
    if (N < 1) throw parameter_error("unit_ball_volume: N must be >= 1");
    return std::pow(std::numbers::pi, 0.5 * N) / std::tgamma(0.5 * N + 1.0);
}

/// Physical and analytic parameters of the model plus all derived exponents.
///
/// N    spatial dimension
/// s    fractional order of the attractive kernel
/// p    potential exponent (p' = p/(p-1) enters the interaction energy)
/// m    porous-medium diffusion exponent
/// chi  aggregation sensitivity
/// M    total mass
struct ModelParams {
    int N = 1;
    double s = 0.4;
    double p = 2.0;
    double m = 3.0;
    double chi = 1.0;
    double M = 1.0;

    // derived
    double p_conj = 0.0;      // p' = p/(p-1)
    double p_star = 0.0;      // N p / (N - s p)
    double p_star_conj = 0.0; // p* / (p* - 1)
    double m_c = 0.0;         // p' (1 - s/N)
    double theta0 = 0.0;      // 1 - m'/p*  with m' = m/(m-1)
    double omega_N = 0.0;     // unit ball volume

    /// Collect every violated constraint; empty means valid.
    static std::vector<std::string> violations(int N, double s, double p,
                                               double m, double chi, double M) {
        std::vector<std::string> v;
        if (N < 1) v.push_back("N must be a positive integer");
        if (!(p > 1.0) || !std::isfinite(p)) v.push_back("p must satisfy 1 < p < inf");
        if (!(s > 0.0)) v.push_back("s must be positive");
        if (N >= 1 && p > 1.0 && !(s * p < static_cast<double>(N)))
            v.push_back("s*p must be < N");
        if (!(m > 1.0)) v.push_back("m must be > 1");
        if (!(chi > 0.0)) v.push_back("chi must be positive");
        if (!(M > 0.0)) v.push_back("M must be positive");
        return v;
    }

    static ModelParams create(int N, double s, double p, double m, double chi,
                              double M) {
        auto bad = violations(N, s, p, m, chi, M);
        if (!bad.empty()) {
            std::string msg = "invalid parameters:";
            for (const auto& b : bad) msg += " " + b + ";";
            throw parameter_error(msg);
        }
        ModelParams P;
        P.N = N;
        P.s = s;
        P.p = p;
        P.m = m;
        P.chi = chi;
        P.M = M;
        P.p_conj = p / (p - 1.0);
        P.p_star = N * p / (N - s * p);
        P.p_star_conj = P.p_star / (P.p_star - 1.0);
        P.m_c = P.p_conj * (1.0 - s / N);
        P.theta0 = 1.0 - (m / (m - 1.0)) / P.p_star;
        P.omega_N = unit_ball_volume(N);
        return P;
    }

    /// Same parameters with m replaced by the critical exponent m_c.
    ModelParams at_critical_m() const { return create(N, s, p, m_c, chi, M); }

    /// Same parameters with a different fractional order (exponents recomputed).
    ModelParams with_s(double s_new) const {
        return create(N, s_new, p, m, chi, M);
    }

    double m_conj() const { return m / (m - 1.0); }
};

} // namespace rieszflow
