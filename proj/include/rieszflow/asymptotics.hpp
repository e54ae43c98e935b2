#pragma once

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "energy.hpp"
#include "errors.hpp"
#include "grid.hpp"
#include "params.hpp"
#include "riesz.hpp"
#include "steady.hpp"

namespace rieszflow {

/// The s -> 0 limit minimizer for m > p': the flat profile of height
/// (chi/p)^{1/(m-p')} on the ball of radius R0 = (M/omega_N (p/chi)^{1/(m-p')})^{1/N}.
struct LimitProfile {
    double height = 0.0;
    double radius = 0.0;
    RadialDensity rho;
};

inline LimitProfile limit_profile(const ModelParams& P,
                                  std::shared_ptr<const RadialGrid> grid) {
    if (!(P.m > P.p_conj))
        throw regime_error("limit_profile: the flat minimizer needs m > p'");
    LimitProfile out;
    out.height = std::pow(P.chi / P.p, 1.0 / (P.m - P.p_conj));
    out.radius = std::pow(P.M / P.omega_N / out.height, 1.0 / P.N);
    if (out.radius > grid->R_dom)
        throw truncation_error("limit_profile: R0 exceeds the domain radius");
    out.rho = make_profile(grid, ProfileKind::indicator, out.radius, P.M);
    return out;
}

/// Limit auxiliary functional; equals M exactly at the flat profile and is
/// strictly below M for every non-indicator density.
inline double lambda0(const ModelParams& P, const RadialDensity& rho) {
    const double npp = lp_pow(rho, P.p_conj);
    const double nmm = lp_pow(rho, P.m);
    if (!(npp > 0.0) || !(nmm > 0.0))
        throw domain_error("lambda0: zero density");
    const double d = P.m - P.p_conj;
    return std::pow(npp, (P.m - 1.0) / d) / std::pow(nmm, (P.p_conj - 1.0) / d);
}

struct SweepRow {
    double s = 0.0;
    double L1_err = 0.0;
    double L2_err = 0.0;
    double energy = 0.0;
    double D_s = 0.0;
    double sup_norm = 0.0;
    double support_radius = 0.0;
    bool converged = false;
    std::string status;
};

struct SweepReport {
    std::vector<SweepRow> rows;
    int trend_violations = 0; // adjacent L1-error increases along the sweep
    bool trend_down = false;  // overall first-to-last decrease
};

namespace detail {

inline void check_s_list(const ModelParams& P, const std::vector<double>& s_list) {
    if (s_list.empty()) throw parameter_error("sweep: empty s list");
    for (std::size_t i = 0; i < s_list.size(); ++i) {
        if (!(s_list[i] > 0.0) || !(s_list[i] * P.p < P.N))
            throw parameter_error("sweep: every s must satisfy 0 < s*p < N");
        if (i > 0 && !(s_list[i] < s_list[i - 1]))
            throw parameter_error("sweep: s list must be strictly decreasing");
    }
}

} // namespace detail

/// Minimizer sweep over decreasing s at fixed (N, p, m, chi, M), tracking the
/// L^q distance to the flat limit profile. The grid is fixed across s so the
/// rows are comparable.
inline SweepReport sweep_s(const ModelParams& P,
                           const std::vector<double>& s_list,
                           const SolverConfig& cfg,
                           std::shared_ptr<const RadialGrid> grid,
                           const std::string& cache_dir = "") {
    if (!(P.m > P.p_conj)) throw regime_error("sweep_s: needs m > p'");
    detail::check_s_list(P, s_list);
    const LimitProfile lim = limit_profile(P, grid);
    SweepReport rep;
    for (double s : s_list) {
        SweepRow row;
        row.s = s;
        try {
            const ModelParams Ps = P.with_s(s);
            const RieszOperator op =
                build_operator_cached(grid, 0.5 * s, cache_dir);
            const SteadyReport sr = solve_el(Ps, cfg, op);
            row.L1_err = l1_distance(sr.rho, lim.rho);
            row.L2_err = l2_distance(sr.rho, lim.rho);
            row.energy = sr.energy.free_energy;
            row.D_s = sr.multiplier;
            row.sup_norm = sr.rho.sup();
            row.support_radius = sr.support_radius;
            row.converged = sr.converged;
            row.status = sr.converged ? "ok" : "unconverged";
        } catch (const std::exception& ex) {
            row.status = std::string("failed: ") + ex.what();
        }
        rep.rows.push_back(row);
    }
    for (std::size_t i = 1; i < rep.rows.size(); ++i)
        if (rep.rows[i].converged && rep.rows[i - 1].converged &&
            rep.rows[i].L1_err > rep.rows[i - 1].L1_err * 1.000001)
            ++rep.trend_violations;
    if (rep.rows.size() >= 2 && rep.rows.front().converged &&
        rep.rows.back().converged)
        rep.trend_down = rep.rows.back().L1_err < rep.rows.front().L1_err;
    return rep;
}

/// m = p' sweep: the limit regime degenerates into the chi vs p trichotomy
/// (vanishing for chi < p, concentration for chi > p, neutral decay of |F| and
/// D_s for chi = p). Each per-s run is the constrained critical point of
/// solve_el; the distance columns are not populated (no limit profile exists).
inline SweepReport fair_limit_study(const ModelParams& P,
                                    const std::vector<double>& s_list,
                                    const SolverConfig& cfg,
                                    std::shared_ptr<const RadialGrid> grid,
                                    const std::string& cache_dir = "") {
    if (P.m != P.p_conj)
        throw regime_error("fair_limit_study: requires m = p'");
    detail::check_s_list(P, s_list);
    SweepReport rep;
    for (double s : s_list) {
        SweepRow row;
        row.s = s;
        try {
            const ModelParams Ps = P.with_s(s);
            const RieszOperator op =
                build_operator_cached(grid, 0.5 * s, cache_dir);
            const SteadyReport sr = solve_el(Ps, cfg, op);
            row.energy = sr.energy.free_energy;
            row.D_s = sr.multiplier;
            row.sup_norm = sr.rho.sup();
            row.support_radius = sr.support_radius;
            row.converged = sr.converged;
            row.status = sr.converged ? "critical_point" : "unconverged";
            if (sr.wall_contact) row.status += ",wall_contact";
        } catch (const std::exception& ex) {
            row.status = std::string("failed: ") + ex.what();
        }
        rep.rows.push_back(row);
    }
    return rep;
}

struct GammaRow {
    double s = 0.0;
    double F_s = 0.0;
    double F_0 = 0.0;
    double gap = 0.0; // |F_s - F_0|
};

/// Recovery-sequence probe of the s -> 0 variational limit: the constant
/// sequence rho_s := rho must have F_{s,p}(rho) -> F_0(rho).
inline std::vector<GammaRow> gamma_probe(const ModelParams& P,
                                         const RadialDensity& rho,
                                         const std::vector<double>& s_list,
                                         const std::string& cache_dir = "") {
    if (!(P.m > P.p_conj)) throw regime_error("gamma_probe: needs m > p'");
    detail::check_s_list(P, s_list);
    std::vector<GammaRow> rows;
    const double F0 = free_energy_limit(P, rho);
    for (double s : s_list) {
        const ModelParams Ps = P.with_s(s);
        const RieszOperator op =
            build_operator_cached(rho.grid, 0.5 * s, cache_dir);
        GammaRow row;
        row.s = s;
        row.F_s = free_energy(Ps, op, rho).free_energy;
        row.F_0 = F0;
        row.gap = std::abs(row.F_s - F0);
        rows.push_back(row);
    }
    return rows;
}

inline void write_sweep_csv(const SweepReport& rep, std::ostream& os) {
    os << "s,L1_err,L2_err,energy,D_s,sup_norm,support_radius,status\n";
    os.precision(17);
    for (const auto& r : rep.rows)
        os << r.s << "," << r.L1_err << "," << r.L2_err << "," << r.energy
           << "," << r.D_s << "," << r.sup_norm << "," << r.support_radius
           << "," << r.status << "\n";
}

inline void write_sweep_csv(const SweepReport& rep, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    write_sweep_csv(rep, f);
}

} // namespace rieszflow
