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

namespace rieszflow {

struct EvolveConfig {
    double cfl = 0.4;
    double t_end = 1.0;
    int record_every = 50;
    double steady_tol = 1e-3;    // L1 threshold for "converged to reference"
    double blowup_factor = 1e6;  // sup-norm guard relative to the initial sup

    void validate() const {
        if (!(cfl > 0.0) || !(cfl < 1.0))
            throw parameter_error("EvolveConfig: cfl must lie in (0,1)");
        if (!(t_end > 0.0)) throw parameter_error("EvolveConfig: t_end must be positive");
        if (record_every < 1)
            throw parameter_error("EvolveConfig: record_every must be >= 1");
    }
};

struct TrajectoryRecord {
    std::vector<double> times, masses, energies, sup_norms, dist_ref;
    RadialDensity final_rho;
    double t_final = 0.0;
    long long steps = 0;
    bool converged_to_ref = false;
    bool blowup_suspected = false;
    bool wall_contact = false;
};

/// Edge-centered velocity u_{i+1/2} = -(xi_{i+1} - xi_i)/dr of the continuity
/// form d_t rho = div(rho grad xi), xi = (m/(m-1)) rho^{m-1} - chi K_{s,p}(rho).
/// Entries 0 and n are the boundary edges and are identically 0 (zero flux).
inline std::vector<double> velocity(const ModelParams& P,
                                    const RieszOperator& op_half,
                                    const RadialDensity& rho) {
    const RadialDensity K = nonlinear_potential(P, op_half, rho);
    const std::size_t n = rho.size();
    const double mp = P.m_conj();
    std::vector<double> xi(n);
    for (std::size_t i = 0; i < n; ++i)
        xi[i] = mp * std::pow(rho.v[i], P.m - 1.0) - P.chi * K.v[i];
    std::vector<double> u(n + 1, 0.0);
    const double dr = rho.grid->dr();
    for (std::size_t i = 1; i < n; ++i) u[i] = -(xi[i] - xi[i - 1]) / dr;
    return u;
}

/// Largest stable explicit step for the current state and velocity field.
inline double dt_bound(const ModelParams& P, const RadialDensity& rho,
                       const std::vector<double>& u, double cfl) {
    const double dr = rho.grid->dr();
    double diff = 0.0;
    for (double v : rho.v)
        diff = std::max(diff, P.m * std::pow(v, P.m - 1.0));
    double adv = 0.0;
    for (double x : u) adv = std::max(adv, std::abs(x));
    const double dt_diff = dr * dr / (2.0 * P.N * diff + 1e-300);
    const double dt_adv = (adv > 0.0) ? dr / adv : dt_diff;
    return cfl * std::min(dt_diff, dt_adv);
}

namespace detail {

/// One upwind finite-volume step with a precomputed velocity field. Flux
/// telescoping plus zero boundary fluxes conserve mass exactly.
inline void step_in_place(const ModelParams& P, RadialDensity& rho,
                          const std::vector<double>& u, double dt) {
    const std::size_t n = rho.size();
    const auto& e = rho.grid->edges;
    const double area_c = P.N * rho.grid->omega_N;
    std::vector<double> F(n + 1, 0.0);
    for (std::size_t i = 1; i < n; ++i) {
        const double up = (u[i] > 0.0) ? rho.v[i - 1] : rho.v[i];
        F[i] = u[i] * up * area_c * std::pow(e[i], P.N - 1);
    }
    for (std::size_t i = 0; i < n; ++i) {
        rho.v[i] -= dt / rho.grid->vols[i] * (F[i + 1] - F[i]);
        if (rho.v[i] < 0.0) {
            if (rho.v[i] < -1e-13 * std::max(1.0, rho.sup()))
                throw stability_error("step: negative value, dt above the stable range");
            rho.v[i] = 0.0;
        }
    }
}

} // namespace detail

inline RadialDensity step(const ModelParams& P, const RieszOperator& op_half,
                          const RadialDensity& rho, double dt) {
    const std::vector<double> u = velocity(P, op_half, rho);
    if (dt > dt_bound(P, rho, u, 1.0))
        throw stability_error("step: dt exceeds the stability bound");
    RadialDensity out = rho;
    detail::step_in_place(P, out, u, dt);
    return out;
}

inline TrajectoryRecord run(const ModelParams& P, const RieszOperator& op_half,
                            const RadialDensity& rho0, const EvolveConfig& cfg,
                            const RadialDensity* reference = nullptr) {
    cfg.validate();
    RadialDensity rho = rho0;
    const double sup0 = rho.sup();
    TrajectoryRecord rec;
    double t = 0.0;
    long long k = 0;
    const double mp = P.m_conj();
    const double dr = rho.grid->dr();
    const std::size_t n = rho.size();

    auto record = [&]() {
        rec.times.push_back(t);
        rec.masses.push_back(rho.mass());
        rec.energies.push_back(free_energy(P, op_half, rho).free_energy);
        rec.sup_norms.push_back(rho.sup());
        if (reference) {
            const double d = l1_distance(rho, *reference);
            rec.dist_ref.push_back(d);
            if (d < cfg.steady_tol) rec.converged_to_ref = true;
        }
    };
    record();

    std::vector<double> xi(n), u(n + 1, 0.0);
    while (t < cfg.t_end) {
        // potential refreshed every step
        const RadialDensity K = nonlinear_potential(P, op_half, rho);
        for (std::size_t i = 0; i < n; ++i)
            xi[i] = mp * std::pow(rho.v[i], P.m - 1.0) - P.chi * K.v[i];
        for (std::size_t i = 1; i < n; ++i) u[i] = -(xi[i] - xi[i - 1]) / dr;

        double dt = dt_bound(P, rho, u, cfg.cfl);
        if (t + dt > cfg.t_end) dt = cfg.t_end - t;
        detail::step_in_place(P, rho, u, dt);
        t += dt;
        ++k;

        if (rho.sup() > cfg.blowup_factor * sup0) {
            rec.blowup_suspected = true;
            record();
            break;
        }
        if (k % cfg.record_every == 0) {
            record();
            if (rec.converged_to_ref) break; // within steady_tol of reference
        }
    }
    if (k % cfg.record_every != 0 && !rec.blowup_suspected) record();
    rec.final_rho = rho;
    rec.t_final = t;
    rec.steps = k;
    rec.wall_contact = rho.support_radius() > 0.95 * rho.grid->R_dom;
    return rec;
}

inline void write_trajectory_csv(const TrajectoryRecord& rec, std::ostream& os) {
    os << "t,mass,energy,sup_norm,dist_ref\n";
    os.precision(17);
    for (std::size_t i = 0; i < rec.times.size(); ++i) {
        os << rec.times[i] << "," << rec.masses[i] << "," << rec.energies[i]
           << "," << rec.sup_norms[i] << ",";
        if (i < rec.dist_ref.size()) os << rec.dist_ref[i];
        os << "\n";
    }
}

inline void write_trajectory_csv(const TrajectoryRecord& rec,
                                 const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    write_trajectory_csv(rec, f);
}

} // namespace rieszflow
