#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "errors.hpp"
#include "evolve.hpp"
#include "grid.hpp"
#include "params.hpp"
#include "steady.hpp"

namespace rieszflow {

/// Fully resolved run configuration. Parsing fills defaults, rejects unknown
/// keys, and reports every violated constraint, not just the first.
struct RunConfig {
    ModelParams model;
    bool m_critical = false; // m was given as the string "critical"
    std::size_t n = 1024;
    double R_dom = 2.0;
    SolverConfig solver;
    EvolveConfig evolve;
    std::vector<double> s_list;
    std::uint64_t seed = 0;
    double perturb = 0.0; // multiplicative noise amplitude for evolve fixtures

    std::shared_ptr<const RadialGrid> make_grid() const {
        return RadialGrid::uniform(model.N, n, R_dom);
    }

    nlohmann::json resolved() const {
        nlohmann::json j;
        j["model"] = {{"N", model.N},   {"s", model.s},     {"p", model.p},
                      {"m", model.m},   {"chi", model.chi}, {"M", model.M}};
        if (m_critical) j["model"]["m"] = "critical";
        j["grid"] = {{"n", n}, {"R_dom", R_dom}};
        j["solver"] = {{"tau", solver.tau},
                       {"max_iters", solver.max_iters},
                       {"fp_tol", solver.fp_tol},
                       {"bisect_tol", solver.bisect_tol},
                       {"init", solver.init == ProfileKind::indicator
                                    ? "indicator"
                                    : (solver.init == ProfileKind::gaussian
                                           ? "gaussian"
                                           : "bump")},
                       {"init_radius_factor", solver.init_radius_factor}};
        j["evolve"] = {{"cfl", evolve.cfl},
                       {"t_end", evolve.t_end},
                       {"record_every", evolve.record_every},
                       {"steady_tol", evolve.steady_tol},
                       {"blowup_factor", evolve.blowup_factor}};
        if (!s_list.empty()) j["s_list"] = s_list;
        j["seed"] = seed;
        j["perturb"] = perturb;
        return j;
    }
};

namespace detail {

inline void reject_unknown(const nlohmann::json& obj, const char* block,
                           std::initializer_list<const char*> known,
                           std::vector<std::string>& errs) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool found = false;
        for (const char* k : known)
            if (it.key() == k) { found = true; break; }
        if (!found)
            errs.push_back(std::string("unknown key '") + it.key() + "' in " +
                           block);
    }
}

template <class T>
T get_or(const nlohmann::json& obj, const char* key, T fallback,
         std::vector<std::string>& errs) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        errs.push_back(std::string("key '") + key + "' has the wrong type");
        return fallback;
    }
}

} // namespace detail

inline RunConfig parse_config(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& ex) {
        throw config_error(std::string("config syntax error: ") + ex.what());
    }
    std::vector<std::string> errs;
    if (!j.is_object()) {
        throw config_error("config must be a JSON object");
    }
    detail::reject_unknown(
        j, "top level",
        {"model", "grid", "solver", "evolve", "s_list", "seed", "perturb"},
        errs);

    RunConfig cfg;
    int N = 1;
    double s = 0.4, p = 2.0, m = 3.0, chi = 1.0, M = 1.0;
    if (j.contains("model")) {
        const auto& jm = j["model"];
        detail::reject_unknown(jm, "model", {"N", "s", "p", "m", "chi", "M"},
                               errs);
        N = detail::get_or(jm, "N", N, errs);
        s = detail::get_or(jm, "s", s, errs);
        p = detail::get_or(jm, "p", p, errs);
        chi = detail::get_or(jm, "chi", chi, errs);
        M = detail::get_or(jm, "M", M, errs);
        if (jm.contains("m")) {
            if (jm["m"].is_string()) {
                if (jm["m"].get<std::string>() == "critical") {
                    cfg.m_critical = true;
                } else {
                    errs.push_back("model.m must be a number or \"critical\"");
                }
            } else {
                m = detail::get_or(jm, "m", m, errs);
            }
        }
    } else {
        errs.push_back("missing required block 'model'");
    }
    if (cfg.m_critical && p > 1.0 && N >= 1)
        m = p / (p - 1.0) * (1.0 - s / N); // same expression as the derived m_c

    for (const auto& v : ModelParams::violations(N, s, p, m, chi, M))
        errs.push_back(v);

    if (j.contains("grid")) {
        const auto& jg = j["grid"];
        detail::reject_unknown(jg, "grid", {"n", "R_dom"}, errs);
        const auto n_signed =
            detail::get_or<long long>(jg, "n", static_cast<long long>(cfg.n), errs);
        if (n_signed < 2)
            errs.push_back("grid.n must be >= 2");
        else
            cfg.n = static_cast<std::size_t>(n_signed);
        cfg.R_dom = detail::get_or(jg, "R_dom", cfg.R_dom, errs);
        if (!(cfg.R_dom > 0.0)) errs.push_back("grid.R_dom must be positive");
    }
    if (j.contains("solver")) {
        const auto& js = j["solver"];
        detail::reject_unknown(js, "solver",
                               {"tau", "max_iters", "fp_tol", "bisect_tol",
                                "init", "init_radius_factor"},
                               errs);
        cfg.solver.tau = detail::get_or(js, "tau", cfg.solver.tau, errs);
        cfg.solver.max_iters =
            detail::get_or(js, "max_iters", cfg.solver.max_iters, errs);
        cfg.solver.fp_tol = detail::get_or(js, "fp_tol", cfg.solver.fp_tol, errs);
        cfg.solver.bisect_tol =
            detail::get_or(js, "bisect_tol", cfg.solver.bisect_tol, errs);
        cfg.solver.init_radius_factor = detail::get_or(
            js, "init_radius_factor", cfg.solver.init_radius_factor, errs);
        if (js.contains("init")) {
            const std::string kind =
                detail::get_or<std::string>(js, "init", "indicator", errs);
            if (kind == "indicator")
                cfg.solver.init = ProfileKind::indicator;
            else if (kind == "gaussian")
                cfg.solver.init = ProfileKind::gaussian;
            else if (kind == "bump")
                cfg.solver.init = ProfileKind::bump;
            else
                errs.push_back("solver.init must be indicator|gaussian|bump");
        }
        if (!(cfg.solver.tau > 0.0) || !(cfg.solver.tau <= 1.0))
            errs.push_back("solver.tau must lie in (0,1]");
        if (cfg.solver.max_iters < 1) errs.push_back("solver.max_iters must be >= 1");
        if (!(cfg.solver.fp_tol > 0.0)) errs.push_back("solver.fp_tol must be positive");
        if (!(cfg.solver.bisect_tol > 0.0))
            errs.push_back("solver.bisect_tol must be positive");
    }
    if (j.contains("evolve")) {
        const auto& je = j["evolve"];
        detail::reject_unknown(
            je, "evolve",
            {"cfl", "t_end", "record_every", "steady_tol", "blowup_factor"},
            errs);
        cfg.evolve.cfl = detail::get_or(je, "cfl", cfg.evolve.cfl, errs);
        cfg.evolve.t_end = detail::get_or(je, "t_end", cfg.evolve.t_end, errs);
        cfg.evolve.record_every =
            detail::get_or(je, "record_every", cfg.evolve.record_every, errs);
        cfg.evolve.steady_tol =
            detail::get_or(je, "steady_tol", cfg.evolve.steady_tol, errs);
        cfg.evolve.blowup_factor =
            detail::get_or(je, "blowup_factor", cfg.evolve.blowup_factor, errs);
        if (!(cfg.evolve.cfl > 0.0) || !(cfg.evolve.cfl < 1.0))
            errs.push_back("evolve.cfl must lie in (0,1)");
        if (!(cfg.evolve.t_end > 0.0)) errs.push_back("evolve.t_end must be positive");
        if (cfg.evolve.record_every < 1)
            errs.push_back("evolve.record_every must be >= 1");
    }
    if (j.contains("s_list")) {
        try {
            cfg.s_list = j["s_list"].get<std::vector<double>>();
        } catch (const nlohmann::json::exception&) {
            errs.push_back("s_list must be an array of numbers");
        }
        for (std::size_t i = 1; i < cfg.s_list.size(); ++i)
            if (!(cfg.s_list[i] < cfg.s_list[i - 1]))
                errs.push_back("s_list must be strictly decreasing");
        for (double sv : cfg.s_list)
            if (!(sv > 0.0) || !(sv * p < N))
                errs.push_back("every s in s_list must satisfy 0 < s*p < N");
    }
    cfg.seed = detail::get_or<std::uint64_t>(j, "seed", cfg.seed, errs);
    cfg.perturb = detail::get_or(j, "perturb", cfg.perturb, errs);

    if (!errs.empty()) {
        std::string msg = "invalid config:";
        for (const auto& e : errs) msg += "\n  - " + e;
        throw config_error(msg);
    }
    cfg.model = ModelParams::create(N, s, p, m, chi, M);
    return cfg;
}

} // namespace rieszflow
