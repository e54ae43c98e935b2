#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <sys/wait.h>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include <rieszflow/config.hpp>

using namespace rieszflow;
namespace fs = std::filesystem;

TEST_CASE("minimal config fills defaults") {
    const RunConfig cfg = parse_config(R"({"model":{"N":1,"s":0.4,"p":2}})");
    REQUIRE(cfg.n == 1024);
    REQUIRE(cfg.R_dom == 2.0);
    REQUIRE(cfg.model.N == 1);
    REQUIRE(cfg.model.m == 3.0);
    REQUIRE(cfg.solver.tau == 0.5);
    REQUIRE(cfg.seed == 0);
}

TEST_CASE("parse-resolve round trip is lossless") {
    const std::string text = R"({
      "model": {"N": 1, "s": 0.3, "p": 2.5, "m": 2.0, "chi": 1.5, "M": 0.7},
      "grid": {"n": 512, "R_dom": 4.0},
      "solver": {"tau": 0.25, "init": "bump"},
      "evolve": {"t_end": 0.5},
      "s_list": [0.3, 0.1],
      "seed": 42,
      "perturb": 0.05
    })";
    const RunConfig a = parse_config(text);
    const RunConfig b = parse_config(a.resolved().dump());
    REQUIRE(a.resolved() == b.resolved());
    REQUIRE(b.model.p == 2.5);
    REQUIRE(b.solver.init == ProfileKind::bump);
    REQUIRE(b.s_list.size() == 2);
    REQUIRE(b.seed == 42);
}

TEST_CASE("critical m resolves to the exact derived exponent") {
    const RunConfig cfg =
        parse_config(R"({"model":{"N":1,"s":0.4,"p":2,"m":"critical"}})");
    REQUIRE(cfg.m_critical);
    REQUIRE(cfg.model.m == cfg.model.m_c); // bitwise, same expression
    // and the resolved config keeps the symbolic form
    REQUIRE(cfg.resolved()["model"]["m"] == "critical");
}

TEST_CASE("semantic violations name the constraint") {
    try {
        parse_config(R"({"model":{"N":1,"s":0.6,"p":2}})");
        FAIL("expected config_error");
    } catch (const config_error& ex) {
        REQUIRE(std::string(ex.what()).find("s*p") != std::string::npos);
    }
}

TEST_CASE("unknown keys are rejected by name, all at once") {
    try {
        parse_config(
            R"({"model":{"N":1,"s":0.4,"p":2,"chii":3},"grid":{"n":1}})");
        FAIL("expected config_error");
    } catch (const config_error& ex) {
        const std::string msg = ex.what();
        REQUIRE(msg.find("chii") != std::string::npos);
        REQUIRE(msg.find("grid.n") != std::string::npos); // both reported
    }
}

TEST_CASE("syntax errors carry the parser position") {
    REQUIRE_THROWS_AS(parse_config("{oops"), config_error);
}

TEST_CASE("s_list constraints") {
    REQUIRE_THROWS_AS(
        parse_config(R"({"model":{"N":1,"s":0.4,"p":2},"s_list":[0.1,0.2]})"),
        config_error);
    REQUIRE_THROWS_AS(
        parse_config(R"({"model":{"N":1,"s":0.4,"p":2},"s_list":[0.9]})"),
        config_error);
}

// Binary-level checks run only when ctest provides the executable path.
TEST_CASE("cli end to end: steady run and config rejection") {
    const char* bin = std::getenv("RIESZFLOW_BIN");
    if (!bin) {
        SUCCEED("RIESZFLOW_BIN not set; skipping binary checks");
        return;
    }
    const fs::path dir =
        fs::temp_directory_path() / "rieszflow_cli_test";
    fs::create_directories(dir);
    const fs::path cfg_path = dir / "steady.json";
    {
        std::ofstream f(cfg_path);
        f << R"({"model":{"N":1,"s":0.4,"p":2,"m":3,"chi":1,"M":1},
                 "grid":{"n":192,"R_dom":2.0}})";
    }
    const std::string base = std::string("\"") + bin + "\"";
    int rc = std::system((base + " steady --config " + cfg_path.string() +
                          " --out " + (dir / "out").string() + " >/dev/null")
                             .c_str());
    REQUIRE(WEXITSTATUS(rc) == 0);
    std::ifstream rep(dir / "out" / "steady.json");
    REQUIRE(rep.good());
    nlohmann::json j;
    rep >> j;
    REQUIRE(j["steady"]["converged"] == true);
    REQUIRE(j["steady"]["el_residual"].get<double>() < 1e-6);
    REQUIRE(j.contains("operator_hash"));
    REQUIRE(j["config"]["model"]["N"] == 1);

    // invalid config: exit code 2
    const fs::path bad = dir / "bad.json";
    {
        std::ofstream f(bad);
        f << R"({"model":{"N":1,"s":0.6,"p":2}})";
    }
    rc = std::system((base + " steady --config " + bad.string() +
                      " --out " + (dir / "out2").string() + " 2>/dev/null")
                         .c_str());
    REQUIRE(WEXITSTATUS(rc) == 2);
    fs::remove_all(dir);
}

TEST_CASE("cli reports are deterministic") {
    const char* bin = std::getenv("RIESZFLOW_BIN");
    if (!bin) {
        SUCCEED("RIESZFLOW_BIN not set; skipping binary checks");
        return;
    }
    const fs::path dir = fs::temp_directory_path() / "rieszflow_cli_det";
    fs::create_directories(dir);
    const fs::path cfg_path = dir / "energy.json";
    {
        std::ofstream f(cfg_path);
        f << R"({"model":{"N":1,"s":0.4,"p":2,"m":3,"chi":1,"M":1},
                 "grid":{"n":128,"R_dom":2.0},"seed":5})";
    }
    auto run_once = [&](const std::string& out) {
        const int rc = std::system((std::string("\"") + bin +
                                    "\" energy --config " + cfg_path.string() +
                                    " --out " + out + " >/dev/null")
                                       .c_str());
        REQUIRE(WEXITSTATUS(rc) == 0);
        std::ifstream f(out + "/energy.json");
        std::stringstream ss;
        ss << f.rdbuf();
        return ss.str();
    };
    const std::string r1 = run_once((dir / "a").string());
    const std::string r2 = run_once((dir / "b").string());
    REQUIRE(r1 == r2);
    REQUIRE(!r1.empty());
    fs::remove_all(dir);
}
