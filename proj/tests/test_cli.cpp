#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace {

struct RunResult {
    int exit_code;
    std::string out;
};

RunResult run(const std::string& args) {
    std::string outfile = "cli_test_stdout.tmp";
    std::string cmd = std::string(QINDEX_BIN) + " " + args + " > " + outfile + " 2>/dev/null";
    int rc = std::system(cmd.c_str());
    std::ifstream in(outfile);
    std::stringstream ss;
    ss << in.rdbuf();
    std::remove(outfile.c_str());
    return {WEXITSTATUS(rc), ss.str()};
}

std::string fixture(const std::string& name) {
    return std::string(QINDEX_FIXTURE_DIR) + "/" + name + ".json";
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("star command: Moyal commutator on the flat chart") {
    std::string a = "'{\"kind\":\"explicit\",\"entries\":[{\"terms\":[{\"key\":[1,0],\"re\":\"1\"}]}]}'";
    std::string b = "'{\"kind\":\"explicit\",\"entries\":[{\"terms\":[{\"key\":[0,1],\"re\":\"1\"}]}]}'";
    RunResult r = run("star --scenario " + fixture("flat-r2") + " --a " + a + " --b " + b);
    CHECK(r.exit_code == 0);
    // omega^{12} = -2 for the fixture normalization omega = dx1 dx2
    CHECK(r.out.find("[a, b]_* = [(-2)] h^1") != std::string::npos);

    RunResult unit = run("star --scenario " + fixture("flat-r2") +
                         " --a '{\"kind\":\"identity\"}' --b " + b);
    CHECK(unit.exit_code == 0);
    CHECK(unit.out.find("a * b = [(1)*x2]") != std::string::npos);
}

TEST_CASE("star command: malformed input gives a diagnostic and exit 2") {
    RunResult r = run("star --scenario " + fixture("flat-r2") + " --a 'nonsense' --b '{}'");
    CHECK(r.exit_code == 2);
}

TEST_CASE("connection command reports the solved connection") {
    RunResult r = run("connection --scenario " + fixture("torus-trig-gamma"));
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("nonzero") != std::string::npos);
    CHECK(r.out.find("C^W = -omega + Omega_h: pass") != std::string::npos);
    CHECK(r.out.find("delta^{-1} r = 0: pass") != std::string::npos);

    RunResult flat = run("connection --scenario " + fixture("flat-r2"));
    CHECK(flat.exit_code == 0);
    CHECK(flat.out.find("r: 0 terms, zero") != std::string::npos);
}

TEST_CASE("connection command rejects invalid geometry at load") {
    std::ofstream bad("cli_bad_scenario.json");
    bad << R"({"schema":1,"name":"bad","n":1,"ring":{"variant":"fourier","bound":8},
  "omega":{"standard_scale":"1/2"},
  "christoffel":{"kind":"explicit","entries":[{"k":1,"i":1,"j":2,"f":{"terms":[{"const":"1"}]}}]},
  "bundle":{"N":1,"gamma_V":{"kind":"zero"}},
  "q":{"kind":"identity"},
  "truncation":{"k_min":-2,"k_max":3,"D":4},"orders":[-1]})";
    bad.close();
    RunResult r = run("connection --scenario cli_bad_scenario.json");
    std::remove("cli_bad_scenario.json");
    CHECK(r.exit_code == 2);  // the symmetric completion is fine; compatibility fails
}

TEST_CASE("trace-density command") {
    RunResult r = run("trace-density --scenario " + fixture("torus-constant") +
                      " --a '{\"kind\":\"identity\"}'");
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("average(psi(a)) = (1)*h^-1 + (-3/7)") != std::string::npos);

    // requested orders beyond the determined window are reported, not invented
    RunResult far = run("trace-density --scenario " + fixture("torus-constant") +
                        " --hbar-order 9 --a '{\"kind\":\"identity\"}'");
    CHECK(far.exit_code == 1);
    CHECK(far.out.find("undetermined at order") != std::string::npos);
}

TEST_CASE("index-check command and report determinism") {
    RunResult r1 = run("index-check --scenario " + fixture("torus-constant") +
                       " --output cli_rep1.json");
    RunResult r2 = run("index-check --scenario " + fixture("torus-constant") +
                       " --output cli_rep2.json");
    CHECK(r1.exit_code == 0);
    CHECK(r1.out.find("order h^-1: pass") != std::string::npos);
    CHECK(r1.out.find("order h^0: pass") != std::string::npos);
    CHECK(r1.out.find("order h^1: pass") != std::string::npos);
    std::string a = slurp("cli_rep1.json"), b = slurp("cli_rep2.json");
    std::remove("cli_rep1.json");
    std::remove("cli_rep2.json");
    REQUIRE_FALSE(a.empty());
    CHECK(a == b);  // byte-identical machine-readable reports
    CHECK(a.find("\"pass\": true") != std::string::npos);
    CHECK(a.find("\"lhs_average\"") != std::string::npos);
}

TEST_CASE("selftest: clean run, mutation hook, missing fixtures") {
    RunResult ok = run("selftest --fixtures " + std::string(QINDEX_FIXTURE_DIR));
    CHECK(ok.exit_code == 0);
    CHECK(ok.out.find("selftest: all checks passed") != std::string::npos);

    RunResult mut = run("selftest --fixtures " + std::string(QINDEX_FIXTURE_DIR) +
                        " --corrupt-epsilon");
    CHECK(mut.exit_code == 1);
    CHECK(mut.out.find("FAIL  b(tau_2) = 0") != std::string::npos);

    RunResult missing = run("selftest --fixtures /nonexistent-dir");
    CHECK(missing.exit_code == 2);
}

TEST_CASE("rendering golden: canonical term order is stable") {
    std::string a =
        "'{\"kind\":\"explicit\",\"entries\":[{\"terms\":[{\"key\":[1,0],\"re\":\"1\"},{\"key\":[0,2],\"re\":\"1/3\",\"im\":\"-2\"}]}]}'";
    RunResult r = run("star --scenario " + fixture("flat-r2") + " --a " + a +
                      " --b '{\"kind\":\"identity\"}'");
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("a * b = [(1/3-2i)*x2^2 + (1)*x1]") != std::string::npos);
}
